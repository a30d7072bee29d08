//! Sphere enumeration over a lattice in triangular (QR) coordinates.
//!
//! With `B = QR` and `R` upper triangular with positive diagonal,
//! `‖Bz − y‖² = ‖Rz − Qᵀy‖²`, so integer vectors can be fixed from the last
//! coordinate down to the first. Closest-point search visits candidates in
//! Schnorr–Euchner zigzag order; ball enumeration visits every integer vector
//! inside a radius in a fixed, deterministic order.

use nalgebra::DMatrix;

use crate::error::{LatticeError, Result};

/// Relative slack under which two squared distances count as tied.
pub const TIE_REL: f64 = 1e-12;
const TIE_ABS: f64 = 1e-300;

#[derive(Debug, Clone)]
pub(crate) struct Triangular {
    n: usize,
    /// Row-major upper-triangular factor with positive diagonal.
    r: Vec<f64>,
    /// Row-major `Qᵀ`.
    qt: Vec<f64>,
}

impl Triangular {
    pub(crate) fn from_basis(basis: &DMatrix<f64>) -> Self {
        let n = basis.nrows();
        let qr = basis.clone().qr();
        let mut q = qr.q();
        let mut r = qr.r();
        for i in 0..n {
            if r[(i, i)] < 0.0 {
                for j in 0..n {
                    r[(i, j)] = -r[(i, j)];
                    q[(j, i)] = -q[(j, i)];
                }
            }
        }
        let mut rv = vec![0.0; n * n];
        let mut qt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if j >= i {
                    rv[i * n + j] = r[(i, j)];
                }
                qt[i * n + j] = q[(j, i)];
            }
        }
        Triangular { n, r: rv, qt }
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.r[i * self.n + i]
    }

    /// Smallest Gram–Schmidt length; a lower bound on the minimum distance.
    pub(crate) fn min_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| self.diag(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn rotate(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.qt[i * n + j] * y[j]).sum())
            .collect()
    }

    fn center(&self, t: &[f64], z: &[i64], i: usize) -> f64 {
        let n = self.n;
        let mut s = t[i];
        for j in i + 1..n {
            s -= self.r[i * n + j] * z[j] as f64;
        }
        s / self.r[i * n + i]
    }
}

/// Outcome of a closest-point search: every coefficient vector whose squared
/// distance is within the tie slack of the best one found.
pub(crate) struct ClosestCandidates {
    pub candidates: Vec<Vec<i64>>,
}

struct Closest<'a> {
    tri: &'a Triangular,
    t: Vec<f64>,
    z: Vec<i64>,
    best: f64,
    cands: Vec<(f64, Vec<i64>)>,
    nodes: u64,
    cap: u64,
}

impl Closest<'_> {
    fn bound(&self) -> f64 {
        if self.best.is_finite() {
            self.best * (1.0 + TIE_REL) + TIE_ABS
        } else {
            f64::INFINITY
        }
    }

    fn leaf(&mut self, d: f64) {
        if d < self.best {
            self.best = d;
            let b = self.bound();
            self.cands.retain(|(dd, _)| *dd <= b);
        }
        if d <= self.bound() {
            self.cands.push((d, self.z.clone()));
        }
    }

    fn descend(&mut self, i: usize, dist: f64) -> Result<()> {
        let c = self.tri.center(&self.t, &self.z, i);
        let rii = self.tri.diag(i);
        let mut lo = c.floor() as i64;
        let mut hi = lo + 1;
        let (mut lo_open, mut hi_open) = (true, true);
        loop {
            let from_lo = match (lo_open, hi_open) {
                (true, true) => c - lo as f64 <= hi as f64 - c,
                (true, false) => true,
                (false, true) => false,
                (false, false) => break,
            };
            let zi = if from_lo { lo } else { hi };
            let diff = rii * (zi as f64 - c);
            let d = dist + diff * diff;
            if d > self.bound() {
                if from_lo {
                    lo_open = false;
                } else {
                    hi_open = false;
                }
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.cap {
                return Err(LatticeError::BudgetExceeded(format!(
                    "closest-point search visited more than {} nodes",
                    self.cap
                )));
            }
            self.z[i] = zi;
            if i == 0 {
                self.leaf(d);
            } else {
                self.descend(i - 1, d)?;
            }
            if from_lo {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        Ok(())
    }
}

pub(crate) fn closest_candidates(
    tri: &Triangular,
    y: &[f64],
    cap: u64,
) -> Result<ClosestCandidates> {
    let n = tri.dim();
    let mut s = Closest {
        tri,
        t: tri.rotate(y),
        z: vec![0; n],
        best: f64::INFINITY,
        cands: Vec::new(),
        nodes: 0,
        cap,
    };
    s.descend(n - 1, 0.0)?;
    Ok(ClosestCandidates {
        candidates: s.cands.into_iter().map(|(_, z)| z).collect(),
    })
}

struct Ball<'a, F: FnMut(&[i64], f64)> {
    tri: &'a Triangular,
    t: Vec<f64>,
    z: Vec<i64>,
    radius_sq: f64,
    nodes: u64,
    cap: u64,
    visit: F,
}

impl<F: FnMut(&[i64], f64)> Ball<'_, F> {
    fn descend(&mut self, i: usize, dist: f64) -> Result<()> {
        let c = self.tri.center(&self.t, &self.z, i);
        let rii = self.tri.diag(i);
        let w = ((self.radius_sq - dist).max(0.0)).sqrt() / rii;
        let lo = (c - w).ceil() as i64;
        let hi = (c + w).floor() as i64;
        for zi in lo..=hi {
            let diff = rii * (zi as f64 - c);
            let d = dist + diff * diff;
            if d > self.radius_sq {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.cap {
                return Err(LatticeError::BudgetExceeded(format!(
                    "ball enumeration visited more than {} nodes",
                    self.cap
                )));
            }
            self.z[i] = zi;
            if i == 0 {
                (self.visit)(&self.z, d);
            } else {
                self.descend(i - 1, d)?;
            }
        }
        Ok(())
    }
}

/// Calls `visit(coeffs, ‖Bz − y‖²)` for every `z` with `‖Bz − y‖ ≤ radius`.
/// Returns the number of tree nodes visited.
pub(crate) fn for_each_in_ball<F: FnMut(&[i64], f64)>(
    tri: &Triangular,
    y: &[f64],
    radius: f64,
    cap: u64,
    visit: F,
) -> Result<u64> {
    let n = tri.dim();
    let mut b = Ball {
        tri,
        t: tri.rotate(y),
        z: vec![0; n],
        radius_sq: radius * radius,
        nodes: 0,
        cap,
        visit,
    };
    b.descend(n - 1, 0.0)?;
    Ok(b.nodes)
}

/// Volume of the unit ball in `n` dimensions.
pub(crate) fn unit_ball_volume(n: usize) -> f64 {
    let (mut v, start) = if n % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Certified upper bound on `Σ ‖λ − x‖^power · exp(−πτ‖λ − x‖²)` over lattice
/// points with `‖λ − x‖ > radius`, valid for every center `x`.
///
/// Disjoint balls of radius `packing_radius` around lattice points give
/// `#{λ : ‖λ − x‖ ≤ r} ≤ (1 + r/packing_radius)^n`. Splitting the exterior
/// into shells of width `Δ`, the shell terms have non-increasing consecutive
/// ratios, so once a ratio drops to `q < 1` the remainder is bounded by a
/// geometric series.
pub(crate) fn gaussian_tail_bound(
    n: usize,
    packing_radius: f64,
    tau: f64,
    radius: f64,
    power: i32,
) -> f64 {
    let pt = std::f64::consts::PI * tau;
    let delta = 0.25 / pt.sqrt();
    let log_term = |k: usize| -> f64 {
        let inner = radius + k as f64 * delta;
        let outer = inner + delta;
        n as f64 * (1.0 + outer / packing_radius).ln() + power as f64 * outer.ln()
            - pt * inner * inner
    };
    let mut total = 0.0;
    let mut prev = log_term(0);
    for k in 0..100_000 {
        let next = log_term(k + 1);
        let ratio = (next - prev).exp();
        total += prev.exp();
        if ratio <= 0.5 {
            return total + next.exp() / (1.0 - ratio);
        }
        prev = next;
    }
    f64::INFINITY
}

/// Smallest radius on a 5% growth grid from `start` whose tail bound is
/// below `target`.
pub(crate) fn radius_for_tail(
    n: usize,
    packing_radius: f64,
    tau: f64,
    target: f64,
    power: i32,
    start: f64,
) -> f64 {
    let mut r = start.max(1e-6);
    for _ in 0..5000 {
        if gaussian_tail_bound(n, packing_radius, tau, r, power) < target {
            return r;
        }
        r *= 1.05;
    }
    f64::INFINITY
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        let v8 = std::f64::consts::PI.powi(4) / 24.0;
        assert!((unit_ball_volume(8) - v8).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_dominates_integer_tail() {
        // Z¹ at τ = 1: the exact tail beyond radius 2 is 2Σ_{k≥3} e^{−πk²}.
        let exact: f64 = (3..40)
            .map(|k| 2.0 * (-std::f64::consts::PI * (k * k) as f64).exp())
            .sum();
        let bound = gaussian_tail_bound(1, 0.5, 1.0, 2.0, 0);
        assert!(bound >= exact, "{bound} < {exact}");
        assert!(bound < 1e-4);
    }

    #[test]
    fn ball_enumeration_counts_integer_points() {
        let tri = Triangular::from_basis(&DMatrix::identity(2, 2));
        let mut count = 0;
        for_each_in_ball(&tri, &[0.0, 0.0], 2.0, u64::MAX, |_, _| count += 1).unwrap();
        // points of Z² with x² + y² ≤ 4
        assert_eq!(count, 13);
    }

    #[test]
    fn node_cap_is_enforced() {
        let tri = Triangular::from_basis(&DMatrix::identity(3, 3));
        let err = for_each_in_ball(&tri, &[0.0; 3], 10.0, 100, |_, _| {}).unwrap_err();
        assert!(matches!(err, LatticeError::BudgetExceeded(_)));
    }
}
