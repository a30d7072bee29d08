//! Coset-product representation of a discrete Gaussian.
//!
//! If `s·B⁻¹` is an integer matrix then `sZⁿ ⊆ Λ`, and `Λ` is a finite union of
//! cosets `r + sZⁿ`. On each coset the weight `exp(−‖x‖²/(2σ₀²))` factors over
//! coordinates, so the distribution is a mixture of products of 1-D discrete
//! Gaussians over shifted copies of `sZ`. Each 1-D factor is truncated to
//! `[−R, R]` with a certified relative tail.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::LN_2;

use rand::Rng;

use crate::enumerate::CompensatedSum;
use crate::error::{LatticeError, Result};
use crate::lattice::{Lattice, LatticePoint, Shift};

use super::{lex_min, MapDecision, MAP_TIE_REL};

pub(crate) const MAX_COSETS: usize = 65_536;
const MAX_MULTIPLIER: u32 = 64;
const KEY_SCALE: f64 = 1e9;
const MAX_TIE_COMBINATIONS: usize = 1 << 16;

/// 1-D discrete Gaussian over `offset + sZ`, restricted to `[−R, R]`.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    offset: f64,
    first_step: i64,
    values: Vec<f64>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    log_mass: f64,
    log_rel_tail: f64,
    second_moment: f64,
    entropy: f64,
    max_sq: f64,
}

impl Table {
    fn new(offset: f64, s: f64, sigma0: f64, radius: f64) -> Table {
        let lo = ((-radius - offset) / s).ceil() as i64;
        let hi = ((radius - offset) / s).floor() as i64;
        let values: Vec<f64> = (lo..=hi).map(|j| offset + s * j as f64).collect();
        let expo: Vec<f64> = values
            .iter()
            .map(|v| -v * v / (2.0 * sigma0 * sigma0))
            .collect();
        let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = expo.iter().map(|e| (e - top).exp()).collect();
        let mut total = CompensatedSum::default();
        weights.iter().for_each(|w| total.add(*w));
        let total = total.value();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= last);
        let log_mass = top + total.ln();
        let log_tail = LN_2
            - radius * radius / (2.0 * sigma0 * sigma0)
            - (-(-radius * s / (sigma0 * sigma0)).exp()).ln_1p();
        let mut m2 = CompensatedSum::default();
        let mut h = CompensatedSum::default();
        for (v, p) in values.iter().zip(&probs) {
            m2.add(p * v * v);
            if *p > 0.0 {
                h.add(-p * p.ln());
            }
        }
        let max_sq = values.iter().map(|v| v * v).fold(0.0, f64::max);
        Table {
            offset,
            first_step: lo,
            values,
            probs,
            cdf,
            log_mass,
            log_rel_tail: log_tail - log_mass,
            second_moment: m2.value(),
            entropy: h.value(),
            max_sq,
        }
    }

    fn draw(&self, u: f64) -> usize {
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    fn index_of(&self, v: f64, s: f64) -> Option<usize> {
        let j = ((v - self.offset) / s).round() as i64;
        let idx = j - self.first_step;
        if idx < 0 || idx as usize >= self.values.len() {
            return None;
        }
        let idx = idx as usize;
        ((self.values[idx] - v).abs() <= 1e-7 * s).then_some(idx)
    }
}

#[derive(Debug, Clone)]
struct Coset {
    /// Coefficients of the representative `r ∈ [0, s)ⁿ`.
    coeffs: Vec<i64>,
    tables: Vec<usize>,
    /// `floor((r_i − c_i)/s)` per coordinate.
    floor_shift: Vec<i64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Factored {
    n: usize,
    s: f64,
    /// Row-major `s·B⁻¹`: column `i` holds the coefficients of `s·e_i`.
    step: Vec<i64>,
    basis: Vec<f64>,
    shift: Vec<f64>,
    tables: Vec<Table>,
    cosets: Vec<Coset>,
    coset_probs: Vec<f64>,
    coset_cdf: Vec<f64>,
    coset_index: HashMap<Vec<i64>, usize>,
    pub radius: f64,
    pub deficit: f64,
}

/// Smallest `s = m/e` (with `e` the smallest nonzero entry of `B⁻¹`) making
/// `s·B⁻¹` integral, provided the coset count `sⁿ/V` stays manageable.
pub(crate) fn orthogonal_modulus(lattice: &Lattice) -> Option<(f64, Vec<i64>)> {
    let n = lattice.dim();
    let inv = lattice.inverse();
    let big = inv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let emin = inv
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 1e-9 * big)
        .fold(f64::INFINITY, f64::min);
    if !emin.is_finite() {
        return None;
    }
    for m in 1..=MAX_MULTIPLIER {
        let s = m as f64 / emin;
        let count = s.powi(n as i32) / lattice.volume();
        if count > MAX_COSETS as f64 * (1.0 + 1e-9) {
            return None;
        }
        let mut step = vec![0i64; n * n];
        let mut ok = true;
        for i in 0..n {
            for j in 0..n {
                let v = s * inv[(i, j)];
                let r = v.round();
                if (v - r).abs() > 1e-7 * v.abs().max(1.0) {
                    ok = false;
                }
                step[i * n + j] = r as i64;
            }
        }
        if ok && (count - count.round()).abs() < 1e-6 * count.max(1.0) {
            return Some((s, step));
        }
    }
    None
}

fn quantize(v: f64, s: f64) -> i64 {
    (v / s * KEY_SCALE).round() as i64
}

/// Reduces `x` into `[0, s)` componentwise, returning the multiples removed.
fn reduce(x: &mut [f64], s: f64) -> Vec<i64> {
    x.iter_mut()
        .map(|v| {
            let mut q = (*v / s).floor();
            let mut r = *v - s * q;
            if r >= s * (1.0 - 1e-9) {
                r -= s;
                q += 1.0;
            }
            if r < 0.0 && r > -1e-9 * s {
                r = 0.0;
            }
            *v = r;
            q as i64
        })
        .collect()
}

pub(crate) fn build(
    lattice: &Lattice,
    sigma0: f64,
    shift: &Shift,
    s: f64,
    step: Vec<i64>,
    deficit_target: f64,
) -> Result<Factored> {
    let n = lattice.dim();
    let b = lattice.basis();
    let expected = (s.powi(n as i32) / lattice.volume()).round() as usize;

    // Coset representatives by breadth-first search over basis steps mod sZⁿ.
    let mut reps: Vec<(Vec<i64>, Vec<f64>)> = vec![(vec![0; n], vec![0.0; n])];
    let mut coset_index: HashMap<Vec<i64>, usize> = HashMap::new();
    coset_index.insert(vec![0; n], 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(t) = queue.pop_front() {
        for j in 0..n {
            let (z0, x0) = &reps[t];
            let mut z = z0.clone();
            z[j] += 1;
            let mut x: Vec<f64> = (0..n).map(|i| x0[i] + b[(i, j)]).collect();
            let q = reduce(&mut x, s);
            for (row, zr) in z.iter_mut().enumerate() {
                for (col, qc) in q.iter().enumerate() {
                    *zr -= step[row * n + col] * qc;
                }
            }
            let key: Vec<i64> = x.iter().map(|v| quantize(*v, s)).collect();
            if !coset_index.contains_key(&key) {
                coset_index.insert(key, reps.len());
                queue.push_back(reps.len());
                reps.push((z, x));
                if reps.len() > expected {
                    return Err(LatticeError::BudgetExceeded(format!(
                        "coset search found more than {expected} cosets"
                    )));
                }
            }
        }
    }
    if reps.len() != expected {
        return Err(LatticeError::BudgetExceeded(format!(
            "coset search found {} cosets, expected {expected}",
            reps.len()
        )));
    }

    // One truncation radius for every factor: the nearest value of any table
    // lies within s/2 of zero, which bounds each table's mass from below.
    let target = (deficit_target / n as f64).ln();
    let s2 = sigma0 * sigma0;
    let log_rel_tail = |r: f64| -> f64 {
        LN_2 - r * r / (2.0 * s2) - (-(-r * s / s2).exp()).ln_1p() + s * s / (8.0 * s2)
    };
    let mut radius = (2.0 * std::f64::consts::PI * n as f64).sqrt() * sigma0 / (n as f64).sqrt();
    while log_rel_tail(radius) >= target {
        radius *= 1.02;
    }

    let mut table_index: HashMap<i64, usize> = HashMap::new();
    let mut tables: Vec<Table> = Vec::new();
    let mut cosets = Vec::with_capacity(reps.len());
    for (coeffs, r) in &reps {
        let mut tids = Vec::with_capacity(n);
        let mut floor_shift = Vec::with_capacity(n);
        for i in 0..n {
            let raw = r[i] - shift.c[i];
            let mut f = (raw / s).floor();
            let mut o = raw - s * f;
            if o >= s * (1.0 - 1e-9) {
                o -= s;
                f += 1.0;
            }
            let key = quantize(o, s);
            let tid = *table_index.entry(key).or_insert_with(|| {
                tables.push(Table::new(o, s, sigma0, radius));
                tables.len() - 1
            });
            tids.push(tid);
            floor_shift.push(f as i64);
        }
        cosets.push(Coset {
            coeffs: coeffs.clone(),
            tables: tids,
            floor_shift,
        });
    }

    let log_w: Vec<f64> = cosets
        .iter()
        .map(|c| c.tables.iter().map(|&t| tables[t].log_mass).sum())
        .collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let mut total = CompensatedSum::default();
    w.iter().for_each(|x| total.add(*x));
    let total = total.value();
    let coset_probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let mut acc = 0.0;
    let mut coset_cdf: Vec<f64> = coset_probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    let last = *coset_cdf.last().unwrap();
    coset_cdf.iter_mut().for_each(|c| *c /= last);

    // Mass outside the box relative to the true total:
    // Σ_t P_t (Π(1+δ_i) − 1), with P_t the truncated coset probabilities.
    let mut outside = CompensatedSum::default();
    for (c, p) in cosets.iter().zip(&coset_probs) {
        let sum_log: f64 = c
            .tables
            .iter()
            .map(|&t| tables[t].log_rel_tail.exp().ln_1p())
            .sum();
        outside.add(p * sum_log.exp_m1());
    }
    let outside = outside.value();
    let deficit = outside / (1.0 + outside);

    Ok(Factored {
        n,
        s,
        step,
        basis: (0..n * n).map(|k| b[(k / n, k % n)]).collect(),
        shift: shift.c.clone(),
        tables,
        cosets,
        coset_probs,
        coset_cdf,
        coset_index,
        radius,
        deficit,
    })
}

impl Factored {
    /// Box half-width `R`; the support lies in `[−R, R]ⁿ`.
    pub(crate) fn box_radius(&self) -> f64 {
        self.radius
    }

    pub(crate) fn coset_count(&self) -> usize {
        self.cosets.len()
    }

    pub(crate) fn support_size(&self) -> f64 {
        self.cosets
            .iter()
            .map(|c| {
                c.tables
                    .iter()
                    .map(|&t| self.tables[t].values.len() as f64)
                    .product::<f64>()
            })
            .sum()
    }

    fn coeffs_for(&self, coset: &Coset, steps: impl Fn(usize) -> i64, out: &mut [i64]) {
        let n = self.n;
        out.copy_from_slice(&coset.coeffs);
        for col in 0..n {
            let m = steps(col) - coset.floor_shift[col];
            if m != 0 {
                for (row, o) in out.iter_mut().enumerate() {
                    *o += self.step[row * n + col] * m;
                }
            }
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R, coeffs: &mut [i64], x: &mut [f64]) {
        let u: f64 = rng.random();
        let t = self
            .coset_cdf
            .partition_point(|&c| c <= u)
            .min(self.cosets.len() - 1);
        let coset = &self.cosets[t];
        let mut steps = [0i64; super::MAX_SAMPLER_DIM];
        for i in 0..self.n {
            let table = &self.tables[coset.tables[i]];
            let idx = table.draw(rng.random());
            x[i] = table.values[idx];
            steps[i] = table.first_step + idx as i64;
        }
        self.coeffs_for(coset, |i| steps[i], coeffs);
    }

    /// Probability conditional on the support.
    pub(crate) fn conditional_probability(&self, coeffs: &[i64]) -> f64 {
        let n = self.n;
        let mut lambda: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.basis[i * n + j] * coeffs[j] as f64)
                    .sum()
            })
            .collect();
        let x: Vec<f64> = lambda.iter().zip(&self.shift).map(|(l, c)| l - c).collect();
        reduce(&mut lambda, self.s);
        let key: Vec<i64> = lambda.iter().map(|v| quantize(*v, self.s)).collect();
        let Some(&t) = self.coset_index.get(&key) else {
            return 0.0;
        };
        let mut p = self.coset_probs[t];
        for i in 0..n {
            let table = &self.tables[self.cosets[t].tables[i]];
            match table.index_of(x[i], self.s) {
                Some(idx) => p *= table.probs[idx],
                None => return 0.0,
            }
        }
        p
    }

    pub(crate) fn second_moment(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for (c, p) in self.cosets.iter().zip(&self.coset_probs) {
            acc.add(
                p * c
                    .tables
                    .iter()
                    .map(|&t| self.tables[t].second_moment)
                    .sum::<f64>(),
            );
        }
        acc.value()
    }

    /// Chain rule: `H = H(coset) + Σ_t P_t Σ_i H(factor)`.
    pub(crate) fn entropy(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for (c, &p) in self.cosets.iter().zip(&self.coset_probs) {
            if p > 0.0 {
                acc.add(-p * p.ln());
                acc.add(
                    p * c
                        .tables
                        .iter()
                        .map(|&t| self.tables[t].entropy)
                        .sum::<f64>(),
                );
            }
        }
        acc.value()
    }

    pub(crate) fn max_norm_sq(&self) -> f64 {
        self.cosets
            .iter()
            .map(|c| c.tables.iter().map(|&t| self.tables[t].max_sq).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Every support point with its conditional probability.
    pub(crate) fn for_each_point(&self, mut visit: impl FnMut(LatticePoint, f64)) {
        let n = self.n;
        for (coset, &pc) in self.cosets.iter().zip(&self.coset_probs) {
            let tabs: Vec<&Table> = coset.tables.iter().map(|&t| &self.tables[t]).collect();
            let mut idx = vec![0usize; n];
            loop {
                let mut p = pc;
                for i in 0..n {
                    p *= tabs[i].probs[idx[i]];
                }
                let mut coeffs = vec![0i64; n];
                self.coeffs_for(coset, |i| tabs[i].first_step + idx[i] as i64, &mut coeffs);
                let embedding = (0..n).map(|i| tabs[i].values[idx[i]]).collect();
                visit(LatticePoint { coeffs, embedding }, p);
                let mut k = 0;
                while k < n {
                    idx[k] += 1;
                    if idx[k] < tabs[k].values.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
        }
    }

    /// Bracket on the conditional mass with `‖x‖² > radius²`.
    ///
    /// Squared coordinates are binned on a grid of width `h`. When every
    /// squared value is a multiple of `h` the bracket is exact; otherwise
    /// floor and ceiling binnings bound the mass from both sides.
    pub(crate) fn mass_outside(&self, radius: f64) -> (f64, f64) {
        let r2 = radius * radius;
        let exact_grid = (1..=1024).map(|q| self.s * self.s / q as f64).find(|&h| {
            r2 / h <= 65_536.0
                && self.tables.iter().all(|t| {
                    t.values.iter().all(|v| {
                        let u = v * v / h;
                        (u - u.round()).abs() < 1e-9 * u.max(1.0)
                    })
                })
        });
        let (h, exact) = match exact_grid {
            Some(h) => (h, true),
            None => (r2 / 4096.0, false),
        };
        // Bins 0..=limit; bin `limit` collects everything at or beyond it.
        let limit = (r2 / h).floor() as usize + 1;
        let mut cache: HashMap<(Vec<usize>, bool), f64> = HashMap::new();
        let mut lo = CompensatedSum::default();
        let mut hi = CompensatedSum::default();
        for (coset, &p) in self.cosets.iter().zip(&self.coset_probs) {
            let mut key = coset.tables.clone();
            key.sort_unstable();
            for upper in [false, true] {
                if exact && upper {
                    continue;
                }
                let m = *cache
                    .entry((key.clone(), upper))
                    .or_insert_with(|| self.binned_tail(&key, h, r2, limit, exact, upper));
                if !upper {
                    lo.add(p * m);
                }
                if upper || exact {
                    hi.add(p * m);
                }
            }
        }
        (lo.value(), hi.value())
    }

    fn binned_tail(
        &self,
        tables: &[usize],
        h: f64,
        r2: f64,
        limit: usize,
        exact: bool,
        upper: bool,
    ) -> f64 {
        let mut dist = vec![0.0; limit + 1];
        dist[0] = 1.0;
        for &t in tables {
            let table = &self.tables[t];
            let mut next = vec![0.0; limit + 1];
            for (v, p) in table.values.iter().zip(&table.probs) {
                let u = v * v / h;
                let bin = if exact {
                    u.round()
                } else if upper {
                    u.ceil()
                } else {
                    u.floor()
                } as usize;
                for (k, d) in dist.iter().enumerate() {
                    if *d != 0.0 {
                        next[(k + bin).min(limit)] += d * p;
                    }
                }
            }
            dist = next;
        }
        // A sum whose bins exceed r2/h certainly exceeds r2 for lower (floor)
        // and exact binning; with ceilings any sum above r2 has bin > r2/h.
        let mut acc = CompensatedSum::default();
        for (k, d) in dist.iter().enumerate() {
            if k as f64 * h > r2 {
                acc.add(*d);
            }
        }
        acc.value()
    }

    /// Exhaustive posterior maximization, factor by factor.
    pub(crate) fn map_decode(&self, y: &[f64], sigma0: f64, sigma: f64) -> MapDecision {
        let n = self.n;
        let a = 1.0 / (2.0 * sigma * sigma);
        let b = 1.0 / (2.0 * sigma0 * sigma0);
        let metric = |v: f64, yi: f64| -(yi - v) * (yi - v) * a - v * v * b;
        // Per (table, coordinate): metrics, best value and runner-up.
        let mut cache: HashMap<(usize, usize), (Vec<f64>, usize, f64)> = HashMap::new();
        let mut best_total = f64::NEG_INFINITY;
        let mut best_coset = 0;
        let mut coset_best = Vec::with_capacity(self.cosets.len());
        let mut coset_gap = Vec::with_capacity(self.cosets.len());
        for (ci, coset) in self.cosets.iter().enumerate() {
            let mut total = 0.0;
            let mut gap = f64::INFINITY;
            for (i, &t) in coset.tables.iter().enumerate() {
                let entry = cache.entry((t, i)).or_insert_with(|| {
                    let ms: Vec<f64> = self.tables[t]
                        .values
                        .iter()
                        .map(|&v| metric(v, y[i]))
                        .collect();
                    let mut bi = 0;
                    for (k, m) in ms.iter().enumerate() {
                        if *m > ms[bi] {
                            bi = k;
                        }
                    }
                    let second = ms
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != bi)
                        .map(|(_, m)| *m)
                        .fold(f64::NEG_INFINITY, f64::max);
                    (ms, bi, second)
                });
                let best = entry.0[entry.1];
                total += best;
                gap = gap.min(best - entry.2);
            }
            if total > best_total {
                best_total = total;
                best_coset = ci;
            }
            coset_best.push(total);
            coset_gap.push(gap);
        }
        let mut runner = best_total - coset_gap[best_coset];
        for (ci, &t) in coset_best.iter().enumerate() {
            if ci != best_coset {
                runner = runner.max(t);
            }
        }
        let margin = best_total - runner;
        let tol = MAP_TIE_REL * best_total.abs().max(1.0);

        let point_for = |ci: usize, pick: &dyn Fn(usize) -> usize| -> LatticePoint {
            let coset = &self.cosets[ci];
            let mut coeffs = vec![0i64; n];
            let tabs: Vec<&Table> = coset.tables.iter().map(|&t| &self.tables[t]).collect();
            self.coeffs_for(coset, |i| tabs[i].first_step + pick(i) as i64, &mut coeffs);
            let embedding = (0..n).map(|i| tabs[i].values[pick(i)]).collect();
            LatticePoint { coeffs, embedding }
        };

        if margin > tol {
            let coset = &self.cosets[best_coset];
            let picks: Vec<usize> = (0..n).map(|i| cache[&(coset.tables[i], i)].1).collect();
            return MapDecision {
                point: point_for(best_coset, &|i| picks[i]),
                tie: false,
                margin,
            };
        }

        let mut tied = Vec::new();
        for (ci, coset) in self.cosets.iter().enumerate() {
            if coset_best[ci] < best_total - tol {
                continue;
            }
            let options: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|i| {
                    let (ms, bi, _) = &cache[&(coset.tables[i], i)];
                    ms.iter()
                        .enumerate()
                        .filter(|(_, m)| **m >= ms[*bi] - tol)
                        .map(|(k, m)| (k, *m))
                        .collect()
                })
                .collect();
            let combos: usize = options.iter().map(|o| o.len()).product();
            if combos > MAX_TIE_COMBINATIONS {
                continue;
            }
            let mut idx = vec![0usize; n];
            loop {
                let total: f64 = (0..n).map(|i| options[i][idx[i]].1).sum();
                if total >= best_total - tol {
                    tied.push(point_for(ci, &|i| options[i][idx[i]].0));
                }
                let mut k = 0;
                while k < n {
                    idx[k] += 1;
                    if idx[k] < options[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
        }
        MapDecision {
            point: lex_min(tied.into_iter()),
            tie: true,
            margin,
        }
    }
}
