//! Theta series, GSNR, flatness factor and the discrete-Gaussian diagnostics
//! built on them.
//!
//! All sums over lattice points are truncated to a ball and carry a certified
//! bound on the omitted tail (see [`crate::enumerate::gaussian_tail_bound`]).
//! Logarithms are natural; entropies are in nats.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumerate::{self, CompensatedSum};
use crate::error::{LatticeError, Result};
use crate::lattice::{Lattice, Shift};
use crate::sampler::{self, SpecOptions};

/// Relative accuracy targeted by truncated lattice sums.
pub const SUM_REL_TOL: f64 = 1e-13;
/// Numerical slack added to the moment, entropy and partition checks.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaValue {
    pub value: f64,
    pub truncation_bound: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub sigma: f64,
    pub gsnr: f64,
    pub theta: ThetaValue,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub entropy_rate: f64,
    pub reference: f64,
    pub epsilon_prime: f64,
}

impl EntropyReport {
    /// `|entropy_rate − reference| ≤ ε′` up to [`CHECK_TOL`].
    pub fn holds(&self) -> bool {
        (self.entropy_rate - self.reference).abs() <= self.epsilon_prime + CHECK_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    /// `f_{σ,c}(Λ)`.
    pub value: f64,
    /// `(1 − ε)/V`.
    pub lo: f64,
    /// `(1 + ε)/V`.
    pub hi: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    /// `E‖x − c‖²`.
    pub second_moment: f64,
    /// `|E‖x − c‖² − nσ₀²|`.
    pub deviation: f64,
    /// `2πε/(1−ε)·σ₀²` with `ε = ε_Λ(σ₀/2)`.
    pub bound: f64,
    pub pass: bool,
}

/// Limits for theta-series enumeration.
#[derive(Debug, Clone, Copy)]
pub struct ThetaOptions {
    /// Smallest admissible volume-normalized `τ·V^{2/n}`.
    pub tau_floor: f64,
    pub node_cap: u64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions {
            tau_floor: 1e-3,
            node_cap: 100_000_000,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(LatticeError::NonpositiveSigma(sigma))
    }
}

/// `(2πσ²)^{−n/2} exp(−‖x−c‖²/(2σ²))`.
pub fn gaussian_density(sigma: f64, c: &[f64], x: &[f64]) -> Result<f64> {
    check_sigma(sigma)?;
    if c.len() != x.len() {
        return Err(LatticeError::DimensionMismatch {
            expected: c.len(),
            got: x.len(),
        });
    }
    let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = x.len() as f64;
    Ok((2.0 * PI * sigma * sigma).powf(-n / 2.0) * (-d2 / (2.0 * sigma * sigma)).exp())
}

/// Truncated sum `Σ_λ exp(−πτ‖λ − center‖²)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussianSum {
    pub sum: f64,
    pub bound: f64,
    pub radius: f64,
}

/// Sums the Gaussian weight over lattice points near `center`, growing the
/// radius until the certified tail is below `rel_tol` times the partial sum
/// (or below `abs_floor`). The zero vector is skipped when `exclude_zero`.
pub(crate) fn gaussian_sum(
    lattice: &Lattice,
    tau: f64,
    center: &[f64],
    exclude_zero: bool,
    rel_tol: f64,
    abs_floor: f64,
    node_cap: u64,
) -> Result<GaussianSum> {
    let n = lattice.dim();
    let rp = lattice.packing_radius_lower();
    let tri = lattice.triangular();
    let mut target = rel_tol;
    let mut radius = enumerate::radius_for_tail(n, rp, tau, target, 0, (1.0 / (PI * tau)).sqrt());
    for _ in 0..64 {
        if !radius.is_finite() {
            return Err(LatticeError::BudgetExceeded(
                "no finite truncation radius".into(),
            ));
        }
        let estimate =
            enumerate::unit_ball_volume(n) * (radius + 2.0 * rp).powi(n as i32) / lattice.volume();
        if estimate > node_cap as f64 {
            return Err(LatticeError::BudgetExceeded(format!(
                "about {estimate:.3e} lattice points within radius {radius:.4}"
            )));
        }
        let mut acc = CompensatedSum::default();
        enumerate::for_each_in_ball(tri, center, radius, node_cap, |z, d2| {
            if exclude_zero && z.iter().all(|&v| v == 0) {
                return;
            }
            acc.add((-PI * tau * d2).exp());
        })?;
        let sum = acc.value();
        let bound = enumerate::gaussian_tail_bound(n, rp, tau, radius, 0);
        if bound <= rel_tol * sum || bound <= abs_floor {
            return Ok(GaussianSum { sum, bound, radius });
        }
        target = if sum > 0.0 {
            (rel_tol * sum).max(abs_floor)
        } else {
            target * 1e-20
        };
        let next = enumerate::radius_for_tail(n, rp, tau, target, 0, radius);
        radius = if next > radius { next } else { radius * 1.1 };
    }
    Err(LatticeError::BudgetExceeded(
        "truncation radius did not converge".into(),
    ))
}

/// `Θ_Λ(τ) = Σ_λ exp(−πτ‖λ‖²)` by direct enumeration of the lattice.
pub fn theta(lattice: &Lattice, tau: f64) -> Result<ThetaValue> {
    theta_with(lattice, tau, &ThetaOptions::default())
}

pub fn theta_with(lattice: &Lattice, tau: f64, opts: &ThetaOptions) -> Result<ThetaValue> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(LatticeError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let n = lattice.dim();
    if n > crate::lattice::MAX_DIM {
        return Err(LatticeError::DimensionTooLarge {
            dim: n,
            max: crate::lattice::MAX_DIM,
        });
    }
    let normalized = tau * lattice.volume().powf(2.0 / n as f64);
    if normalized < opts.tau_floor {
        return Err(LatticeError::BudgetExceeded(format!(
            "normalized tau {normalized:e} below floor {:e}",
            opts.tau_floor
        )));
    }
    let s = gaussian_sum(
        lattice,
        tau,
        &vec![0.0; n],
        false,
        SUM_REL_TOL,
        0.0,
        opts.node_cap,
    )?;
    Ok(ThetaValue {
        value: s.sum,
        truncation_bound: s.bound,
        radius: s.radius,
    })
}

/// `γ_Λ(σ) = V^{2/n}/(2πσ²)`.
pub fn gsnr(lattice: &Lattice, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(lattice.volume().powf(2.0 / lattice.dim() as f64) / (2.0 * PI * sigma * sigma))
}

/// Flatness factor `ε_Λ(σ) = γ_Λ(σ)^{n/2} Θ_Λ(1/(2πσ²)) − 1`.
///
/// When `γ < 1` the theta series converges slowly; Poisson summation gives
/// `γ^{n/2} Θ_Λ(τ) = Θ_{Λ*}(1/τ)`, so the nonzero part of the dual series is
/// summed instead. That side is cheaper to enumerate and avoids cancellation
/// when `ε` is tiny. `theta` is always reported at `τ = 1/(2πσ²)`; its
/// `radius` is the enumeration radius on whichever side was summed.
pub fn flatness(lattice: &Lattice, sigma: f64) -> Result<FlatnessReport> {
    flatness_with(lattice, sigma, &ThetaOptions::default())
}

pub fn flatness_with(lattice: &Lattice, sigma: f64, opts: &ThetaOptions) -> Result<FlatnessReport> {
    let gamma = gsnr(lattice, sigma)?;
    let n = lattice.dim() as f64;
    let tau = 1.0 / (2.0 * PI * sigma * sigma);
    let scale = gamma.powf(n / 2.0);
    if gamma >= 1.0 {
        let th = theta_with(lattice, tau, opts)?;
        Ok(FlatnessReport {
            sigma,
            gsnr: gamma,
            theta: th,
            epsilon: scale * th.value - 1.0,
        })
    } else {
        let dual = lattice.dual();
        let s = gaussian_sum(
            &dual,
            1.0 / tau,
            &vec![0.0; lattice.dim()],
            true,
            SUM_REL_TOL,
            1e-300,
            opts.node_cap,
        )?;
        let theta = ThetaValue {
            value: (1.0 + s.sum) / scale,
            truncation_bound: s.bound / scale,
            radius: s.radius,
        };
        Ok(FlatnessReport {
            sigma,
            gsnr: gamma,
            theta,
            epsilon: s.sum,
        })
    }
}

/// `V(Λ)·f_{σ,Λ}(x)` for the periodic Gaussian, with certified tail below 1e-13.
fn normalized_periodic_density(lattice: &Lattice, sigma: f64, x: &[f64]) -> Result<f64> {
    let n = lattice.dim() as f64;
    let k = lattice.volume() * (2.0 * PI * sigma * sigma).powf(-n / 2.0);
    let tau = 1.0 / (2.0 * PI * sigma * sigma);
    let s = gaussian_sum(
        lattice,
        tau,
        x,
        false,
        SUM_REL_TOL,
        SUM_REL_TOL / k,
        lattice.node_cap(),
    )?;
    Ok(k * s.sum)
}

/// Brute-force flatness: `max |V·f_{σ,Λ}(x) − 1|` over a regular grid of
/// `grid_points_per_dim^n` points in the basis parallelepiped `B·[0,1)ⁿ`.
pub fn flatness_direct(lattice: &Lattice, sigma: f64, grid_points_per_dim: usize) -> Result<f64> {
    check_sigma(sigma)?;
    let n = lattice.dim();
    if n > 4 {
        return Err(LatticeError::DimensionTooLarge { dim: n, max: 4 });
    }
    if grid_points_per_dim == 0 {
        return Err(LatticeError::InvalidParameter(
            "grid must have at least one point".into(),
        ));
    }
    let g = grid_points_per_dim;
    let total = g.pow(n as u32);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let k = rem % g;
                    rem /= g;
                    k as f64 / g as f64
                })
                .collect();
            let x: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| lattice.basis()[(i, j)] * u[j]).sum())
                .collect();
            normalized_periodic_density(lattice, sigma, &x).map(|v| (v - 1.0).abs())
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// Checks `f_{σ,c}(Λ) ∈ [1−ε, 1+ε]/V` with `ε = ε_Λ(σ)`.
pub fn partition_sandwich_check(
    lattice: &Lattice,
    sigma: f64,
    c: &[f64],
) -> Result<PartitionCheck> {
    if c.len() != lattice.dim() {
        return Err(LatticeError::DimensionMismatch {
            expected: lattice.dim(),
            got: c.len(),
        });
    }
    let eps = flatness(lattice, sigma)?.epsilon;
    let v = lattice.volume();
    let value = normalized_periodic_density(lattice, sigma, c)? / v;
    let lo = (1.0 - eps) / v;
    let hi = (1.0 + eps) / v;
    let tol = CHECK_TOL / v;
    Ok(PartitionCheck {
        value,
        lo,
        hi,
        pass: value >= lo - tol && value <= hi + tol,
    })
}

/// `ε_Λ(σ₀/2)`, failing with `FlatnessTooLarge` unless it is below 1.
pub fn half_sigma_flatness(lattice: &Lattice, sigma0: f64) -> Result<f64> {
    check_sigma(sigma0)?;
    let eps = flatness(lattice, sigma0 / 2.0)?.epsilon;
    if eps < 1.0 {
        Ok(eps)
    } else {
        Err(LatticeError::FlatnessTooLarge { epsilon: eps })
    }
}

/// Entropy slack `ε′ = −log(1−ε)/n + πε/(n(1−ε))`.
pub fn entropy_slack(eps: f64, n: usize) -> f64 {
    let n = n as f64;
    -(1.0 - eps).ln() / n + PI * eps / (n * (1.0 - eps))
}

/// Compares the exact second moment of `D_{Λ,σ₀,c}` with `nσ₀²`.
pub fn moment_check(lattice: &Lattice, sigma0: f64, c: &[f64]) -> Result<MomentCheck> {
    let eps = half_sigma_flatness(lattice, sigma0)?;
    let spec = sampler::build_spec_with(
        lattice,
        sigma0,
        &Shift::new(c.to_vec()),
        &SpecOptions::default(),
    )?;
    let second_moment = spec.second_moment();
    let deviation = (second_moment - lattice.dim() as f64 * sigma0 * sigma0).abs();
    let bound = 2.0 * PI * eps / (1.0 - eps) * sigma0 * sigma0;
    Ok(MomentCheck {
        second_moment,
        deviation,
        bound,
        pass: deviation <= bound + CHECK_TOL,
    })
}

/// Exact entropy rate of `D_{Λ,σ₀,c}` against `log(√(2πe)σ₀) − log(V)/n`.
pub fn entropy_check(lattice: &Lattice, sigma0: f64, c: &[f64]) -> Result<EntropyReport> {
    let eps = half_sigma_flatness(lattice, sigma0)?;
    let n = lattice.dim();
    let spec = sampler::build_spec_with(
        lattice,
        sigma0,
        &Shift::new(c.to_vec()),
        &SpecOptions::default(),
    )?;
    Ok(EntropyReport {
        entropy_rate: spec.entropy() / n as f64,
        reference: (2.0 * PI * E).sqrt().ln() + sigma0.ln() - lattice.volume().ln() / n as f64,
        epsilon_prime: entropy_slack(eps, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{standard_lattice, StandardLattice};

    fn z(n: usize) -> Lattice {
        standard_lattice(StandardLattice::Zn(n)).unwrap()
    }

    #[test]
    fn density_values() {
        let v = gaussian_density(1.0, &[0.0], &[0.0]).unwrap();
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let v = gaussian_density(2.0, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-0.25f64).exp() / (8.0 * PI)).abs() < 1e-15);
        assert!(matches!(
            gaussian_density(0.0, &[0.0], &[0.0]),
            Err(LatticeError::NonpositiveSigma(_))
        ));
        assert!(matches!(
            gaussian_density(-1.0, &[0.0], &[0.0]),
            Err(LatticeError::NonpositiveSigma(_))
        ));
    }

    #[test]
    fn gsnr_values() {
        assert!((gsnr(&z(5), 1.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let d4 = standard_lattice(StandardLattice::Dn(4)).unwrap();
        assert!((gsnr(&d4, 0.5).unwrap() - 2f64.sqrt() / (0.5 * PI)).abs() < 1e-12);
        let e8 = standard_lattice(StandardLattice::E8).unwrap();
        let a = gsnr(&e8.scaled(3.0).unwrap(), 3.0 * 0.7).unwrap();
        assert!((a - gsnr(&e8, 0.7).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn theta_of_integers_at_one() {
        let t = theta(&z(1), 1.0).unwrap();
        let oracle: f64 = (-30i64..=30).map(|k| (-PI * (k * k) as f64).exp()).sum();
        assert!((t.value - oracle).abs() < 1e-13);
        assert!(t.truncation_bound < 1e-12 * t.value);
        assert!(t.value >= 1.0);
    }

    #[test]
    fn theta_large_tau_is_one() {
        let t = theta(&z(8), 50.0).unwrap();
        assert!((t.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_floor_is_enforced() {
        let err = theta(&z(4), 1e-4).unwrap_err();
        assert!(matches!(err, LatticeError::BudgetExceeded(_)));
    }

    #[test]
    fn flatness_of_integers() {
        let f = flatness(&z(1), 1.0).unwrap();
        let oracle = 2.0 * (-2.0 * PI * PI).exp() + 2.0 * (-8.0 * PI * PI).exp();
        assert!(
            (f.epsilon - oracle).abs() < 1e-15,
            "{} vs {oracle}",
            f.epsilon
        );
        let f = flatness(&z(1), 0.2).unwrap();
        let gamma: f64 = 1.0 / (2.0 * PI * 0.04);
        let th: f64 = (-5i64..=5)
            .map(|k| (-PI * gamma * (k * k) as f64).exp())
            .sum();
        assert!((f.epsilon - (gamma.sqrt() * th - 1.0)).abs() < 1e-12);
        assert!((f.epsilon - 0.99473).abs() < 1e-5);
    }

    #[test]
    fn flatness_report_consistency() {
        for sigma in [0.3, 0.5, 1.0, 2.0] {
            let f = flatness(&z(2), sigma).unwrap();
            let implied = f.gsnr.powi(1) * f.theta.value - 1.0;
            assert!((implied - f.epsilon).abs() <= f.gsnr * f.theta.truncation_bound + 1e-13);
        }
    }

    #[test]
    fn flatness_direct_needs_small_dimension() {
        let err = flatness_direct(&z(5), 1.0, 3).unwrap_err();
        assert!(matches!(
            err,
            LatticeError::DimensionTooLarge { dim: 5, max: 4 }
        ));
    }

    #[test]
    fn flatness_direct_flat_limit() {
        assert!(flatness_direct(&z(2), 3.0, 11).unwrap() < 1e-12);
    }

    #[test]
    fn entropy_reference_shifts_with_volume() {
        let a = entropy_check(&z(1), 2.0, &[0.0]).unwrap();
        let b = entropy_check(&z(1).scaled(2.0).unwrap(), 2.0, &[0.0]).unwrap();
        assert!((a.reference - b.reference - 2f64.ln()).abs() < 1e-12);
        assert!(b.holds());
    }

    #[test]
    fn entropy_of_integer_gaussian() {
        let r = entropy_check(&z(1), 2.0, &[0.0]).unwrap();
        assert!((r.reference - 2.1121).abs() < 1e-4);
        assert!(r.holds());
    }

    #[test]
    fn moment_check_needs_flatness_below_one() {
        let err = moment_check(&z(1), 0.3, &[0.0]).unwrap_err();
        assert!(matches!(err, LatticeError::FlatnessTooLarge { .. }));
    }

    #[test]
    fn entropy_slack_formula() {
        let v = entropy_slack(0.5, 8);
        assert!((v - (2f64.ln() / 8.0 + PI * 0.5 / 4.0)).abs() < 1e-15);
    }
}
