//! The lattice Gaussian coding scheme over the AWGN channel.
//!
//! Codewords are drawn from `D_{L−c,σ₀}` and sent over `y = x + w` with
//! `w ~ N(0, σ²Iₙ)`. The receiver scales by `α = σ₀²/(σ₀²+σ²)` and decodes
//! to the nearest coset point, which is the MAP rule. This module holds the
//! decoders, the analytic side (Poltyrev exponent, design conditions, rate
//! budget) and, in [`sim`], the Monte Carlo error estimates.

mod sim;

use std::f64::consts::{E, PI};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{LatticeError, Result};
use crate::lattice::{Lattice, LatticePoint, Shift};
use crate::rng::RngSeed;
use crate::sampler::{DiscreteGaussianSpec, MapDecision};

pub use sim::{
    sandwich_check, simulate_error, simulate_error_with_spec, simulate_poltyrev, wilson_interval,
    SandwichReport, SimResult, MIN_SANDWICH_ERRORS, SIM_BLOCK, SIM_CSV_HEADER,
};

/// Default `ε″` for [`design_volume`].
pub const DEFAULT_EPS_DPRIME: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub sigma0: f64,
    pub sigma: f64,
    /// `σ₀²/(σ₀²+σ²)`.
    pub alpha: f64,
    /// `σ₀σ/√(σ₀²+σ²)`.
    pub sigma_tilde: f64,
    /// `σ₀²/σ²`.
    pub snr: f64,
    /// Nominal power `σ₀²`; the exact power of a spec is in [`PowerStats`].
    pub power: f64,
}

pub fn make_params(sigma0: f64, sigma: f64) -> Result<GaussianParams> {
    for s in [sigma0, sigma] {
        if !(s > 0.0) || !s.is_finite() {
            return Err(LatticeError::NonpositiveSigma(s));
        }
    }
    let v0 = sigma0 * sigma0;
    let v = sigma * sigma;
    Ok(GaussianParams {
        sigma0,
        sigma,
        alpha: v0 / (v0 + v),
        sigma_tilde: sigma0 * sigma / (v0 + v).sqrt(),
        snr: v0 / v,
        power: v0,
    })
}

/// Parameters from the variances `σ₀²` and `σ²`. The variances are kept
/// as given so that boundary comparisons such as `σ₀² = eσ²` stay exact.
pub fn params_from_variances(var0: f64, var: f64) -> Result<GaussianParams> {
    let mut p = make_params(var0.sqrt(), var.sqrt())?;
    p.snr = var0 / var;
    p.power = var0;
    p.alpha = var0 / (var0 + var);
    Ok(p)
}

/// `y = x + w` with `w` i.i.d. `N(0, σ²)`.
pub fn awgn(x: &[f64], sigma: f64, seed: RngSeed) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(LatticeError::NonpositiveSigma(sigma));
    }
    let mut rng = seed.rng();
    Ok(x.iter()
        .map(|v| {
            let g: f64 = StandardNormal.sample(&mut rng);
            v + sigma * g
        })
        .collect())
}

/// `Q_{L−c}(αy)`.
pub fn mmse_decode(
    lattice: &Lattice,
    c: &Shift,
    params: &GaussianParams,
    y: &[f64],
) -> Result<LatticePoint> {
    let scaled: Vec<f64> = y.iter().map(|v| params.alpha * v).collect();
    lattice.coset_decode(c, &scaled)
}

/// Support point of `spec` maximizing the posterior given `y`.
pub fn map_decode(
    spec: &DiscreteGaussianSpec,
    params: &GaussianParams,
    y: &[f64],
) -> Result<LatticePoint> {
    Ok(map_decision(spec, params, y)?.point)
}

/// [`map_decode`] together with tie information.
pub fn map_decision(
    spec: &DiscreteGaussianSpec,
    params: &GaussianParams,
    y: &[f64],
) -> Result<MapDecision> {
    spec.map_decode(y, params.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoltyrevPoint {
    pub mu: f64,
    pub exponent: f64,
    /// `exp(−n·E_P(μ))`.
    pub bound: f64,
    pub n: usize,
}

/// Poltyrev exponent `E_P(μ)` in nats.
pub fn poltyrev_exponent(mu: f64) -> Result<f64> {
    if !(mu >= 1.0) {
        return Err(LatticeError::MuBelowOne(mu));
    }
    Ok(if mu <= 2.0 {
        0.5 * ((mu - 1.0) - mu.ln())
    } else if mu <= 4.0 {
        0.5 * (E * mu / 4.0).ln()
    } else {
        mu / 8.0
    })
}

impl PoltyrevPoint {
    pub fn new(mu: f64, n: usize) -> Result<Self> {
        let exponent = poltyrev_exponent(mu)?;
        Ok(PoltyrevPoint {
            mu,
            exponent,
            bound: (-(n as f64) * exponent).exp(),
            n,
        })
    }
}

/// Volume-to-noise ratio `μ = γ_L(σ̃)/e`.
pub fn vnr(lattice: &Lattice, sigma_tilde: f64) -> Result<f64> {
    Ok(analytics::gsnr(lattice, sigma_tilde)? / E)
}

/// `V = (2πeσ̃²(1+ε″))^{n/2}`.
pub fn design_volume(sigma_tilde: f64, eps_dprime: f64, n: usize) -> Result<f64> {
    if !(sigma_tilde > 0.0) {
        return Err(LatticeError::NonpositiveSigma(sigma_tilde));
    }
    if !(eps_dprime >= 0.0) || n == 0 {
        return Err(LatticeError::InvalidParameter(format!(
            "need ε″ ≥ 0 and n ≥ 1, got {eps_dprime}, {n}"
        )));
    }
    Ok((2.0 * PI * E * sigma_tilde * sigma_tilde * (1.0 + eps_dprime)).powf(n as f64 / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    /// Signed slack; positive exactly when the condition holds.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `V^{2/n} > 2πeσ̃²`; margin `V^{2/n} − 2πeσ̃²`.
    pub volume: Condition,
    /// `γ_L(σ₀²/√(σ₀²+σ²)) < 1`; margin `1 − γ`.
    pub flatness: Condition,
    /// `σ₀² > eσ²`; margin `σ₀² − eσ²`.
    pub snr: Condition,
    /// Open interval of `V^{2/n}` satisfying the first two conditions.
    pub interval: (f64, f64),
}

/// Interval `(2πeσ̃², 2πσ₀⁴/(σ₀²+σ²))` for `V^{2/n}`; nonempty iff `σ₀² > eσ²`.
pub fn compatibility_interval(params: &GaussianParams) -> (f64, f64) {
    let v0 = params.power;
    let v = v0 / params.snr;
    (
        2.0 * PI * E * v0 * v / (v0 + v),
        2.0 * PI * v0 * v0 / (v0 + v),
    )
}

pub fn check_conditions(lattice: &Lattice, params: &GaussianParams) -> ConditionReport {
    let n = lattice.dim() as f64;
    let v2n = lattice.volume().powf(2.0 / n);
    let (lo, hi) = compatibility_interval(params);
    let v0 = params.power;
    let v = v0 / params.snr;
    let gamma = v2n / hi;
    let cond = |margin: f64| Condition {
        holds: margin > 0.0,
        margin,
    };
    ConditionReport {
        volume: cond(v2n - lo),
        flatness: cond(1.0 - gamma),
        snr: cond(v0 - E * v),
        interval: (lo, hi),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    pub n: usize,
    pub snr: f64,
    /// `ε_L(σ₀/2)`.
    pub eps: f64,
    pub eps_prime: f64,
    pub eps_dprime: f64,
    /// `½log(1+SNR)`.
    pub capacity: f64,
    /// Lower bound on the rate, in nats per dimension.
    pub rate_lower: f64,
}

/// `½log(1+SNR) − πε/(n(1−ε)) − ½ε″ − ε′`.
pub fn rate_lower_bound(snr: f64, eps: f64, eps_dprime: f64, n: usize) -> Result<RateBudget> {
    if !(0.0..1.0).contains(&eps) {
        return Err(LatticeError::FlatnessTooLarge { epsilon: eps });
    }
    if n == 0 || !(snr > 0.0) || !(eps_dprime >= 0.0) {
        return Err(LatticeError::InvalidParameter(format!(
            "n = {n}, snr = {snr}, ε″ = {eps_dprime}"
        )));
    }
    let nf = n as f64;
    let eps_prime = analytics::entropy_slack(eps, n);
    let capacity = 0.5 * snr.ln_1p();
    Ok(RateBudget {
        n,
        snr,
        eps,
        eps_prime,
        eps_dprime,
        capacity,
        rate_lower: capacity - PI * eps / (nf * (1.0 - eps)) - 0.5 * eps_dprime - eps_prime,
    })
}

/// Rate budget with `ε = ε_L(σ₀/2)` computed for the given lattice.
pub fn rate_budget(
    lattice: &Lattice,
    params: &GaussianParams,
    eps_dprime: f64,
) -> Result<RateBudget> {
    let eps = analytics::half_sigma_flatness(lattice, params.sigma0)?;
    rate_lower_bound(params.snr, eps, eps_dprime, lattice.dim())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerStats {
    /// Exact `E‖x‖²/n`.
    pub avg_power_per_dim: f64,
    /// Largest `‖x‖²` in the support.
    pub peak_norm_sq: f64,
    /// `√(2πn)·σ₀`, outside which the codebook has mass at most the tail bound.
    pub sphere_radius: f64,
    /// `sphere_radius²/(nσ₀²) = 2π`: peak power relative to a Voronoi
    /// constellation of the same average power.
    pub peak_factor: f64,
    pub truncation_radius: f64,
}

pub fn power_stats(spec: &DiscreteGaussianSpec) -> PowerStats {
    let n = spec.dim() as f64;
    let s0 = spec.sigma0();
    let sphere_radius = (2.0 * PI * n).sqrt() * s0;
    PowerStats {
        avg_power_per_dim: spec.second_moment() / n,
        peak_norm_sq: spec.max_norm_sq(),
        sphere_radius,
        peak_factor: sphere_radius * sphere_radius / (n * s0 * s0),
        truncation_radius: spec.truncation_radius(),
    }
}

/// `|α − P̂/(P̂+σ²)|` with `P̂` the exact per-dimension power of `spec`.
pub fn mmse_coefficient_gap(spec: &DiscreteGaussianSpec, params: &GaussianParams) -> f64 {
    let p = spec.second_moment() / spec.dim() as f64;
    (params.alpha - p / (p + params.sigma * params.sigma)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{standard_lattice, StandardLattice};

    #[test]
    fn params_examples() {
        let p = make_params(2.0, 1.0).unwrap();
        assert!((p.alpha - 0.8).abs() < 1e-15);
        assert!((p.sigma_tilde.powi(2) - 0.8).abs() < 1e-15);
        let p = make_params(1.0, 1.0).unwrap();
        assert!((p.alpha - 0.5).abs() < 1e-15);
        assert!((p.sigma_tilde - 0.5f64.sqrt()).abs() < 1e-15);
        let p = make_params(1.0, 1e-9).unwrap();
        assert!(1.0 - p.alpha < 1e-15 && p.sigma_tilde < 1e-8);
        assert!(matches!(
            make_params(0.0, 1.0),
            Err(LatticeError::NonpositiveSigma(_))
        ));
    }

    #[test]
    fn awgn_zero_noise_is_identity() {
        let x = [1.0, -2.0, 0.5];
        assert_eq!(awgn(&x, 0.0, RngSeed::new(3, 0)).unwrap(), x.to_vec());
    }

    #[test]
    fn exponent_values() {
        assert_eq!(poltyrev_exponent(1.0).unwrap(), 0.0);
        let left = 0.5 * (1.0 - 2f64.ln());
        let right = 0.5 * (E * 2.0 / 4.0).ln();
        assert!((left - right).abs() < 1e-15);
        assert!((poltyrev_exponent(2.0).unwrap() - 0.1534264).abs() < 1e-6);
        assert_eq!(poltyrev_exponent(8.0).unwrap(), 1.0);
        assert!(matches!(
            poltyrev_exponent(0.9),
            Err(LatticeError::MuBelowOne(_))
        ));
        let p = PoltyrevPoint::new(8.0, 8).unwrap();
        assert!((p.bound - (-8.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn vnr_and_volume() {
        let z1 = standard_lattice(StandardLattice::Zn(1)).unwrap();
        assert!((vnr(&z1, 0.1).unwrap() - 1.0 / (2.0 * PI * E * 0.01)).abs() < 1e-12);
        assert!((vnr(&z1, 0.1).unwrap() - 5.855).abs() < 1e-3);
        let v = design_volume(0.8f64.sqrt(), 0.0, 2).unwrap();
        assert!((v - 2.0 * PI * E * 0.8).abs() < 1e-12);
        assert!((v - 13.66357).abs() < 1e-5);
        let l = z1.with_volume(design_volume(0.3, 0.0, 1).unwrap()).unwrap();
        assert!((vnr(&l, 0.3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_condition_is_strict() {
        let p = params_from_variances(E, 1.0).unwrap();
        let z8 = standard_lattice(StandardLattice::Zn(8)).unwrap();
        assert!(!check_conditions(&z8, &p).snr.holds);
        let (lo, hi) = compatibility_interval(&p);
        assert!(lo >= hi);
    }

    #[test]
    fn designed_volume_meets_conditions() {
        let p = params_from_variances(10.0, 1.0).unwrap();
        let e8 = standard_lattice(StandardLattice::E8).unwrap();
        let l = e8
            .with_volume(design_volume(p.sigma_tilde, 0.1, 8).unwrap())
            .unwrap();
        let r = check_conditions(&l, &p);
        assert!(r.volume.holds && r.snr.holds && r.flatness.holds);
    }

    #[test]
    fn rate_examples() {
        let r = rate_lower_bound(10.0, 0.0, 0.0, 8).unwrap();
        assert!((r.rate_lower - 0.5 * 11f64.ln()).abs() < 1e-15);
        let r = rate_lower_bound(10.0, 0.5, 0.1, 8).unwrap();
        assert!((r.eps_prime - 0.47934).abs() < 1e-5);
        assert!((r.rate_lower - 0.27691).abs() < 1e-4);
        assert!(rate_lower_bound(10.0, 1.0, 0.1, 8).is_err());
    }
}
