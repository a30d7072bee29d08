//! Monte Carlo error rates.
//!
//! Trials are split into blocks of [`SIM_BLOCK`]; block `b` draws from
//! sub-stream `b` of the seed and blocks run in parallel. Error counts merge by
//! integer addition, so results do not depend on the number of workers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_params, vnr, GaussianParams};
use crate::analytics;
use crate::error::{LatticeError, Result};
use crate::lattice::{Lattice, Shift};
use crate::rng::RngSeed;
use crate::sampler::{self, DiscreteGaussianSpec};

pub const SIM_BLOCK: u64 = 4096;
pub const SIM_CSV_HEADER: &str =
    "lattice,label,n,sigma0,sigma,alpha,sigma_tilde,V,mu,trials,errors,p_hat,ci_low,ci_high,seed";
/// Fewest errors per arm for a ratio test.
pub const MIN_SANDWICH_ERRORS: u64 = 50;

const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub lattice: String,
    /// Which experiment produced the row, e.g. `scheme` or `poltyrev`.
    pub label: String,
    pub n: usize,
    pub sigma0: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub sigma_tilde: f64,
    pub volume: f64,
    pub mu: f64,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: RngSeed,
}

/// 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (
        (center - half).max(0.0).min(p),
        (center + half).min(1.0).max(p),
    )
}

impl SimResult {
    fn new(
        lattice: &Lattice,
        label: &str,
        params: &GaussianParams,
        trials: u64,
        errors: u64,
        seed: RngSeed,
    ) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(errors, trials);
        Ok(SimResult {
            lattice: lattice.label().to_string(),
            label: label.to_string(),
            n: lattice.dim(),
            sigma0: params.sigma0,
            sigma: params.sigma,
            alpha: params.alpha,
            sigma_tilde: params.sigma_tilde,
            volume: lattice.volume(),
            mu: vnr(lattice, params.sigma_tilde)?,
            trials,
            errors,
            p_hat: errors as f64 / trials as f64,
            ci_low,
            ci_high,
            seed,
        })
    }

    pub fn csv_header() -> &'static str {
        SIM_CSV_HEADER
    }

    pub fn to_csv_row(&self) -> String {
        let quote = |s: &str| {
            if s.contains(',') || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            quote(&self.lattice),
            quote(&self.label),
            self.n,
            self.sigma0,
            self.sigma,
            self.alpha,
            self.sigma_tilde,
            self.volume,
            self.mu,
            self.trials,
            self.errors,
            self.p_hat,
            self.ci_low,
            self.ci_high,
            self.seed
        )
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(LatticeError::InvalidParameter(
            "trials must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Runs `trial` over all blocks in parallel and sums the returned counters.
fn run_blocks<const K: usize, F>(trials: u64, seed: RngSeed, trial: F) -> Result<[u64; K]>
where
    F: Fn(&mut ChaCha8Rng) -> Result<[bool; K]> + Sync,
{
    let blocks = trials.div_ceil(SIM_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.block_rng(b);
            let count = SIM_BLOCK.min(trials - b * SIM_BLOCK);
            let mut acc = [0u64; K];
            for _ in 0..count {
                for (a, hit) in acc.iter_mut().zip(trial(&mut rng)?) {
                    *a += hit as u64;
                }
            }
            Ok(acc)
        })
        .try_reduce(
            || [0u64; K],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for g in out.iter_mut() {
        *g = StandardNormal.sample(rng);
    }
}

/// Monte Carlo `P_e` of the scheme: draw `x ~ D_{L−c,σ₀}`, send it through
/// the channel, decode with `Q_{L−c}(αy)`.
pub fn simulate_error(
    lattice: &Lattice,
    c: &Shift,
    params: &GaussianParams,
    trials: u64,
    seed: RngSeed,
) -> Result<SimResult> {
    let spec = sampler::build_spec(lattice, params.sigma0, c)?;
    simulate_error_with_spec(&spec, params, trials, seed)
}

/// [`simulate_error`] with a prebuilt codebook distribution.
pub fn simulate_error_with_spec(
    spec: &DiscreteGaussianSpec,
    params: &GaussianParams,
    trials: u64,
    seed: RngSeed,
) -> Result<SimResult> {
    check_trials(trials)?;
    let lattice = spec.lattice();
    let n = lattice.dim();
    let [errors] = run_blocks(trials, seed, |rng| {
        let mut coeffs = vec![0i64; n];
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        spec.draw_into(rng, &mut coeffs, &mut x);
        gaussian_vector(rng, &mut g);
        let y: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(a, b)| a + params.sigma * b)
            .collect();
        let xhat = super::mmse_decode(lattice, spec.shift(), params, &y)?;
        Ok([xhat.coeffs != coeffs])
    })?;
    SimResult::new(lattice, "scheme", params, trials, errors, seed)
}

/// Probability that `w ~ N(0, noise_sigma²Iₙ)` leaves the Voronoi cell of the
/// origin. The row echoes `σ₀ = ∞` (no power constraint, `α = 1`).
pub fn simulate_poltyrev(
    lattice: &Lattice,
    noise_sigma: f64,
    trials: u64,
    seed: RngSeed,
) -> Result<SimResult> {
    check_trials(trials)?;
    let params = unconstrained_params(noise_sigma)?;
    let n = lattice.dim();
    let [errors] = run_blocks(trials, seed, |rng| {
        let mut g = vec![0.0; n];
        gaussian_vector(rng, &mut g);
        g.iter_mut().for_each(|v| *v *= noise_sigma);
        let q = lattice.closest_point(&g)?;
        Ok([q.coeffs.iter().any(|&z| z != 0)])
    })?;
    SimResult::new(lattice, "poltyrev", &params, trials, errors, seed)
}

fn unconstrained_params(noise_sigma: f64) -> Result<GaussianParams> {
    let mut p = make_params(1.0, noise_sigma)?;
    p.sigma0 = f64::INFINITY;
    p.alpha = 1.0;
    p.sigma_tilde = noise_sigma;
    p.snr = f64::INFINITY;
    p.power = f64::INFINITY;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub scheme: SimResult,
    pub poltyrev: SimResult,
    /// Trials on which both arms erred.
    pub both_errors: u64,
    /// `p̂_scheme / p̂_poltyrev`.
    pub ratio: f64,
    /// 95% interval for the ratio (delta method on the log ratio).
    pub ratio_ci: (f64, f64),
    /// `ε_L(σ₀²/√(σ₀²+σ²))`.
    pub eps1: f64,
    /// `ε_L(σ₀)`.
    pub eps2: f64,
    /// `(1−ε₁)/(1+ε₂)`.
    pub lo: f64,
    /// `(1+ε₁)/(1−ε₂)`.
    pub hi: f64,
    pub pass: bool,
}

/// Bracket `[(1−ε₁)/(1+ε₂), (1+ε₁)/(1−ε₂)]`.
pub fn sandwich_bracket(eps1: f64, eps2: f64) -> (f64, f64) {
    ((1.0 - eps1) / (1.0 + eps2), (1.0 + eps1) / (1.0 - eps2))
}

/// Paired simulation of the scheme and of lattice decoding at noise `σ̃`.
///
/// Each trial draws one codeword `x` and one standard normal vector `g`; the
/// scheme arm decodes `y = x + σg`, the unconstrained arm decodes `σ̃g`. The
/// ratio of the two error rates must lie in the flatness bracket.
pub fn sandwich_check(
    lattice: &Lattice,
    c: &Shift,
    params: &GaussianParams,
    trials: u64,
    seed: RngSeed,
) -> Result<SandwichReport> {
    check_trials(trials)?;
    let s1 = params.sigma0 * params.sigma0 / (params.sigma0.powi(2) + params.sigma.powi(2)).sqrt();
    let eps1 = analytics::flatness(lattice, s1)?.epsilon;
    let eps2 = analytics::flatness(lattice, params.sigma0)?.epsilon;
    for eps in [eps1, eps2] {
        if eps >= 1.0 {
            return Err(LatticeError::FlatnessTooLarge { epsilon: eps });
        }
    }
    let spec = sampler::build_spec(lattice, params.sigma0, c)?;
    let n = lattice.dim();
    let [ns, np, nb] = run_blocks(trials, seed, |rng| {
        let mut coeffs = vec![0i64; n];
        let mut x = vec![0.0; n];
        let mut g = vec![0.0; n];
        spec.draw_into(rng, &mut coeffs, &mut x);
        gaussian_vector(rng, &mut g);
        let y: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(a, b)| a + params.sigma * b)
            .collect();
        let xhat = super::mmse_decode(lattice, c, params, &y)?;
        let w: Vec<f64> = g.iter().map(|v| params.sigma_tilde * v).collect();
        let q = lattice.closest_point(&w)?;
        let es = xhat.coeffs != coeffs;
        let ep = q.coeffs.iter().any(|&z| z != 0);
        Ok([es, ep, es && ep])
    })?;
    let scheme = SimResult::new(lattice, "scheme", params, trials, ns, seed)?;
    let poltyrev = SimResult::new(
        lattice,
        "poltyrev",
        &unconstrained_params(params.sigma_tilde)?,
        trials,
        np,
        seed,
    )?;
    if ns < MIN_SANDWICH_ERRORS || np < MIN_SANDWICH_ERRORS {
        return Err(LatticeError::InsufficientErrors {
            scheme: ns,
            poltyrev: np,
            required: MIN_SANDWICH_ERRORS,
        });
    }
    let t = trials as f64;
    let (ps, pp, pb) = (ns as f64 / t, np as f64 / t, nb as f64 / t);
    let ratio = ps / pp;
    let var = (1.0 - ps) / (t * ps) + (1.0 - pp) / (t * pp) - 2.0 * (pb - ps * pp) / (t * ps * pp);
    let half = Z95 * var.max(0.0).sqrt();
    let ratio_ci = (ratio * (-half).exp(), ratio * half.exp());
    let (lo, hi) = sandwich_bracket(eps1, eps2);
    Ok(SandwichReport {
        scheme,
        poltyrev,
        both_errors: nb,
        ratio,
        ratio_ci,
        eps1,
        eps2,
        lo,
        hi,
        pass: ratio_ci.1 >= lo && ratio_ci.0 <= hi,
    })
}
