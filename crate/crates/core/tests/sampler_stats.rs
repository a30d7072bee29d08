//! Statistical and exact checks of the discrete Gaussian sampler.

use lgc_core::lattice::{standard_lattice, StandardLattice};
use lgc_core::sampler::{
    build_spec, build_spec_with, sample, tail_event_rate, SpecOptions, SupportStrategy,
};
use lgc_core::{RngSeed, Shift};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn pmf_1d(sigma: f64, c: f64) -> Vec<(i64, f64)> {
    let w: Vec<(i64, f64)> = (-60..=60)
        .map(|k| (k, (-((k as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()))
        .collect();
    let total: f64 = w.iter().map(|(_, v)| v).sum();
    w.into_iter().map(|(k, v)| (k, v / total)).collect()
}

#[test]
fn shifted_integer_gaussian_passes_chi_square() {
    let z1 = standard_lattice(StandardLattice::Zn(1)).unwrap();
    let (sigma, c) = (1.7, 0.35);
    let spec = build_spec(&z1, sigma, &Shift::new(vec![c])).unwrap();
    let draws = sample(&spec, RngSeed::new(4, 1), 200_000).unwrap();
    let pmf = pmf_1d(sigma, c);
    let bin = |k: i64| (k.clamp(-6, 6) + 6) as usize;
    let mut obs = [0f64; 13];
    let mut exp = [0f64; 13];
    for d in &draws {
        obs[bin(d.coeffs[0])] += 1.0;
    }
    for (k, p) in pmf {
        exp[bin(k)] += p * draws.len() as f64;
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(12.0).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square p = {p}");
}

#[test]
fn exact_probabilities_match_direct_pmf() {
    let z1 = standard_lattice(StandardLattice::Zn(1)).unwrap();
    for (sigma, c) in [(0.6, 0.0), (1.0, 0.5), (2.5, -0.2)] {
        let spec = build_spec(&z1, sigma, &Shift::new(vec![c])).unwrap();
        for (k, p) in pmf_1d(sigma, c) {
            if p > 1e-12 {
                assert!((spec.probability(&[k]) - p).abs() < 1e-12, "k={k}");
            }
        }
    }
}

#[test]
fn z8_second_moment_from_draws() {
    let z8 = standard_lattice(StandardLattice::Zn(8)).unwrap();
    let spec = build_spec(&z8, 3.0, &Shift::zero(8)).unwrap();
    assert!((spec.second_moment() - 72.0).abs() < 1e-6);
    let draws = sample(&spec, RngSeed::new(8, 0), 1_000_000).unwrap();
    let mean: f64 = draws
        .iter()
        .map(|d| d.embedding.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / draws.len() as f64;
    // sd of ‖x‖² is √(2n)σ₀² = 36, so the standard error is 0.036
    assert!((mean - 72.0).abs() < 0.2, "{mean}");
}

#[test]
fn backends_agree_on_d4_and_e8() {
    let opts = |strategy| SpecOptions {
        strategy,
        ..SpecOptions::default()
    };
    for (name, sigma0, shift) in [
        (StandardLattice::Dn(4), 1.1, vec![0.3, -0.1, 0.0, 0.45]),
        (StandardLattice::E8, 0.45, vec![0.1; 8]),
    ] {
        let l = standard_lattice(name).unwrap();
        let c = Shift::new(shift);
        let e = build_spec_with(&l, sigma0, &c, &opts(SupportStrategy::Enumerate)).unwrap();
        let f = build_spec_with(&l, sigma0, &c, &opts(SupportStrategy::CosetProduct)).unwrap();
        assert!((e.second_moment() - f.second_moment()).abs() < 1e-9);
        assert!((e.entropy() - f.entropy()).abs() < 1e-9);
        for (p, w) in e.support_points(1_000_000).unwrap().iter().take(200) {
            assert!((f.probability(&p.coeffs) - w).abs() < 1e-12);
        }
    }
}

#[test]
fn exact_tail_mass_below_bound() {
    for (name, sigma0) in [
        (StandardLattice::E8, 1.0),
        (StandardLattice::E8, 2.0),
        (StandardLattice::Zn(8), 1.0),
    ] {
        let l = standard_lattice(name).unwrap();
        let spec = build_spec(&l, sigma0, &Shift::zero(8)).unwrap();
        let t = tail_event_rate(&spec).unwrap();
        assert!(t.exact_mass_lower <= t.exact_mass);
        assert!(t.exact_mass < t.analytic_bound, "{name}: {t:?}");
    }
}

#[test]
fn origin_symmetric_without_shift() {
    let d4 = standard_lattice(StandardLattice::Dn(4)).unwrap();
    let spec = build_spec(&d4, 0.9, &Shift::zero(4)).unwrap();
    for (p, w) in spec.support_points(10_000).unwrap() {
        let neg: Vec<i64> = p.coeffs.iter().map(|v| -v).collect();
        assert!((spec.probability(&neg) - w).abs() < 1e-15);
    }
}
