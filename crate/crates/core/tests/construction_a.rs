use lgc_core::analytics::{flatness, gsnr};
use lgc_core::construction_a::{ensemble_search, lift, random_code, theorem1_bound, LinearCode};
use lgc_core::lattice::{standard_lattice, StandardLattice};
use lgc_core::RngSeed;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn random_generator_entries_are_uniform() {
    let p = 7;
    let mut counts = [0f64; 7];
    for i in 0..400 {
        let code = random_code(p, 6, 3, RngSeed::new(12, i)).unwrap();
        for row in code.generator() {
            for &v in row {
                counts[v as usize] += 1.0;
            }
        }
    }
    let total: f64 = counts.iter().sum();
    let e = total / 7.0;
    let stat: f64 = counts.iter().map(|o| (o - e).powi(2) / e).sum();
    assert!(1.0 - ChiSquared::new(6.0).unwrap().cdf(stat) > 0.001);
}

#[test]
fn full_rank_code_lifts_to_scaled_integers() {
    let code = LinearCode::new(5, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
    let l = lift(&code, 0.8).unwrap();
    let z = standard_lattice(StandardLattice::Zn(3))
        .unwrap()
        .scaled(0.8)
        .unwrap();
    assert!((l.volume() - z.volume()).abs() < 1e-12);
    for sigma in [0.3, 0.6] {
        let a = flatness(&l, sigma).unwrap().epsilon;
        let b = flatness(&z, sigma).unwrap().epsilon;
        assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }
}

#[test]
fn lattice_membership_follows_code() {
    let code = random_code(5, 4, 2, RngSeed::new(3, 0)).unwrap();
    let l = lift(&code, 1.0).unwrap();
    let mut rng = RngSeed::new(3, 1).rng();
    use rand::Rng;
    for _ in 0..500 {
        let v: Vec<i64> = (0..4).map(|_| rng.random_range(-7..7)).collect();
        let x: Vec<f64> = v.iter().map(|&t| t as f64).collect();
        assert_eq!(
            code.contains(&v),
            l.integer_coordinates(&x, 1e-9).is_some(),
            "{v:?}"
        );
    }
}

#[test]
fn code_text_round_trip() {
    let code = random_code(11, 5, 3, RngSeed::new(1, 0)).unwrap();
    assert_eq!(LinearCode::from_text(&code.to_text()).unwrap(), code);
}

#[test]
fn bound_decays_with_dimension_at_fixed_gsnr() {
    let gamma: f64 = 0.7;
    let mut last = f64::INFINITY;
    for n in [4usize, 8, 16] {
        let code = random_code(3, n, n / 2, RngSeed::new(n as u64, 0)).unwrap();
        let l = lift(&code, 1.0).unwrap();
        let sigma = (l.volume().powf(2.0 / n as f64) / (2.0 * std::f64::consts::PI * gamma)).sqrt();
        assert!((gsnr(&l, sigma).unwrap() - gamma).abs() < 1e-12);
        let b = theorem1_bound(&l, sigma, 1.0).unwrap();
        assert!((b - 2.0 * gamma.powf(n as f64 / 2.0)).abs() < 1e-12);
        assert!(b < last);
        last = b;
    }
}

#[test]
fn ensemble_best_is_sorted_and_reported() {
    // p = 7, n = 8, k = 4 scaled to γ = 0.7 at σ = 1
    let (p, n, k) = (7u64, 8usize, 4usize);
    let a = (0.7 * 2.0 * std::f64::consts::PI / p as f64).sqrt();
    let entries = ensemble_search(p, n, k, a, 1.0, 1.0, 200, RngSeed::new(77, 0)).unwrap();
    assert_eq!(entries.len(), 200);
    assert!(entries
        .windows(2)
        .all(|w| w[0].report.epsilon <= w[1].report.epsilon));
    let best = &entries[0];
    assert!((best.report.gsnr - 0.7).abs() < 1e-9);
    assert!(best.report.epsilon < best.bound);
    let below = entries
        .iter()
        .filter(|e| e.report.epsilon <= e.bound)
        .count();
    println!(
        "best epsilon {:.4e}, bound {:.4e}; {below} of 200 samples below the bound",
        best.report.epsilon, best.bound
    );
}
