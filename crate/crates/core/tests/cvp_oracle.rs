//! Closest-point search checked against independent decoders.

use lgc_core::lattice::{make_lattice, standard_lattice, Lattice, StandardLattice};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest point of `D_n = {z ∈ Zⁿ : Σz even}` (round, then fix parity by
/// re-rounding the worst coordinate the other way).
fn decode_dn(y: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = y.iter().map(|v| v.round()).collect();
    let sum: f64 = z.iter().sum();
    if (sum as i64).rem_euclid(2) == 1 {
        let (i, _) = y
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b).abs())
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        z[i] += if y[i] > z[i] { 1.0 } else { -1.0 };
    }
    z
}

/// Nearest point of `E8 = D8 ∪ (D8 + ½·1)`.
fn decode_e8(y: &[f64]) -> Vec<f64> {
    let a = decode_dn(y);
    let shifted: Vec<f64> = y.iter().map(|v| v - 0.5).collect();
    let b: Vec<f64> = decode_dn(&shifted).iter().map(|v| v + 0.5).collect();
    if sq(&a, y) <= sq(&b, y) {
        a
    } else {
        b
    }
}

/// Exhaustive search over a coefficient box certified to contain the nearest
/// point: a point at distance at most `d₀` (the rounded point's distance) has
/// coefficients within `‖B⁻¹‖₂·d₀` of `B⁻¹y` in every coordinate.
fn brute_force(l: &Lattice, y: &[f64]) -> f64 {
    let n = l.dim();
    let u = l.coordinates(y);
    let z0: Vec<i64> = u.iter().map(|v| v.round() as i64).collect();
    let d0 = sq(&l.embed(&z0), y).sqrt();
    let norm = l.inverse().clone().svd(false, false).singular_values.max();
    let k = (norm * d0).ceil() as i64 + 1;
    let mut best = f64::INFINITY;
    let mut z = vec![0i64; n];
    let total = (2 * k + 1).pow(n as u32);
    for idx in 0..total {
        let mut r = idx;
        for i in 0..n {
            z[i] = u[i].round() as i64 - k + r % (2 * k + 1);
            r /= 2 * k + 1;
        }
        best = best.min(sq(&l.embed(&z), y));
    }
    best
}

fn random_target<R: Rng>(rng: &mut R, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-spread..spread)).collect()
}

#[test]
fn e8_matches_coset_decoder() {
    let e8 = standard_lattice(StandardLattice::E8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let y = random_target(&mut rng, 8, 6.0);
        let ours = e8.closest_point(&y).unwrap();
        let oracle = decode_e8(&y);
        assert!(
            (sq(&ours.embedding, &y) - sq(&oracle, &y)).abs() < 1e-9,
            "{y:?}"
        );
    }
}

#[test]
fn dn_matches_parity_decoder() {
    for n in [2, 4, 6, 8] {
        let dn = standard_lattice(StandardLattice::Dn(n)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for _ in 0..1000 {
            let y = random_target(&mut rng, n, 5.0);
            let ours = dn.closest_point(&y).unwrap();
            assert!((sq(&ours.embedding, &y) - sq(&decode_dn(&y), &y)).abs() < 1e-9);
        }
    }
}

#[test]
fn integers_round_coordinatewise() {
    let z8 = standard_lattice(StandardLattice::Zn(8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let y = random_target(&mut rng, 8, 20.0);
        let ours = z8.closest_point(&y).unwrap();
        let oracle: Vec<f64> = y.iter().map(|v| v.round()).collect();
        assert_eq!(ours.embedding, oracle);
    }
}

#[test]
fn skewed_bases_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a2 = standard_lattice(StandardLattice::A2).unwrap();
    let mut lattices = vec![a2];
    for n in [2usize, 3, 4] {
        for _ in 0..3 {
            let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut b = DMatrix::from_row_slice(n, n, &data);
            // keep the basis comfortably nonsingular
            for i in 0..n {
                b[(i, i)] += 2.5;
            }
            lattices.push(make_lattice(b).unwrap());
        }
    }
    for l in &lattices {
        for _ in 0..1000 {
            let y = random_target(&mut rng, l.dim(), 4.0);
            let ours = l.closest_point(&y).unwrap();
            let d = sq(&ours.embedding, &y);
            let oracle = brute_force(l, &y);
            assert!(
                (d - oracle).abs() <= 1e-9 * oracle.max(1.0),
                "{} vs {oracle}",
                d
            );
        }
    }
}

#[test]
fn mod_lattice_lands_in_voronoi_cell() {
    let e8 = standard_lattice(StandardLattice::E8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let y = random_target(&mut rng, 8, 10.0);
        let r = e8.mod_lattice(&y).unwrap();
        let q = e8.closest_point(&r).unwrap();
        assert!(
            q.coeffs.iter().all(|&c| c == 0) || sq(&q.embedding, &r) >= sq(&r, &[0.0; 8]) - 1e-9
        );
    }
}
