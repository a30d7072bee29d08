//! Mod-p lattices `aΛ_C` with `Λ_C = {v ∈ Zⁿ : v mod p ∈ C}` for a linear
//! code `C` over `Z_p`, and an empirical search over random codes for small
//! flatness factors.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, FlatnessReport};
use crate::error::{LatticeError, Result};
use crate::lattice::Lattice;
use crate::rng::RngSeed;

/// Draws allowed before [`random_code`] gives up on finding a full-rank generator.
pub const MAX_CODE_ATTEMPTS: usize = 1000;
/// Default slack `δ` for comparisons with the existence bound.
pub const DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearCode {
    p: u64,
    n: usize,
    k: usize,
    /// `k` rows of length `n`, entries in `[0, p)`.
    generator: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModpConfig {
    pub code: LinearCode,
    pub scale: f64,
    pub delta: f64,
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn inv_mod(a: u64, p: u64) -> u64 {
    // Fermat: a^{p−2}
    let (mut base, mut e, mut acc) = (a % p, p - 2, 1u64);
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        e >>= 1;
    }
    acc
}

/// Reduced row echelon form over `Z_p`; returns the nonzero rows and their
/// pivot columns.
fn rref(rows: &[Vec<u64>], p: u64) -> (Vec<Vec<u64>>, Vec<usize>) {
    let mut m: Vec<Vec<u64>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(sel) = (r..m.len()).find(|&i| m[i][col] != 0) else {
            continue;
        };
        m.swap(r, sel);
        let inv = inv_mod(m[r][col], p);
        for v in m[r].iter_mut() {
            *v = mul_mod(*v, inv, p);
        }
        for i in 0..m.len() {
            if i != r && m[i][col] != 0 {
                let f = m[i][col];
                for j in 0..ncols {
                    let sub = mul_mod(f, m[r][j], p);
                    m[i][j] = (m[i][j] + p - sub) % p;
                }
            }
        }
        pivots.push(col);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    m.truncate(r);
    (m, pivots)
}

impl LinearCode {
    pub fn new(p: u64, generator: Vec<Vec<u64>>) -> Result<Self> {
        if !is_prime(p) {
            return Err(LatticeError::InvalidParameter(format!(
                "p = {p} is not prime"
            )));
        }
        let k = generator.len();
        if k == 0 {
            return Err(LatticeError::RankDeficientCode { rank: 0, k: 0, p });
        }
        let n = generator[0].len();
        if n == 0 || k > n {
            return Err(LatticeError::InvalidParameter(format!(
                "need 1 ≤ k ≤ n, got k = {k}, n = {n}"
            )));
        }
        if generator.iter().any(|r| r.len() != n) {
            return Err(LatticeError::Parse(
                "generator rows differ in length".into(),
            ));
        }
        if generator.iter().flatten().any(|&v| v >= p) {
            return Err(LatticeError::InvalidParameter(format!(
                "generator entries must lie in [0, {p})"
            )));
        }
        let rank = rref(&generator, p).0.len();
        if rank < k {
            return Err(LatticeError::RankDeficientCode { rank, k, p });
        }
        Ok(LinearCode { p, n, k, generator })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn generator(&self) -> &[Vec<u64>] {
        &self.generator
    }

    /// Whether `v mod p` is a codeword.
    pub fn contains(&self, v: &[i64]) -> bool {
        if v.len() != self.n {
            return false;
        }
        let p = self.p as i64;
        let w: Vec<u64> = v.iter().map(|x| x.rem_euclid(p) as u64).collect();
        let mut rows = self.generator.clone();
        rows.push(w);
        rref(&rows, self.p).0.len() == self.k
    }

    /// `p n k` on the first line, then `k` rows of `n` integers.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head: Vec<u64> = lines
            .next()
            .ok_or_else(|| LatticeError::Parse("empty code file".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|e| LatticeError::Parse(format!("header: {e}")))
            })
            .collect::<Result<_>>()?;
        let [p, n, k] = head[..] else {
            return Err(LatticeError::Parse("header must be `p n k`".into()));
        };
        let mut rows = Vec::with_capacity(k as usize);
        for i in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| LatticeError::Parse(format!("missing row {i}")))?;
            let row: Vec<u64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<u64>()
                        .map_err(|e| LatticeError::Parse(format!("row {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() as u64 != n {
                return Err(LatticeError::Parse(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if lines.next().is_some() {
            return Err(LatticeError::Parse("trailing rows after generator".into()));
        }
        LinearCode::new(p, rows)
    }
}

impl fmt::Display for LinearCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.p, self.n, self.k)?;
        for row in &self.generator {
            let s: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(f, "{}", s.join(" "))?;
        }
        Ok(())
    }
}

/// Basis of `aΛ_C`: the rows of the reduced generator together with `p·e_j`
/// for every non-pivot column `j`, all scaled by `a`. Volume `aⁿp^{n−k}`.
pub fn lift(code: &LinearCode, scale: f64) -> Result<Lattice> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(LatticeError::InvalidParameter(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let (rows, pivots) = rref(&code.generator, code.p);
    if rows.len() < code.k {
        return Err(LatticeError::RankDeficientCode {
            rank: rows.len(),
            k: code.k,
            p: code.p,
        });
    }
    let n = code.n;
    let mut b = DMatrix::zeros(n, n);
    for (j, row) in rows.iter().enumerate() {
        for i in 0..n {
            b[(i, j)] = scale * row[i] as f64;
        }
    }
    let mut col = rows.len();
    for j in (0..n).filter(|j| !pivots.contains(j)) {
        b[(j, col)] = scale * code.p as f64;
        col += 1;
    }
    let label = format!("modp(p={},n={},k={})*{}", code.p, n, code.k, scale);
    Lattice::new(b, &label)
}

/// Uniform `k×n` generator over `Z_p`, redrawn until it has rank `k`.
pub fn random_code(p: u64, n: usize, k: usize, seed: RngSeed) -> Result<LinearCode> {
    if !is_prime(p) {
        return Err(LatticeError::InvalidParameter(format!(
            "p = {p} is not prime"
        )));
    }
    if k == 0 || k > n {
        return Err(LatticeError::InvalidParameter(format!(
            "need 1 ≤ k ≤ n, got k = {k}, n = {n}"
        )));
    }
    let mut rng = seed.rng();
    for _ in 0..MAX_CODE_ATTEMPTS {
        let g: Vec<Vec<u64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(0..p)).collect())
            .collect();
        if rref(&g, p).0.len() == k {
            return Ok(LinearCode {
                p,
                n,
                k,
                generator: g,
            });
        }
    }
    Err(LatticeError::RandomnessExhausted(MAX_CODE_ATTEMPTS))
}

/// `(1+δ)·γ_Λ(σ)^{n/2}`.
pub fn theorem1_bound(lattice: &Lattice, sigma: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(LatticeError::InvalidParameter(format!(
            "δ must be nonnegative, got {delta}"
        )));
    }
    let gamma = analytics::gsnr(lattice, sigma)?;
    Ok((1.0 + delta) * gamma.powf(lattice.dim() as f64 / 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub sample_index: usize,
    pub code: LinearCode,
    pub scale: f64,
    pub report: FlatnessReport,
    /// `(1+δ)·γ^{n/2}`.
    pub bound: f64,
}

pub const ENSEMBLE_CSV_HEADER: &str = "sample_index,p,n,k,a,gsnr,epsilon,bound";

/// Draws `samples` random codes (sample `i` on stream `seed.stream_index + i`),
/// lifts each to `aΛ_C` and ranks them by flatness factor at `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_search(
    p: u64,
    n: usize,
    k: usize,
    scale: f64,
    sigma: f64,
    delta: f64,
    samples: usize,
    seed: RngSeed,
) -> Result<Vec<EnsembleEntry>> {
    let mut out: Vec<EnsembleEntry> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let code = random_code(
                p,
                n,
                k,
                seed.with_stream(seed.stream_index.wrapping_add(i as u64)),
            )?;
            let lattice = lift(&code, scale)?;
            let report = analytics::flatness(&lattice, sigma)?;
            let bound = theorem1_bound(&lattice, sigma, delta)?;
            Ok(EnsembleEntry {
                sample_index: i,
                code,
                scale,
                report,
                bound,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| {
        a.report
            .epsilon
            .total_cmp(&b.report.epsilon)
            .then(a.sample_index.cmp(&b.sample_index))
    });
    Ok(out)
}

pub fn ensemble_csv(entries: &[EnsembleEntry]) -> String {
    let mut s = String::from(ENSEMBLE_CSV_HEADER);
    s.push('\n');
    for e in entries {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.sample_index,
            e.code.p,
            e.code.n,
            e.code.k,
            e.scale,
            e.report.gsnr,
            e.report.epsilon,
            e.bound
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{standard_lattice, StandardLattice};

    #[test]
    fn repetition_code_gives_checkerboard() {
        let code = LinearCode::new(2, vec![vec![1, 1]]).unwrap();
        let l = lift(&code, 1.0).unwrap();
        assert!((l.volume() - 2.0).abs() < 1e-12);
        assert!(l.integer_coordinates(&[1.0, 1.0], 1e-9).is_some());
        assert!(l.integer_coordinates(&[1.0, 0.0], 1e-9).is_none());
    }

    #[test]
    fn full_code_is_scaled_integers() {
        let code = LinearCode::new(5, vec![vec![1, 2, 3], vec![0, 1, 4], vec![2, 0, 1]]).unwrap();
        let l = lift(&code, 0.5).unwrap();
        assert!((l.volume() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let err = LinearCode::new(3, vec![vec![1, 2, 0], vec![2, 1, 0]]).unwrap_err();
        assert!(matches!(
            err,
            LatticeError::RankDeficientCode {
                rank: 1,
                k: 2,
                p: 3
            }
        ));
        assert!(LinearCode::new(4, vec![vec![1, 0]]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let code = random_code(7, 6, 3, RngSeed::new(9, 0)).unwrap();
        assert_eq!(LinearCode::from_text(&code.to_text()).unwrap(), code);
        assert!(code.to_text().starts_with("7 6 3\n"));
    }

    #[test]
    fn random_codes_are_reproducible() {
        let a = random_code(3, 5, 2, RngSeed::new(1, 4)).unwrap();
        let b = random_code(3, 5, 2, RngSeed::new(1, 4)).unwrap();
        assert_eq!(a, b);
        assert!(random_code(3, 2, 3, RngSeed::new(1, 4)).is_err());
    }

    #[test]
    fn bound_arithmetic() {
        // γ = 0.25 at n = 4: V^{1/2} = 2πσ²·0.25
        let z4 = standard_lattice(StandardLattice::Zn(4)).unwrap();
        let sigma = (1.0 / (2.0 * std::f64::consts::PI * 0.25)).sqrt();
        assert!((theorem1_bound(&z4, sigma, 0.01).unwrap() - 0.063125).abs() < 1e-12);
    }

    #[test]
    fn ensemble_is_sorted() {
        let r = ensemble_search(3, 4, 2, 1.0, 0.8, 1.0, 6, RngSeed::new(2, 0)).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r
            .windows(2)
            .all(|w| w[0].report.epsilon <= w[1].report.epsilon));
        let csv = ensemble_csv(&r);
        assert!(csv.starts_with("sample_index,p,n,k,a,gsnr,epsilon,bound\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
