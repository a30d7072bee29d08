//! Lattices generated by the columns of a square basis matrix, exact
//! closest-point decoding, reduction modulo the lattice, and a few standard
//! lattices used as fixtures.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::enumerate::{self, Triangular};
use crate::error::{LatticeError, Result};

/// Default node budget for closest-point searches.
pub const DEFAULT_NODE_CAP: u64 = 100_000_000;
/// Largest dimension handled by exact enumeration.
pub const MAX_DIM: usize = 32;

const RANK_TOL: f64 = 1e-12;

/// A full-rank lattice `{Bz : z ∈ Zⁿ}`; basis vectors are the columns of `B`.
#[derive(Debug, Clone)]
pub struct Lattice {
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    inverse: DMatrix<f64>,
    volume: f64,
    label: String,
    tri: Triangular,
    node_cap: u64,
}

/// A lattice (or coset) point: integer coordinates and their embedding.
///
/// For a point of the coset `L − c`, `coeffs` are the coordinates of the
/// underlying lattice point and `embedding = B·coeffs − c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub coeffs: Vec<i64>,
    pub embedding: Vec<f64>,
}

/// Shift `c` defining the codebook `L − c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub c: Vec<f64>,
}

impl Shift {
    pub fn new(c: Vec<f64>) -> Self {
        Shift { c }
    }

    pub fn zero(n: usize) -> Self {
        Shift { c: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }
}

/// Named lattices with fixed, documented bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardLattice {
    /// The integer lattice with identity basis.
    Zn(usize),
    /// The checkerboard lattice `{z ∈ Zⁿ : Σz even}`, basis
    /// `(−1,−1,0,…)`, `(1,−1,0,…)`, `(0,1,−1,0,…)`, …; volume 2.
    Dn(usize),
    /// Gosset lattice `D8 ∪ (D8 + ½·1)`; volume 1.
    E8,
    /// Hexagonal lattice with basis `(1,0)`, `(½,√3/2)`; volume √3/2.
    A2,
}

impl FromStr for StandardLattice {
    type Err = LatticeError;

    /// Parses `Z<n>`, `D<n>`, `E8`, `A2` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let dim = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| LatticeError::UnknownName(s.to_string()))
        };
        match t.as_str() {
            "E8" => Ok(StandardLattice::E8),
            "A2" => Ok(StandardLattice::A2),
            _ if t.starts_with('Z') => Ok(StandardLattice::Zn(dim(&t[1..])?)),
            _ if t.starts_with('D') => Ok(StandardLattice::Dn(dim(&t[1..])?)),
            _ => Err(LatticeError::UnknownName(s.to_string())),
        }
    }
}

impl fmt::Display for StandardLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StandardLattice::Zn(n) => write!(f, "Z{n}"),
            StandardLattice::Dn(n) => write!(f, "D{n}"),
            StandardLattice::E8 => write!(f, "E8"),
            StandardLattice::A2 => write!(f, "A2"),
        }
    }
}

/// Builds a lattice from a square basis whose columns are the generators.
pub fn make_lattice(basis: DMatrix<f64>) -> Result<Lattice> {
    Lattice::new(basis, "custom")
}

/// Returns one of the named standard lattices.
pub fn standard_lattice(name: StandardLattice) -> Result<Lattice> {
    let label = name.to_string();
    let basis = match name {
        StandardLattice::Zn(n) => {
            if n == 0 {
                return Err(LatticeError::UnknownName(label));
            }
            DMatrix::identity(n, n)
        }
        StandardLattice::Dn(n) => {
            if n < 2 {
                return Err(LatticeError::UnknownName(label));
            }
            let mut b = DMatrix::zeros(n, n);
            b[(0, 0)] = -1.0;
            b[(1, 0)] = -1.0;
            for j in 1..n {
                b[(j - 1, j)] = 1.0;
                b[(j, j)] = -1.0;
            }
            b
        }
        StandardLattice::E8 => {
            let mut b = DMatrix::zeros(8, 8);
            b[(0, 0)] = 2.0;
            for j in 1..7 {
                b[(j - 1, j)] = -1.0;
                b[(j, j)] = 1.0;
            }
            for i in 0..8 {
                b[(i, 7)] = 0.5;
            }
            b
        }
        StandardLattice::A2 => {
            DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.5, 3f64.sqrt() / 2.0])
        }
    };
    Lattice::new(basis, &label)
}

impl Lattice {
    pub fn new(basis: DMatrix<f64>, label: &str) -> Result<Self> {
        let (rows, cols) = basis.shape();
        if rows != cols || rows == 0 {
            return Err(LatticeError::NotSquare { rows, cols });
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(LatticeError::InvalidParameter(
                "basis has non-finite entries".into(),
            ));
        }
        let col_norms: f64 = basis.column_iter().map(|c| c.norm()).product();
        let det = basis.determinant();
        if col_norms == 0.0 || det.abs() <= RANK_TOL * col_norms {
            return Err(LatticeError::SingularBasis {
                det: if col_norms == 0.0 {
                    0.0
                } else {
                    det.abs() / col_norms
                },
            });
        }
        let inverse = basis
            .clone()
            .try_inverse()
            .ok_or(LatticeError::SingularBasis { det: 0.0 })?;
        let gram = basis.transpose() * &basis;
        let tri = Triangular::from_basis(&basis);
        Ok(Lattice {
            gram,
            inverse,
            volume: det.abs(),
            label: label.to_string(),
            tri,
            basis,
            node_cap: DEFAULT_NODE_CAP,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `B⁻¹`, mapping embeddings back to (real) coordinates.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Fundamental volume `|det B|`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn node_cap(&self) -> u64 {
        self.node_cap
    }

    /// Sets the node budget used by closest-point searches.
    pub fn with_node_cap(mut self, cap: u64) -> Self {
        self.node_cap = cap;
        self
    }

    pub(crate) fn triangular(&self) -> &Triangular {
        &self.tri
    }

    /// Lower bound on the packing radius: half the smallest Gram–Schmidt length.
    pub fn packing_radius_lower(&self) -> f64 {
        0.5 * self.tri.min_diag()
    }

    /// The lattice `aΛ`.
    pub fn scaled(&self, a: f64) -> Result<Lattice> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(LatticeError::InvalidParameter(format!(
                "scale must be positive, got {a}"
            )));
        }
        let label = format!("{}*{}", self.label, a);
        Ok(Lattice::new(&self.basis * a, &label)?.with_node_cap(self.node_cap))
    }

    /// Rescales so that the fundamental volume equals `volume`.
    pub fn with_volume(&self, volume: f64) -> Result<Lattice> {
        if !(volume > 0.0) {
            return Err(LatticeError::InvalidParameter(format!(
                "volume must be positive, got {volume}"
            )));
        }
        self.scaled((volume / self.volume).powf(1.0 / self.dim() as f64))
    }

    /// Dual lattice with basis `B⁻ᵀ`.
    pub fn dual(&self) -> Lattice {
        let b = self.inverse.transpose();
        Lattice::new(b, &format!("dual({})", self.label))
            .expect("inverse of a nonsingular basis is nonsingular")
            .with_node_cap(self.node_cap)
    }

    pub fn embed(&self, coeffs: &[i64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.basis[(i, j)] * coeffs[j] as f64).sum())
            .collect()
    }

    pub fn point(&self, coeffs: Vec<i64>) -> LatticePoint {
        let embedding = self.embed(&coeffs);
        LatticePoint { coeffs, embedding }
    }

    /// Real coordinates `B⁻¹x`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.inverse * DVector::from_column_slice(x);
        v.iter().copied().collect()
    }

    /// Integer coordinates of `x` if it is a lattice point within `tol`
    /// (maximum distance of `B⁻¹x` to the nearest integer vector).
    pub fn integer_coordinates(&self, x: &[f64], tol: f64) -> Option<Vec<i64>> {
        let u = self.coordinates(x);
        if u.iter().all(|v| (v - v.round()).abs() <= tol) {
            Some(u.iter().map(|v| v.round() as i64).collect())
        } else {
            None
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(LatticeError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    fn sq_dist(&self, coeffs: &[i64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut d = 0.0;
        for i in 0..n {
            let mut s = -y[i];
            for j in 0..n {
                s += self.basis[(i, j)] * coeffs[j] as f64;
            }
            d += s * s;
        }
        d
    }

    /// Exact nearest lattice point to `y`; ties go to the lexicographically
    /// smallest coefficient vector.
    pub fn closest_point(&self, y: &[f64]) -> Result<LatticePoint> {
        self.check_len(y.len())?;
        if self.dim() > MAX_DIM {
            return Err(LatticeError::DimensionTooLarge {
                dim: self.dim(),
                max: MAX_DIM,
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LatticeError::InvalidParameter(
                "target has non-finite entries".into(),
            ));
        }
        let found = enumerate::closest_candidates(&self.tri, y, self.node_cap)?;
        let coeffs = if found.candidates.len() == 1 {
            found.candidates.into_iter().next().unwrap()
        } else {
            let dists: Vec<f64> = found
                .candidates
                .iter()
                .map(|z| self.sq_dist(z, y))
                .collect();
            let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let limit = best * (1.0 + enumerate::TIE_REL) + 1e-300;
            found
                .candidates
                .into_iter()
                .zip(dists)
                .filter(|(_, d)| *d <= limit)
                .map(|(z, _)| z)
                .min()
                .expect("search always finds a point")
        };
        Ok(self.point(coeffs))
    }

    /// `x mod Λ = x − Q_Λ(x)`.
    pub fn mod_lattice(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.closest_point(x)?;
        Ok(x.iter().zip(&q.embedding).map(|(a, b)| a - b).collect())
    }

    /// Nearest point of the coset `L − c` to `y`.
    pub fn coset_decode(&self, c: &Shift, y: &[f64]) -> Result<LatticePoint> {
        self.check_len(c.dim())?;
        self.check_len(y.len())?;
        let shifted: Vec<f64> = y.iter().zip(&c.c).map(|(a, b)| a + b).collect();
        let mut p = self.closest_point(&shifted)?;
        for (e, ci) in p.embedding.iter_mut().zip(&c.c) {
            *e -= ci;
        }
        Ok(p)
    }

    /// Plain-text basis: first line `n`, then `n` rows of `n` numbers where row
    /// `i` holds the `i`-th coordinate of every basis vector.
    pub fn to_text(&self) -> String {
        let n = self.dim();
        let mut out = format!("{n}\n");
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{:e}", self.basis[(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Lattice> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| LatticeError::Parse("empty basis file".into()))?
            .parse()
            .map_err(|e| LatticeError::Parse(format!("dimension line: {e}")))?;
        if n == 0 {
            return Err(LatticeError::Parse("dimension must be positive".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| LatticeError::Parse(format!("missing row {i}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| LatticeError::Parse(format!("row {i}: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(LatticeError::Parse(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        if lines.next().is_some() {
            return Err(LatticeError::Parse("trailing rows after basis".into()));
        }
        make_lattice(DMatrix::from_row_slice(n, n, &data))
    }
}
