use std::collections::HashMap;
use std::f64::consts::PI;

use crate::enumerate::{self, CompensatedSum};
use crate::error::{LatticeError, Result};
use crate::lattice::{Lattice, LatticePoint, Shift};

use super::{lex_min, MapDecision, MAP_TIE_REL};

/// Support listed point by point, sorted by norm then coefficients.
#[derive(Debug, Clone)]
pub(crate) struct Enumerated {
    pub points: Vec<LatticePoint>,
    /// Probabilities conditional on the support (sum to 1).
    pub probs: Vec<f64>,
    cdf: Vec<f64>,
    index: HashMap<Vec<i64>, usize>,
}

pub(crate) struct EnumeratedBuild {
    pub support: Enumerated,
    pub radius: f64,
    pub deficit: f64,
}

pub(crate) fn build(
    lattice: &Lattice,
    sigma0: f64,
    shift: &Shift,
    deficit_target: f64,
    node_cap: u64,
) -> Result<EnumeratedBuild> {
    let n = lattice.dim();
    let tau = 1.0 / (2.0 * PI * sigma0 * sigma0);
    let rp = lattice.packing_radius_lower();
    let mut radius = (2.0 * PI * n as f64).sqrt() * sigma0;
    for _ in 0..200 {
        let estimate =
            enumerate::unit_ball_volume(n) * (radius + 2.0 * rp).powi(n as i32) / lattice.volume();
        if estimate > node_cap as f64 {
            return Err(LatticeError::BudgetExceeded(format!(
                "about {estimate:.3e} support points within radius {radius:.4}"
            )));
        }
        let mut found: Vec<(f64, Vec<i64>)> = Vec::new();
        enumerate::for_each_in_ball(lattice.triangular(), &shift.c, radius, node_cap, |z, d2| {
            found.push((d2, z.to_vec()));
        })?;
        let mut z_in = CompensatedSum::default();
        for (d2, _) in &found {
            z_in.add((-PI * tau * d2).exp());
        }
        let z_in = z_in.value();
        let tail = enumerate::gaussian_tail_bound(n, rp, tau, radius, 0);
        let deficit = tail / (z_in + tail);
        if z_in > 0.0 && deficit < deficit_target {
            found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let mut points = Vec::with_capacity(found.len());
            let mut probs = Vec::with_capacity(found.len());
            for (d2, z) in found {
                let mut p = lattice.point(z);
                for (e, c) in p.embedding.iter_mut().zip(&shift.c) {
                    *e -= c;
                }
                points.push(p);
                probs.push((-PI * tau * d2).exp() / z_in);
            }
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            let total = *cdf.last().unwrap();
            cdf.iter_mut().for_each(|c| *c /= total);
            let index = points
                .iter()
                .enumerate()
                .map(|(i, p)| (p.coeffs.clone(), i))
                .collect();
            return Ok(EnumeratedBuild {
                support: Enumerated {
                    points,
                    probs,
                    cdf,
                    index,
                },
                radius,
                deficit,
            });
        }
        radius *= 1.1;
    }
    Err(LatticeError::BudgetExceeded(
        "support radius did not converge".into(),
    ))
}

impl Enumerated {
    pub(crate) fn draw_index(&self, u: f64) -> usize {
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    pub(crate) fn conditional_probability(&self, coeffs: &[i64]) -> f64 {
        self.index.get(coeffs).map_or(0.0, |&i| self.probs[i])
    }

    pub(crate) fn second_moment(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for (p, pr) in self.points.iter().zip(&self.probs) {
            acc.add(pr * p.embedding.iter().map(|v| v * v).sum::<f64>());
        }
        acc.value()
    }

    pub(crate) fn entropy(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for &p in &self.probs {
            if p > 0.0 {
                acc.add(-p * p.ln());
            }
        }
        acc.value()
    }

    pub(crate) fn max_norm_sq(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.embedding.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn mass_outside(&self, radius: f64) -> f64 {
        let r2 = radius * radius;
        let mut acc = CompensatedSum::default();
        for (p, pr) in self.points.iter().zip(&self.probs) {
            if p.embedding.iter().map(|v| v * v).sum::<f64>() > r2 {
                acc.add(*pr);
            }
        }
        acc.value()
    }

    /// Exhaustive posterior maximization over the listed support.
    pub(crate) fn map_decode(&self, y: &[f64], sigma0: f64, sigma: f64) -> MapDecision {
        let metric = |x: &[f64]| -> f64 {
            let mut a = 0.0;
            let mut b = 0.0;
            for (xi, yi) in x.iter().zip(y) {
                a += (yi - xi) * (yi - xi);
                b += xi * xi;
            }
            -a / (2.0 * sigma * sigma) - b / (2.0 * sigma0 * sigma0)
        };
        let metrics: Vec<f64> = self.points.iter().map(|p| metric(&p.embedding)).collect();
        let mut best = 0;
        for (i, m) in metrics.iter().enumerate() {
            if *m > metrics[best] {
                best = i;
            }
        }
        let top = metrics[best];
        let tol = MAP_TIE_REL * top.abs().max(1.0);
        let runner = metrics
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, m)| *m)
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = top - runner;
        if margin > tol {
            return MapDecision {
                point: self.points[best].clone(),
                tie: false,
                margin,
            };
        }
        let tied: Vec<&LatticePoint> = self
            .points
            .iter()
            .zip(&metrics)
            .filter(|(_, m)| **m >= top - tol)
            .map(|(p, _)| p)
            .collect();
        MapDecision {
            point: lex_min(tied.into_iter().cloned()),
            tie: true,
            margin,
        }
    }
}
