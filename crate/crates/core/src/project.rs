//! Gaussian random projection.
//!
//! A projection operator holds a `d x p` matrix `A` with i.i.d. `N(0, sigma_A^2)`
//! entries. Down-projection is `(1/sqrt(p)) A^T v`, up-projection is `A w`.
//! The identity operator stands in for variants that skip projection.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    Gaussian,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    mode: ProjectionMode,
    /// Row-major `d x p`; empty in identity mode.
    matrix: Vec<f64>,
    d: usize,
    p: usize,
    sigma_a: f64,
}

impl ProjectionOperator {
    pub fn identity(d: usize) -> Self {
        Self { mode: ProjectionMode::Identity, matrix: Vec::new(), d, p: d, sigma_a: 1.0 }
    }

    /// Wraps an explicit row-major `d x p` matrix.
    pub fn from_matrix(d: usize, p: usize, matrix: Vec<f64>, sigma_a: f64) -> Result<Self> {
        check_dims(d, p, sigma_a)?;
        if matrix.len() != d * p {
            return config(format!("matrix has {} entries, expected {}x{}", matrix.len(), d, p));
        }
        if matrix.iter().any(|a| !a.is_finite()) {
            return config("projection matrix has non-finite entries");
        }
        Ok(Self { mode: ProjectionMode::Gaussian, matrix, d, p, sigma_a })
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn target_dim(&self) -> usize {
        self.p
    }

    pub fn sigma_a(&self) -> f64 {
        self.sigma_a
    }

    /// Row-major entries, empty for the identity operator.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// `(1/sqrt(p)) A^T v`.
    pub fn project_down(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.d {
            return config(format!("project_down expects length {}, got {}", self.d, v.len()));
        }
        if self.mode == ProjectionMode::Identity {
            return Ok(v.to_vec());
        }
        let mut out = vec![0.0; self.p];
        for (row, &vi) in self.matrix.chunks_exact(self.p).zip(v) {
            out.iter_mut().zip(row).for_each(|(o, a)| *o += a * vi);
        }
        let scale = 1.0 / (self.p as f64).sqrt();
        out.iter_mut().for_each(|o| *o *= scale);
        Ok(out)
    }

    /// `A w`.
    pub fn project_up(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.p {
            return config(format!("project_up expects length {}, got {}", self.p, w.len()));
        }
        if self.mode == ProjectionMode::Identity {
            return Ok(w.to_vec());
        }
        Ok(self.matrix.chunks_exact(self.p).map(|row| crate::model::dot(row, w)).collect())
    }
}

fn check_dims(d: usize, p: usize, sigma_a: f64) -> Result<()> {
    if p == 0 || p > d {
        return config(format!("target dimension p={p} must satisfy 1 <= p <= d={d}"));
    }
    if !(sigma_a.is_finite() && sigma_a > 0.0) {
        return config(format!("sigma_A must be positive, got {sigma_a}"));
    }
    Ok(())
}

/// Draws a fresh `d x p` Gaussian operator from `rng`.
pub fn sample_operator<R: Rng + ?Sized>(d: usize, p: usize, sigma_a: f64, rng: &mut R) -> Result<ProjectionOperator> {
    check_dims(d, p, sigma_a)?;
    let matrix = (0..d * p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma_a * z
        })
        .collect();
    Ok(ProjectionOperator { mode: ProjectionMode::Gaussian, matrix, d, p, sigma_a })
}

/// Target dimension for a reduction rate `r` in `[0, 1)`: `max(1, round((1-r) d))`.
pub fn reduced_dim(d: usize, reduction_rate: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&reduction_rate) {
        return config(format!("reduction rate must lie in [0, 1), got {reduction_rate}"));
    }
    Ok((((1.0 - reduction_rate) * d as f64).round() as usize).clamp(1, d.max(1)))
}

/// Smallest integer strictly greater than `8 ln(m) / zeta^2`.
pub fn jl_min_dim(m: u64, zeta: f64) -> Result<usize> {
    if m < 2 {
        return config("need at least two points");
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return config(format!("distortion zeta must lie in (0, 1), got {zeta}"));
    }
    let bound = 8.0 * (m as f64).ln() / (zeta * zeta);
    Ok(bound.floor() as usize + 1)
}

/// Fraction of point pairs whose squared distance after `project_down` stays
/// within `[(1-zeta), (1+zeta)]` times the original.
pub fn distortion_report(points: &[Vec<f64>], op: &ProjectionOperator, zeta: f64) -> Result<f64> {
    if points.len() < 2 {
        return config("distortion report needs at least two points");
    }
    let projected = points.iter().map(|p| op.project_down(p)).collect::<Result<Vec<_>>>()?;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut within = 0usize;
    let mut total = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let orig = sq(&points[i], &points[j]);
            let proj = sq(&projected[i], &projected[j]);
            total += 1;
            if (1.0 - zeta) * orig <= proj && proj <= (1.0 + zeta) * orig {
                within += 1;
            }
        }
    }
    Ok(within as f64 / total as f64)
}
