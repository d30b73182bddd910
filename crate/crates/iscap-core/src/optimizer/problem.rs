//! Normalized problem data shared by the ADMM blocks.
//!
//! Powers are measured in units of `P_max` and the objective in units of
//! `zDC` at the uniform zero-mean allocation, so the step size `ρ` and all
//! tolerances are dimensionless.

use nalgebra::{DMatrix, DVector};

use super::objective::Objective;
use super::Family;
use crate::metrics::powering::{PoweringCoefficients, RectennaModel};
use crate::metrics::rate::{project_rate_set, rate_from_gains};
use crate::metrics::sensing::SensingGrid;

#[derive(Debug, Clone)]
pub struct Problem {
    pub obj: Objective,
    pub grid: SensingGrid,
    /// Composite rate gains in normalized power units.
    pub gains: Vec<f64>,
    pub c_min: f64,
    /// Coefficient `c` of the internal constraint `Σ sqrt(·) − c·Tr(P) ≤ 0`.
    pub sensing_coeff: f64,
    pub s_max: f64,
    pub family: Family,
    pub power_scale: f64,
    pub value_scale: f64,
}

impl Problem {
    pub fn new(
        coeffs: &PoweringCoefficients,
        rect: &RectennaModel,
        grid: &SensingGrid,
        physical_gains: &[f64],
        p_max: f64,
        c_min: f64,
        s_max: f64,
        family: Family,
    ) -> Self {
        let dim = coeffs.dim();
        let base = Objective::new(coeffs, rect);
        let uniform = DMatrix::identity(dim, dim) * (p_max / dim as f64);
        let zero = DMatrix::zeros(dim, dim);
        let value_scale = base.value(&uniform, &zero).max(f64::MIN_POSITIVE);
        Self {
            obj: Objective::scaled(coeffs, rect, p_max, value_scale),
            grid: grid.clone(),
            gains: physical_gains.iter().map(|g| g * p_max).collect(),
            c_min,
            sensing_coeff: (1.0 + s_max) * grid.peak_coeff(),
            s_max,
            family,
            power_scale: p_max,
            value_scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.obj.dim()
    }

    pub fn k(&self) -> usize {
        self.dim() / 2
    }

    pub fn rate(&self, sigma: &[f64]) -> f64 {
        rate_from_gains(sigma, &self.gains)
    }

    /// `Σ sqrt(g̃_{r,v}(p) − 2M·d2) − c·1ᵀp`, radicands clamped at zero.
    pub fn sensing_excess(&self, p: &[f64], diag_sq: f64) -> f64 {
        let m = self.grid.m as f64;
        let s: f64 = self
            .grid
            .power_terms(p)
            .iter()
            .map(|g| (g - 2.0 * m * diag_sq).max(0.0).sqrt())
            .sum();
        s - self.sensing_coeff * p.iter().sum::<f64>()
    }

    /// Projection of `t` onto the family's variance set with the rate
    /// constraint.
    pub fn project_sigma(&self, t: &[f64]) -> Vec<f64> {
        let k = self.k();
        match self.family {
            Family::Opt => project_rate_set(t, &self.gains, &vec![1.0; 2 * k], self.c_min),
            Family::Symmetric | Family::Cscg | Family::Coexist => {
                let avg: Vec<f64> = (0..k).map(|i| 0.5 * (t[i] + t[i + k])).collect();
                let s = project_rate_set(&avg, &self.gains[..k], &vec![1.0; k], self.c_min);
                s.iter().chain(&s).copied().collect()
            }
        }
    }

    /// Maps a symmetric matrix onto the family's mean-matrix subspace.
    pub fn restrict_u(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.k();
        match self.family {
            Family::Opt => m.clone(),
            Family::Symmetric => {
                let x = block_average(m, k);
                lift(&x, k)
            }
            Family::Cscg | Family::Coexist => DMatrix::zeros(2 * k, 2 * k),
        }
    }
}

/// `(1/4) Tᵀ M T` with `T = [I; I]`.
pub fn block_average(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        0.25 * (m[(i, j)] + m[(i + k, j)] + m[(i, j + k)] + m[(i + k, j + k)])
    })
}

/// `T X Tᵀ`.
pub fn lift(x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * k, 2 * k, |i, j| x[(i % k, j % k)])
}

pub fn diag_of(m: &DMatrix<f64>) -> Vec<f64> {
    m.diagonal().iter().copied().collect()
}

pub fn with_diag_added(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    m + DMatrix::from_diagonal(&DVector::from_column_slice(d))
}
