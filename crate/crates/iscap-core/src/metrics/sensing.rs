//! Range-velocity sidelobe bound (aISPLD upper bound).
//!
//! For power vector `p` and mean vector `μ` the bound is
//! `−M(K_G M − 1)·1ᵀp + Σ_{(r,v)≠(0,0)} sqrt(g_{r,v}(p) + g_2(μ))` with
//! `g_{r,v}(p) = M²δ(v)|Σ_k f_{r,k}(p_k + p_{k+K})|² + 2M‖p‖²` and
//! `g_2(μ) = −2M Σ μ_k⁴`.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{expect_len, Error, Result};
use crate::signal::{f_row, OfdmConfig};

static CLAMPED_RADICANDS: AtomicUsize = AtomicUsize::new(0);

/// Number of slightly negative radicands clamped to zero so far.
pub fn clamped_radicand_count() -> usize {
    CLAMPED_RADICANDS.load(Ordering::Relaxed)
}

const RADICAND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SensingGrid {
    pub k: usize,
    pub k_g: usize,
    pub m: usize,
    /// `(r, v)` pairs, excluding `(0, 0)`.
    pub cells: Vec<(usize, i64)>,
    /// `f_r` rows for `r = 0..K_G`.
    rows: Vec<Vec<Complex64>>,
}

impl SensingGrid {
    pub fn new(cfg: &OfdmConfig) -> Self {
        let m = cfg.m as i64;
        let v_lo = -(m / 2);
        let mut cells = Vec::with_capacity(cfg.k_g * cfg.m);
        for r in 0..cfg.k_g {
            for v in v_lo..v_lo + m {
                if (r, v) != (0, 0) {
                    cells.push((r, v));
                }
            }
        }
        let rows = (0..cfg.k_g).map(|r| f_row(r as i64, cfg.k)).collect();
        Self { k: cfg.k, k_g: cfg.k_g, m: cfg.m, cells, rows }
    }

    pub fn dim(&self) -> usize {
        2 * self.k
    }

    /// Coefficient of the peak lobe, `M(K_G M − 1)`.
    pub fn peak_coeff(&self) -> f64 {
        self.m as f64 * (self.k_g * self.m) as f64 - self.m as f64
    }

    /// `(f^R_{r,0}, f^I_{r,0})`, the composite vectors of a zero-velocity cell.
    pub fn zero_velocity_vectors(&self, r: usize) -> (DVector<f64>, DVector<f64>) {
        let m = self.m as f64;
        let f = &self.rows[r];
        let re = DVector::from_iterator(2 * self.k, f.iter().chain(f).map(|c| m * c.re));
        let im = DVector::from_iterator(2 * self.k, f.iter().chain(f).map(|c| m * c.im));
        (re, im)
    }

    /// `F^R_{r,v} + F^I_{r,v}`; zero unless `v = 0`.
    pub fn cell_gram(&self, r: usize, v: i64) -> DMatrix<f64> {
        if v != 0 {
            return DMatrix::zeros(self.dim(), self.dim());
        }
        let (re, im) = self.zero_velocity_vectors(r);
        &re * re.transpose() + &im * im.transpose()
    }

    /// Coherent zero-velocity part of every radicand,
    /// `M²δ(v)|Σ_k f_{r,k}(p_k + p_{k+K})|²`, in cell order.
    pub fn coherent_terms(&self, p: &[f64]) -> Vec<f64> {
        let k = self.k;
        let m = self.m as f64;
        let comb: Vec<f64> = (0..k).map(|i| p[i] + p[i + k]).collect();
        let coherent: Vec<f64> = self
            .rows
            .iter()
            .map(|f| f.iter().zip(&comb).map(|(c, &q)| c * q).sum::<Complex64>().norm_sqr())
            .collect();
        self.cells
            .iter()
            .map(|&(r, v)| if v == 0 { m * m * coherent[r] } else { 0.0 })
            .collect()
    }

    /// `g_{r,v}(p)` in cell order.
    pub fn power_terms(&self, p: &[f64]) -> Vec<f64> {
        let common = 2.0 * self.m as f64 * p.iter().map(|x| x * x).sum::<f64>();
        self.coherent_terms(p).into_iter().map(|c| c + common).collect()
    }

    /// `Σ sqrt(coherent + common)` with the clamp rule; `scale` is the size
    /// of the positive part the tolerance is measured against.
    fn sqrt_sum(&self, coherent: &[f64], common: f64, scale: f64) -> Result<f64> {
        let mut total = 0.0;
        for (&(r, v), &c) in self.cells.iter().zip(coherent) {
            let rad = c + common;
            if rad >= 0.0 {
                total += rad.sqrt();
            } else if rad >= -RADICAND_TOL * (c + scale).max(f64::MIN_POSITIVE) {
                CLAMPED_RADICANDS.fetch_add(1, Ordering::Relaxed);
            } else {
                return Err(Error::NegativeRadicand { r, v, value: rad });
            }
        }
        Ok(total)
    }
}

/// Sidelobe bound of a distribution given by its power and mean vectors.
pub fn ub_fap(p: &[f64], mu: &[f64], grid: &SensingGrid) -> Result<f64> {
    expect_len(grid.dim(), p.len())?;
    expect_len(grid.dim(), mu.len())?;
    for (i, (&pk, &mk)) in p.iter().zip(mu).enumerate() {
        if pk < mk * mk * (1.0 - 1e-12) - 1e-300 {
            return Err(Error::InvalidInput(format!("power {pk:e} below squared mean at entry {i}")));
        }
    }
    // ‖p‖² − Σμ⁴ factored so that all-mean inputs cancel exactly.
    let m = grid.m as f64;
    let gap: f64 = p.iter().zip(mu).map(|(&pk, &mk)| (pk - mk * mk) * (pk + mk * mk)).sum();
    let norm2: f64 = p.iter().map(|x| x * x).sum();
    let coherent = grid.coherent_terms(p);
    let total: f64 = p.iter().sum();
    Ok(-grid.peak_coeff() * total + grid.sqrt_sum(&coherent, 2.0 * m * gap, 2.0 * m * norm2)?)
}

/// Matrix form: `−M(K_G M − 1) Tr(P) + Σ sqrt(g̃_{r,v}(P) + g̃_2(U))`, with
/// `g̃_2(U) = −2M‖diag U‖²`.
pub fn ub_fap_matrix(p: &DMatrix<f64>, u: &DMatrix<f64>, grid: &SensingGrid) -> Result<f64> {
    let d = grid.dim();
    if p.nrows() != d || u.nrows() != d || p.ncols() != d || u.ncols() != d {
        return Err(Error::LengthMismatch { expected: d, got: p.nrows() });
    }
    let pd: Vec<f64> = p.diagonal().iter().copied().collect();
    let ud2: f64 = u.diagonal().iter().map(|x| x * x).sum();
    let pd2: f64 = pd.iter().map(|x| x * x).sum();
    let m = grid.m as f64;
    let coherent = grid.coherent_terms(&pd);
    Ok(-grid.peak_coeff() * p.trace() + grid.sqrt_sum(&coherent, 2.0 * m * (pd2 - ud2), 2.0 * m * pd2)?)
}

/// `UB / (M(K_G M − 1)·1ᵀp)`; uniform all-mean inputs map to `−1`.
pub fn normalized_ub(ub: f64, total_power: f64, grid: &SensingGrid) -> f64 {
    let denom = grid.peak_coeff() * total_power;
    if denom > 0.0 {
        ub / denom
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::GaussianInput;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(k: usize, k_g: usize, m: usize) -> SensingGrid {
        SensingGrid::new(&OfdmConfig::new(k, k_g, m, 1.0, 1.0).unwrap())
    }

    #[test]
    fn grid_excludes_origin() {
        let g = grid(8, 4, 16);
        assert_eq!(g.cells.len(), 63);
        assert!(!g.cells.contains(&(0, 0)));
        assert!(g.cells.contains(&(0, -8)) && g.cells.contains(&(3, 7)));
    }

    #[test]
    fn zero_input() {
        let g = grid(4, 2, 2);
        assert_eq!(ub_fap(&[0.0; 8], &[0.0; 8], &g).unwrap(), 0.0);
    }

    #[test]
    fn uniform_all_mean_is_the_floor() {
        let g = grid(8, 4, 16);
        let p = vec![0.25; 16];
        let mu = vec![0.5; 16];
        let ub = ub_fap(&p, &mu, &g).unwrap();
        assert_relative_eq!(normalized_ub(ub, 4.0, &g), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_form_agrees() {
        let g = grid(4, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mu: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sigma: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
            let input = GaussianInput::new(mu, sigma).unwrap();
            let a = input.allocation();
            let v = ub_fap(&input.power(), &input.mu, &g).unwrap();
            let w = ub_fap_matrix(&a.p, &a.u, &g).unwrap();
            assert!((v - w).abs() <= 1e-9 * v.abs().max(1.0));
            let z = DMatrix::zeros(8, 8);
            let pd: Vec<f64> = a.p.diagonal().iter().copied().collect();
            let expect: f64 = g.power_terms(&pd).iter().map(|x| x.sqrt()).sum::<f64>() - g.peak_coeff() * a.p.trace();
            assert_relative_eq!(ub_fap_matrix(&a.p, &z, &g).unwrap(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn rank_one_diag_term() {
        let mu = DVector::from_vec(vec![0.3, -1.2, 0.7, 2.0]);
        let u = &mu * mu.transpose();
        let m = 4.0;
        let g2_matrix = -2.0 * m * u.diagonal().iter().map(|x| x * x).sum::<f64>();
        let g2 = -2.0 * m * mu.iter().map(|x| x.powi(4)).sum::<f64>();
        assert_relative_eq!(g2_matrix, g2, max_relative = 1e-14);
    }

    #[test]
    fn rejects_mean_above_power() {
        let g = grid(2, 1, 2);
        assert!(ub_fap(&[1.0, 0.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0], &g).is_err());
    }
}
