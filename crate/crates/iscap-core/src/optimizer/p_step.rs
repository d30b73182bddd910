//! `P` block: SCA on the objective and on the sensing bound, with the
//! diagonal found from the KKT system and a bisection on the sensing
//! multiplier.

use nalgebra::{DMatrix, DVector};

use super::problem::{diag_of, Problem};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::metrics::sensing::SensingGrid;

const ZERO_RADICAND_SHIFT: f64 = 1e-10;

/// Tangent majorizer of the sensing bound at an operating point:
/// `alpha − c·1ᵀp + pᵀ Q p`, `Q = Σ (F_{r,v} + 2M I)/α_{r,v}`.
#[derive(Debug, Clone)]
pub struct UbSurrogate {
    pub alpha: f64,
    pub alpha_rv: Vec<f64>,
    pub quad: DMatrix<f64>,
    pub coeff: f64,
}

impl UbSurrogate {
    pub fn eval(&self, p: &[f64]) -> f64 {
        let v = DVector::from_column_slice(p);
        self.alpha - self.coeff * v.sum() + v.dot(&(&self.quad * &v))
    }
}

fn radicands(p: &[f64], diag_sq: f64, grid: &SensingGrid) -> Vec<f64> {
    let m = grid.m as f64;
    grid.power_terms(p).iter().map(|g| g - 2.0 * m * diag_sq).collect()
}

/// Linearization of `Σ sqrt(g̃_{r,v}(P) + g̃_2(U)) − c·Tr(P)` in `P` at
/// `p_op` for fixed `U`.
pub fn linearize_with(p_op: &DMatrix<f64>, u_fixed: &DMatrix<f64>, grid: &SensingGrid, coeff: f64) -> UbSurrogate {
    let dim = grid.dim();
    let diag_sq: f64 = u_fixed.diagonal().iter().map(|x| x * x).sum();
    let mut p = diag_of(p_op);
    let mut rad = radicands(&p, diag_sq, grid);
    if rad.iter().any(|&r| r <= 0.0) {
        p.iter_mut().for_each(|x| *x += ZERO_RADICAND_SHIFT);
        rad = radicands(&p, diag_sq, grid);
    }
    let m = grid.m as f64;
    let floor = 1e-12 * 2.0 * m * p.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let alpha_rv: Vec<f64> = rad.iter().map(|&r| 2.0 * r.max(floor).sqrt()).collect();
    let g2 = -2.0 * m * diag_sq;
    let power = grid.power_terms(&p);
    let alpha = power.iter().zip(&alpha_rv).map(|(g, a)| (g + 2.0 * g2) / a).sum();
    let mut quad = DMatrix::identity(dim, dim) * (2.0 * m * alpha_rv.iter().map(|a| 1.0 / a).sum::<f64>());
    for (&(r, v), a) in grid.cells.iter().zip(&alpha_rv) {
        if v == 0 {
            quad += grid.cell_gram(r, 0) / *a;
        }
    }
    UbSurrogate { alpha, alpha_rv, quad, coeff }
}

/// Linearization of the unnormalized bound itself.
pub fn linearize_ub(p_op: &DMatrix<f64>, u_fixed: &DMatrix<f64>, grid: &SensingGrid) -> UbSurrogate {
    linearize_with(p_op, u_fixed, grid, grid.peak_coeff())
}

/// Diagonal of the `P` block for fixed sensing multiplier `u2`, with the
/// power border applied when the unconstrained point exceeds the budget.
fn diag_at(u2: f64, g: &[f64], w: &[f64], rho: f64, sur: &UbSurrogate, p_max: f64) -> Vec<f64> {
    let n = g.len();
    let q = DMatrix::identity(n, n) * rho + &sur.quad * (2.0 * u2);
    let b = DVector::from_fn(n, |i, _| g[i] + rho * w[i] + u2 * sur.coeff);
    let chol = q.cholesky().expect("stationarity matrix is positive definite");
    let mut x = chol.solve(&b);
    let total = x.sum();
    if total > p_max {
        let y = chol.solve(&DVector::from_element(n, 1.0));
        let u1 = (total - p_max) / y.sum();
        x -= y * u1;
    }
    x.iter().copied().collect()
}

fn solve_diag(g: &[f64], w: &[f64], sur: &UbSurrogate, cfg: &SolverConfig) -> Result<(Vec<f64>, f64)> {
    let (rho, p_max) = (cfg.rho, 1.0);
    let h = |u2: f64| {
        let p = diag_at(u2, g, w, rho, sur, p_max);
        (sur.eval(&p), p)
    };
    let (h_lo, p_lo) = h(cfg.u2_lo);
    if h_lo <= 0.0 {
        return Ok((p_lo, cfg.u2_lo));
    }
    let (h_hi, mut p_hi) = h(cfg.u2_hi);
    if h_hi > 0.0 {
        return Err(Error::Infeasible(format!(
            "sensing multiplier bracket [{}, {}] does not straddle the bound",
            cfg.u2_lo, cfg.u2_hi
        )));
    }
    let (mut lo, mut hi) = (cfg.u2_lo, cfg.u2_hi);
    // Geometric shrink first: the multiplier can sit many decades below
    // the upper bracket end.
    while hi * 1e-2 > lo.max(1e-30) {
        let (hm, pm) = h(hi * 1e-2);
        if hm <= 0.0 {
            hi *= 1e-2;
            p_hi = pm;
        } else {
            lo = hi * 1e-2;
            break;
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (hm, pm) = h(mid);
        if hm <= 0.0 {
            hi = mid;
            p_hi = pm;
        } else {
            lo = mid;
        }
    }
    Ok((p_hi, hi))
}

#[derive(Debug, Clone)]
pub struct PStepOutput {
    pub p: DMatrix<f64>,
    pub sca_iters: usize,
    /// Value of `−zDC(P, U) + ρ/2‖P − W‖²` after each SCA iteration.
    pub trace: Vec<f64>,
    pub u2: f64,
}

/// Minimizes `−zDC(P, U) + ρ/2‖P − U − diag(σ) + V‖²` over
/// `{Tr P ≤ 1, sensing bound ≤ 0}` by SCA from `p_start`.
pub fn solve_p_step(
    prob: &Problem,
    u: &DMatrix<f64>,
    sigma: &[f64],
    v: &DMatrix<f64>,
    p_start: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<PStepOutput> {
    let n = prob.dim();
    let mut w = u - v;
    for i in 0..n {
        w[(i, i)] += sigma[i];
    }
    let w_diag = diag_of(&w);
    let rho = cfg.rho;
    let merit = |p: &DMatrix<f64>| -prob.obj.value(p, u) + 0.5 * rho * (p - &w).norm_squared();
    let mut p = p_start.clone();
    let mut trace = Vec::new();
    let mut u2 = 0.0;
    let mut iters = 0;
    for _ in 0..cfg.max_sca_iters {
        iters += 1;
        let g = prob.obj.grad_p(&p, u);
        let sur = linearize_with(&p, u, &prob.grid, prob.sensing_coeff);
        let (d, mult) = solve_diag(&diag_of(&g), &w_diag, &sur, cfg)?;
        u2 = mult;
        let mut next = &w + &g / rho;
        for i in 0..n {
            next[(i, i)] = d[i];
        }
        let step = (&next - &p).norm();
        p = next;
        trace.push(merit(&p));
        if step < cfg.eps0 * p.norm() {
            break;
        }
    }
    Ok(PStepOutput { p, sca_iters: iters, trace, u2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sensing::ub_fap_matrix;
    use crate::signal::{GaussianInput, OfdmConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut ChaCha8Rng, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let mu = (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sigma = (0..2 * k).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = GaussianInput::new(mu, sigma).unwrap().allocation();
        (a.p, a.u)
    }

    #[test]
    fn surrogate_is_tangent_and_majorizes() {
        let cfg = OfdmConfig::new(4, 2, 4, 1.0, 1.0).unwrap();
        let grid = SensingGrid::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (p0, u) = random_pair(&mut rng, 4);
            let sur = linearize_ub(&p0, &u, &grid);
            let at = sur.eval(&diag_of(&p0));
            let exact = ub_fap_matrix(&p0, &u, &grid).unwrap();
            assert!((at - exact).abs() <= 1e-9 * exact.abs().max(1.0));
            assert!(sur.alpha_rv.iter().all(|&a| a > 0.0));
            for _ in 0..100 {
                let mut p = p0.clone();
                for i in 0..8 {
                    p[(i, i)] = u[(i, i)] + rng.random_range(0.0..2.0);
                }
                let exact = ub_fap_matrix(&p, &u, &grid).unwrap();
                assert!(sur.eval(&diag_of(&p)) >= exact - 1e-9 * exact.abs().max(1.0));
            }
        }
    }
}
