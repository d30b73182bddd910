//! `(U, σ)` block: SCA on the convex-in-`U` part of the objective, a
//! parametric half-space for the sensing constraint, and an accelerated
//! projected-gradient inner solver with `σ` eliminated by projection.

use nalgebra::DMatrix;

use super::problem::{block_average, diag_of, lift, Problem};
use super::{Family, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{project_psd, symmetrize};
use crate::metrics::sensing::SensingGrid;

/// `Σ sqrt(g̃_{r,v}(P) − 2M r) − c·Tr(P)`.
fn radius_lhs(power: &[f64], trace: f64, r: f64, grid: &SensingGrid, coeff: f64) -> f64 {
    let m = grid.m as f64;
    power.iter().map(|g| (g - 2.0 * m * r).max(0.0).sqrt()).sum::<f64>() - coeff * trace
}

/// Smallest `‖diag U‖²` that meets the sensing bound at fixed `P`, for the
/// internal constraint `Σ sqrt(·) − coeff·Tr(P) ≤ 0`.
pub fn sensing_radius_with(p_fixed: &DMatrix<f64>, grid: &SensingGrid, coeff: f64) -> Result<f64> {
    let p = diag_of(p_fixed);
    let power = grid.power_terms(&p);
    let trace = p_fixed.trace();
    let lhs = |r: f64| radius_lhs(&power, trace, r, grid, coeff);
    if lhs(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let r_max = power.iter().cloned().fold(f64::INFINITY, f64::min) / (2.0 * grid.m as f64);
    if !(r_max > 0.0) || lhs(r_max) > 0.0 {
        return Err(Error::Infeasible("sensing bound unreachable at this power allocation".into()));
    }
    let (mut lo, mut hi) = (0.0, r_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Sensing radius for a normalized bound `S_max`.
pub fn sensing_radius(p_fixed: &DMatrix<f64>, grid: &SensingGrid, s_max: f64) -> Result<f64> {
    sensing_radius_with(p_fixed, grid, (1.0 + s_max) * grid.peak_coeff())
}

/// Projection onto `{X ⪰ 0, aᵀ diag X ≥ s}` for `a ≥ 0`.
pub fn project_psd_halfspace(y: &DMatrix<f64>, a: &[f64], s: f64) -> DMatrix<f64> {
    let base = project_psd(y);
    let lhs = |x: &DMatrix<f64>| x.diagonal().iter().zip(a).map(|(d, w)| d * w).sum::<f64>();
    if s <= 0.0 || lhs(&base) >= s {
        return base;
    }
    let shifted = |lambda: f64| {
        let mut m = y.clone();
        for (i, w) in a.iter().enumerate() {
            m[(i, i)] += lambda * w;
        }
        project_psd(&m)
    };
    let a2: f64 = a.iter().map(|w| w * w).sum();
    let mut lo = 0.0;
    let mut f_lo = lhs(&base) - s;
    let mut hi = (s - lhs(&base)) / a2.max(f64::MIN_POSITIVE);
    let mut x_hi = shifted(hi);
    let mut f_hi = lhs(&x_hi) - s;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        x_hi = shifted(hi);
        f_hi = lhs(&x_hi) - s;
    }
    // Illinois regula falsi on the increasing map λ ↦ aᵀ diag Π(Y + λ diag a).
    let mut side = 0i32;
    for _ in 0..100 {
        if f_hi <= 1e-13 * s.abs() || hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        let x = shifted(mid);
        let f = lhs(&x) - s;
        if f >= 0.0 {
            hi = mid;
            f_hi = f;
            x_hi = x;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = mid;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    x_hi
}

/// Projection onto the family's mean-matrix set intersected with the
/// sensing half-space `vᵀ diag U ≥ s`.
fn project_u(prob: &Problem, y: &DMatrix<f64>, v: &[f64], s: f64) -> DMatrix<f64> {
    let k = prob.k();
    match prob.family {
        Family::Opt => project_psd_halfspace(y, v, s),
        Family::Symmetric => {
            let x = block_average(&symmetrize(y), k);
            let a: Vec<f64> = (0..k).map(|i| v[i] + v[i + k]).collect();
            lift(&project_psd_halfspace(&x, &a, s), k)
        }
        Family::Cscg | Family::Coexist => DMatrix::zeros(2 * k, 2 * k),
    }
}

#[derive(Debug, Clone)]
pub struct UStepOutput {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub sca_iters: usize,
    pub inner_iters: usize,
    /// Value of `−zDC(P, U) + ρ/2‖U + diag(σ) − P − V‖²` after each SCA
    /// iteration.
    pub trace: Vec<f64>,
    pub radius: f64,
}

struct Inner<'a> {
    prob: &'a Problem,
    j: DMatrix<f64>,
    target: &'a DMatrix<f64>,
    rho: f64,
}

impl Inner<'_> {
    fn sigma_for(&self, u: &DMatrix<f64>) -> Vec<f64> {
        let t: Vec<f64> = (0..u.nrows()).map(|i| self.target[(i, i)] - u[(i, i)]).collect();
        self.prob.project_sigma(&t)
    }

    fn residual(&self, u: &DMatrix<f64>, sigma: &[f64]) -> DMatrix<f64> {
        let mut r = u - self.target;
        for (i, s) in sigma.iter().enumerate() {
            r[(i, i)] += s;
        }
        r
    }

    fn value(&self, u: &DMatrix<f64>) -> f64 {
        let sigma = self.sigma_for(u);
        -crate::linalg::trace_prod(&self.j, u)
            + self.prob.obj.concave_u(u)
            + 0.5 * self.rho * self.residual(u, &sigma).norm_squared()
    }

    fn grad(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let sigma = self.sigma_for(u);
        -&self.j + self.prob.obj.concave_u_grad(u) + self.residual(u, &sigma) * self.rho
    }
}

/// Minimizes `−zDC(P, U) + ρ/2‖P − U − diag(σ) + V‖²` over the family's
/// `(U, σ)` set with the rate and sensing constraints, at fixed `P`.
pub fn solve_u_sigma_step(
    prob: &Problem,
    p: &DMatrix<f64>,
    v: &DMatrix<f64>,
    u_start: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<UStepOutput> {
    let target = p + v;
    let radius = sensing_radius_with(p, &prob.grid, prob.sensing_coeff)?;
    let lipschitz = cfg.rho + prob.obj.quad_lipschitz();
    let mut u = prob.restrict_u(&project_psd(u_start));
    let mut trace = Vec::new();
    let mut inner_total = 0;
    let mut sca_iters = 0;
    let merit = |u: &DMatrix<f64>, sigma: &[f64]| {
        let mut r = u - &target;
        for (i, s) in sigma.iter().enumerate() {
            r[(i, i)] += s;
        }
        -prob.obj.value(p, u) + 0.5 * cfg.rho * r.norm_squared()
    };

    for _ in 0..cfg.max_sca_iters {
        sca_iters += 1;
        let inner = Inner { prob, j: prob.obj.grad_u_convex(p, &u), target: &target, rho: cfg.rho };
        let mut pv = diag_of(&u);
        if pv.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-12 {
            pv = diag_of(p).into_iter().map(|x| x.max(0.0)).collect();
            if pv.iter().all(|&x| x <= 0.0) {
                pv = vec![1.0; prob.dim()];
            }
        }
        let pv_norm = pv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = radius.sqrt() * pv_norm;

        // FISTA with adaptive restart.
        let mut x = project_u(prob, &u, &pv, s);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut f_x = inner.value(&x);
        for _ in 0..cfg.inner_max_iters {
            inner_total += 1;
            let g = inner.grad(&y);
            let x_next = project_u(prob, &(&y - g / lipschitz), &pv, s);
            let f_next = inner.value(&x_next);
            let step = (&x_next - &x).norm();
            if f_next > f_x {
                if t == 1.0 {
                    break;
                }
                // restart from the last accepted point
                y = x.clone();
                t = 1.0;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            t = t_next;
            let rel = (f_x - f_next).abs() / f_next.abs().max(1e-12);
            x = x_next;
            f_x = f_next;
            if step <= cfg.inner_tol * x.norm().max(1e-12) || rel <= cfg.inner_tol {
                break;
            }
        }
        let change = (&x - &u).norm();
        u = x;
        let sigma = inner.sigma_for(&u);
        trace.push(merit(&u, &sigma));
        if change < cfg.eps0 * u.norm().max(1e-12) {
            break;
        }
    }
    let sigma = Inner { prob, j: DMatrix::zeros(1, 1), target: &target, rho: cfg.rho }.sigma_for(&u);
    Ok(UStepOutput { u, sigma, sca_iters, inner_iters: inner_total, trace, radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::signal::OfdmConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn halfspace_projection_meets_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let y = symmetrize(&DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal)));
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
            let s = 5.0;
            let x = project_psd_halfspace(&y, &a, s);
            let lhs: f64 = x.diagonal().iter().zip(&a).map(|(d, w)| d * w).sum();
            assert!(lhs >= s * (1.0 - 1e-9));
            assert!(min_eigenvalue(&x) >= -1e-9);
            // no feasible point is closer than the projection
            let d0 = (&x - &y).norm();
            for _ in 0..50 {
                let z = project_psd(&(&x + symmetrize(&DMatrix::from_fn(6, 6, |_, _| 0.05 * rng.sample::<f64, _>(StandardNormal)))));
                let l: f64 = z.diagonal().iter().zip(&a).map(|(d, w)| d * w).sum();
                if l >= s {
                    assert!((&z - &y).norm() >= d0 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn radius_slack_and_residual() {
        let cfg = OfdmConfig::new(4, 2, 4, 1.0, 1.0).unwrap();
        let grid = SensingGrid::new(&cfg);
        let p = DMatrix::identity(8, 8) * 0.125;
        assert_eq!(sensing_radius(&p, &grid, 0.0).unwrap(), 0.0);
        let s_max = -0.99;
        let r = sensing_radius(&p, &grid, s_max).unwrap();
        assert!(r > 0.0);
        let power = grid.power_terms(&diag_of(&p));
        let lhs = radius_lhs(&power, 1.0, r, &grid, (1.0 + s_max) * grid.peak_coeff());
        assert!(lhs.abs() < 1e-8, "{lhs}");
        let lhs_more = radius_lhs(&power, 1.0, r * 0.9, &grid, 1.0);
        let lhs_less = radius_lhs(&power, 1.0, r * 0.5, &grid, 1.0);
        assert!(lhs_more < lhs_less);
        assert!(sensing_radius(&p, &grid, -1.0 - 1e-3).is_err());
    }
}
