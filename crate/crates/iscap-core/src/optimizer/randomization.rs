//! Rank-one recovery of the mean vector from a relaxed mean matrix.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::problem::{block_average, with_diag_added, Problem};
use super::Family;
use crate::error::{Error, Result};
use crate::linalg::{outer, sorted_eigen};
use crate::metrics::sensing::{normalized_ub, ub_fap};

/// Slack on the normalized sidelobe bound accepted for a candidate.
pub const SENSING_TOL: f64 = 1e-9;
/// Blend steps toward the uniform magnitudes when repairing a mean.
const REPAIR_STEPS: usize = 20;

/// Outcome of the randomization step in normalized units.
#[derive(Debug, Clone)]
pub struct Randomized {
    pub mu: Vec<f64>,
    /// Normalized objective of `(μμᵀ + diag σ, μμᵀ)`.
    pub value: f64,
    pub feasible_candidates: usize,
    pub repaired: bool,
}

/// Reduced factor `L` with `U = T L Lᵀ Tᵀ` (identity `T` unless the family
/// ties the real and imaginary parts).
fn factor(prob: &Problem, u: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let reduced = match prob.family {
        Family::Symmetric => block_average(u, prob.k()) * 2.0,
        _ => u.clone(),
    };
    let (vals, vecs) = sorted_eigen(&reduced);
    let n = reduced.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let s = vals[j].max(0.0).sqrt();
        for i in 0..n {
            l[(i, j)] = vecs[(i, j)] * s;
        }
    }
    (l, vals, vecs)
}

fn expand(prob: &Problem, nu: &[f64]) -> Vec<f64> {
    match prob.family {
        // `2 X = νν` with `U = T X Tᵀ`: each half carries `ν/√2`.
        Family::Symmetric => {
            let h: Vec<f64> = nu.iter().map(|x| x / std::f64::consts::SQRT_2).collect();
            h.iter().chain(&h).copied().collect()
        }
        _ => nu.to_vec(),
    }
}

fn rescale(mu: &mut [f64], target: f64) {
    let n2: f64 = mu.iter().map(|x| x * x).sum();
    if n2 > 0.0 {
        let s = (target / n2).sqrt();
        mu.iter_mut().for_each(|x| *x *= s);
    }
}

/// Normalized value and sensing feasibility of the mean `μ` with variances
/// `σ`.
pub fn evaluate(prob: &Problem, mu: &[f64], sigma: &[f64]) -> (f64, bool) {
    let m = DVector::from_column_slice(mu);
    let u = outer(&m, &m);
    let p = with_diag_added(&u, sigma);
    let power: Vec<f64> = mu.iter().zip(sigma).map(|(a, s)| a * a + s).collect();
    let ok = match ub_fap(&power, mu, &prob.grid) {
        Ok(ub) => normalized_ub(ub, power.iter().sum(), &prob.grid) <= prob.s_max + SENSING_TOL,
        Err(_) => false,
    };
    (prob.obj.value(&p, &u), ok)
}

/// Draws candidate means from the relaxed `U`, rescales them to the power
/// left over by `σ`, and keeps the sensing-feasible candidate with the
/// largest objective.
pub fn gaussian_randomization(
    prob: &Problem,
    u_relaxed: &DMatrix<f64>,
    sigma: &[f64],
    n_rand: usize,
    seed: u64,
) -> Result<Randomized> {
    let dim = prob.dim();
    let budget = (1.0 - sigma.iter().sum::<f64>()).max(0.0);
    if matches!(prob.family, Family::Cscg | Family::Coexist) || budget == 0.0 {
        let mu = vec![0.0; dim];
        let (value, ok) = evaluate(prob, &mu, sigma);
        if !ok {
            return Err(Error::RandomizationFailure(n_rand));
        }
        return Ok(Randomized { mu, value, feasible_candidates: 1, repaired: false });
    }
    let (l, vals, vecs) = factor(prob, u_relaxed);
    let n = l.nrows();
    let trace: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let target = trace.min(budget);
    let sqrt_diag: Vec<f64> = (0..n).map(|i| l.row(i).norm_squared().sqrt()).collect();

    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(2 * n_rand + 1);
    if vals[0] > 0.0 {
        let mut nu: Vec<f64> = vecs.column(0).iter().map(|x| x * vals[0].sqrt()).collect();
        if nu.iter().map(|x| x * x).sum::<f64>() > budget {
            rescale(&mut nu, budget);
        }
        candidates.push(nu);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_rand {
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let xi = &l * z;
        let mut a: Vec<f64> = xi.iter().copied().collect();
        rescale(&mut a, target);
        let mut b: Vec<f64> = xi.iter().zip(&sqrt_diag).map(|(x, d)| if *x < 0.0 { -d } else { *d }).collect();
        rescale(&mut b, target);
        candidates.push(a);
        candidates.push(b);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut best_any: Option<(f64, Vec<f64>)> = None;
    let mut feasible = 0;
    for nu in &candidates {
        let mu = expand(prob, nu);
        let (value, ok) = evaluate(prob, &mu, sigma);
        if best_any.as_ref().is_none_or(|(v, _)| value > *v) {
            best_any = Some((value, mu.clone()));
        }
        if ok {
            feasible += 1;
            if best.as_ref().is_none_or(|(v, _)| value > *v) {
                best = Some((value, mu));
            }
        }
    }
    if let Some((value, mu)) = best {
        return Ok(Randomized { mu, value, feasible_candidates: feasible, repaired: false });
    }

    let (_, mu0) = best_any.ok_or(Error::RandomizationFailure(n_rand))?;
    match blend_to_uniform(prob, &mu0, sigma) {
        Some((mu, value)) => Ok(Randomized { mu, value, feasible_candidates: 0, repaired: true }),
        None => Err(Error::RandomizationFailure(n_rand)),
    }
}

/// Pulls the mean magnitudes toward the uniform allocation that minimizes
/// the sidelobe bound, keeping signs and energy, and returns the first
/// sensing-feasible point with its value.
pub fn blend_to_uniform(prob: &Problem, mu0: &[f64], sigma: &[f64]) -> Option<(Vec<f64>, f64)> {
    let total: f64 = mu0.iter().map(|x| x * x).sum();
    let uniform = total / mu0.len() as f64;
    for step in 0..=REPAIR_STEPS {
        let theta = step as f64 / REPAIR_STEPS as f64;
        let mu: Vec<f64> = mu0
            .iter()
            .map(|&x| {
                let mag = ((1.0 - theta) * x * x + theta * uniform).sqrt();
                if x < 0.0 { -mag } else { mag }
            })
            .collect();
        let (value, ok) = evaluate(prob, &mu, sigma);
        if ok {
            return Some((mu, value));
        }
    }
    None
}

