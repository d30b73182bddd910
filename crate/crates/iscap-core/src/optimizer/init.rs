//! Structured starting points: minimum-power variances for the rate, with
//! the remaining power spread between a powering-concentrated shape and the
//! uniform shape that is best for sensing.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problem::{with_diag_added, Problem};
use super::randomization::{blend_to_uniform, evaluate};
use super::Family;

/// Blend weights toward the uniform shape tried for each concentration.
const BLEND_STEPS: usize = 20;
/// Exponents of the per-dimension powering gain used as shapes.
const SHAPE_EXPONENTS: [f64; 3] = [1.0, 4.0, f64::INFINITY];
/// Iteration cap and step tolerance of the mean ascent.
const ASCENT_ITERS: usize = 100;
const ASCENT_TOL: f64 = 1e-9;
/// Random restarts of the mean ascent besides the structured ones.
const ASCENT_RANDOM_STARTS: u64 = 2;

#[derive(Debug, Clone)]
pub struct StartPoint {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub value: f64,
}

/// Normalized objective of unit power in each composite dimension (tied
/// pairs for the tied families), carried by the mean or by the variance.
fn dimension_gains(prob: &Problem, as_mean: bool) -> Vec<f64> {
    let n = prob.dim();
    let k = prob.k();
    (0..n)
        .map(|i| {
            let mut v = vec![0.0; n];
            match prob.family {
                Family::Opt => v[i] = 1.0,
                _ => {
                    v[i % k] = 0.5;
                    v[i % k + k] = 0.5;
                }
            }
            if as_mean {
                let mu: Vec<f64> = v.iter().map(|x: &f64| x.sqrt()).collect();
                evaluate(prob, &mu, &vec![0.0; n]).0
            } else {
                evaluate(prob, &vec![0.0; n], &v).0
            }
        })
        .collect()
}

fn shape(gains: &[f64], exponent: f64) -> Vec<f64> {
    if exponent.is_infinite() {
        let best = gains
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc })
            .0;
        let mut q = vec![0.0; gains.len()];
        q[best] = 1.0;
        return q;
    }
    let top = gains.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let raw: Vec<f64> = gains.iter().map(|g| (g.max(0.0) / top).powf(exponent)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn tie(prob: &Problem, q: &[f64]) -> Vec<f64> {
    let k = prob.k();
    match prob.family {
        Family::Opt => q.to_vec(),
        _ => (0..2 * k).map(|i| 0.5 * (q[i % k] + q[i % k + k])).collect(),
    }
}

fn tie_vector(prob: &Problem, v: &mut DVector<f64>) {
    if prob.family == Family::Symmetric {
        let k = prob.k();
        for i in 0..k {
            let a = 0.5 * (v[i] + v[i + k]);
            v[i] = a;
            v[i + k] = a;
        }
    }
}

/// Fixed-point ascent over means of energy `energy` with the variances held
/// at `sigma`: `μ ← sqrt(energy)·Gμ/‖Gμ‖` with `G` the symmetrized total
/// gradient. Returns the best mean visited.
pub fn mean_ascent(prob: &Problem, sigma: &[f64], mu0: &[f64], energy: f64) -> Vec<f64> {
    let radius = energy.max(0.0).sqrt();
    let mut mu = DVector::from_column_slice(mu0);
    tie_vector(prob, &mut mu);
    let norm = mu.norm();
    if radius == 0.0 || norm == 0.0 {
        return vec![0.0; mu0.len()];
    }
    mu *= radius / norm;
    let value_at = |m: &DVector<f64>| {
        let u = m * m.transpose();
        let p = with_diag_added(&u, sigma);
        (prob.obj.value(&p, &u), p, u)
    };
    let (mut best_value, mut p, mut u) = value_at(&mu);
    let mut best = mu.clone();
    for _ in 0..ASCENT_ITERS {
        let g = prob.obj.grad_p(&p, &u) + prob.obj.grad_u(&p, &u);
        let mut next = (&g + g.transpose()) * &mu;
        tie_vector(prob, &mut next);
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        next *= radius / n;
        let step = (&next - &mu).norm() / radius;
        mu = next;
        let (value, p1, u1) = value_at(&mu);
        (p, u) = (p1, u1);
        if value > best_value {
            best_value = value;
            best = mu.clone();
        }
        if step < ASCENT_TOL {
            break;
        }
    }
    best.iter().copied().collect()
}

/// Mean-ascent candidates from the given start and from seeded random
/// starts, repaired toward the uniform magnitudes when the sidelobe bound
/// is violated.
fn ascent_candidates(prob: &Problem, sigma: &[f64], energy: f64, starts: &[Vec<f64>]) -> Option<StartPoint> {
    let n = prob.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let mut all: Vec<Vec<f64>> = starts.to_vec();
    for _ in 0..ASCENT_RANDOM_STARTS {
        all.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let mut best: Option<StartPoint> = None;
    for s in &all {
        let mu = mean_ascent(prob, sigma, s, energy);
        let candidate = match evaluate(prob, &mu, sigma) {
            (value, true) => Some((mu, value)),
            _ => blend_to_uniform(prob, &mu, sigma),
        };
        if let Some((mu, value)) = candidate {
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(StartPoint { mu, sigma: sigma.to_vec(), value });
            }
        }
    }
    best
}

/// Best sensing-feasible point of the structured family, if any.
pub fn start_point(prob: &Problem, sigma_rate: &[f64]) -> Option<StartPoint> {
    let n = prob.dim();
    let rem = (1.0 - sigma_rate.iter().sum::<f64>()).max(0.0);
    let uniform = vec![1.0 / n as f64; n];
    let as_mean = !matches!(prob.family, Family::Cscg | Family::Coexist);
    let gains = dimension_gains(prob, as_mean);
    let mut best: Option<StartPoint> = None;
    for &e in &SHAPE_EXPONENTS {
        let q = tie(prob, &shape(&gains, e));
        for step in 0..=BLEND_STEPS {
            let theta = step as f64 / BLEND_STEPS as f64;
            let mass: Vec<f64> = q.iter().zip(&uniform).map(|(a, b)| rem * ((1.0 - theta) * a + theta * b)).collect();
            let (mu, sigma) = if as_mean {
                (mass.iter().map(|m| m.sqrt()).collect(), sigma_rate.to_vec())
            } else {
                (vec![0.0; n], sigma_rate.iter().zip(&mass).map(|(s, m)| s + m).collect())
            };
            let (value, ok) = evaluate(prob, &mu, &sigma);
            if ok && best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(StartPoint { mu, sigma, value });
            }
        }
    }
    if as_mean && rem > 0.0 {
        let mut starts = vec![vec![1.0; n]];
        if let Some(b) = &best {
            starts.push(b.mu.clone());
        }
        if let Some(a) = ascent_candidates(prob, sigma_rate, rem, &starts) {
            if best.as_ref().is_none_or(|b| a.value > b.value) {
                best = Some(a);
            }
        }
    }
    best
}

/// Re-runs the mean ascent from a finished design with its variances held
/// fixed. `None` when the design carries no mean power.
pub fn polish(prob: &Problem, mu: &[f64], sigma: &[f64]) -> Option<StartPoint> {
    if matches!(prob.family, Family::Cscg | Family::Coexist) {
        return None;
    }
    let energy: f64 = mu.iter().map(|x| x * x).sum();
    if energy <= 0.0 {
        return None;
    }
    let mu = mean_ascent(prob, sigma, mu, energy);
    let candidate = match evaluate(prob, &mu, sigma) {
        (value, true) => Some((mu, value)),
        _ => blend_to_uniform(prob, &mu, sigma),
    }?;
    Some(StartPoint { mu: candidate.0, sigma: sigma.to_vec(), value: candidate.1 })
}
