//! Achievable rate of the variance allocation and water-filling helpers.

use nalgebra::DMatrix;

use crate::channel::CommChannel;
use crate::error::{expect_len, Error, Result};
use crate::signal::OfdmConfig;

/// Per-entry SNR factors of the `2K` composite dimensions.
pub fn composite_gains(cchan: &CommChannel, cfg: &OfdmConfig) -> Vec<f64> {
    let g = cchan.snr_factors(cfg);
    g.iter().chain(&g).copied().collect()
}

/// `(1/2K) Σ_j log2(1 + γ_j σ_j)` over the composite dimensions.
pub fn rate_from_gains(sigma: &[f64], gains: &[f64]) -> f64 {
    let n = gains.len() as f64;
    sigma.iter().zip(gains).map(|(&s, &g)| (g * s).ln_1p()).sum::<f64>() / (n * std::f64::consts::LN_2)
}

pub fn achievable_rate(sigma: &[f64], cchan: &CommChannel, cfg: &OfdmConfig) -> Result<f64> {
    expect_len(cfg.dim(), sigma.len())?;
    if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative variance {s}")));
    }
    Ok(rate_from_gains(sigma, &composite_gains(cchan, cfg)))
}

/// Log-determinant form `(1/2K) log2 det(I + 2K H diag(σ) / (B σ²))`.
pub fn achievable_rate_logdet(sigma: &[f64], cchan: &CommChannel, cfg: &OfdmConfig) -> Result<f64> {
    expect_len(cfg.dim(), sigma.len())?;
    let gains = composite_gains(cchan, cfg);
    let n = gains.len();
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 + gains[i] * sigma[i] } else { 0.0 });
    let det = m.lu().determinant();
    Ok(det.log2() / n as f64)
}

/// `σ_j = max(0, ν − 1/γ_j)`.
fn fill(level: f64, gains: &[f64]) -> Vec<f64> {
    gains
        .iter()
        .map(|&g| if g > 0.0 { (level - 1.0 / g).max(0.0) } else { 0.0 })
        .collect()
}

fn bisect_level(gains: &[f64], mut hit: impl FnMut(&[f64]) -> bool) -> Vec<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0 / gains.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    while !hit(&fill(hi, gains)) {
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hit(&fill(mid, gains)) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    fill(hi, gains)
}

/// Rate-maximizing allocation of `power` over the composite dimensions.
pub fn water_filling(gains: &[f64], power: f64) -> Vec<f64> {
    if !(power > 0.0) || gains.iter().all(|&g| g <= 0.0) {
        return vec![0.0; gains.len()];
    }
    let sigma = bisect_level(gains, |s| s.iter().sum::<f64>() >= power);
    let total: f64 = sigma.iter().sum();
    sigma.into_iter().map(|s| s * power / total).collect()
}

/// Rate of the water-filling allocation at `power`.
pub fn capacity(gains: &[f64], power: f64) -> f64 {
    rate_from_gains(&water_filling(gains, power), gains)
}

/// Minimum-power allocation with rate at least `c_min`.
pub fn min_power_water_filling(gains: &[f64], c_min: f64) -> Result<Vec<f64>> {
    if c_min <= 0.0 {
        return Ok(vec![0.0; gains.len()]);
    }
    if gains.iter().all(|&g| g <= 0.0) {
        return Err(Error::Infeasible("no usable subcarrier".into()));
    }
    Ok(bisect_level(gains, |s| rate_from_gains(s, gains) >= c_min))
}

/// Euclidean projection of `t` onto `{σ ≥ 0, Σ w_j log2(1 + γ_j σ_j) ≥ c}`
/// under the weighted metric `Σ c_j (σ_j − t_j)²`.
pub fn project_rate_set(t: &[f64], gains: &[f64], metric: &[f64], c_min: f64) -> Vec<f64> {
    let base: Vec<f64> = t.iter().map(|x| x.max(0.0)).collect();
    if c_min <= 0.0 || rate_from_gains(&base, gains) >= c_min {
        return base;
    }
    let at = |lambda: f64| -> Vec<f64> {
        t.iter()
            .zip(gains)
            .zip(metric)
            .map(|((&tj, &g), &c)| {
                if g <= 0.0 {
                    return tj.max(0.0);
                }
                // c(σ − t)(1 + gσ) = λg, positive root.
                let l = lambda * g / c;
                let b = 1.0 - g * tj;
                let disc = b * b + 4.0 * g * (tj + l);
                let root = if b < 0.0 {
                    (-b + disc.max(0.0).sqrt()) / (2.0 * g)
                } else {
                    2.0 * (tj + l) / (b + disc.max(0.0).sqrt())
                };
                root.max(0.0)
            })
            .collect()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while rate_from_gains(&at(hi), gains) < c_min {
        hi *= 4.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_from_gains(&at(mid), gains) >= c_min {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    at(hi)
}
