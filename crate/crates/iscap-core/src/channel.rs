//! Tapped-delay powering and communication channels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::OfdmConfig;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Taps seen by samples taken half a sub-pulse late, truncated to the
/// original support: `ã_j = Σ_l a_l sinc(j + 1/2 − l)` for `j < L`.
pub fn half_sample_taps(a: &[Complex64]) -> Vec<Complex64> {
    (0..a.len())
        .map(|j| {
            a.iter()
                .enumerate()
                .map(|(l, &al)| al * sinc(j as f64 + 0.5 - l as f64))
                .sum()
        })
        .collect()
}

/// Per-subcarrier gain of a tap vector: `h_k = Σ_l a_l e^{-j2πlk/K}`.
///
/// This is the factor multiplying subcarrier `k` after linear convolution
/// with the taps, so the sample model and the closed forms agree.
pub fn freq_response(a: &[Complex64], k: usize) -> Result<Vec<Complex64>> {
    if a.len() > k {
        return Err(Error::InvalidConfig(format!("{} taps exceed {} subcarriers", a.len(), k)));
    }
    Ok((0..k)
        .map(|i| {
            a.iter()
                .enumerate()
                .map(|(l, &al)| {
                    let r = ((l * i) % k) as f64;
                    al * Complex64::from_polar(1.0, -2.0 * PI * r / k as f64)
                })
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoweringChannel {
    pub taps: Vec<Complex64>,
    pub half_taps: Vec<Complex64>,
    pub response: Vec<Complex64>,
    pub half_response: Vec<Complex64>,
    /// Receiver noise variance in watts.
    pub noise_var: f64,
}

impl PoweringChannel {
    pub fn new(taps: Vec<Complex64>, k: usize, noise_var: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidConfig("channel needs at least one tap".into()));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::InvalidConfig("noise variance must be non-negative".into()));
        }
        let half_taps = half_sample_taps(&taps);
        let response = freq_response(&taps, k)?;
        let half_response = freq_response(&half_taps, k)?;
        Ok(Self { taps, half_taps, response, half_response, noise_var })
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommChannel {
    pub response: Vec<Complex64>,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
}

impl CommChannel {
    pub fn new(response: Vec<Complex64>, noise_psd: f64) -> Result<Self> {
        if !(noise_psd > 0.0) {
            return Err(Error::InvalidConfig("communication noise density must be positive".into()));
        }
        Ok(Self { response, noise_psd })
    }

    /// Per-subcarrier SNR factors `γ_k = 2K|h_k|²/(B σ²)`.
    pub fn snr_factors(&self, cfg: &OfdmConfig) -> Vec<f64> {
        let scale = 2.0 * cfg.k as f64 / (cfg.bandwidth_hz * self.noise_psd);
        self.response.iter().map(|h| h.norm_sqr() * scale).collect()
    }
}

/// How the communication link gain is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SnrNormalization {
    /// Use `comm_path_loss_db` as given.
    PathLoss,
    /// Replace the path loss so that the expected SNR at the reference power
    /// equals `snr_db`.
    Average { snr_db: f64 },
    /// Rescale each realization so its subcarrier-averaged SNR at the
    /// reference power equals `snr_db`.
    PerRealization { snr_db: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGenConfig {
    pub tap_count: usize,
    /// Exponential power-delay decay constant, in taps.
    pub decay_taps: f64,
    pub powering_path_loss_db: f64,
    pub comm_path_loss_db: f64,
    /// Powering receiver noise power, W.
    pub powering_noise_w: f64,
    /// Communication receiver noise power over the full band, W.
    pub comm_noise_w: f64,
    pub comm_snr: SnrNormalization,
    /// Transmit power used by the SNR normalization, W.
    pub reference_power_w: f64,
}

impl Default for ChannelGenConfig {
    fn default() -> Self {
        Self {
            tap_count: 3,
            decay_taps: 3.0,
            powering_path_loss_db: 58.0,
            comm_path_loss_db: 108.0,
            powering_noise_w: db_to_linear(-108.0),
            comm_noise_w: db_to_linear(-110.0),
            comm_snr: SnrNormalization::Average { snr_db: 0.0 },
            reference_power_w: dbm_to_watts(40.0),
        }
    }
}

impl ChannelGenConfig {
    pub fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        if self.tap_count == 0 {
            return Err(Error::InvalidConfig("tap count must be at least 1".into()));
        }
        if self.tap_count > cfg.k_g {
            return Err(Error::InvalidConfig(format!(
                "tap count {} exceeds the cyclic prefix {}",
                self.tap_count, cfg.k_g
            )));
        }
        if !(self.decay_taps > 0.0) {
            return Err(Error::InvalidConfig("decay constant must be positive".into()));
        }
        if !(self.powering_noise_w >= 0.0) || !(self.comm_noise_w > 0.0) {
            return Err(Error::InvalidConfig("noise powers must be non-negative".into()));
        }
        if !(self.reference_power_w > 0.0) {
            return Err(Error::InvalidConfig("reference power must be positive".into()));
        }
        Ok(())
    }

    /// Mean tap powers, normalized to unit sum.
    pub fn power_profile(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.tap_count)
            .map(|l| (-(l as f64) / self.decay_taps).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

fn draw_taps<R: Rng>(profile: &[f64], gain: f64, rng: &mut R) -> Vec<Complex64> {
    profile
        .iter()
        .map(|&p| {
            let s = (0.5 * p * gain).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Rayleigh taps for both links, deterministic per seed.
pub fn generate_channels(
    gen: &ChannelGenConfig,
    cfg: &OfdmConfig,
    seed: u64,
) -> Result<(PoweringChannel, CommChannel)> {
    gen.validate(cfg)?;
    let profile = gen.power_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let powering_taps = draw_taps(&profile, db_to_linear(-gen.powering_path_loss_db), &mut rng);
    let noise_psd = gen.comm_noise_w / cfg.bandwidth_hz;

    let comm_gain = match gen.comm_snr {
        SnrNormalization::PathLoss => db_to_linear(-gen.comm_path_loss_db),
        SnrNormalization::Average { snr_db } | SnrNormalization::PerRealization { snr_db } => {
            db_to_linear(snr_db) * gen.comm_noise_w / gen.reference_power_w
        }
    };
    let comm_taps = draw_taps(&profile, comm_gain, &mut rng);
    let mut response = freq_response(&comm_taps, cfg.k)?;
    if let SnrNormalization::PerRealization { .. } = gen.comm_snr {
        let mean: f64 = response.iter().map(|h| h.norm_sqr()).sum::<f64>() / cfg.k as f64;
        if mean > 0.0 {
            let s = (comm_gain / mean).sqrt();
            response.iter_mut().for_each(|h| *h *= s);
        }
    }

    Ok((
        PoweringChannel::new(powering_taps, cfg.k, gen.powering_noise_w)?,
        CommChannel::new(response, noise_psd)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn half_taps_examples() {
        let t = half_sample_taps(&[c(1.0)]);
        assert_relative_eq!(t[0].re, 2.0 / PI, epsilon = 1e-15);
        let t = half_sample_taps(&[c(1.0), c(1.0)]);
        assert_relative_eq!(t[0].re, 4.0 / PI, epsilon = 1e-15);
        assert!(half_sample_taps(&[c(0.0); 3]).iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn response_examples() {
        let h = freq_response(&[c(1.0)], 8).unwrap();
        assert!(h.iter().all(|x| (x - c(1.0)).norm() < 1e-15));
        let h = freq_response(&[c(0.0), c(1.0)], 8).unwrap();
        for (k, x) in h.iter().enumerate() {
            assert_relative_eq!(x.norm(), 1.0, epsilon = 1e-14);
            let expect = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / 8.0);
            assert!((x - expect).norm() < 1e-14);
        }
        assert!(freq_response(&[c(1.0); 5], 4).is_err());
    }

    #[test]
    fn parseval() {
        let a = vec![Complex64::new(0.3, -0.2), Complex64::new(-1.1, 0.4), Complex64::new(0.05, 0.9)];
        let h = freq_response(&a, 8).unwrap();
        let lhs: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        let rhs: f64 = 8.0 * a.iter().map(|x| x.norm_sqr()).sum::<f64>();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
    }

    #[test]
    fn same_seed_same_channels() {
        let cfg = OfdmConfig::new(8, 4, 16, 30e6, 5.18e9).unwrap();
        let gen = ChannelGenConfig::default();
        assert_eq!(generate_channels(&gen, &cfg, 5).unwrap(), generate_channels(&gen, &cfg, 5).unwrap());
        assert_ne!(generate_channels(&gen, &cfg, 5).unwrap(), generate_channels(&gen, &cfg, 6).unwrap());
    }

    #[test]
    fn average_tap_energy_matches_path_loss() {
        let cfg = OfdmConfig::new(8, 4, 16, 30e6, 5.18e9).unwrap();
        let gen = ChannelGenConfig::default();
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|s| {
                let (p, _) = generate_channels(&gen, &cfg, s).unwrap();
                p.taps.iter().map(|t| t.norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            / n as f64;
        assert_relative_eq!(mean, db_to_linear(-58.0), max_relative = 0.05);
    }

    #[test]
    fn single_tap_is_rayleigh() {
        let cfg = OfdmConfig::new(4, 1, 1, 1.0, 1.0).unwrap();
        let gen = ChannelGenConfig { tap_count: 1, powering_path_loss_db: 0.0, ..Default::default() };
        let n = 20_000;
        let mut mags: Vec<f64> = (0..n)
            .map(|s| generate_channels(&gen, &cfg, s).unwrap().0.taps[0].norm())
            .collect();
        mags.sort_by(f64::total_cmp);
        let energy: f64 = mags.iter().map(|m| m * m).sum::<f64>() / n as f64;
        assert_relative_eq!(energy, 1.0, max_relative = 0.03);
        // Kolmogorov distance to the unit-power Rayleigh CDF 1 − exp(−r²).
        let ks = mags
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let f = 1.0 - (-r * r).exp();
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS distance {ks}");
    }

    #[test]
    fn per_realization_snr_is_exact() {
        let cfg = OfdmConfig::new(8, 4, 16, 30e6, 5.18e9).unwrap();
        let gen = ChannelGenConfig {
            comm_snr: SnrNormalization::PerRealization { snr_db: 3.0 },
            ..Default::default()
        };
        let (_, cc) = generate_channels(&gen, &cfg, 2).unwrap();
        let mean: f64 = cc.response.iter().map(|h| h.norm_sqr()).sum::<f64>() / 8.0;
        let snr = mean * gen.reference_power_w / gen.comm_noise_w;
        assert_relative_eq!(snr, db_to_linear(3.0), max_relative = 1e-12);
    }

    #[test]
    fn rejects_taps_beyond_prefix() {
        let cfg = OfdmConfig::new(8, 2, 16, 30e6, 5.18e9).unwrap();
        let gen = ChannelGenConfig::default();
        assert!(generate_channels(&gen, &cfg, 0).is_err());
    }
}
