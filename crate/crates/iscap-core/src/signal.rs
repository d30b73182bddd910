//! OFDM frame arithmetic: transforms, cyclic prefix, real-composite packing
//! and Gaussian symbol sampling.
//!
//! Composite vectors of length `2K` hold all real parts first, then all
//! imaginary parts.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{expect_len, Error, Result};

/// Frame geometry and RF parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    /// Subcarrier count `K`.
    pub k: usize,
    /// Cyclic-prefix length `K_G` in sub-pulses.
    pub k_g: usize,
    /// Symbols per frame `M`.
    pub m: usize,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
}

impl OfdmConfig {
    pub fn new(k: usize, k_g: usize, m: usize, bandwidth_hz: f64, carrier_hz: f64) -> Result<Self> {
        let cfg = Self { k, k_g, m, bandwidth_hz, carrier_hz };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("subcarrier count must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("symbols per frame must be at least 1".into()));
        }
        if self.k_g == 0 || self.k_g > self.k {
            return Err(Error::InvalidConfig(format!(
                "cyclic prefix length {} must lie in 1..={}",
                self.k_g, self.k
            )));
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::InvalidConfig("bandwidth must be positive".into()));
        }
        Ok(())
    }

    /// Samples per symbol including the prefix, `K' = K + K_G`.
    pub fn k_prime(&self) -> usize {
        self.k + self.k_g
    }

    /// Length of the real-composite vector, `2K`.
    pub fn dim(&self) -> usize {
        2 * self.k
    }
}

fn twiddle(num: i64, k: usize) -> Complex64 {
    let k = k as i64;
    let r = num.rem_euclid(k) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * r / k as f64)
}

/// Row `n` of the unnormalized inverse transform: `[1, e^{j2πn/K}, …]`.
pub fn f_row(n: i64, k: usize) -> Vec<Complex64> {
    (0..k).map(|i| twiddle(n * i as i64, k)).collect()
}

/// `x_n = Σ_k v_k e^{j2πnk/K}`.
pub fn idft(v: &[Complex64]) -> Vec<Complex64> {
    let k = v.len();
    (0..k)
        .map(|n| {
            v.iter()
                .enumerate()
                .map(|(i, &vi)| vi * twiddle((n * i) as i64, k))
                .sum()
        })
        .collect()
}

/// Exact inverse of [`idft`]: `X_k = (1/K) Σ_n x_n e^{-j2πnk/K}`.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let k = x.len();
    let scale = 1.0 / k as f64;
    (0..k)
        .map(|i| {
            x.iter()
                .enumerate()
                .map(|(n, &xn)| xn * twiddle(-((n * i) as i64), k))
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

pub fn add_cyclic_prefix(x: &[Complex64], cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    expect_len(cfg.k, x.len())?;
    let k = cfg.k as i64;
    Ok((0..cfg.k_prime() as i64)
        .map(|n| x[(n - cfg.k_g as i64).rem_euclid(k) as usize])
        .collect())
}

pub fn remove_cyclic_prefix(x: &[Complex64], cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    expect_len(cfg.k_prime(), x.len())?;
    Ok(x[cfg.k_g..].to_vec())
}

/// `x̄ = [Re x; Im x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealCompositeVector(Vec<f64>);

impl RealCompositeVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if !v.len().is_multiple_of(2) || v.is_empty() {
            return Err(Error::InvalidInput(format!("composite length {} is not 2K", v.len())));
        }
        Ok(Self(v))
    }

    pub fn pack(x: &[Complex64]) -> Self {
        let mut v: Vec<f64> = x.iter().map(|c| c.re).collect();
        v.extend(x.iter().map(|c| c.im));
        Self(v)
    }

    pub fn unpack(&self) -> Vec<Complex64> {
        let k = self.0.len() / 2;
        (0..k).map(|i| Complex64::new(self.0[i], self.0[i + k])).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-subcarrier means and variances of the real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianInput {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianInput {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        expect_len(mu.len(), sigma.len())?;
        if mu.is_empty() || !mu.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("input length {} is not 2K", mu.len())));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!("variance {s} is not a finite non-negative value")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("non-finite mean".into()));
        }
        Ok(Self { mu, sigma })
    }

    pub fn zeros(k: usize) -> Self {
        Self { mu: vec![0.0; 2 * k], sigma: vec![0.0; 2 * k] }
    }

    pub fn k(&self) -> usize {
        self.mu.len() / 2
    }

    /// `p = μ∘μ + σ`.
    pub fn power(&self) -> Vec<f64> {
        self.mu.iter().zip(&self.sigma).map(|(m, s)| m * m + s).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.power().iter().sum()
    }

    pub fn mean_power(&self) -> f64 {
        self.mu.iter().map(|m| m * m).sum()
    }

    pub fn variance_power(&self) -> f64 {
        self.sigma.iter().sum()
    }

    pub fn allocation(&self) -> PowerAllocationPair {
        let mu = DVector::from_column_slice(&self.mu);
        let u = &mu * mu.transpose();
        let p = &u + DMatrix::from_diagonal(&DVector::from_column_slice(&self.sigma));
        PowerAllocationPair { p, u }
    }

    pub fn complex_mean(&self) -> Vec<Complex64> {
        let k = self.k();
        (0..k).map(|i| Complex64::new(self.mu[i], self.mu[i + k])).collect()
    }

    /// One symbol vector with independent real/imaginary Gaussian entries.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let k = self.k();
        (0..k)
            .map(|i| {
                let zr: f64 = rng.sample(StandardNormal);
                let zi: f64 = rng.sample(StandardNormal);
                Complex64::new(
                    self.mu[i] + self.sigma[i].sqrt() * zr,
                    self.mu[i + k] + self.sigma[i + k].sqrt() * zi,
                )
            })
            .collect()
    }
}

/// Second-moment description `U = μμᵀ`, `P = U + diag(σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocationPair {
    pub p: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

impl PowerAllocationPair {
    pub fn new(p: DMatrix<f64>, u: DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || u.nrows() != n || u.ncols() != n {
            return Err(Error::LengthMismatch { expected: n, got: u.nrows() });
        }
        let scale = p.norm().max(u.norm()).max(1.0);
        if (&p - p.transpose()).norm() > 1e-12 * scale || (&u - u.transpose()).norm() > 1e-12 * scale {
            return Err(Error::InvalidInput("allocation matrices must be symmetric".into()));
        }
        let min_eig = crate::linalg::min_eigenvalue(&u);
        if min_eig < -1e-9 * scale {
            return Err(Error::InvalidInput(format!("mean matrix not PSD (min eigenvalue {min_eig:e})")));
        }
        Ok(Self { p, u })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { p: DMatrix::zeros(dim, dim), u: DMatrix::zeros(dim, dim) }
    }

    /// Variance vector `diag(P − U)`.
    pub fn sigma(&self) -> Vec<f64> {
        (0..self.p.nrows()).map(|i| self.p[(i, i)] - self.u[(i, i)]).collect()
    }
}

/// `M` independent symbol vectors drawn from `input`.
pub fn sample_symbols(input: &GaussianInput, cfg: &OfdmConfig, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    expect_len(cfg.dim(), input.mu.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..cfg.m).map(|_| input.draw(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cplx(v: &[(f64, f64)]) -> Vec<Complex64> {
        v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()
    }

    #[test]
    fn roundtrip_k8() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let back = dft(&idft(&v));
        for (a, b) in v.iter().zip(&back) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_maps_to_ones() {
        let mut e0 = vec![Complex64::new(0.0, 0.0); 6];
        e0[0] = Complex64::new(1.0, 0.0);
        for x in idft(&e0) {
            assert_abs_diff_eq!(x.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(x.im, 0.0, epsilon = 1e-15);
        }
        for f in f_row(0, 5) {
            assert_eq!(f, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn cyclic_prefix_examples() {
        let cfg = OfdmConfig::new(4, 2, 1, 1.0, 1.0).unwrap();
        let x = cplx(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let y = add_cyclic_prefix(&x, &cfg).unwrap();
        let re: Vec<f64> = y.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![2.0, 3.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(y[cfg.k_g], x[0]);

        let full = OfdmConfig::new(4, 4, 1, 1.0, 1.0).unwrap();
        let y = add_cyclic_prefix(&x, &full).unwrap();
        assert_eq!(&y[..4], &x[..]);
        assert_eq!(&y[4..], &x[..]);
    }

    #[test]
    fn config_rejects_bad_prefix() {
        assert!(OfdmConfig::new(4, 0, 1, 1.0, 1.0).is_err());
        assert!(OfdmConfig::new(4, 5, 1, 1.0, 1.0).is_err());
        assert!(OfdmConfig::new(0, 0, 1, 1.0, 1.0).is_err());
        assert!(OfdmConfig::new(4, 2, 0, 1.0, 1.0).is_err());
        assert_eq!(OfdmConfig::new(8, 4, 1, 1.0, 1.0).unwrap().k_prime(), 12);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let cfg = OfdmConfig::new(4, 2, 1, 1.0, 1.0).unwrap();
        let x = vec![Complex64::new(0.0, 0.0); 3];
        assert_eq!(
            add_cyclic_prefix(&x, &cfg),
            Err(Error::LengthMismatch { expected: 4, got: 3 })
        );
    }

    #[test]
    fn zero_variance_draws_are_the_mean() {
        let cfg = OfdmConfig::new(2, 1, 5, 1.0, 1.0).unwrap();
        let input = GaussianInput::new(vec![0.5, -1.0, 2.0, 0.0], vec![0.0; 4]).unwrap();
        for x in sample_symbols(&input, &cfg, 9).unwrap() {
            assert_eq!(x, input.complex_mean());
        }
    }

    #[test]
    fn sample_moments_concentrate() {
        let input = GaussianInput::new(vec![0.7, -0.3], vec![2.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n: usize = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = input.draw(&mut rng)[0].re;
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 0.7).abs() < 4.0 * 2f64.sqrt() / 1e3);
        assert!((var / 2.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn input_rejects_negative_variance() {
        assert!(GaussianInput::new(vec![0.0, 0.0], vec![-1e-3, 0.0]).is_err());
        assert!(GaussianInput::new(vec![0.0], vec![0.0]).is_err());
    }
}
