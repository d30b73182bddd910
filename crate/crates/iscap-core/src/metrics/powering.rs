//! Harvested-power surrogate `zDC` as a function of the allocation `(P, U)`.
//!
//! Each received sub-pulse `n` of a symbol is a linear function of the
//! current composite symbol `x̄_m` and, inside the prefix, of the previous
//! one `x̄_{m−1}`:
//!
//! `Re y = r1ᵀ x̄_m + r2ᵀ x̄_{m−1}`, `Im y = i1ᵀ x̄_m + i2ᵀ x̄_{m−1}`.
//!
//! For data sub-pulses the previous-symbol part is zero and
//! `A_n = r1 r1ᵀ + i1 i1ᵀ`. For prefix sub-pulses
//! `B_i = ri riᵀ + ii iiᵀ`, `D = r1 r2ᵀ + i1 i2ᵀ` and `E = B_1 + B_2 + D + Dᵀ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::PoweringChannel;
use crate::error::{Error, Result};
use crate::linalg::{outer, trace_prod};
use crate::signal::{f_row, OfdmConfig};

/// Two-term Taylor model of the diode characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectennaModel {
    pub k2: f64,
    pub k4: f64,
}

impl Default for RectennaModel {
    fn default() -> Self {
        Self { k2: 0.024, k4: 19.145 }
    }
}

impl RectennaModel {
    pub fn new(k2: f64, k4: f64) -> Result<Self> {
        if !(k2 > 0.0) || !(k4 > 0.0) {
            return Err(Error::InvalidConfig("rectenna coefficients must be positive".into()));
        }
        Ok(Self { k2, k4 })
    }

    /// Weight of each fourth-order moment, `3k4/4`.
    pub fn fourth_weight(&self) -> f64 {
        0.75 * self.k4
    }
}

/// Sample position within a sub-pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `y[n, m]`, integer sampling instants.
    Direct,
    /// `ỹ[n, m]`, half a sub-pulse later, through the truncated taps `ã`.
    HalfShift,
}

pub const BRANCHES: [Branch; 2] = [Branch::Direct, Branch::HalfShift];

/// Composite coefficient vectors of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVectors {
    pub r1: DVector<f64>,
    pub i1: DVector<f64>,
    pub r2: DVector<f64>,
    pub i2: DVector<f64>,
    /// Complex per-subcarrier weights on the current symbol.
    pub c1: Vec<Complex64>,
    /// Complex per-subcarrier weights on the previous symbol.
    pub c2: Vec<Complex64>,
}

impl CellVectors {
    fn from_complex(c1: Vec<Complex64>, c2: Vec<Complex64>) -> Self {
        let k = c1.len();
        let real = |c: &[Complex64]| {
            DVector::from_iterator(2 * k, c.iter().map(|x| x.re).chain(c.iter().map(|x| -x.im)))
        };
        let imag = |c: &[Complex64]| {
            DVector::from_iterator(2 * k, c.iter().map(|x| x.im).chain(c.iter().map(|x| x.re)))
        };
        Self { r1: real(&c1), i1: imag(&c1), r2: real(&c2), i2: imag(&c2), c1, c2 }
    }

    pub fn has_previous(&self) -> bool {
        self.c2.iter().any(|c| c.norm_sqr() > 0.0)
    }
}

/// Matrices of one sample and branch.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMatrices {
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
    /// `B = B_1 + B_2`.
    pub b: DMatrix<f64>,
}

impl CellMatrices {
    fn new(v: &CellVectors) -> Self {
        let b1 = outer(&v.r1, &v.r1) + outer(&v.i1, &v.i1);
        let b2 = outer(&v.r2, &v.r2) + outer(&v.i2, &v.i2);
        let d = outer(&v.r1, &v.r2) + outer(&v.i1, &v.i2);
        let e = &b1 + &b2 + &d + d.transpose();
        let b = &b1 + &b2;
        Self { b1, b2, d, e, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCell {
    pub n: usize,
    pub in_prefix: bool,
    pub vectors: [CellVectors; 2],
    pub matrices: [CellMatrices; 2],
}

impl SampleCell {
    pub fn vectors(&self, branch: Branch) -> &CellVectors {
        &self.vectors[branch_index(branch)]
    }

    pub fn matrices(&self, branch: Branch) -> &CellMatrices {
        &self.matrices[branch_index(branch)]
    }
}

pub(crate) fn branch_index(b: Branch) -> usize {
    match b {
        Branch::Direct => 0,
        Branch::HalfShift => 1,
    }
}

/// Complex weights of sample `n` on the current and previous symbol for a
/// tap vector behind a cyclic-prefix transmitter.
fn sample_weights(taps: &[Complex64], n: usize, cfg: &OfdmConfig) -> (Vec<Complex64>, Vec<Complex64>) {
    let k = cfg.k;
    let zero = Complex64::new(0.0, 0.0);
    let mut c1 = vec![zero; k];
    let mut c2 = vec![zero; k];
    for (l, &a) in taps.iter().enumerate() {
        let q = n as i64 - l as i64;
        let (target, phase_index) = if q >= 0 {
            (&mut c1, q - cfg.k_g as i64)
        } else {
            (&mut c2, q)
        };
        for (t, f) in target.iter_mut().zip(f_row(phase_index, k)) {
            *t += a * f;
        }
    }
    (c1, c2)
}

/// All coefficient matrices of one powering channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PoweringCoefficients {
    pub cfg: OfdmConfig,
    pub noise_var: f64,
    pub cells: Vec<SampleCell>,
}

impl PoweringCoefficients {
    pub fn build(pchan: &PoweringChannel, cfg: &OfdmConfig) -> Result<Self> {
        cfg.validate()?;
        if pchan.tap_count() > cfg.k_g {
            return Err(Error::InvalidConfig(format!(
                "{} taps exceed the cyclic prefix {}",
                pchan.tap_count(),
                cfg.k_g
            )));
        }
        let cells = (0..cfg.k_prime())
            .map(|n| {
                let make = |taps: &[Complex64]| {
                    let (c1, c2) = sample_weights(taps, n, cfg);
                    CellVectors::from_complex(c1, c2)
                };
                let vectors = [make(&pchan.taps), make(&pchan.half_taps)];
                let matrices = [CellMatrices::new(&vectors[0]), CellMatrices::new(&vectors[1])];
                SampleCell { n, in_prefix: n < cfg.k_g, vectors, matrices }
            })
            .collect();
        Ok(Self { cfg: *cfg, noise_var: pchan.noise_var, cells })
    }

    /// Copy with a different receiver noise variance.
    pub fn with_noise(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var;
        self
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    pub fn cell(&self, n: usize) -> &SampleCell {
        &self.cells[n]
    }

    /// `A_n` (or `Ã_n`) of a data-duration sample.
    pub fn a_matrix(&self, n: usize, branch: Branch) -> Result<&DMatrix<f64>> {
        self.check_data(n)?;
        Ok(&self.cells[n].matrices(branch).b1)
    }

    /// `(B_1, B_2, D, E)` (or tilde counterparts) of a prefix sample.
    pub fn cp_matrices(&self, n: usize, branch: Branch) -> Result<&CellMatrices> {
        self.check_cp(n)?;
        Ok(self.cells[n].matrices(branch))
    }

    fn check_data(&self, n: usize) -> Result<()> {
        if n < self.cfg.k_g || n >= self.cfg.k_prime() {
            return Err(Error::InvalidInput(format!("sample {n} is not in the data duration")));
        }
        Ok(())
    }

    fn check_cp(&self, n: usize) -> Result<()> {
        if n >= self.cfg.k_g {
            return Err(Error::InvalidInput(format!("sample {n} is not in the prefix")));
        }
        Ok(())
    }

    fn check_shapes(&self, p: &DMatrix<f64>, u: Option<&DMatrix<f64>>) -> Result<()> {
        let d = self.dim();
        let bad = |m: &DMatrix<f64>| m.nrows() != d || m.ncols() != d;
        if bad(p) {
            return Err(Error::LengthMismatch { expected: d, got: p.nrows() });
        }
        if let Some(u) = u {
            if bad(u) {
                return Err(Error::LengthMismatch { expected: d, got: u.nrows() });
            }
        }
        Ok(())
    }

    /// `E|y[n]|² = Tr(A_n P) + σ²` for a data sample.
    pub fn zdc_data_second(&self, n: usize, branch: Branch, p: &DMatrix<f64>) -> Result<f64> {
        self.check_shapes(p, None)?;
        let a = self.a_matrix(n, branch)?;
        Ok(trace_prod(a, p) + self.noise_var)
    }

    /// `E|y[n]|⁴` for a data sample.
    pub fn zdc_data_fourth(&self, n: usize, branch: Branch, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        self.check_shapes(p, Some(u))?;
        let a = self.a_matrix(n, branch)?;
        let s = self.noise_var;
        let ap = a * p;
        let au = a * u;
        let t = ap.trace();
        Ok(t * t + 6.0 * s * t + 2.0 * trace_prod(&ap, &ap) - 2.0 * trace_prod(&au, &au) + 3.0 * s * s)
    }

    /// `E|y[n]|² = Tr(B_n P + 2 D_n U) + σ²` for a prefix sample.
    pub fn zdc_cp_second(&self, n: usize, branch: Branch, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        self.check_shapes(p, Some(u))?;
        let m = self.cp_matrices(n, branch)?;
        Ok(trace_prod(&m.b, p) + 2.0 * trace_prod(&m.d, u) + self.noise_var)
    }

    /// `E|y[n]|⁴` for a prefix sample, expanded trace form.
    pub fn zdc_cp_fourth(&self, n: usize, branch: Branch, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        self.check_shapes(p, Some(u))?;
        let m = self.cp_matrices(n, branch)?;
        let s = self.noise_var;
        let (b1, b2, d, e) = (&m.b1, &m.b2, &m.d, &m.e);
        let dt = d.transpose();
        let tr = |x: DMatrix<f64>| x.trace();
        let base = trace_prod(&m.b, p) + 2.0 * trace_prod(d, u);
        let v = base * base
            + 6.0 * s * base
            + 2.0 * (tr(b1 * p * b1 * p) + tr(b2 * p * b2 * p))
            + 4.0 * (tr(d * p * &dt * p) + tr(d * u * d * u))
            + 4.0 * (tr(b1 * u * b2 * u) + tr(b1 * p * d * u))
            + 4.0 * (tr(b2 * p * &dt * u) + tr(b1 * u * &dt * p))
            + 4.0 * tr(b2 * u * d * p)
            - 2.0 * tr(e * u * e.transpose() * u)
            + 3.0 * s * s;
        Ok(v)
    }

    /// Second moment of any sample.
    pub fn second_moment(&self, n: usize, branch: Branch, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        if n < self.cfg.k_g {
            self.zdc_cp_second(n, branch, p, u)
        } else {
            self.zdc_data_second(n, branch, p)
        }
    }

    /// Fourth moment of any sample.
    pub fn fourth_moment(&self, n: usize, branch: Branch, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        if n < self.cfg.k_g {
            self.zdc_cp_fourth(n, branch, p, u)
        } else {
            self.zdc_data_fourth(n, branch, p, u)
        }
    }

    /// Contribution of sample `n`: `k2 E|y|² + (3k4/4)(E|y|⁴ + E|ỹ|⁴)`.
    pub fn zdc_sample(&self, n: usize, rect: &RectennaModel, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        let second = self.second_moment(n, Branch::Direct, p, u)?;
        let fourth = self.fourth_moment(n, Branch::Direct, p, u)? + self.fourth_moment(n, Branch::HalfShift, p, u)?;
        Ok(rect.k2 * second + rect.fourth_weight() * fourth)
    }

    /// Harvested-power scaling term summed over all `K'` samples of a symbol.
    pub fn zdc_total(&self, rect: &RectennaModel, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
        (0..self.cfg.k_prime()).map(|n| self.zdc_sample(n, rect, p, u)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use crate::signal::GaussianInput;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cn<R: Rng>(rng: &mut R) -> Complex64 {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    fn random_setup(seed: u64, k: usize, k_g: usize, l: usize) -> (PoweringCoefficients, GaussianInput) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = OfdmConfig::new(k, k_g, 2, 1.0, 1.0).unwrap();
        let taps: Vec<Complex64> = (0..l).map(|_| cn(&mut rng) * 0.6).collect();
        let pchan = PoweringChannel::new(taps, k, 0.0).unwrap();
        let mu = (0..2 * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let sigma = (0..2 * k).map(|_| rng.random::<f64>() * 0.8).collect();
        (PoweringCoefficients::build(&pchan, &cfg).unwrap(), GaussianInput::new(mu, sigma).unwrap())
    }

    /// Moments of `s = Re/Im y` from its 2-D mean and covariance.
    fn gaussian_moments(cell: &CellVectors, input: &GaussianInput, noise: f64) -> (f64, f64) {
        let mu = DVector::from_column_slice(&input.mu);
        let sig = DVector::from_column_slice(&input.sigma);
        let mr = cell.r1.dot(&mu) + cell.r2.dot(&mu);
        let mi = cell.i1.dot(&mu) + cell.i2.dot(&mu);
        let cov = |a1: &DVector<f64>, a2: &DVector<f64>, b1: &DVector<f64>, b2: &DVector<f64>| {
            a1.component_mul(b1).dot(&sig) + a2.component_mul(b2).dot(&sig)
        };
        let crr = cov(&cell.r1, &cell.r2, &cell.r1, &cell.r2) + noise / 2.0;
        let cii = cov(&cell.i1, &cell.i2, &cell.i1, &cell.i2) + noise / 2.0;
        let cri = cov(&cell.r1, &cell.r2, &cell.i1, &cell.i2);
        let tr = crr + cii;
        let m2 = mr * mr + mi * mi;
        let tr_c2 = crr * crr + cii * cii + 2.0 * cri * cri;
        let mcm = mr * mr * crr + mi * mi * cii + 2.0 * mr * mi * cri;
        (tr + m2, (tr + m2).powi(2) + 2.0 * tr_c2 + 4.0 * mcm)
    }

    #[test]
    fn flat_channel_trace() {
        let cfg = OfdmConfig::new(8, 4, 1, 1.0, 1.0).unwrap();
        let pchan = PoweringChannel::new(vec![Complex64::new(1.0, 0.0)], 8, 0.0).unwrap();
        let c = PoweringCoefficients::build(&pchan, &cfg).unwrap();
        for n in cfg.k_g..cfg.k_prime() {
            for b in BRANCHES {
                let a = c.a_matrix(n, b).unwrap();
                let expect = if b == Branch::Direct { 16.0 } else { 16.0 * (2.0 / std::f64::consts::PI).powi(2) };
                assert_relative_eq!(a.trace(), expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_matrices_are_psd_low_rank() {
        for seed in 0..100 {
            let (c, _) = random_setup(seed, 4, 3, 3);
            for cell in &c.cells {
                for m in &cell.matrices {
                    let scale = m.e.norm().max(1.0);
                    assert!(min_eigenvalue(&m.b1) >= -1e-9 * scale);
                    assert!(min_eigenvalue(&m.e) >= -1e-9 * scale);
                    if !cell.in_prefix {
                        assert!(m.b1.rank(1e-9 * scale) <= 2);
                    }
                }
            }
        }
    }

    #[test]
    fn single_tap_has_no_previous_symbol_window() {
        let (c, _) = random_setup(1, 4, 2, 1);
        for cell in &c.cells {
            for v in &cell.vectors {
                assert!(!v.has_previous());
            }
        }
    }

    #[test]
    fn noise_only_moments() {
        let (c, _) = random_setup(2, 4, 2, 2);
        let c = c.with_noise(0.3);
        let z = DMatrix::zeros(8, 8);
        for n in 0..6 {
            for b in BRANCHES {
                assert_relative_eq!(c.second_moment(n, b, &z, &z).unwrap(), 0.3, epsilon = 1e-15);
                assert_relative_eq!(c.fourth_moment(n, b, &z, &z).unwrap(), 0.27, epsilon = 1e-15);
            }
        }
        let c = c.with_noise(0.0);
        assert_eq!(c.zdc_total(&RectennaModel::default(), &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_gaussian_moments() {
        for seed in 0..30 {
            let (c, input) = random_setup(seed, 4, 2, 2);
            let alloc = input.allocation();
            for cell in &c.cells {
                for b in BRANCHES {
                    let (m2, m4) = gaussian_moments(cell.vectors(b), &input, 0.0);
                    let s2 = c.second_moment(cell.n, b, &alloc.p, &alloc.u).unwrap();
                    let s4 = c.fourth_moment(cell.n, b, &alloc.p, &alloc.u).unwrap();
                    assert_relative_eq!(s2, m2, max_relative = 1e-10);
                    assert_relative_eq!(s4, m4, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_tap_prefix_copies_tail() {
        let (c, input) = random_setup(4, 4, 2, 1);
        let a = input.allocation();
        for n in 0..2 {
            for b in BRANCHES {
                let cp2 = c.zdc_cp_second(n, b, &a.p, &a.u).unwrap();
                let cp4 = c.zdc_cp_fourth(n, b, &a.p, &a.u).unwrap();
                let d2 = c.zdc_data_second(n + 4, b, &a.p).unwrap();
                let d4 = c.zdc_data_fourth(n + 4, b, &a.p, &a.u).unwrap();
                assert_relative_eq!(cp2, d2, max_relative = 1e-12);
                assert_relative_eq!(cp4, d4, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_mean_drops_cross_terms() {
        let (c, input) = random_setup(5, 4, 2, 2);
        let p = DMatrix::from_diagonal(&DVector::from_column_slice(&input.sigma));
        let z = DMatrix::zeros(8, 8);
        for n in 0..2 {
            let m = c.cp_matrices(n, Branch::Direct).unwrap();
            let expect = trace_prod(&m.b, &p);
            assert_relative_eq!(c.zdc_cp_second(n, Branch::Direct, &p, &z).unwrap(), expect, max_relative = 1e-14);
            let base = expect;
            let expect4 = base * base
                + 2.0 * ((&m.b1 * &p * &m.b1 * &p).trace() + (&m.b2 * &p * &m.b2 * &p).trace())
                + 4.0 * (&m.d * &p * m.d.transpose() * &p).trace();
            assert_relative_eq!(c.zdc_cp_fourth(n, Branch::Direct, &p, &z).unwrap(), expect4, max_relative = 1e-12);
        }
    }

    #[test]
    fn total_is_sum_of_parts() {
        let (c, input) = random_setup(6, 4, 2, 2);
        let a = input.allocation();
        let rect = RectennaModel::default();
        let parts: f64 = (0..6).map(|n| c.zdc_sample(n, &rect, &a.p, &a.u).unwrap()).sum();
        assert_eq!(parts, c.zdc_total(&rect, &a.p, &a.u).unwrap());
    }

    #[test]
    fn shape_and_index_errors() {
        let (c, _) = random_setup(7, 4, 2, 2);
        let bad = DMatrix::zeros(6, 6);
        let ok = DMatrix::zeros(8, 8);
        assert!(c.zdc_data_second(3, Branch::Direct, &bad).is_err());
        assert!(c.zdc_data_second(1, Branch::Direct, &ok).is_err());
        assert!(c.zdc_cp_second(2, Branch::Direct, &ok, &ok).is_err());
        assert!(RectennaModel::new(0.0, 1.0).is_err());
    }
}
