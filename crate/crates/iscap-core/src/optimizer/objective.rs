//! Fast evaluation of `zDC` and its gradients.
//!
//! Per sample, with `X = [r1 i1]`, `Y = [r2 i2]` and `E = X + Y`, the 2×2
//! Gram matrix `G = XᵀPX + YᵀPY + XᵀUY + YᵀUX` and `H = EᵀUE` give
//! `E|y|² = tr G + s` and `E|y|⁴ = (tr G)² + 6s tr G + 2 tr G² − 2 tr H² + 3s²`.

use nalgebra::{DMatrix, Matrix2};

use crate::metrics::powering::{Branch, PoweringCoefficients, RectennaModel, BRANCHES};

#[derive(Debug, Clone)]
struct Term {
    x: DMatrix<f64>,
    y: Option<DMatrix<f64>>,
    e: DMatrix<f64>,
    w2: f64,
    w4: f64,
}

/// `zDC` in a form suited to repeated evaluation.
#[derive(Debug, Clone)]
pub struct Objective {
    terms: Vec<Term>,
    noise: f64,
    dim: usize,
    quad_lipschitz: f64,
}

fn gram(a: &DMatrix<f64>, m: &DMatrix<f64>, b: &DMatrix<f64>) -> Matrix2<f64> {
    let r = a.transpose() * (m * b);
    Matrix2::new(r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)])
}

fn to_dyn(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
}

impl Objective {
    pub fn new(coeffs: &PoweringCoefficients, rect: &RectennaModel) -> Self {
        Self::scaled(coeffs, rect, 1.0, 1.0)
    }

    /// Objective in units where `P = power_scale·P̂` and values are divided
    /// by `value_scale`.
    pub fn scaled(coeffs: &PoweringCoefficients, rect: &RectennaModel, power_scale: f64, value_scale: f64) -> Self {
        let dim = coeffs.dim();
        let w2 = rect.k2 * power_scale / value_scale;
        let w4 = rect.fourth_weight() * power_scale * power_scale / value_scale;
        let mut terms = Vec::new();
        for cell in &coeffs.cells {
            for b in BRANCHES {
                let v = cell.vectors(b);
                let mut x = DMatrix::zeros(dim, 2);
                x.set_column(0, &v.r1);
                x.set_column(1, &v.i1);
                let y = v.has_previous().then(|| {
                    let mut y = DMatrix::zeros(dim, 2);
                    y.set_column(0, &v.r2);
                    y.set_column(1, &v.i2);
                    y
                });
                let e = match &y {
                    Some(y) => &x + y,
                    None => x.clone(),
                };
                let w2 = if b == Branch::Direct { w2 } else { 0.0 };
                terms.push(Term { x, y, e, w2, w4 });
            }
        }
        let quad_lipschitz = terms.iter().map(|t| 4.0 * t.w4 * t.e.norm_squared().powi(2)).sum();
        Self { terms, noise: coeffs.noise_var / power_scale, dim, quad_lipschitz }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lipschitz bound of the gradient of [`Objective::concave_u`].
    pub fn quad_lipschitz(&self) -> f64 {
        self.quad_lipschitz
    }

    fn grams(&self, t: &Term, p: &DMatrix<f64>, u: &DMatrix<f64>) -> Matrix2<f64> {
        let mut g = gram(&t.x, p, &t.x);
        if let Some(y) = &t.y {
            let c = gram(&t.x, u, y);
            g += gram(y, p, y) + c + c.transpose();
        }
        g
    }

    pub fn value(&self, p: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
        let s = self.noise;
        self.terms
            .iter()
            .map(|t| {
                let g = self.grams(t, p, u);
                let h = gram(&t.e, u, &t.e);
                let tr = g.trace();
                let fourth = tr * tr + 6.0 * s * tr + 2.0 * (g * g).trace() - 2.0 * (h * h).trace() + 3.0 * s * s;
                t.w2 * (tr + s) + t.w4 * fourth
            })
            .sum()
    }

    /// `C = (w2 + w4(2 tr G + 6s)) I + 4 w4 G`, shared by both gradients.
    fn core(&self, t: &Term, g: &Matrix2<f64>) -> DMatrix<f64> {
        let c0 = t.w2 + t.w4 * (2.0 * g.trace() + 6.0 * self.noise);
        to_dyn(&(Matrix2::identity() * c0 + g * (4.0 * t.w4)))
    }

    /// Symmetric gradient with respect to `P` at fixed `U`.
    pub fn grad_p(&self, p: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let c = self.core(t, &self.grams(t, p, u));
            out += &t.x * &c * t.x.transpose();
            if let Some(y) = &t.y {
                out += y * &c * y.transpose();
            }
        }
        out
    }

    /// Gradient of the part of `zDC` that is convex in `U` (everything but
    /// the `−2 tr H²` terms).
    pub fn grad_u_convex(&self, p: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            if let Some(y) = &t.y {
                let c = self.core(t, &self.grams(t, p, u));
                let xcy = &t.x * &c * y.transpose();
                out += &xcy + xcy.transpose();
            }
        }
        out
    }

    /// `q(U) = 2 Σ w4 tr H²`, the magnitude of the concave part.
    pub fn concave_u(&self, u: &DMatrix<f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let h = gram(&t.e, u, &t.e);
                2.0 * t.w4 * (h * h).trace()
            })
            .sum()
    }

    /// Gradient of [`Objective::concave_u`].
    pub fn concave_u_grad(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let h = to_dyn(&gram(&t.e, u, &t.e));
            out += &t.e * h * t.e.transpose() * (4.0 * t.w4);
        }
        out
    }

    /// Full symmetric gradient with respect to `U`.
    pub fn grad_u(&self, p: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.grad_u_convex(p, u) - self.concave_u_grad(u)
    }
}

/// First-order Taylor coefficient of `zDC` in `P`, assembled term by term
/// from the coefficient matrices.
pub fn taylor_grad_p(
    coeffs: &PoweringCoefficients,
    rect: &RectennaModel,
    p: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let d = coeffs.dim();
    let s = coeffs.noise_var;
    let (k2, k4) = (rect.k2, rect.k4);
    let w = rect.fourth_weight();
    let mut g = DMatrix::zeros(d, d);
    for cell in &coeffs.cells {
        let direct = cell.matrices(Branch::Direct);
        let half = cell.matrices(Branch::HalfShift);
        if !cell.in_prefix {
            let (a, at) = (&direct.b1, &half.b1);
            g += a.transpose() * k2;
            g += (a.transpose() * (2.0 * (a * p).trace() + 6.0 * s) + a * p * a * 4.0) * w;
            g += (at.transpose() * (2.0 * (at * p).trace() + 6.0 * s) + at * p * at * 4.0) * w;
        } else {
            g += direct.b.transpose() * k2;
            for m in [direct, half] {
                let base = (&m.b * p).trace() + 2.0 * (&m.d * u).trace();
                g += m.b.transpose() * ((2.0 * base + 6.0 * s) * w);
                let dt = m.d.transpose();
                let cross = &m.b1 * (p * &m.b1 + u * &dt)
                    + &dt * (p * &m.d + u * &m.b2)
                    + &m.d * (p * &dt + u * &m.b1)
                    + &m.b2 * (p * &m.b2 + u * &m.d);
                g += cross * (3.0 * k4);
            }
        }
    }
    g
}

/// Taylor coefficient in `U` of the part of `zDC` that is convex in `U`,
/// assembled from the coefficient matrices of the prefix samples.
pub fn taylor_grad_u(
    coeffs: &PoweringCoefficients,
    rect: &RectennaModel,
    p: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let d = coeffs.dim();
    let s = coeffs.noise_var;
    let (k2, k4) = (rect.k2, rect.k4);
    let mut j = DMatrix::zeros(d, d);
    for cell in coeffs.cells.iter().filter(|c| c.in_prefix) {
        let direct = cell.matrices(Branch::Direct);
        j += direct.d.transpose() * (2.0 * k2);
        for m in [direct, cell.matrices(Branch::HalfShift)] {
            let dt = m.d.transpose();
            let base = (&m.b * p).trace() + 2.0 * (&m.d * u).trace();
            j += &dt * (3.0 * k4 * (base + 3.0 * s));
            let cross = &dt * u * &dt * 2.0
                + &m.b1 * u * &m.b2
                + &m.b2 * u * &m.b1
                + &dt * p * &m.b1
                + &m.d * p * &m.b2
                + &m.b1 * p * &m.d
                + &m.b2 * p * &dt;
            j += cross * (3.0 * k4);
        }
    }
    j
}
