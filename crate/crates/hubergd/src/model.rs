//! The two-layer network after bias lifting: forward pass, logistic training
//! loss, per-example quantities, analytic gradient, and the weak
//! Hessian-vector product assembled from the block structure of the weak
//! Hessian.
//!
//! The network has `2p` hidden units with fixed output weights: `+1` for the
//! first `p` units and `-1` for the rest. Only the hidden weight matrix `V`
//! (one row per unit) is trained, so `V` is the entire state.
//!
//! All reductions run in a fixed ascending index order, so repeated
//! evaluations are bit-identical; the trajectory-equivalence tests depend on
//! that.

use crate::activation::{gamma_unchecked, phi_prime_unchecked, phi_unchecked, ActivationKind};
use crate::data::{dot, Dataset};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("half-width mismatch: expected p = {expected}, got {got}")]
    Width { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("operation requires the Huberized activation: {0}")]
    Unsupported(&'static str),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

/// The `2p x dim` hidden-weight matrix with fixed output signs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMatrix {
    p: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ParamMatrix {
    pub fn zeros(p: usize, dim: usize) -> Self {
        assert!(p > 0 && dim > 0, "width and dimension must be positive");
        ParamMatrix { p, dim, data: vec![0.0; 2 * p * dim] }
    }

    pub fn from_flat(p: usize, dim: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != 2 * p * dim {
            return Err(ModelError::Shape { expected: 2 * p * dim, got: data.len() });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(ModelError::NonFinite("parameter matrix"));
        }
        Ok(ParamMatrix { p, dim, data })
    }

    pub fn from_rows(p: usize, rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        if rows.len() != 2 * p {
            return Err(ModelError::Width { expected: p, got: rows.len() / 2 });
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(2 * p * dim);
        for r in rows {
            if r.len() != dim {
                return Err(ModelError::Shape { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(p, dim, data)
    }

    /// Half-width `p`; the matrix has `2p` rows.
    pub fn half_width(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> usize {
        2 * self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fixed output weight of unit `i`: `+1` for `i < p`, `-1` otherwise.
    pub fn output_sign(&self, i: usize) -> f64 {
        if i < self.p {
            1.0
        } else {
            -1.0
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Entrywise inner product with another matrix of the same shape.
    pub fn inner(&self, other: &ParamMatrix) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        dot(&self.data, &other.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    /// `self += c * other`; the gradient-descent update is `c = -alpha`.
    pub fn add_scaled(&mut self, other: &ParamMatrix, c: f64) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_dataset(&self, data: &Dataset) -> Result<(), ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        if data.dim() != self.dim {
            return Err(ModelError::Shape { expected: self.dim, got: data.dim() });
        }
        Ok(())
    }
}

/// Per-dataset loss quantities: total loss, per-example losses `L_s`,
/// per-example gradient weights `g_s`, and margins `y_s f(x_s)`.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub total: f64,
    pub per_example: Vec<f64>,
    pub g: Vec<f64>,
    pub margins: Vec<f64>,
}

/// Stable logistic-loss pair: for margin `m` returns
/// `(ln(1 + exp(-m)), 1/(1 + exp(m)))` computed from one shared exponential,
/// which keeps the per-example ordering `g <= loss` exact in floating point.
pub fn stable_loss_and_g(m: f64) -> (f64, f64) {
    if m >= 0.0 {
        let u = (-m).exp();
        (u.ln_1p(), u / (1.0 + u))
    } else {
        let u = m.exp();
        (-m + u.ln_1p(), 1.0 / (1.0 + u))
    }
}

/// Network output `sum_i u_i phi(v_i . x)`.
pub fn forward(v: &ParamMatrix, x: &[f64], kind: ActivationKind) -> Result<f64, ModelError> {
    if x.len() != v.dim() {
        return Err(ModelError::Shape { expected: v.dim(), got: x.len() });
    }
    let mut out = 0.0;
    for i in 0..v.rows() {
        out += v.output_sign(i) * phi_unchecked(dot(v.row(i), x), kind);
    }
    Ok(out)
}

/// Training loss with per-example breakdown.
pub fn loss(v: &ParamMatrix, data: &Dataset, kind: ActivationKind) -> Result<LossReport, ModelError> {
    v.check_dataset(data)?;
    let n = data.len();
    let mut per_example = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut margins = Vec::with_capacity(n);
    let mut total = 0.0;
    for s in 0..n {
        let m = data.label(s) * forward(v, data.feature(s), kind)?;
        if !m.is_finite() {
            return Err(ModelError::NonFinite("margin"));
        }
        let (l, gs) = stable_loss_and_g(m);
        debug_assert!(gs <= l, "per-example g must not exceed the loss");
        total += l;
        per_example.push(l);
        g.push(gs);
        margins.push(m);
    }
    Ok(LossReport { total: total / n as f64, per_example, g, margins })
}

/// Analytic gradient: row `i` is `-(u_i/n) sum_s g_s y_s phi'(v_i . x_s) x_s`.
pub fn grad(v: &ParamMatrix, data: &Dataset, kind: ActivationKind) -> Result<ParamMatrix, ModelError> {
    v.check_dataset(data)?;
    let n = data.len();
    let inv_n = 1.0 / n as f64;
    let mut out = ParamMatrix::zeros(v.half_width(), v.dim());
    for s in 0..n {
        let x = data.feature(s);
        let m = data.label(s) * forward(v, x, kind)?;
        let (_, gs) = stable_loss_and_g(m);
        let coeff_base = gs * data.label(s) * inv_n;
        for i in 0..v.rows() {
            let slope = phi_prime_unchecked(dot(v.row(i), x), kind);
            if slope == 0.0 {
                continue;
            }
            let c = -v.output_sign(i) * coeff_base * slope;
            for (o, xi) in out.row_mut(i).iter_mut().zip(x) {
                *o += c * xi;
            }
        }
    }
    Ok(out)
}

/// Weak Hessian-vector product, without materializing the matrix.
///
/// With `a_{is} = u_i phi'(v_i . x_s)`, `c_s = g_s (1 - g_s)` and
/// `t_{is} = x_s . w_i`, row `i` of the product is
///
/// ```text
/// (1/n) sum_s [ c_s a_{is} (sum_j a_{js} t_{js})
///               - u_i y_s g_s gamma(v_i . x_s) t_{is} ] x_s
/// ```
///
/// which is exactly the off-diagonal blocks `(u_i u_j / n) sum_s c_s
/// phi'_i phi'_j x_s x_s^T` plus the diagonal `gamma` correction applied to
/// `w`. Only defined for the Huberized activation.
pub fn hvp(
    v: &ParamMatrix,
    data: &Dataset,
    w: &ParamMatrix,
    kind: ActivationKind,
) -> Result<ParamMatrix, ModelError> {
    let h = match kind {
        ActivationKind::Huberized { h } => h,
        ActivationKind::StandardRelu => {
            return Err(ModelError::Unsupported("weak Hessian of the standard ReLU"))
        }
    };
    v.check_dataset(data)?;
    if w.dim() != v.dim() || w.rows() != v.rows() {
        return Err(ModelError::Shape { expected: v.dim(), got: w.dim() });
    }
    let n = data.len();
    let inv_n = 1.0 / n as f64;
    let rows = v.rows();
    let mut out = ParamMatrix::zeros(v.half_width(), v.dim());
    let mut slopes = vec![0.0; rows];
    let mut gammas = vec![0.0; rows];
    let mut t = vec![0.0; rows];
    for s in 0..n {
        let x = data.feature(s);
        let y = data.label(s);
        let mut f = 0.0;
        for i in 0..rows {
            let z = dot(v.row(i), x);
            f += v.output_sign(i) * phi_unchecked(z, kind);
            slopes[i] = phi_prime_unchecked(z, kind);
            gammas[i] = gamma_unchecked(z, h);
            t[i] = dot(w.row(i), x);
        }
        let (_, gs) = stable_loss_and_g(y * f);
        let cs = gs * (1.0 - gs);
        let mut cross = 0.0;
        for j in 0..rows {
            cross += v.output_sign(j) * slopes[j] * t[j];
        }
        for i in 0..rows {
            let u = v.output_sign(i);
            let coef = inv_n * (cs * u * slopes[i] * cross - u * y * gs * gammas[i] * t[i]);
            if coef == 0.0 {
                continue;
            }
            for (o, xi) in out.row_mut(i).iter_mut().zip(x) {
                *o += coef * xi;
            }
        }
    }
    Ok(out)
}
