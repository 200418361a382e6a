//! Independent brute-force validators.
//!
//! Nothing here shares code with the analytic gradient or Hessian-vector
//! paths: the finite-difference estimators only call `loss`/`grad` as black
//! boxes, and the dense weak Hessian is assembled entry by entry from the
//! block formulas. That independence is the point; these are the oracles the
//! analytic paths are tested against.

use crate::activation::{gamma_unchecked, phi_prime_unchecked, ActivationKind};
use crate::data::{dot, Dataset};
use crate::model::{forward, grad, loss, stable_loss_and_g, ModelError, ParamMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dense weak Hessian side {side} exceeds the desk-scale guard {guard}")]
    TooLarge { side: usize, guard: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Desk-scale guard on the dense weak-Hessian side `2p(d+1)`.
pub const DENSE_GUARD: usize = 4096;

/// Default finite-difference step: `1e-6` times the parameter scale
/// `max(1, ||V||_inf)`; a fixed absolute step fails when the initialization
/// scale is tiny.
pub fn default_fd_eps(v: &ParamMatrix) -> f64 {
    1e-6 * v.max_abs().max(1.0)
}

/// Central-difference gradient estimate, one loss pair per coordinate.
pub fn fd_grad(
    v: &ParamMatrix,
    data: &Dataset,
    kind: ActivationKind,
    eps: f64,
) -> Result<ParamMatrix, OracleError> {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut out = ParamMatrix::zeros(v.half_width(), v.dim());
    let mut probe = v.clone();
    for idx in 0..v.as_slice().len() {
        let orig = v.as_slice()[idx];
        probe.as_mut_slice()[idx] = orig + eps;
        let plus = loss(&probe, data, kind)?.total;
        probe.as_mut_slice()[idx] = orig - eps;
        let minus = loss(&probe, data, kind)?.total;
        probe.as_mut_slice()[idx] = orig;
        out.as_mut_slice()[idx] = (plus - minus) / (2.0 * eps);
    }
    Ok(out)
}

/// Central difference of the analytic gradient along direction `w`;
/// the independent check for the Hessian-vector product.
pub fn fd_hvp(
    v: &ParamMatrix,
    data: &Dataset,
    w: &ParamMatrix,
    kind: ActivationKind,
    eps: f64,
) -> Result<ParamMatrix, OracleError> {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut plus = v.clone();
    plus.add_scaled(w, eps);
    let mut minus = v.clone();
    minus.add_scaled(w, -eps);
    let gp = grad(&plus, data, kind)?;
    let gm = grad(&minus, data, kind)?;
    let mut out = gp;
    out.add_scaled(&gm, -1.0);
    out.scale(1.0 / (2.0 * eps));
    Ok(out)
}

/// Materialize the full `2p(d+1) x 2p(d+1)` weak Hessian from its blocks:
/// the `(i,j)` block is `(u_i u_j/n) sum_s c_s phi'_i phi'_j x_s x_s^T` for
/// `i != j`, and the diagonal block carries the extra
/// `-(u_i y_s g_s gamma(v_i . x_s)/n) x_s x_s^T` term. Symmetric by
/// construction (the upper triangle is computed and mirrored). Only defined
/// for the Huberized activation with bandwidth `h`.
pub fn dense_weak_hessian(
    v: &ParamMatrix,
    data: &Dataset,
    h: f64,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let kind = ActivationKind::Huberized { h };
    let rows = v.rows();
    let d = v.dim();
    let side = rows * d;
    if side > DENSE_GUARD {
        return Err(OracleError::TooLarge { side, guard: DENSE_GUARD });
    }
    if data.is_empty() {
        return Err(OracleError::Model(ModelError::EmptyDataset));
    }
    if data.dim() != d {
        return Err(OracleError::Model(ModelError::Shape { expected: d, got: data.dim() }));
    }
    let n = data.len();
    let inv_n = 1.0 / n as f64;
    let mut m = vec![vec![0.0f64; side]; side];
    for s in 0..n {
        let x = data.feature(s);
        let y = data.label(s);
        let f = forward(v, x, kind)?;
        let (_, gs) = stable_loss_and_g(y * f);
        let cs = gs * (1.0 - gs);
        let slopes: Vec<f64> =
            (0..rows).map(|i| phi_prime_unchecked(dot(v.row(i), x), kind)).collect();
        let gammas: Vec<f64> = (0..rows).map(|i| gamma_unchecked(dot(v.row(i), x), h)).collect();
        for i in 0..rows {
            for j in i..rows {
                let mut block = inv_n
                    * cs
                    * v.output_sign(i)
                    * v.output_sign(j)
                    * slopes[i]
                    * slopes[j];
                if i == j {
                    block += -inv_n * v.output_sign(i) * y * gs * gammas[i];
                }
                if block == 0.0 {
                    continue;
                }
                for a in 0..d {
                    for b in 0..d {
                        m[i * d + a][j * d + b] += block * x[a] * x[b];
                    }
                }
            }
        }
    }
    // mirror the strict upper block triangle
    for i in 0..side {
        for j in (i + 1)..side {
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// Multiply the dense matrix by a flat vector.
pub fn dense_mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// Smallest distance from any preactivation `v_i . x_s` to the
/// non-differentiable set `{0, h}`.
pub fn kink_distance(v: &ParamMatrix, data: &Dataset, h: f64) -> f64 {
    let mut best = f64::INFINITY;
    for s in 0..data.len() {
        let x = data.feature(s);
        for i in 0..v.rows() {
            let z = dot(v.row(i), x);
            best = best.min(z.abs()).min((z - h).abs());
        }
    }
    best
}

/// Eigenvalues of a dense symmetric matrix via cyclic Jacobi sweeps.
///
/// Desk-scale only; used to turn `dense_weak_hessian` into an exact
/// operator-norm oracle. Returns the eigenvalues in no particular order.
pub fn symmetric_eigenvalues(m: &[Vec<f64>], sweeps: usize, tol: f64) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Exact operator norm of a dense symmetric matrix: `max |eigenvalue|`.
pub fn dense_operator_norm(m: &[Vec<f64>]) -> f64 {
    symmetric_eigenvalues(m, 30, 1e-13)
        .iter()
        .fold(0.0, |acc, &l| acc.max(l.abs()))
}
