//! Gradients of `f(W, H) = ½‖V − WH‖²_F`, the projected-gradient maps
//!
//! ```text
//! T(H) = P₊[H − μ Wᵀ(WH − V)]      S(W) = P₊[W − λ (WH − V)Hᵀ]
//! ```
//!
//! and the step-size policies that keep them nonexpansive. A point fixed by
//! both maps is a stationary point of `f` over the nonnegative orthant, which
//! is what [`vi_residual`] measures.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, NmfError, Result};
use crate::linalg::{frobenius_norm, matmul, matmul_nt, matmul_tn, project_nonneg, Matrix};

/// How μₙ (for the H map) and λₙ (for the W map) are chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c")]
pub enum StepPolicy {
    /// `2 / max(1, ‖G‖_F)` where `G` is the Gram matrix of the fixed factor.
    Adaptive,
    /// The same constant for every iteration and both maps.
    Constant(f64),
}

impl StepPolicy {
    pub fn constant(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(StepPolicy::Constant(c))
        } else {
            Err(NmfError::InvalidParameter(format!(
                "constant step must be positive and finite, got {c}"
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::Adaptive => Ok(()),
            StepPolicy::Constant(c) => Self::constant(c).map(|_| ()),
        }
    }

    /// Step for a map whose gradient has Lipschitz constant `gram_norm`.
    pub fn step_for_gram_norm(&self, gram_norm: f64) -> f64 {
        match *self {
            StepPolicy::Adaptive => 2.0 / gram_norm.max(1.0),
            StepPolicy::Constant(c) => c,
        }
    }
}

/// Both partial gradients of `f` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub grad_w: Matrix,
    pub grad_h: Matrix,
}

fn check_factors(op: &'static str, v: &Matrix, w: &Matrix, h: &Matrix) -> Result<()> {
    let (m, n) = v.shape();
    if w.rows() != m || h.cols() != n || w.cols() != h.rows() {
        return Err(dim_err(
            op,
            format!(
                "V {}x{}, W {}x{}, H {}x{}",
                m,
                n,
                w.rows(),
                w.cols(),
                h.rows(),
                h.cols()
            ),
        ));
    }
    Ok(())
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(NmfError::InvalidParameter(format!(
            "step must be positive and finite, got {step}"
        )))
    }
}

/// `Wᵀ(WH − V)`, computed as `(WᵀW)H − WᵀV`.
pub(crate) fn grad_h_with_gram(
    v: &Matrix,
    w: &Matrix,
    gram_w: &Matrix,
    h: &Matrix,
) -> Result<Matrix> {
    matmul(gram_w, h)?.sub(&matmul_tn(w, v)?)
}

/// `(WH − V)Hᵀ`, computed as `W(HHᵀ) − VHᵀ`.
pub(crate) fn grad_w_with_gram(
    v: &Matrix,
    w: &Matrix,
    h: &Matrix,
    gram_h: &Matrix,
) -> Result<Matrix> {
    matmul(w, gram_h)?.sub(&matmul_nt(v, h)?)
}

/// Partial gradient in H: `Wᵀ(WH − V)`, shape R×N.
pub fn grad_h(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<Matrix> {
    check_factors("grad_h", v, w, h)?;
    grad_h_with_gram(v, w, &matmul_tn(w, w)?, h)
}

/// Partial gradient in W: `(WH − V)Hᵀ`, shape M×R.
pub fn grad_w(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<Matrix> {
    check_factors("grad_w", v, w, h)?;
    grad_w_with_gram(v, w, h, &matmul_nt(h, h)?)
}

pub fn gradient(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<Gradient> {
    Ok(Gradient {
        grad_w: grad_w(v, w, h)?,
        grad_h: grad_h(v, w, h)?,
    })
}

/// `‖V − WH‖_F`.
pub(crate) fn residual_norm(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<f64> {
    let wh = matmul(w, h)?;
    Ok(frobenius_norm(&v.sub(&wh)?))
}

/// `f(W, H) = ½‖V − WH‖²_F`.
pub fn objective_f(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<f64> {
    check_factors("objective_f", v, w, h)?;
    let r = residual_norm(v, w, h)?;
    Ok(0.5 * r * r)
}

/// Normalized objective `F(W, H) = ‖V − WH‖_F / √(MN)`, the root-mean-square
/// reconstruction error reported by the benchmarks.
pub fn rms_residual(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<f64> {
    check_factors("rms_residual", v, w, h)?;
    Ok(residual_norm(v, w, h)? / ((v.rows() * v.cols()) as f64).sqrt())
}

/// μₙ for the H map at the current W.
pub fn step_mu(policy: StepPolicy, w: &Matrix) -> Result<f64> {
    Ok(policy.step_for_gram_norm(frobenius_norm(&matmul_tn(w, w)?)))
}

/// λₙ for the W map at the (already updated) H. `‖HHᵀ‖_F = ‖HᵀH‖_F`, so the
/// smaller R×R Gram matrix is used.
pub fn step_lambda(policy: StepPolicy, h: &Matrix) -> Result<f64> {
    Ok(policy.step_for_gram_norm(frobenius_norm(&matmul_nt(h, h)?)))
}

pub(crate) fn map_t_with_gram(
    v: &Matrix,
    w: &Matrix,
    gram_w: &Matrix,
    h: &Matrix,
    mu: f64,
) -> Result<Matrix> {
    if w.is_zero() {
        return Ok(h.clone());
    }
    let g = grad_h_with_gram(v, w, gram_w, h)?;
    Ok(project_nonneg(&h.lin_comb(1.0, &g, -mu)?))
}

pub(crate) fn map_s_with_gram(
    v: &Matrix,
    w: &Matrix,
    h: &Matrix,
    gram_h: &Matrix,
    lambda: f64,
) -> Result<Matrix> {
    if h.is_zero() {
        return Ok(w.clone());
    }
    let g = grad_w_with_gram(v, w, h, gram_h)?;
    Ok(project_nonneg(&w.lin_comb(1.0, &g, -lambda)?))
}

/// `T_{W,μ}(H) = P₊[H − μ Wᵀ(WH − V)]`; returns `H` unchanged when `W = O`.
pub fn map_t(v: &Matrix, w: &Matrix, h: &Matrix, mu: f64) -> Result<Matrix> {
    check_factors("map_t", v, w, h)?;
    check_step(mu)?;
    map_t_with_gram(v, w, &matmul_tn(w, w)?, h, mu)
}

/// `S_{H,λ}(W) = P₊[W − λ (WH − V)Hᵀ]`; returns `W` unchanged when `H = O`.
pub fn map_s(v: &Matrix, w: &Matrix, h: &Matrix, lambda: f64) -> Result<Matrix> {
    check_factors("map_s", v, w, h)?;
    check_step(lambda)?;
    map_s_with_gram(v, w, h, &matmul_nt(h, h)?, lambda)
}

/// Stationarity gauge `√(‖W − S(W)‖² + ‖H − T(H)‖²)` with adaptive steps at
/// `(W, H)`. Zero exactly when the pair is fixed by both maps.
pub fn vi_residual(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<f64> {
    check_factors("vi_residual", v, w, h)?;
    let gram_w = matmul_tn(w, w)?;
    let gram_h = matmul_nt(h, h)?;
    let mu = StepPolicy::Adaptive.step_for_gram_norm(frobenius_norm(&gram_w));
    let lambda = StepPolicy::Adaptive.step_for_gram_norm(frobenius_norm(&gram_h));
    let th = map_t_with_gram(v, w, &gram_w, h, mu)?;
    let sw = map_s_with_gram(v, w, h, &gram_h, lambda)?;
    let dh = frobenius_norm(&h.sub(&th)?);
    let dw = frobenius_norm(&w.sub(&sw)?);
    Ok(dh.hypot(dw))
}
