//! The three iterative NMF algorithms behind one stepwise interface:
//!
//! * [`Algorithm::FixedPoint`]: Krasnosel'skiĭ–Mann averaging of the
//!   nonexpansive projected-gradient maps, H first, then W against the new H.
//! * [`Algorithm::Mult`]: Lee–Seung multiplicative updates.
//! * [`Algorithm::Als`]: basic alternating least squares followed by
//!   projection onto the orthant.
//!
//! [`run`] drives any of them until one of the four stopping conditions in
//! [`check_stop`] fires.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, NmfError, Result};
use crate::linalg::{
    frobenius_norm, matmul, matmul_nt, matmul_tn, project_nonneg, solve_least_squares, transpose,
    Matrix,
};
use crate::operators::{map_s_with_gram, map_t_with_gram, residual_norm, StepPolicy};

/// Floor applied to MULT denominators and x-tolerance denominators.
pub const DENOM_FLOOR: f64 = 1e-12;

/// An NMF instance: nonnegative `V` (M×N) and target inner dimension R.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfProblem {
    v: Matrix,
    rank: usize,
}

impl NmfProblem {
    /// Requires `1 ≤ rank < min(M, N)` and `V ≥ 0` with finite entries.
    pub fn new(v: Matrix, rank: usize) -> Result<Self> {
        let (m, n) = v.shape();
        if rank == 0 || rank >= m.min(n) {
            return Err(NmfError::InvalidParameter(format!(
                "rank must satisfy 1 <= R < min(M, N) = {}, got {rank}",
                m.min(n)
            )));
        }
        if !v.is_finite() {
            return Err(NmfError::NonFinite("NmfProblem::new"));
        }
        if !v.is_nonnegative() {
            return Err(NmfError::InvalidParameter(
                "V must be entrywise nonnegative".into(),
            ));
        }
        Ok(Self { v, rank })
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn m(&self) -> usize {
        self.v.rows()
    }

    pub fn n(&self) -> usize {
        self.v.cols()
    }

    /// √(MN), the normalizer of the reported objective F.
    pub fn sqrt_mn(&self) -> f64 {
        ((self.m() * self.n()) as f64).sqrt()
    }

    fn check_factors(&self, w: &Matrix, h: &Matrix) -> Result<()> {
        if w.shape() != (self.m(), self.rank) || h.shape() != (self.rank, self.n()) {
            return Err(dim_err(
                "NmfProblem",
                format!(
                    "expected W {}x{} and H {}x{}, got W {}x{} and H {}x{}",
                    self.m(),
                    self.rank,
                    self.rank,
                    self.n(),
                    w.rows(),
                    w.cols(),
                    h.rows(),
                    h.cols()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    FixedPoint,
    Mult,
    Als,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::FixedPoint => "fixed-point",
            Algorithm::Mult => "mult",
            Algorithm::Als => "als",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Common value of the averaging weights αₙ = βₙ; only read by `FixedPoint`.
    pub combination_c: f64,
    /// Only read by `FixedPoint`.
    pub step_policy: StepPolicy,
    pub max_iter: usize,
    pub tol_fun: f64,
    pub tol_x: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::FixedPoint,
            combination_c: 0.25,
            step_policy: StepPolicy::Adaptive,
            max_iter: 1000,
            tol_fun: 1e-4,
            tol_x: 1e-4,
        }
    }
}

impl SolverConfig {
    /// Fixed-point iteration with αₙ = βₙ = `c` and adaptive steps.
    pub fn fixed_point(c: f64) -> Self {
        Self {
            combination_c: c,
            ..Self::default()
        }
    }

    /// Fixed-point iteration with αₙ = βₙ = `c` and μₙ = λₙ = `step`.
    pub fn fixed_point_const(c: f64, step: f64) -> Self {
        Self {
            combination_c: c,
            step_policy: StepPolicy::Constant(step),
            ..Self::default()
        }
    }

    pub fn mult() -> Self {
        Self {
            algorithm: Algorithm::Mult,
            ..Self::default()
        }
    }

    pub fn als() -> Self {
        Self {
            algorithm: Algorithm::Als,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm == Algorithm::FixedPoint {
            if !(self.combination_c > 0.0 && self.combination_c < 1.0) {
                return Err(NmfError::InvalidParameter(format!(
                    "combination weight C must lie in (0, 1), got {}",
                    self.combination_c
                )));
            }
            self.step_policy.validate()?;
        }
        if !(self.tol_fun >= 0.0 && self.tol_x >= 0.0) {
            return Err(NmfError::InvalidParameter(
                "tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Short human-readable label, e.g. `Proposed(0.25, 1)` or `ALS`.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Mult => "MULT".to_string(),
            Algorithm::Als => "ALS".to_string(),
            Algorithm::FixedPoint => match self.step_policy {
                StepPolicy::Adaptive => format!("Proposed({})", self.combination_c),
                StepPolicy::Constant(c) => format!("Proposed({}, {})", self.combination_c, c),
            },
        }
    }
}

/// Snapshot after `n` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub w: Matrix,
    pub h: Matrix,
    pub n: usize,
    /// `f = ½‖V − WH‖²_F`.
    pub f_value: f64,
    /// `F = ‖V − WH‖_F / √(MN)`.
    pub rms_value: f64,
    /// Wall-clock seconds spent iterating so far.
    pub elapsed: f64,
}

impl IterationState {
    pub fn initial(p: &NmfProblem, w0: Matrix, h0: Matrix) -> Result<Self> {
        p.check_factors(&w0, &h0)?;
        if !w0.is_finite() || !h0.is_finite() {
            return Err(NmfError::NonFinite("initial factors"));
        }
        if !w0.is_nonnegative() || !h0.is_nonnegative() {
            return Err(NmfError::InvalidParameter(
                "initial factors must be entrywise nonnegative".into(),
            ));
        }
        Self::at(p, w0, h0, 0, 0.0)
    }

    fn at(p: &NmfProblem, w: Matrix, h: Matrix, n: usize, elapsed: f64) -> Result<Self> {
        let r = residual_norm(p.v(), &w, &h)?;
        Ok(Self {
            w,
            h,
            n,
            f_value: 0.5 * r * r,
            rms_value: r / p.sqrt_mn(),
            elapsed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StopReason {
    MaxIter,
    FunTol,
    XTolW,
    XTolH,
}

impl StopReason {
    pub const ALL: [StopReason; 4] = [
        StopReason::MaxIter,
        StopReason::FunTol,
        StopReason::XTolW,
        StopReason::XTolH,
    ];
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIter => "MaxIter",
            StopReason::FunTol => "FunTol",
            StopReason::XTolW => "XTolW",
            StopReason::XTolH => "XTolH",
        })
    }
}

/// One Krasnosel'skiĭ–Mann sweep with separate weights for the two blocks:
///
/// ```text
/// H' = α H + (1 − α) T_{W,μ}(H)
/// W' = β W + (1 − β) S_{H',λ}(W)
/// ```
///
/// μ is computed from `W`, λ from the updated `H'`. Setting `beta = 1`
/// freezes W.
pub fn fixed_point_sweep(
    v: &Matrix,
    w: &Matrix,
    h: &Matrix,
    alpha: f64,
    beta: f64,
    policy: StepPolicy,
) -> Result<(Matrix, Matrix)> {
    let gram_w = matmul_tn(w, w)?;
    let mu = policy.step_for_gram_norm(frobenius_norm(&gram_w));
    let t_h = map_t_with_gram(v, w, &gram_w, h, mu)?;
    let h_next = h.lin_comb(alpha, &t_h, 1.0 - alpha)?;

    let gram_h = matmul_nt(&h_next, &h_next)?;
    let lambda = policy.step_for_gram_norm(frobenius_norm(&gram_h));
    let s_w = map_s_with_gram(v, w, &h_next, &gram_h, lambda)?;
    let w_next = w.lin_comb(beta, &s_w, 1.0 - beta)?;
    Ok((w_next, h_next))
}

pub fn step_fixed_point(
    p: &NmfProblem,
    cfg: &SolverConfig,
    s: &IterationState,
) -> Result<IterationState> {
    let c = cfg.combination_c;
    let (w, h) = fixed_point_sweep(p.v(), &s.w, &s.h, c, c, cfg.step_policy)?;
    IterationState::at(p, w, h, s.n + 1, s.elapsed)
}

/// `x ∘ num / max(den, DENOM_FLOOR)`.
fn multiplicative(x: &Matrix, num: &Matrix, den: &Matrix) -> Matrix {
    let data = x
        .as_slice()
        .iter()
        .zip(num.as_slice())
        .zip(den.as_slice())
        .map(|((&x, &a), &b)| x * a / b.max(DENOM_FLOOR))
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data).expect("shapes agree")
}

/// MULT half-step for H: `H ∘ (WᵀV) / (WᵀWH)`.
pub fn mult_update_h(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<Matrix> {
    let wtv = matmul_tn(w, v)?;
    let wtwh = matmul(&matmul_tn(w, w)?, h)?;
    Ok(multiplicative(h, &wtv, &wtwh))
}

/// MULT half-step for W: `W ∘ (VHᵀ) / (WHHᵀ)`.
pub fn mult_update_w(v: &Matrix, w: &Matrix, h: &Matrix) -> Result<Matrix> {
    let vht = matmul_nt(v, h)?;
    let whht = matmul(w, &matmul_nt(h, h)?)?;
    Ok(multiplicative(w, &vht, &whht))
}

pub fn step_mult(
    p: &NmfProblem,
    _cfg: &SolverConfig,
    s: &IterationState,
) -> Result<IterationState> {
    let h_next = mult_update_h(p.v(), &s.w, &s.h)?;
    let w_next = mult_update_w(p.v(), &s.w, &h_next)?;
    IterationState::at(p, w_next, h_next, s.n + 1, s.elapsed)
}

pub fn step_als(p: &NmfProblem, _cfg: &SolverConfig, s: &IterationState) -> Result<IterationState> {
    let v = p.v();
    let w = &s.w;

    // WᵀW H̄ = WᵀV
    let h_bar = solve_least_squares(&matmul_tn(w, w)?, &matmul_tn(w, v)?)?;
    let h_next = project_nonneg(&h_bar);

    // H Hᵀ W̄ᵀ = H Vᵀ
    let w_bar_t = solve_least_squares(&matmul_nt(&h_next, &h_next)?, &matmul_nt(&h_next, v)?)?;
    let w_next = project_nonneg(&transpose(&w_bar_t));

    IterationState::at(p, w_next, h_next, s.n + 1, s.elapsed)
}

/// Advances `s` by one iteration of the configured algorithm.
pub fn step(p: &NmfProblem, cfg: &SolverConfig, s: &IterationState) -> Result<IterationState> {
    match cfg.algorithm {
        Algorithm::FixedPoint => step_fixed_point(p, cfg, s),
        Algorithm::Mult => step_mult(p, cfg, s),
        Algorithm::Als => step_als(p, cfg, s),
    }
}

fn max_relative_change(prev: &Matrix, cur: &Matrix) -> f64 {
    prev.as_slice()
        .iter()
        .zip(cur.as_slice())
        .map(|(&a, &b)| (b - a).abs() / a.max(DENOM_FLOOR))
        .fold(0.0, f64::max)
}

/// First satisfied stopping condition, checked in the order
/// MaxIter, FunTol, XTolW, XTolH.
pub fn check_stop(
    prev: &IterationState,
    cur: &IterationState,
    cfg: &SolverConfig,
) -> Option<StopReason> {
    if cur.n >= cfg.max_iter {
        return Some(StopReason::MaxIter);
    }
    let df = (cur.f_value - prev.f_value).abs() / prev.f_value.max(1.0);
    if df <= cfg.tol_fun {
        return Some(StopReason::FunTol);
    }
    if max_relative_change(&prev.w, &cur.w) <= cfg.tol_x {
        return Some(StopReason::XTolW);
    }
    if max_relative_change(&prev.h, &cur.h) <= cfg.tol_x {
        return Some(StopReason::XTolH);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: usize,
    pub f: f64,
    pub rms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: IterationState,
    pub reason: StopReason,
    /// Objective values at n = 0, 1, …, final.
    pub trace: Vec<TracePoint>,
}

/// Iterates from `(w0, h0)` until a stopping condition fires.
///
/// Errors if an iterate becomes non-finite.
pub fn run(p: &NmfProblem, cfg: &SolverConfig, w0: Matrix, h0: Matrix) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut cur = IterationState::initial(p, w0, h0)?;
    let mut trace = vec![TracePoint {
        n: 0,
        f: cur.f_value,
        rms: cur.rms_value,
    }];
    if cfg.max_iter == 0 {
        return Ok(RunOutcome {
            state: cur,
            reason: StopReason::MaxIter,
            trace,
        });
    }

    let start = Instant::now();
    loop {
        let mut next = step(p, cfg, &cur)?;
        next.elapsed = start.elapsed().as_secs_f64();
        if !next.f_value.is_finite() {
            return Err(NmfError::NonFinite("iterate"));
        }
        trace.push(TracePoint {
            n: next.n,
            f: next.f_value,
            rms: next.rms_value,
        });
        let reason = check_stop(&cur, &next, cfg);
        cur = next;
        if let Some(reason) = reason {
            return Ok(RunOutcome {
                state: cur,
                reason,
                trace,
            });
        }
    }
}
