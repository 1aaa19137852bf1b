//! Randomized property suites over the operator and solver layers. Each
//! suite samples seeded instances, measures the worst observed slack against
//! the property and reports pass/fail. These back the `verify` subcommand
//! and the acceptance tests.

use std::fmt;

use crate::error::Result;
use crate::harness::normalize_solution;
use crate::linalg::{frobenius_norm, matmul, matmul_nt, matmul_tn, Matrix};
use crate::operators::{grad_h, grad_w, map_s, map_t, objective_f};
use crate::rng::SplitMix64;
use crate::solvers::{mult_update_h, mult_update_w};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    /// Largest observed violation measure (see each suite).
    pub worst: f64,
    pub tolerance: f64,
    /// Trials whose measure exceeded `tolerance`.
    pub violations: usize,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn record(&mut self, measure: f64) {
        self.trials += 1;
        if measure.is_nan() || measure > self.tolerance {
            self.violations += 1;
        }
        if measure.is_nan() || measure > self.worst {
            self.worst = measure;
        }
    }

    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            trials: 0,
            worst: f64::NEG_INFINITY,
            tolerance,
            violations: 0,
        }
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:<28} trials={:<7} worst={:+.3e} tol={:.1e} violations={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.worst,
            self.tolerance,
            self.violations
        )
    }
}

fn uniform(rng: &mut SplitMix64, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.next_open01())
}

fn dim(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

/// How the step of each map is drawn in [`nonexpansivity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepDraw {
    /// Uniform on `(0, 2/‖G‖_F]`, where `G` is the Gram matrix of the fixed factor.
    Valid,
    /// Exactly `k/‖G‖_F`; `k > 2` can break nonexpansivity.
    Scaled(f64),
}

/// `‖T(H₁) − T(H₂)‖ − ‖H₁ − H₂‖` and the S analogue on random instances up
/// to 8×8. Passes when every difference is at most 1e-10.
pub fn nonexpansivity(trials: usize, seed: u64, draw: StepDraw) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("nonexpansivity (T and S)", 1e-10);
    let mut rng = SplitMix64::stream(seed, 0x7e57);
    for _ in 0..trials {
        let m = dim(&mut rng, 2, 8);
        let n = dim(&mut rng, 2, 8);
        let r = dim(&mut rng, 1, 3);
        let v = uniform(&mut rng, m, n, 1.0);
        let w = uniform(&mut rng, m, r, 1.0);
        let h = uniform(&mut rng, r, n, 1.0);
        let h1 = uniform(&mut rng, r, n, 2.0);
        let h2 = uniform(&mut rng, r, n, 2.0);
        let w1 = uniform(&mut rng, m, r, 2.0);
        let w2 = uniform(&mut rng, m, r, 2.0);

        let mut step = |gram_norm: f64| match draw {
            StepDraw::Valid => (2.0 / gram_norm) * rng.next_open01(),
            StepDraw::Scaled(k) => k / gram_norm,
        };
        let mu = step(frobenius_norm(&matmul_tn(&w, &w)?));
        let lambda = step(frobenius_norm(&matmul_nt(&h, &h)?));

        let t_gap = frobenius_norm(&map_t(&v, &w, &h1, mu)?.sub(&map_t(&v, &w, &h2, mu)?)?)
            - frobenius_norm(&h1.sub(&h2)?);
        res.record(t_gap);
        let s_gap = frobenius_norm(&map_s(&v, &w1, &h, lambda)?.sub(&map_s(&v, &w2, &h, lambda)?)?)
            - frobenius_norm(&w1.sub(&w2)?);
        res.record(s_gap);
    }
    Ok(res)
}

/// Central-difference estimate of ∂f/∂X for one factor, step `eps`.
pub fn finite_difference_gradient(
    f: impl Fn(&Matrix) -> Result<f64>,
    x: &Matrix,
    eps: f64,
) -> Result<Matrix> {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    let mut probe = x.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let x0 = x.get(i, j);
            probe.set(i, j, x0 + eps);
            let fp = f(&probe)?;
            probe.set(i, j, x0 - eps);
            let fm = f(&probe)?;
            probe.set(i, j, x0);
            g.set(i, j, (fp - fm) / (2.0 * eps));
        }
    }
    Ok(g)
}

/// Relative error `‖∇f − ∇_fd f‖ / ‖∇f‖` for both factors on random
/// instances up to 10×8 with R ≤ 3. Passes at 1e-6.
pub fn gradient_check(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("gradient vs finite diff", 1e-6);
    let mut rng = SplitMix64::stream(seed, 0x96ad);
    for _ in 0..instances {
        let m = dim(&mut rng, 4, 10);
        let n = dim(&mut rng, 4, 8);
        let r = dim(&mut rng, 1, 3);
        let v = uniform(&mut rng, m, n, 1.0);
        let w = uniform(&mut rng, m, r, 1.0);
        let h = uniform(&mut rng, r, n, 1.0);

        let gh = grad_h(&v, &w, &h)?;
        let fd_h = finite_difference_gradient(|hh| objective_f(&v, &w, hh), &h, 1e-6)?;
        res.record(frobenius_norm(&gh.sub(&fd_h)?) / frobenius_norm(&gh));

        let gw = grad_w(&v, &w, &h)?;
        let fd_w = finite_difference_gradient(|ww| objective_f(&v, ww, &h), &w, 1e-6)?;
        res.record(frobenius_norm(&gw.sub(&fd_w)?) / frobenius_norm(&gw));
    }
    Ok(res)
}

/// Worst per-half-step increase of f along MULT traces on dense 30×20, R=4
/// instances. Passes at 1e-10.
pub fn mult_monotonicity(instances: usize, iterations: usize, seed: u64) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("MULT monotonicity", 1e-10);
    for k in 0..instances {
        let mut rng = SplitMix64::stream(seed, 0x3000 + k as u64);
        let v = uniform(&mut rng, 30, 20, 1.0);
        let mut w = uniform(&mut rng, 30, 4, 1.0);
        let mut h = uniform(&mut rng, 4, 20, 1.0);
        let mut f = objective_f(&v, &w, &h)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..iterations {
            h = mult_update_h(&v, &w, &h)?;
            let f_half = objective_f(&v, &w, &h)?;
            w = mult_update_w(&v, &w, &h)?;
            let f_next = objective_f(&v, &w, &h)?;
            worst = worst.max(f_half - f).max(f_next - f_half);
            f = f_next;
        }
        res.record(worst);
    }
    Ok(res)
}

/// Normalization invariants on random pairs: WH preserved (relative), rows
/// of H unit or zero, W column lengths nonincreasing, idempotence. The
/// recorded measure is the largest of the four deviations. Passes at 1e-12.
pub fn normalization_invariants(pairs: usize, seed: u64) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("normalization invariants", 1e-12);
    let mut rng = SplitMix64::stream(seed, 0x4000);
    for _ in 0..pairs {
        let m = dim(&mut rng, 2, 9);
        let n = dim(&mut rng, 2, 9);
        let r = dim(&mut rng, 1, 4);
        let mut w = uniform(&mut rng, m, r, 3.0);
        let mut h = uniform(&mut rng, r, n, 3.0);
        // Occasionally zero out an H row to exercise the degenerate branch.
        if rng.next_open01() < 0.2 {
            let k = dim(&mut rng, 0, r - 1);
            for j in 0..n {
                h.set(k, j, 0.0);
            }
        }
        if rng.next_open01() < 0.1 {
            w = w.map(|x| if x < 1.0 { 0.0 } else { x });
        }
        res.record(normalization_deviation(&w, &h)?);
    }
    Ok(res)
}

/// Largest deviation from the normalization invariants for one pair.
pub fn normalization_deviation(w: &Matrix, h: &Matrix) -> Result<f64> {
    let (wn, hn) = normalize_solution(w, h)?;
    let before = matmul(w, h)?;
    let after = matmul(&wn, &hn)?;
    let scale = frobenius_norm(&before).max(f64::MIN_POSITIVE);
    let mut dev = frobenius_norm(&before.sub(&after)?) / scale;

    for k in 0..hn.rows() {
        let len = hn.row(k).iter().map(|x| x * x).sum::<f64>().sqrt();
        if len != 0.0 {
            dev = dev.max((len - 1.0).abs());
        }
    }
    let lengths: Vec<f64> = (0..wn.cols())
        .map(|k| {
            (0..wn.rows())
                .map(|i| wn.get(i, k).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    for pair in lengths.windows(2) {
        if pair[1] > pair[0] {
            dev = dev.max(pair[1] - pair[0]);
        }
    }
    let (w2, h2) = normalize_solution(&wn, &hn)?;
    let wscale = frobenius_norm(&wn).max(f64::MIN_POSITIVE);
    dev = dev.max(w2.max_abs_diff(&wn)? / wscale);
    dev = dev.max(h2.max_abs_diff(&hn)?);
    Ok(dev)
}

/// Default suite set run by `verify`.
pub fn run_all(trials: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        nonexpansivity(trials, seed, StepDraw::Valid)?,
        gradient_check(100, seed)?,
        mult_monotonicity(20, 200, seed)?,
        normalization_invariants(1000, seed)?,
    ])
}
