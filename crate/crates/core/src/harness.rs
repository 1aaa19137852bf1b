//! Benchmark protocol: seeded data generation with a target sparsity rate,
//! repeated runs from random starting points, solution normalization and
//! best/average aggregation, plus CSV/JSON report output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, NmfError, Result};
use crate::linalg::Matrix;
use crate::operators::{rms_residual, StepPolicy};
use crate::rng::SplitMix64;
use crate::solvers::{run, NmfProblem, SolverConfig, StopReason};

/// Shape, rank, target sparsity rate and seed of one benchmark instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// Target fraction of nonzero entries of V.
    pub rate: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(m: usize, n: usize, rank: usize, rate: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            m,
            n,
            rank,
            rate,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || self.rank >= self.m.min(self.n) {
            return Err(NmfError::InvalidParameter(format!(
                "rank must satisfy 1 <= R < min(M, N) = {}, got {}",
                self.m.min(self.n),
                self.rank
            )));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(NmfError::InvalidParameter(format!(
                "rate must lie in (0, 1], got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Stream 0 of the seed feeds V; stream `k + 1` feeds sample `k`.
const DATA_STREAM: u64 = 0;

/// Random M×N data matrix. Each entry is independently nonzero with
/// probability `rate`, nonzero values uniform on (0, 1). With `rate = 1` no
/// mask is drawn and every entry is strictly positive.
pub fn generate_v(spec: &GeneratorSpec) -> Matrix {
    let mut rng = SplitMix64::stream(spec.seed, DATA_STREAM);
    let dense = spec.rate >= 1.0;
    Matrix::from_fn(spec.m, spec.n, |_, _| {
        if dense || rng.next_open01() < spec.rate {
            rng.next_open01()
        } else {
            0.0
        }
    })
}

/// Fraction of nonzero entries.
pub fn sparsity_rate(v: &Matrix) -> f64 {
    v.count_nonzero() as f64 / (v.rows() * v.cols()) as f64
}

/// Starting point for sample `sample_index`: W (M×R) then H (R×N), entries
/// uniform on (0, 1).
pub fn generate_init(spec: &GeneratorSpec, sample_index: usize) -> (Matrix, Matrix) {
    let mut rng = SplitMix64::stream(spec.seed, sample_index as u64 + 1);
    let w = Matrix::from_fn(spec.m, spec.rank, |_, _| rng.next_open01());
    let h = Matrix::from_fn(spec.rank, spec.n, |_, _| rng.next_open01());
    (w, h)
}

fn column_norm(w: &Matrix, j: usize) -> f64 {
    (0..w.rows())
        .map(|i| w.get(i, j).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Rescales so every nonzero row of H has unit length (compensating in the
/// matching column of W), then permutes components so W's column lengths are
/// nonincreasing. `WH` is unchanged; zero rows of H are left as they are.
pub fn normalize_solution(w: &Matrix, h: &Matrix) -> Result<(Matrix, Matrix)> {
    if w.cols() != h.rows() {
        return Err(dim_err(
            "normalize_solution",
            format!(
                "W is {}x{}, H is {}x{}",
                w.rows(),
                w.cols(),
                h.rows(),
                h.cols()
            ),
        ));
    }
    let r = w.cols();
    let mut w = w.clone();
    let mut h = h.clone();
    for k in 0..r {
        let s = h.row(k).iter().map(|x| x * x).sum::<f64>().sqrt();
        if s > 0.0 {
            for j in 0..h.cols() {
                h.set(k, j, h.get(k, j) / s);
            }
            for i in 0..w.rows() {
                w.set(i, k, w.get(i, k) * s);
            }
        }
    }

    let lengths: Vec<f64> = (0..r).map(|k| column_norm(&w, k)).collect();
    let mut order: Vec<usize> = (0..r).collect();
    // sort_by is stable, so ties keep their original order.
    order.sort_by(|&a, &b| lengths[b].total_cmp(&lengths[a]));

    let w_sorted = Matrix::from_fn(w.rows(), r, |i, k| w.get(i, order[k]));
    let h_sorted = Matrix::from_fn(r, h.cols(), |k, j| h.get(order[k], j));
    Ok((w_sorted, h_sorted))
}

/// Outcome of one sample of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub time: f64,
    /// F at the normalized final iterate.
    pub f_value: f64,
    pub iterations: usize,
    pub reason: StopReason,
}

/// Aggregate over all samples of one configuration on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub config: SolverConfig,
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub rate_target: f64,
    pub rate_realized_mean: f64,
    pub samples: usize,
    pub bst_t: f64,
    pub avg_t: f64,
    pub bst_f: f64,
    pub avg_f: f64,
    pub seed: u64,
    pub stop_reason_counts: BTreeMap<StopReason, usize>,
    pub per_sample: Vec<SampleResult>,
}

impl RunReport {
    fn aggregate(
        spec: &GeneratorSpec,
        config: &SolverConfig,
        realized_rate: f64,
        per_sample: Vec<SampleResult>,
    ) -> Self {
        let count = per_sample.len() as f64;
        let mut stop_reason_counts = BTreeMap::new();
        for s in &per_sample {
            *stop_reason_counts.entry(s.reason).or_insert(0) += 1;
        }
        // Sums run in sample-index order so results are bit-stable.
        let avg_t = per_sample.iter().map(|s| s.time).sum::<f64>() / count;
        let avg_f = per_sample.iter().map(|s| s.f_value).sum::<f64>() / count;
        let bst_t = per_sample
            .iter()
            .map(|s| s.time)
            .fold(f64::INFINITY, f64::min);
        let bst_f = per_sample
            .iter()
            .map(|s| s.f_value)
            .fold(f64::INFINITY, f64::min);
        Self {
            label: config.label(),
            config: *config,
            m: spec.m,
            n: spec.n,
            rank: spec.rank,
            rate_target: spec.rate,
            rate_realized_mean: realized_rate,
            samples: per_sample.len(),
            bst_t: bst_t.min(avg_t),
            avg_t,
            bst_f: bst_f.min(avg_f),
            avg_f,
            seed: spec.seed,
            stop_reason_counts,
            per_sample,
        }
    }

    /// Largest per-sample F.
    pub fn max_f(&self) -> f64 {
        self.per_sample
            .iter()
            .map(|s| s.f_value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn run_sample(
    problem: &NmfProblem,
    spec: &GeneratorSpec,
    cfg: &SolverConfig,
    index: usize,
) -> Result<SampleResult> {
    let (w0, h0) = generate_init(spec, index);
    let out = run(problem, cfg, w0, h0).map_err(|e| NmfError::Sample {
        config: cfg.label(),
        sample: index,
        source: Box::new(e),
    })?;
    let (w, h) = normalize_solution(&out.state.w, &out.state.h)?;
    Ok(SampleResult {
        time: out.state.elapsed,
        f_value: rms_residual(problem.v(), &w, &h)?,
        iterations: out.state.n,
        reason: out.reason,
    })
}

/// Options for [`run_benchmark`].
#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub samples: usize,
    /// Worker threads for samples; `0` uses rayon's default.
    pub workers: usize,
}

/// Runs every configuration `samples` times on one generated V. Sample `k`
/// of every configuration starts from the same `generate_init(spec, k)`.
pub fn run_benchmark(
    spec: &GeneratorSpec,
    cfgs: &[SolverConfig],
    opts: BenchOptions,
) -> Result<Vec<RunReport>> {
    spec.validate()?;
    if opts.samples == 0 {
        return Err(NmfError::InvalidParameter("samples must be >= 1".into()));
    }
    for cfg in cfgs {
        cfg.validate()?;
    }
    let v = generate_v(spec);
    let realized = sparsity_rate(&v);
    let problem = NmfProblem::new(v, spec.rank)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| NmfError::InvalidParameter(format!("thread pool: {e}")))?;

    cfgs.iter()
        .map(|cfg| {
            let per_sample = pool.install(|| {
                (0..opts.samples)
                    .into_par_iter()
                    .map(|k| run_sample(&problem, spec, cfg, k))
                    .collect::<Result<Vec<_>>>()
            })?;
            Ok(RunReport::aggregate(spec, cfg, realized, per_sample))
        })
        .collect()
}

/// One of the eight benchmark tables: an instance shape and the
/// configurations compared on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub rate: f64,
    pub configs: Vec<SolverConfig>,
}

impl Preset {
    pub fn spec(&self, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            m: self.m,
            n: self.n,
            rank: self.rank,
            rate: self.rate,
            seed,
        }
    }
}

/// MULT, ALS, the adaptive-step variants for C ∈ {0.25, 0.5, 0.75}, then the
/// constant-step variants for c ∈ {1, 0.1, 0.01}.
pub fn full_config_set() -> Vec<SolverConfig> {
    let cs = [0.25, 0.5, 0.75];
    let mut out = vec![SolverConfig::mult(), SolverConfig::als()];
    out.extend(cs.iter().map(|&c| SolverConfig::fixed_point(c)));
    for step in [1.0, 0.1, 0.01] {
        out.extend(cs.iter().map(|&c| SolverConfig::fixed_point_const(c, step)));
    }
    out
}

pub const PRESET_NAMES: [&str; 8] = [
    "table1", "table2", "table3", "table4", "table5", "table6", "table7", "table8",
];

pub fn preset(name: &str) -> Option<Preset> {
    let (m, n, rank, rate) = match name {
        "table1" => (50, 25, 5, 1.0),
        "table2" => (100, 50, 10, 1.0),
        "table3" => (200, 100, 20, 1.0),
        "table4" => (50, 25, 5, 0.01),
        "table5" => (100, 50, 10, 0.01),
        "table6" => (200, 100, 20, 0.01),
        "table7" | "table8" => (200, 100, 20, 0.001),
        _ => return None,
    };
    let configs = if name == "table8" {
        vec![
            SolverConfig::mult(),
            SolverConfig::als(),
            SolverConfig::fixed_point_const(0.2, 2.0),
        ]
    } else {
        full_config_set()
    };
    let name = PRESET_NAMES.iter().copied().find(|&p| p == name)?;
    Some(Preset {
        name,
        m,
        n,
        rank,
        rate,
        configs,
    })
}

/// Formats with 8 significant digits in positional notation.
pub fn format_sig8(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-12..=15).contains(&exp) {
        return format!("{x:.7e}");
    }
    let decimals = (7 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.99…→10.0…).
    let carried = s.trim_start_matches('-').parse::<f64>().unwrap_or(0.0) >= 10f64.powi(exp + 1);
    if carried && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

pub const CSV_HEADER: &str =
    "algorithm,C,step_policy,c,M,N,R,rate_target,rate_realized_mean,samples,bstT,avgT,bstF,avgF,seed";

/// CSV rendering of `reports`. With `timing = false` the time columns hold
/// `NA`, which makes the output a pure function of the inputs.
pub fn reports_to_csv(reports: &[RunReport], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let (c, policy, step) = match r.config.algorithm {
            crate::solvers::Algorithm::FixedPoint => match r.config.step_policy {
                StepPolicy::Adaptive => (
                    format_sig8(r.config.combination_c),
                    "adaptive",
                    String::new(),
                ),
                StepPolicy::Constant(s) => {
                    (format_sig8(r.config.combination_c), "const", format_sig8(s))
                }
            },
            _ => (String::new(), "", String::new()),
        };
        let (bt, at) = if timing {
            (format_sig8(r.bst_t), format_sig8(r.avg_t))
        } else {
            ("NA".to_string(), "NA".to_string())
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.config.algorithm,
            c,
            policy,
            step,
            r.m,
            r.n,
            r.rank,
            format_sig8(r.rate_target),
            format_sig8(r.rate_realized_mean),
            r.samples,
            bt,
            at,
            format_sig8(r.bst_f),
            format_sig8(r.avg_f),
            r.seed
        );
    }
    out
}

pub fn reports_to_json(reports: &[RunReport]) -> Result<String> {
    serde_json::to_string_pretty(reports)
        .map_err(|e| NmfError::InvalidParameter(format!("json serialization: {e}")))
}
