//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p kmnmf --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kmnmf::harness::{
    self, generate_init, generate_v, normalize_solution, preset, reports_to_csv, run_benchmark,
    BenchOptions, GeneratorSpec,
};
use kmnmf::linalg::{frobenius_norm, matmul, matmul_nt, matmul_tn, Matrix};
use kmnmf::operators::{grad_h, grad_w, map_s, map_t, objective_f, StepPolicy};
use kmnmf::rng::SplitMix64;
use kmnmf::solvers::{
    fixed_point_sweep, mult_update_h, mult_update_w, run, NmfProblem, SolverConfig,
};

/// Base seed shared by every benchmark-table criterion.
const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn uniform(rng: &mut SplitMix64, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.next_open01())
}

fn dim(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

fn dist(a: &Matrix, b: &Matrix) -> f64 {
    frobenius_norm(&a.sub(b).unwrap())
}

/// C1: ‖T(H₁)−T(H₂)‖ ≤ ‖H₁−H₂‖ + 1e-10 and the S analogue, 10⁵ samples, < 30 s.
fn c1_nonexpansivity() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xC1);
    let mut worst = f64::NEG_INFINITY;
    let samples = 100_000;
    for _ in 0..samples {
        let m = dim(&mut rng, 2, 8);
        let n = dim(&mut rng, 2, 8);
        let r = dim(&mut rng, 1, 4);
        let v = uniform(&mut rng, m, n, 1.0);
        let w = uniform(&mut rng, m, r, 1.0);
        let h = uniform(&mut rng, r, n, 1.0);
        let (h1, h2) = (uniform(&mut rng, r, n, 2.0), uniform(&mut rng, r, n, 2.0));
        let (w1, w2) = (uniform(&mut rng, m, r, 2.0), uniform(&mut rng, m, r, 2.0));
        let mu = 2.0 / frobenius_norm(&matmul_tn(&w, &w).unwrap()) * rng.next_open01();
        let lambda = 2.0 / frobenius_norm(&matmul_nt(&h, &h).unwrap()) * rng.next_open01();

        let t = dist(
            &map_t(&v, &w, &h1, mu).unwrap(),
            &map_t(&v, &w, &h2, mu).unwrap(),
        ) - dist(&h1, &h2);
        let s = dist(
            &map_s(&v, &w1, &h, lambda).unwrap(),
            &map_s(&v, &w2, &h, lambda).unwrap(),
        ) - dist(&w1, &w2);
        worst = worst.max(t).max(s);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(30),
        format!(
            "{samples} samples, worst expansion {worst:+.3e} (tol 1e-10), {elapsed:.1?} (< 30 s)"
        ),
    )
}

fn central_difference(f: impl Fn(&Matrix) -> f64, x: &Matrix) -> Matrix {
    const STEP: f64 = 1e-6;
    let mut probe = x.clone();
    Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        let x0 = x.get(i, j);
        probe.set(i, j, x0 + STEP);
        let fp = f(&probe);
        probe.set(i, j, x0 - STEP);
        let fm = f(&probe);
        probe.set(i, j, x0);
        (fp - fm) / (2.0 * STEP)
    })
}

/// C2: Gradients match central differences to relative 1e-6 on 100 instances
/// up to 10×8, R=3; < 10 s.
fn c2_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xC2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = dim(&mut rng, 4, 10);
        let n = dim(&mut rng, 4, 8);
        let v = uniform(&mut rng, m, n, 1.0);
        let w = uniform(&mut rng, m, 3, 1.0);
        let h = uniform(&mut rng, 3, n, 1.0);
        // Plain ½‖V − WH‖² written out here so the oracle shares no code with
        // the gradient routines.
        let f = |w: &Matrix, h: &Matrix| -> f64 {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..n {
                    let wh: f64 = (0..3).map(|k| w.get(i, k) * h.get(k, j)).sum();
                    s += (v.get(i, j) - wh).powi(2);
                }
            }
            0.5 * s
        };
        let gh = grad_h(&v, &w, &h).unwrap();
        let fd_h = central_difference(|x| f(&w, x), &h);
        worst = worst.max(dist(&gh, &fd_h) / frobenius_norm(&gh));
        let gw = grad_w(&v, &w, &h).unwrap();
        let fd_w = central_difference(|x| f(x, &h), &w);
        worst = worst.max(dist(&gw, &fd_w) / frobenius_norm(&gw));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && elapsed < Duration::from_secs(10),
        format!(
            "100 instances, worst relative error {worst:.3e} (tol 1e-6), {elapsed:.1?} (< 10 s)"
        ),
    )
}

/// C3: MULT half-steps never increase f (1e-10 slack) over 200 iterations on
/// 20 seeded dense instances.
fn c3_mult_monotone() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let mut rng = SplitMix64::stream(0xC3, seed);
        let v = uniform(&mut rng, 40, 25, 1.0);
        let mut w = uniform(&mut rng, 40, 5, 1.0);
        let mut h = uniform(&mut rng, 5, 25, 1.0);
        let mut f = objective_f(&v, &w, &h).unwrap();
        for _ in 0..200 {
            h = mult_update_h(&v, &w, &h).unwrap();
            let f_half = objective_f(&v, &w, &h).unwrap();
            w = mult_update_w(&v, &w, &h).unwrap();
            let f_next = objective_f(&v, &w, &h).unwrap();
            worst = worst.max(f_half - f).max(f_next - f_half);
            f = f_next;
        }
    }
    outcome(
        worst <= 1e-10,
        format!("20 instances x 200 iterations, worst increase {worst:+.3e} (tol 1e-10)"),
    )
}

/// C4: With W frozen and V = W·H⁺, ‖Hₙ − H⁺_proj‖ is nonincreasing (1e-10),
/// H⁺_proj from 10⁵ plain iterations of T.
fn c4_km_distance() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut oracle_gap: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = SplitMix64::stream(0xC4, seed);
        let (m, n, r) = (8, 6, 3);
        let w = uniform(&mut rng, m, r, 1.0);
        // H⁺ with roughly a third of its entries zero, so the projection matters.
        let h_plus = Matrix::from_fn(r, n, |_, _| {
            let x = rng.next_open01();
            if x < 0.33 {
                0.0
            } else {
                x
            }
        });
        let v = matmul(&w, &h_plus).unwrap();
        let h0 = uniform(&mut rng, r, n, 1.0);

        let mu = 2.0 / frobenius_norm(&matmul_tn(&w, &w).unwrap()).max(1.0);
        let mut limit = h0.clone();
        for _ in 0..100_000 {
            limit = map_t(&v, &w, &limit, mu).unwrap();
        }
        oracle_gap = oracle_gap.max(dist(&limit, &map_t(&v, &w, &limit, mu).unwrap()));

        let (mut wk, mut hk) = (w.clone(), h0);
        let mut d_prev = dist(&hk, &limit);
        for _ in 0..500 {
            let (w_next, h_next) =
                fixed_point_sweep(&v, &wk, &hk, 0.25, 1.0, StepPolicy::Adaptive).unwrap();
            assert_eq!(w_next, w, "β = 1 must freeze W");
            wk = w_next;
            hk = h_next;
            let d = dist(&hk, &limit);
            worst = worst.max(d - d_prev);
            d_prev = d;
        }
    }
    outcome(
        worst <= 1e-10,
        format!(
            "10 instances x 500 iterations, worst distance increase {worst:+.3e} (tol 1e-10), oracle ‖T(H⁺)−H⁺‖ {oracle_gap:.1e}"
        ),
    )
}

/// C5: V = W*H* (6×4, R=2): FixedPoint C=0.25 adaptive reaches F ≤ 1e-3 within
/// 5000 iterations for ≥ 95 of 100 seeds; < 20 s.
fn c5_exact_recovery() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig {
        max_iter: 5000,
        tol_fun: 0.0,
        tol_x: 0.0,
        ..SolverConfig::fixed_point(0.25)
    };
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = SplitMix64::stream(0xC5, seed);
        let w_star = uniform(&mut rng, 6, 2, 1.0);
        let h_star = uniform(&mut rng, 2, 4, 1.0);
        let p = NmfProblem::new(matmul(&w_star, &h_star).unwrap(), 2).unwrap();
        let w0 = uniform(&mut rng, 6, 2, 1.0);
        let h0 = uniform(&mut rng, 2, 4, 1.0);
        let out = run(&p, &cfg, w0, h0).unwrap();
        if out.trace.iter().any(|t| t.rms <= 1e-3) {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        hits >= 95 && elapsed < Duration::from_secs(20),
        format!("{hits}/100 seeds reached F <= 1e-3 (need >= 95), {elapsed:.1?} (< 20 s)"),
    )
}

fn bench(name: &str, labels: &[&str]) -> Vec<harness::RunReport> {
    let p = preset(name).unwrap();
    let cfgs: Vec<SolverConfig> = p
        .configs
        .iter()
        .copied()
        .filter(|c| labels.contains(&c.label().as_str()))
        .collect();
    assert_eq!(
        cfgs.len(),
        labels.len(),
        "preset {name} lacks a requested config"
    );
    run_benchmark(
        &p.spec(SEED),
        &cfgs,
        BenchOptions {
            samples: 100,
            workers: 0,
        },
    )
    .unwrap()
}

fn find<'a>(reports: &'a [harness::RunReport], label: &str) -> &'a harness::RunReport {
    reports.iter().find(|r| r.label == label).unwrap()
}

/// C6: Table 1 band: avgF of ALS and Proposed(0.25) in [0.21, 0.26];
/// Proposed(0.25, 1) avgF > 0.3; < 2 min.
fn c6_table1() -> Outcome {
    let start = Instant::now();
    let reports = bench("table1", &["ALS", "Proposed(0.25)", "Proposed(0.25, 1)"]);
    let als = find(&reports, "ALS").avg_f;
    let fp = find(&reports, "Proposed(0.25)").avg_f;
    let bad = find(&reports, "Proposed(0.25, 1)").avg_f;
    let elapsed = start.elapsed();
    let band = 0.21..=0.26;
    outcome(
        band.contains(&als) && band.contains(&fp) && bad > 0.3 && elapsed < Duration::from_secs(120),
        format!(
            "avgF ALS {als:.8} / Proposed(0.25) {fp:.8} in [0.21, 0.26], Proposed(0.25, 1) {bad:.8} > 0.3, {elapsed:.1?} (< 2 min)"
        ),
    )
}

/// C7: Table 4 band: Proposed(0.25) avgF in [0.02, 0.04]; Proposed(0.25, 0.1)
/// avgF worse than Proposed(0.25, 1); r ≤ 0.01; < 2 min.
fn c7_table4() -> Outcome {
    let start = Instant::now();
    let reports = bench(
        "table4",
        &["Proposed(0.25)", "Proposed(0.25, 1)", "Proposed(0.25, 0.1)"],
    );
    let rate = reports[0].rate_realized_mean;
    let fp = find(&reports, "Proposed(0.25)").avg_f;
    let c1 = find(&reports, "Proposed(0.25, 1)").avg_f;
    let c01 = find(&reports, "Proposed(0.25, 0.1)").avg_f;
    let elapsed = start.elapsed();
    outcome(
        rate <= 0.01
            && (0.02..=0.04).contains(&fp)
            && c01 > c1
            && elapsed < Duration::from_secs(120),
        format!(
            "r={rate}, avgF Proposed(0.25) {fp:.8} in [0.02, 0.04], c=0.1 {c01:.8} > c=1 {c1:.8}, {elapsed:.1?} (< 2 min)"
        ),
    )
}

/// C8: Table 7: ALS has a sample with F ≤ 1e-6 and one with F ≥ 1.0;
/// Proposed(0.25) max-sample F ≤ 0.05; r ≤ 0.001; < 5 min.
fn c8_table7() -> Outcome {
    let start = Instant::now();
    let reports = bench("table7", &["ALS", "Proposed(0.25)"]);
    let rate = reports[0].rate_realized_mean;
    let als = find(&reports, "ALS");
    let fp = find(&reports, "Proposed(0.25)");
    let als_min = als.bst_f;
    let als_max = als.max_f();
    let fp_max = fp.max_f();
    let elapsed = start.elapsed();
    outcome(
        rate <= 0.001
            && als_min <= 1e-6
            && als_max >= 1.0
            && fp_max <= 0.05
            && elapsed < Duration::from_secs(300),
        format!(
            "r={rate}, ALS min F {als_min:.3e} (<= 1e-6) max F {als_max:.3e} (>= 1.0), Proposed(0.25) max F {fp_max:.3e} (<= 0.05), {elapsed:.1?} (< 5 min)"
        ),
    )
}

/// C9: Normalization on 1000 random pairs: WH preserved (1e-12 relative), H
/// rows unit or zero, W column lengths nonincreasing, idempotent.
fn c9_normalization() -> Outcome {
    let mut rng = SplitMix64::new(0xC9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let m = dim(&mut rng, 2, 10);
        let n = dim(&mut rng, 2, 10);
        let r = dim(&mut rng, 1, 5);
        let w = uniform(&mut rng, m, r, 4.0);
        let mut h = uniform(&mut rng, r, n, 4.0);
        if rng.next_open01() < 0.25 {
            let k = dim(&mut rng, 0, r - 1);
            for j in 0..n {
                h.set(k, j, 0.0);
            }
        }
        let (wn, hn) = normalize_solution(&w, &h).unwrap();
        let before = matmul(&w, &h).unwrap();
        worst = worst.max(dist(&before, &matmul(&wn, &hn).unwrap()) / frobenius_norm(&before));
        for k in 0..r {
            let len = frobenius_norm(&Matrix::from_rows(&[hn.row(k)]).unwrap());
            if len != 0.0 {
                worst = worst.max((len - 1.0).abs());
            }
        }
        let col_len = |k: usize| (0..m).map(|i| wn.get(i, k).powi(2)).sum::<f64>().sqrt();
        for k in 1..r {
            worst = worst.max(col_len(k) - col_len(k - 1));
        }
        let (w2, h2) = normalize_solution(&wn, &hn).unwrap();
        worst = worst.max(w2.max_abs_diff(&wn).unwrap() / frobenius_norm(&wn));
        worst = worst.max(h2.max_abs_diff(&hn).unwrap());
    }
    outcome(
        worst <= 1e-12,
        format!("1000 pairs, worst deviation {worst:.3e} (tol 1e-12)"),
    )
}

/// C10: Two bench runs with identical seeds give byte-identical CSV.
fn c10_determinism() -> Outcome {
    let spec = GeneratorSpec::new(30, 20, 4, 0.5, 1234).unwrap();
    let cfgs = preset("table1").unwrap().configs;
    let render = |workers| {
        let reports = run_benchmark(
            &spec,
            &cfgs,
            BenchOptions {
                samples: 8,
                workers,
            },
        )
        .unwrap();
        reports_to_csv(&reports, false)
    };
    let a = render(1);
    let b = render(1);
    let c = render(3);
    // Sanity: the same V and starting points are regenerated.
    let same_inputs = generate_v(&spec) == generate_v(&spec)
        && generate_init(&spec, 5) == generate_init(&spec, 5);
    outcome(
        a == b && a == c && same_inputs,
        format!(
            "{} CSV bytes, identical across repeats and worker counts: {}",
            a.len(),
            a == b && a == c
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("C1 nonexpansivity of T and S", c1_nonexpansivity),
        ("C2 gradient vs finite differences", c2_gradients),
        ("C3 MULT monotonicity", c3_mult_monotone),
        ("C4 KM distance monotonicity", c4_km_distance),
        ("C5 exact-factorization recovery", c5_exact_recovery),
        ("C6 Table 1 band (dense 50x25)", c6_table1),
        ("C7 Table 4 band (sparse 50x25)", c7_table4),
        ("C8 Table 7 ALS pathology (200x100)", c8_table7),
        ("C9 normalization invariants", c9_normalization),
        ("C10 byte-identical CSV", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        println!(
            "{} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
