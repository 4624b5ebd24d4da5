//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs sequentially so the wall-time comparisons are meaningful.

use std::process::ExitCode;
use std::time::Instant;

use tvpwl::checks::{
    check_adjointness, check_dual_bound, check_formulations, check_prox_oracle, check_sandwich,
    check_zero_gamma_reduction, feasible, within_range, CheckOutcome, Operators,
};
use tvpwl::{
    add_gaussian_noise, estimate_gamma_over_tv, gamma_from_ground_truth, generate_synthetic, opnorm_estimate, psnr,
    solve_tgv2, solve_tv, solve_tvpwl, ssim, GammaEstimateParams, GridSpacing, NoiseSpec, ScalarField, SolveReport,
    SolverParams, TgvParams,
};

const SIZE: usize = 256;
const SEED: u64 = 42;
const PEAK: f64 = 255.0;

struct Line {
    id: u32,
    passed: bool,
    text: String,
}

fn line(id: u32, passed: bool, text: String) -> Line {
    let l = Line { id, passed, text };
    println!("{} {:>2}  {}", if l.passed { "PASS" } else { "FAIL" }, l.id, l.text);
    l
}

fn from_check(id: u32, c: CheckOutcome, limit_s: f64) -> Line {
    let in_time = c.seconds < limit_s;
    line(
        id,
        c.passed && in_time,
        format!("{}: {} [{:.2}s, limit {limit_s}s]", c.name, c.detail, c.seconds),
    )
}

/// One solve on the synthetic image, with its problem data.
struct Run {
    label: String,
    f: ScalarField,
    delta: f64,
    report: SolveReport,
    /// Solve time plus gamma estimation where there is one.
    total_s: f64,
}

fn noisy(gt: &ScalarField, level: f64) -> (ScalarField, f64) {
    add_gaussian_noise(gt, &NoiseSpec::new(level, SEED)).expect("valid noise spec")
}

fn run_method(gt: &ScalarField, level: f64, method: &str, gamma_params: &GammaEstimateParams) -> Run {
    let (f, delta) = noisy(gt, level);
    let params = SolverParams::default();
    let start = Instant::now();
    let report = match method {
        "tv" => solve_tv(&f, delta, &params),
        "tgv" => solve_tgv2(&f, delta, &TgvParams::default(), &params),
        "tvpwl-gt" => solve_tvpwl(&f, &gamma_from_ground_truth(gt), delta, &params),
        "tvpwl-over-tv" => {
            let gamma = estimate_gamma_over_tv(&f, gamma_params).expect("valid gamma params");
            solve_tvpwl(&f, &gamma, delta, &params)
        }
        other => unreachable!("{other}"),
    }
    .expect("valid problem");
    Run {
        label: format!("{method}@{level}"),
        f,
        delta,
        report,
        total_s: start.elapsed().as_secs_f64(),
    }
}

fn main() -> ExitCode {
    let ops = Operators::default();
    let mut lines = Vec::new();

    lines.push(from_check(1, check_adjointness(&ops, 100, 11), 1.0));

    let start = Instant::now();
    let est = opnorm_estimate((SIZE, SIZE), GridSpacing::UNIT, 1000).expect("valid shape");
    let secs = start.elapsed().as_secs_f64();
    lines.push(line(
        2,
        est > 7.9 && est <= 8.0 && secs < 1.0,
        format!("operator norm estimate {est:.6} on {SIZE}x{SIZE} in (7.9, 8] [{secs:.2}s, limit 1s]"),
    ));

    lines.push(from_check(3, check_prox_oracle(&ops, 10_000, 13), 5.0));
    lines.push(from_check(4, check_formulations(100, 64, 14), 2.0));
    lines.push(from_check(5, check_dual_bound(&ops, 10, 100, 15), 2.0));
    lines.push(from_check(6, check_sandwich(100, 16), 1.0));
    lines.push(from_check(7, check_zero_gamma_reduction(64, 1e-5, 17), 30.0));

    let gt = generate_synthetic(SIZE, SIZE).expect("valid size");
    let gamma_default = GammaEstimateParams::default();

    // Benchmark at 10%: the four methods, sequential.
    let bench_start = Instant::now();
    let bench: Vec<Run> = ["tv", "tvpwl-over-tv", "tvpwl-gt", "tgv"]
        .iter()
        .map(|m| run_method(&gt, 0.1, m, &gamma_default))
        .collect();
    let bench_s = bench_start.elapsed().as_secs_f64();
    let extra: Vec<Run> = ["tv", "tvpwl-over-tv", "tvpwl-gt"]
        .iter()
        .map(|m| run_method(&gt, 0.2, m, &gamma_default))
        .collect();

    // Max principle: TV and TV_pwL at both levels.
    let first_order: Vec<&Run> = bench.iter().filter(|r| !r.label.starts_with("tgv")).chain(extra.iter()).collect();
    let mp_s: f64 = first_order.iter().map(|r| r.total_s).sum();
    let out_of_range: Vec<&str> = first_order
        .iter()
        .filter(|r| !(r.report.converged && within_range(&r.report.final_u, &r.f)))
        .map(|r| r.label.as_str())
        .collect();
    lines.push(line(
        8,
        out_of_range.is_empty() && mp_s < 60.0,
        format!(
            "{} TV/TV_pwL solves at 10% and 20% within [min f, max f] +- 1e-6 range{} [{mp_s:.1}s, limit 60s]",
            first_order.len(),
            if out_of_range.is_empty() { String::new() } else { format!("; violated by {out_of_range:?}") }
        ),
    ));

    // Lambda sweep, needed for the feasibility tally as well.
    let sweep_start = Instant::now();
    let sweep: Vec<(f64, Run, f64)> = [100.0, 200.0, 300.0, 400.0]
        .into_iter()
        .map(|lambda| {
            let params = GammaEstimateParams { lambda, ..GammaEstimateParams::default() };
            let run = run_method(&gt, 0.1, "tvpwl-over-tv", &params);
            let s = ssim(&run.report.final_u, &gt, PEAK).expect("shape");
            (lambda, run, s)
        })
        .collect();
    let sweep_s = sweep_start.elapsed().as_secs_f64();

    let all_runs: Vec<&Run> = bench.iter().chain(&extra).chain(sweep.iter().map(|(_, r, _)| r)).collect();
    let mut worst_ratio = 0.0f64;
    let mut infeasible = Vec::new();
    let mut converged_runs = 0;
    for r in &all_runs {
        if !r.report.converged {
            continue;
        }
        converged_runs += 1;
        let dist = r.report.final_u.sub(&r.f).expect("shape").l2_norm();
        worst_ratio = worst_ratio.max(dist / r.delta);
        if !feasible(&r.report, &r.f, r.delta) {
            infeasible.push(r.label.clone());
        }
    }
    lines.push(line(
        9,
        infeasible.is_empty() && converged_runs > 0,
        format!(
            "{converged_runs} converged solves, max ||u-f||/delta = {worst_ratio:.12}{}",
            if infeasible.is_empty() { String::new() } else { format!("; infeasible: {infeasible:?}") }
        ),
    ));

    let score = |r: &Run| {
        (
            ssim(&r.report.final_u, &gt, PEAK).expect("shape"),
            psnr(&r.report.final_u, &gt, PEAK).expect("shape"),
        )
    };
    let (tv, over_tv, pwl_gt, tgv) = (&bench[0], &bench[1], &bench[2], &bench[3]);
    let (s_tv, p_tv) = score(tv);
    let (s_otv, p_otv) = score(over_tv);
    let (s_gt, p_gt) = score(pwl_gt);
    let (s_tgv, p_tgv) = score(tgv);
    let ok10 = s_gt - s_tv >= 0.01
        && s_tgv - s_tv >= 0.01
        && (0.85..1.0).contains(&s_tv)
        && (28.0..=40.0).contains(&p_tv)
        && bench_s < 300.0;
    lines.push(line(
        10,
        ok10,
        format!(
            "SSIM/PSNR  TV {s_tv:.4}/{p_tv:.2}  TV_pwL(over-TV) {s_otv:.4}/{p_otv:.2}  TV_pwL(GT) {s_gt:.4}/{p_gt:.2}  \
             TGV {s_tgv:.4}/{p_tgv:.2}; GT-TV {:+.4}, TGV-TV {:+.4} [{bench_s:.1}s, limit 300s]",
            s_gt - s_tv,
            s_tgv - s_tv
        ),
    ));

    let t_tgv = tgv.report.wall_time;
    let t_gt = pwl_gt.report.wall_time;
    let t_otv = over_tv.report.wall_time;
    lines.push(line(
        11,
        t_tgv >= 2.0 * t_gt && t_tgv >= 2.0 * t_otv,
        format!(
            "TGV {t_tgv:.2}s vs TV_pwL(GT) {t_gt:.2}s ({:.1}x), TV_pwL(over-TV) {t_otv:.2}s ({:.1}x)",
            t_tgv / t_gt,
            t_tgv / t_otv
        ),
    ));

    let ssims: Vec<f64> = sweep.iter().map(|(_, _, s)| *s).collect();
    let spread = ssims.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ssims.iter().cloned().fold(f64::INFINITY, f64::min);
    let per_lambda: Vec<String> = sweep.iter().map(|(l, _, s)| format!("{l}: {s:.4}")).collect();
    lines.push(line(
        12,
        spread <= 0.02 && sweep_s < 600.0,
        format!("TV_pwL(over-TV) SSIM by lambda {{{}}}, spread {spread:.4} [{sweep_s:.1}s, limit 600s]", per_lambda.join(", ")),
    ));

    let mut ok13 = true;
    let mut notes = Vec::new();
    for r in &bench {
        let min_gap = r.report.gap_history.iter().cloned().fold(f64::INFINITY, f64::min);
        let good = r.report.converged
            && r.report.iterations <= 100_000
            && r.report.final_residual <= 1e-3
            && min_gap >= -1e-9
            && r.report.gap_history.len() == r.report.iterations;
        ok13 &= good;
        notes.push(format!("{} {} it, min gap {min_gap:.2e}", r.label, r.report.iterations));
    }
    lines.push(line(13, ok13, notes.join("; ")));

    let failed = lines.iter().filter(|l| !l.passed).count();
    println!("{} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
