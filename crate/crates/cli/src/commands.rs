use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use tvpwl::checks::{run_all, Fault, Operators};
use tvpwl::io::{read_image, write_image, ImageFormat};
use tvpwl::noise::NOISE_RNG;
use tvpwl::{
    add_gaussian_noise, estimate_gamma_over_tv, gamma_from_ground_truth, psnr, solve_tgv2, solve_tv,
    solve_tvpwl, ssim, NoiseSpec, ScalarField,
};

use crate::report::{finite_or_none, write_history, write_json, DenoiseReport, Metrics, ParamEcho};
use crate::{
    AddNoiseArgs, CheckArgs, CliError, CliResult, DenoiseArgs, EstimateGammaArgs, GammaSource,
    Regulariser, EXIT_IO, EXIT_NONCONVERGED, EXIT_OK,
};

fn read(path: &Path) -> CliResult<ScalarField> {
    read_image(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, field: &ScalarField) -> CliResult<()> {
    write_image(path, field).map_err(|e| match e {
        tvpwl::Error::Format(msg) => CliError::Usage(msg),
        other => CliError::Io(format!("{}: {other}", path.display())),
    })
}

/// Fails early on an output extension we cannot write.
fn check_output_format(path: &Path) -> CliResult<ImageFormat> {
    ImageFormat::from_path(path).map_err(|e| CliError::Usage(e.to_string()))
}

fn same_shape(a: &ScalarField, b: &ScalarField, what: &str) -> CliResult<()> {
    if a.shape() != b.shape() {
        return Err(CliError::Usage(format!(
            "{what} is {:?}, input is {:?}",
            b.shape(),
            a.shape()
        )));
    }
    Ok(())
}

fn resolve_delta(
    args: &DenoiseArgs,
    f: &ScalarField,
    gt: Option<&ScalarField>,
) -> CliResult<(f64, &'static str)> {
    if let Some(d) = args.delta {
        if !(d.is_finite() && d >= 0.0) {
            return Err(CliError::Usage(format!("--delta must be nonnegative, got {d}")));
        }
        return Ok((d, "flag"));
    }
    if let Some(s) = args.noise_std {
        if !(s.is_finite() && s >= 0.0) {
            return Err(CliError::Usage(format!("--noise-std must be nonnegative, got {s}")));
        }
        return Ok((s * (f.len() as f64).sqrt(), "noise-std"));
    }
    if let Some(gt) = gt {
        return Ok((f.sub(gt)?.l2_norm(), "ground-truth"));
    }
    Err(CliError::Usage(
        "delta unknown: pass --delta, --noise-std or --ground-truth".into(),
    ))
}

fn default_report_path(output: &Path) -> PathBuf {
    output.with_extension("json")
}

pub fn denoise(args: &DenoiseArgs) -> CliResult<u8> {
    args.solver.validate()?;
    check_output_format(&args.output)?;
    if args.regulariser == Regulariser::Tvpwl {
        match args.gamma_source {
            GammaSource::File if args.gamma.is_none() => {
                return Err(CliError::Usage("--gamma-source file requires --gamma".into()))
            }
            GammaSource::Gt if args.ground_truth.is_none() => {
                return Err(CliError::Usage("--gamma-source gt requires --ground-truth".into()))
            }
            _ => {}
        }
    }

    let f = read(&args.input)?;
    let gt = args.ground_truth.as_deref().map(read).transpose()?;
    if let Some(gt) = &gt {
        same_shape(&f, gt, "ground truth")?;
    }
    let (delta, delta_source) = resolve_delta(args, &f, gt.as_ref())?;
    let params = args.solver.solver();

    let mut gamma_time = None;
    let report = match args.regulariser {
        Regulariser::Tv => solve_tv(&f, delta, &params)?,
        Regulariser::Tgv => solve_tgv2(&f, delta, &args.solver.tgv(), &params)?,
        Regulariser::Tvpwl => {
            let start = Instant::now();
            let gamma = match args.gamma_source {
                GammaSource::File => {
                    let g = read(args.gamma.as_deref().expect("checked above"))?;
                    same_shape(&f, &g, "gamma")?;
                    g
                }
                GammaSource::Gt => gamma_from_ground_truth(gt.as_ref().expect("checked above")),
                GammaSource::OverTv => estimate_gamma_over_tv(&f, &args.solver.gamma())?,
            };
            gamma_time = Some(start.elapsed().as_secs_f64());
            solve_tvpwl(&f, &gamma, delta, &params)?
        }
    };

    write(&args.output, &report.final_u)?;
    let metrics = match &gt {
        Some(gt) => Some(Metrics {
            ssim: ssim(&report.final_u, gt, args.peak)?,
            psnr_db: finite_or_none(psnr(&report.final_u, gt, args.peak)?),
        }),
        None => None,
    };
    if let Some(path) = &args.history {
        write_history(path, &report)?;
    }
    let json = DenoiseReport {
        input: args.input.display().to_string(),
        output: args.output.display().to_string(),
        regulariser: args.regulariser.name(),
        gamma_source: (args.regulariser == Regulariser::Tvpwl).then(|| args.gamma_source.name()),
        delta,
        delta_source,
        params: ParamEcho::new(&args.solver, &report),
        iterations: report.iterations,
        converged: report.converged,
        final_residual: report.final_residual,
        wall_time_s: report.wall_time,
        gamma_time_s: gamma_time,
        metrics,
        residual_history: report.residual_history.clone(),
        gap_history: report.gap_history.clone(),
    };
    let report_path = args.report.clone().unwrap_or_else(|| default_report_path(&args.output));
    write_json(&report_path, &json)?;

    eprintln!(
        "{}: {} iterations, residual {:.3e}, {}",
        args.regulariser.name(),
        report.iterations,
        report.final_residual,
        if report.converged { "converged" } else { "NOT converged" }
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NONCONVERGED })
}

pub fn estimate_gamma(args: &EstimateGammaArgs) -> CliResult<u8> {
    check_output_format(&args.output)?;
    let gamma = match args.source {
        GammaSource::OverTv => {
            args.solver.gamma().validate()?;
            let input = args
                .input
                .as_deref()
                .ok_or_else(|| CliError::Usage("--source over-tv requires --input".into()))?;
            estimate_gamma_over_tv(&read(input)?, &args.solver.gamma())?
        }
        GammaSource::Gt => {
            let path = args
                .ground_truth
                .as_deref()
                .ok_or_else(|| CliError::Usage("--source gt requires --ground-truth".into()))?;
            gamma_from_ground_truth(&read(path)?)
        }
        GammaSource::File => {
            return Err(CliError::Usage("--source must be over-tv or gt".into()));
        }
    };
    if check_output_format(&args.output)? != ImageFormat::Raw {
        eprintln!("note: gamma is quantised to 8 bit in {}; use .raw to keep it exact", args.output.display());
    }
    write(&args.output, &gamma)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct NoiseReport<'a> {
    input: String,
    output: String,
    delta: f64,
    noise_std: f64,
    spec: &'a NoiseSpec,
    generator: &'static str,
}

pub fn add_noise(args: &AddNoiseArgs) -> CliResult<u8> {
    let format = check_output_format(&args.output)?;
    let spec = NoiseSpec {
        level: args.noise_level,
        seed: args.seed,
        peak: args.peak,
        sigma: args.noise_sigma,
    };
    spec.validate()?;
    let gt = read(&args.input)?;
    let (f, delta) = add_gaussian_noise(&gt, &spec)?;
    if format != ImageFormat::Raw {
        eprintln!(
            "note: {} stores 8-bit values; delta refers to the unquantised noise",
            args.output.display()
        );
    }
    write(&args.output, &f)?;
    let report = NoiseReport {
        input: args.input.display().to_string(),
        output: args.output.display().to_string(),
        delta,
        noise_std: spec.std_dev(),
        spec: &spec,
        generator: NOISE_RNG,
    };
    match &args.report {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string(&report).map_err(|e| CliError::Io(e.to_string()))?),
    }
    Ok(EXIT_OK)
}

pub fn check(args: &CheckArgs) -> CliResult<u8> {
    let ops = match args.inject_fault.as_deref() {
        None => Operators::default(),
        Some(name) => Operators::with_fault(
            Fault::parse(name).ok_or_else(|| CliError::Usage(format!("unknown fault {name}")))?,
        ),
    };
    let outcomes = run_all(&ops);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    for o in &outcomes {
        println!(
            "{:<4} {:<width$}  {:>7.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.seconds,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_IO })
}
