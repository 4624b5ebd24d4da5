//! Benchmark harness: every image x noise level x method, run on a worker
//! pool, written as one CSV plus a residual history per run.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tvpwl::io::read_image;
use tvpwl::{
    add_gaussian_noise, estimate_gamma_over_tv, gamma_from_ground_truth, generate_synthetic, psnr,
    solve_tgv2, solve_tv, solve_tvpwl, ssim, NoiseSpec, ScalarField, SolveReport,
};

use crate::report::{write_benchmark_csv, write_history, BenchmarkRecord};
use crate::{BenchmarkArgs, CliError, CliResult, EXIT_NONCONVERGED, EXIT_OK, WORKERS_ENV};

pub const SYNTHETIC_NAME: &str = "synthetic";

/// (method, gamma source) in output order.
pub const METHODS: [(&str, &str); 4] = [("tv", "none"), ("tvpwl", "over-tv"), ("tvpwl", "gt"), ("tgv", "none")];

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "raw", "f64"];

/// Global seed combined with the first 8 bytes of SHA-256 of the image name.
pub fn image_seed(global: u64, name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    global ^ u64::from_le_bytes(head)
}

struct Image {
    name: String,
    gt: ScalarField,
}

struct Job<'a> {
    image: &'a Image,
    level: f64,
    spec: NoiseSpec,
    method: (&'static str, &'static str),
}

fn load_images(args: &BenchmarkArgs) -> CliResult<Vec<Image>> {
    if args.synthetic {
        let gt = generate_synthetic(args.size, args.size).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok(vec![Image { name: SYNTHETIC_NAME.into(), gt }]);
    }
    let dir = args.images.as_deref().expect("clap enforces --images without --synthetic");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io(format!("no images (.png, .pgm, .raw) in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let gt = read_image(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let name = p.file_name().expect("file").to_string_lossy().into_owned();
            Ok(Image { name, gt })
        })
        .collect()
}

fn worker_count(args: &BenchmarkArgs) -> CliResult<usize> {
    if let Some(n) = args.workers {
        return Ok(n);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn history_name(image: &str, level: f64, method: &str, source: &str) -> String {
    let clean: String = image
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if source == "none" {
        format!("{clean}_{level}_{method}.csv")
    } else {
        format!("{clean}_{level}_{method}_{source}.csv")
    }
}

fn run_job(job: &Job<'_>, args: &BenchmarkArgs) -> CliResult<(BenchmarkRecord, SolveReport)> {
    let gt = &job.image.gt;
    let (f, delta) = add_gaussian_noise(gt, &job.spec)?;
    let params = args.solver.solver();
    let report = match job.method {
        ("tv", _) => solve_tv(&f, delta, &params)?,
        ("tgv", _) => solve_tgv2(&f, delta, &args.solver.tgv(), &params)?,
        (_, "gt") => solve_tvpwl(&f, &gamma_from_ground_truth(gt), delta, &params)?,
        _ => solve_tvpwl(&f, &estimate_gamma_over_tv(&f, &args.solver.gamma())?, delta, &params)?,
    };
    let record = BenchmarkRecord {
        image: job.image.name.clone(),
        noise_level: job.level,
        method: job.method.0,
        gamma_source: job.method.1,
        ssim: ssim(&report.final_u, gt, args.peak)?,
        psnr_db: psnr(&report.final_u, gt, args.peak)?,
        iterations: report.iterations,
        converged: report.converged,
        wall_time_s: report.wall_time,
        sigma: report.sigma,
        tau: report.tau,
        theta: args.solver.theta,
        tol: args.solver.tol,
        beta: args.solver.beta,
        lambda: args.solver.lambda,
        rho: args.solver.rho,
        seed: job.spec.seed,
    };
    Ok((record, report))
}

pub fn run(args: &BenchmarkArgs) -> CliResult<u8> {
    args.solver.validate()?;
    let levels: Vec<f64> = match args.noise_sigma {
        Some(s) => vec![s / args.peak],
        None => args.noise_level.clone(),
    };
    for &level in &levels {
        let spec = NoiseSpec { level, seed: 0, peak: args.peak, sigma: args.noise_sigma };
        spec.validate()?;
    }
    let images = load_images(args)?;
    let workers = worker_count(args)?;

    let history_dir = args.out_dir.join("history");
    fs::create_dir_all(&history_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", history_dir.display())))?;

    let jobs: Vec<Job<'_>> = images
        .iter()
        .flat_map(|image| {
            let seed = image_seed(args.seed, &image.name);
            levels.iter().flat_map(move |&level| {
                let spec = NoiseSpec { level, seed, peak: args.peak, sigma: args.noise_sigma };
                METHODS.iter().map(move |&method| Job { image, level, spec, method })
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    // collect() keeps job order, so the CSV does not depend on scheduling.
    let results: Vec<CliResult<(BenchmarkRecord, SolveReport)>> =
        pool.install(|| jobs.par_iter().map(|job| run_job(job, args)).collect());

    let mut records = Vec::with_capacity(results.len());
    for (job, result) in jobs.iter().zip(results) {
        let (record, report) = result?;
        let name = history_name(&job.image.name, job.level, job.method.0, job.method.1);
        write_history(&history_dir.join(name), &report)?;
        eprintln!(
            "{} @ {}: {}/{} ssim {:.4} psnr {:.2} dB, {} it, {:.2}s{}",
            record.image,
            record.noise_level,
            record.method,
            record.gamma_source,
            record.ssim,
            record.psnr_db,
            record.iterations,
            record.wall_time_s,
            if record.converged { "" } else { " (not converged)" }
        );
        records.push(record);
    }
    write_benchmark_csv(&args.out_dir.join("benchmark.csv"), &records)?;
    let all_converged = records.iter().all(|r| r.converged);
    Ok(if all_converged { EXIT_OK } else { EXIT_NONCONVERGED })
}
