//! Desk-scale property suite: operator adjointness, the prox oracle,
//! formulation equivalence, the dual bound, the sandwich inequality and
//! solver invariants on small solves.
//!
//! The differential operators and the dual prox are passed in through
//! [`Operators`], so a deliberately broken operator can be checked to fail.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffops::{div, grad, GridSpacing};
use crate::error::Result;
use crate::field::{Inner, ScalarField, VectorField};
use crate::gamma::{estimate_gamma_over_tv, gamma_from_ground_truth, GammaEstimateParams};
use crate::noise::{add_gaussian_noise, NoiseSpec};
use crate::pdhg::{solve_tv, solve_tvpwl, SolveReport, SolverParams};
use crate::prox::{prox_rstar, ProxContext};
use crate::regularisers::{sandwich_check, tvpwl_closed_form, tvpwl_primal};
use crate::synthetic::generate_synthetic;

pub type GradFn = fn(&ScalarField, GridSpacing) -> VectorField;
pub type DivFn = fn(&VectorField, GridSpacing) -> ScalarField;
pub type ProxRStarFn = fn(&VectorField, &ProxContext<'_>) -> Result<VectorField>;

#[derive(Clone, Copy)]
pub struct Operators {
    pub grad: GradFn,
    pub div: DivFn,
    pub prox_rstar: ProxRStarFn,
}

impl Default for Operators {
    fn default() -> Self {
        Self { grad, div, prox_rstar }
    }
}

/// Known-bad operator variants for mutation testing of the suite itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// `div` with its sign flipped.
    DivSign,
    /// Projection branch of the dual prox entered at `2 + sigma gamma`
    /// instead of `1 + sigma gamma`.
    ProxBranch,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "div-sign" => Some(Self::DivSign),
            "prox-branch" => Some(Self::ProxBranch),
            _ => None,
        }
    }
}

fn flipped_div(p: &VectorField, h: GridSpacing) -> ScalarField {
    div(p, h).scale(-1.0)
}

fn wrong_branch_prox(p: &VectorField, ctx: &ProxContext<'_>) -> Result<VectorField> {
    p.ensure_same_shape(ctx.gamma.shape())?;
    let (rows, cols) = p.shape();
    let mut a = Vec::with_capacity(rows * cols);
    let mut b = Vec::with_capacity(rows * cols);
    for k in 0..rows * cols {
        let (x, y) = (p.first()[k], p.second()[k]);
        let sg = ctx.sigma * ctx.gamma.as_slice()[k];
        let n = (x * x + y * y).sqrt();
        let s = if n <= sg {
            0.0
        } else if n >= 2.0 + sg {
            1.0 / n
        } else {
            1.0 - sg / n
        };
        a.push(s * x);
        b.push(s * y);
    }
    Ok(VectorField::from_raw(rows, cols, a, b))
}

impl Operators {
    pub fn with_fault(fault: Fault) -> Self {
        let mut ops = Self::default();
        match fault {
            Fault::DivSign => ops.div = flipped_div,
            Fault::ProxBranch => ops.prox_rstar = wrong_branch_prox,
        }
        ops
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(name: &'static str, body: impl FnOnce() -> (bool, String)) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = body();
    CheckOutcome {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Golden-section minimisation of
/// `alpha -> sigma gamma n alpha + n^2 alpha^2 / 2 - n^2 alpha` over
/// `[0, 1/n]`, i.e. the dual prox restricted to the ray through `p`.
/// Returns the minimising vector `alpha p`.
pub fn prox_rstar_numeric(p: (f64, f64), sigma_gamma: f64) -> (f64, f64) {
    let n = (p.0 * p.0 + p.1 * p.1).sqrt();
    if n == 0.0 {
        return (0.0, 0.0);
    }
    // obj(b) - obj(a) in factored form; comparing raw objective values
    // loses the argmin to cancellation below sqrt(eps).
    let rise = |a: f64, b: f64| (b - a) * (sigma_gamma * n - n * n + 0.5 * n * n * (a + b));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0 / n);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    for _ in 0..200 {
        if rise(x1, x2) >= 0.0 {
            hi = x2;
            x2 = x1;
            x1 = hi - phi * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + phi * (hi - lo);
        }
    }
    let mut best = 0.5 * (lo + hi);
    for cand in [0.0, 1.0 / n] {
        if rise(best, cand) < 0.0 {
            best = cand;
        }
    }
    (best * p.0, best * p.1)
}

fn random_field(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> ScalarField {
    ScalarField::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

fn random_instance(rng: &mut ChaCha8Rng, max: usize) -> (ScalarField, ScalarField) {
    let (m, n) = (rng.random_range(1..=max), rng.random_range(1..=max));
    let u = random_field(rng, m, n, 0.0, 255.0);
    let g = random_field(rng, m, n, 0.0, 60.0);
    (u, g)
}

pub const ADJOINT_SHAPES: [(usize, usize); 5] = [(1, 1), (1, 7), (7, 1), (32, 32), (33, 47)];

/// `|<grad u, p> + <u, div p>| <= 1e-12 * scale` on random pairs.
pub fn check_adjointness(ops: &Operators, pairs_per_shape: usize, seed: u64) -> CheckOutcome {
    timed("adjointness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = GridSpacing::UNIT;
        let mut worst = 0.0f64;
        for &(m, n) in &ADJOINT_SHAPES {
            for _ in 0..pairs_per_shape {
                let u = random_field(&mut rng, m, n, -1.0, 1.0);
                let p = VectorField::from_components(
                    random_field(&mut rng, m, n, -1.0, 1.0),
                    random_field(&mut rng, m, n, -1.0, 1.0),
                )
                .expect("same shape");
                let gu = (ops.grad)(&u, h);
                let dp = (ops.div)(&p, h);
                let lhs = gu.inner(&p).expect("same shape");
                let rhs = u.inner(&dp).expect("same shape");
                let scale = gu.l2_norm() * p.l2_norm() + u.l2_norm() * dp.l2_norm() + f64::MIN_POSITIVE;
                worst = worst.max((lhs + rhs).abs() / scale);
            }
        }
        (worst <= 1e-12, format!("max relative defect {worst:.3e}"))
    })
}

/// Dual prox against the numeric argmin, a quarter of the samples placed
/// exactly on the branch boundaries `n = sigma gamma` and `n = 1 + sigma gamma`.
pub fn check_prox_oracle(ops: &Operators, samples: usize, seed: u64) -> CheckOutcome {
    timed("prox oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = ScalarField::zeros(1, 1);
        let mut worst = 0.0f64;
        let mut ties = 0;
        for k in 0..samples {
            let sigma = rng.random_range(0.01..2.0);
            let gamma = rng.random_range(0.0..2.0);
            let sg = sigma * gamma;
            let p = match k % 8 {
                0 | 1 => {
                    let t = rng.random_range(0.0..std::f64::consts::TAU);
                    let r = if k % 8 == 0 { sg } else { 1.0 + sg };
                    ties += 1;
                    (r * t.cos(), r * t.sin())
                }
                _ => (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            };
            let g = ScalarField::filled(1, 1, gamma);
            let ctx = ProxContext::new(sigma, 1.0, &g, 0.0, &f).expect("valid context");
            let pf = VectorField::from_components(ScalarField::filled(1, 1, p.0), ScalarField::filled(1, 1, p.1))
                .expect("same shape");
            let got = match (ops.prox_rstar)(&pf, &ctx) {
                Ok(v) => v.get(0, 0),
                Err(e) => return (false, format!("prox failed: {e}")),
            };
            let want = prox_rstar_numeric(p, sg);
            worst = worst.max((got.0 - want.0).abs().max((got.1 - want.1).abs()));
        }
        (worst <= 1e-8, format!("{samples} triples ({ties} ties), max error {worst:.3e}"))
    })
}

/// Closed form against the projected-gradient primal form.
pub fn check_formulations(instances: usize, max_side: usize, seed: u64) -> CheckOutcome {
    timed("formulation equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = GridSpacing::UNIT;
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let (u, g) = random_instance(&mut rng, max_side);
            let a = tvpwl_closed_form(&u, &g, h).expect("valid instance");
            let b = tvpwl_primal(&u, &g, h).expect("valid instance");
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
        (worst <= 1e-12, format!("max |closed - primal| / (1 + value) {worst:.3e}"))
    })
}

/// Random feasible dual fields never exceed the closed form.
pub fn check_dual_bound(ops: &Operators, instances: usize, fields: usize, seed: u64) -> CheckOutcome {
    timed("dual lower bound", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = GridSpacing::UNIT;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..instances {
            let (u, g) = random_instance(&mut rng, 32);
            let value = tvpwl_closed_form(&u, &g, h).expect("valid instance");
            let (m, n) = u.shape();
            for _ in 0..fields {
                // unit-ball samples, a share of them pushed onto the sphere
                let raw = VectorField::from_components(
                    random_field(&mut rng, m, n, -1.0, 1.0),
                    random_field(&mut rng, m, n, -1.0, 1.0),
                )
                .expect("same shape");
                let phi = if rng.random_bool(0.5) {
                    let norms = raw.norm2_pointwise();
                    let scale = norms.map(|v| if v > 0.0 { 1.0 / v } else { 0.0 });
                    VectorField::from_components(
                        raw.first_field().zip_map(&scale, |a, s| a * s).expect("same shape"),
                        raw.second_field().zip_map(&scale, |a, s| a * s).expect("same shape"),
                    )
                    .expect("same shape")
                } else {
                    crate::prox::project_unit_ball(&raw, 1.0).expect("radius 1")
                };
                // dual value through the supplied divergence
                let coupling = u.inner(&(ops.div)(&phi, h)).expect("same shape");
                let penalty = phi.norm2_pointwise().inner(&g).expect("same shape");
                let dual = coupling - penalty;
                worst = worst.max(dual - value);
            }
        }
        (worst <= 1e-9, format!("max (dual - closed form) {worst:.3e}"))
    })
}

pub fn check_sandwich(instances: usize, seed: u64) -> CheckOutcome {
    timed("sandwich inequality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = GridSpacing::UNIT;
        let mut failures = 0;
        for _ in 0..instances {
            let (u, g) = random_instance(&mut rng, 48);
            let s = sandwich_check(&u, &g, h).expect("valid instance");
            if !s.holds(1e-10) {
                failures += 1;
            }
        }
        (failures == 0, format!("{failures} of {instances} instances violate"))
    })
}

/// `||u - f|| <= delta (1 + 1e-9)`.
pub fn feasible(report: &SolveReport, f: &ScalarField, delta: f64) -> bool {
    report.final_u.sub(f).map(|d| d.l2_norm()).unwrap_or(f64::INFINITY) <= delta * (1.0 + 1e-9)
}

/// `min f - eps <= u <= max f + eps` with `eps = 1e-6 (max f - min f)`.
pub fn within_range(u: &ScalarField, f: &ScalarField) -> bool {
    let eps = 1e-6 * (f.max() - f.min());
    u.min() >= f.min() - eps && u.max() <= f.max() + eps
}

/// TV with gamma = 0 against TV on a synthetic instance.
pub fn check_zero_gamma_reduction(size: usize, tol: f64, seed: u64) -> CheckOutcome {
    timed("gamma = 0 reduction", || {
        let gt = match generate_synthetic(size, size) {
            Ok(g) => g,
            Err(e) => return (false, e.to_string()),
        };
        let (f, delta) = add_gaussian_noise(&gt, &NoiseSpec::new(0.1, seed)).expect("valid spec");
        let params = SolverParams { tol, record_history: false, ..SolverParams::default() };
        let a = solve_tv(&f, delta, &params).expect("valid problem");
        let b = solve_tvpwl(&f, &ScalarField::zeros(size, size), delta, &params).expect("valid problem");
        let rms = a.final_u.sub(&b.final_u).expect("same shape").l2_norm() / (size as f64);
        (rms <= 1e-6, format!("RMS difference {rms:.3e} ({size}x{size}, tol {tol:e})"))
    })
}

/// Max principle and feasibility for TV and TV_pwL (both gamma sources) on
/// the synthetic image at each noise level.
pub fn check_solver_invariants(size: usize, levels: &[f64], seed: u64) -> CheckOutcome {
    timed("max principle + feasibility", || {
        let gt = match generate_synthetic(size, size) {
            Ok(g) => g,
            Err(e) => return (false, e.to_string()),
        };
        let params = SolverParams { record_history: false, ..SolverParams::default() };
        let mut notes = Vec::new();
        let mut ok = true;
        for &level in levels {
            let (f, delta) = add_gaussian_noise(&gt, &NoiseSpec::new(level, seed)).expect("valid spec");
            let g_gt = gamma_from_ground_truth(&gt);
            let g_tv = estimate_gamma_over_tv(&f, &GammaEstimateParams::default()).expect("valid params");
            let runs = [
                ("tv", solve_tv(&f, delta, &params)),
                ("tvpwl-gt", solve_tvpwl(&f, &g_gt, delta, &params)),
                ("tvpwl-over-tv", solve_tvpwl(&f, &g_tv, delta, &params)),
            ];
            for (name, run) in runs {
                let r = run.expect("valid problem");
                let good = r.converged && feasible(&r, &f, delta) && within_range(&r.final_u, &f);
                if !good {
                    ok = false;
                    notes.push(format!("{name}@{level}: converged={} feasible={} in-range={}",
                        r.converged, feasible(&r, &f, delta), within_range(&r.final_u, &f)));
                }
            }
        }
        let detail = if ok {
            format!("{} solves at {size}x{size}", 3 * levels.len())
        } else {
            notes.join("; ")
        };
        (ok, detail)
    })
}

/// The suite run by the `check` command.
pub fn run_all(ops: &Operators) -> Vec<CheckOutcome> {
    vec![
        check_adjointness(ops, 20, 1),
        check_prox_oracle(ops, 2_000, 2),
        check_formulations(30, 32, 3),
        check_dual_bound(ops, 10, 20, 4),
        check_sandwich(50, 5),
        check_zero_gamma_reduction(64, 1e-5, 6),
        check_solver_invariants(64, &[0.1], 7),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_with_library_operators() {
        for c in run_all(&Operators::default()) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn flipped_div_breaks_adjointness() {
        let ops = Operators::with_fault(Fault::DivSign);
        assert!(!check_adjointness(&ops, 5, 1).passed);
    }

    #[test]
    fn wrong_prox_branch_is_caught() {
        let ops = Operators::with_fault(Fault::ProxBranch);
        assert!(!check_prox_oracle(&ops, 500, 2).passed);
        assert!(check_adjointness(&ops, 5, 1).passed);
    }

    #[test]
    fn fault_names() {
        assert_eq!(Fault::parse("div-sign"), Some(Fault::DivSign));
        assert_eq!(Fault::parse("prox-branch"), Some(Fault::ProxBranch));
        assert_eq!(Fault::parse("other"), None);
    }

    #[test]
    fn numeric_prox_handles_origin() {
        assert_eq!(prox_rstar_numeric((0.0, 0.0), 0.3), (0.0, 0.0));
    }
}
