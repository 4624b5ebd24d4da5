//! Primal-dual hybrid gradient solvers for
//!
//! ```text
//! min_u J(u)   s.t.  ||u - f||_2 <= delta
//! ```
//!
//! with `J` one of TV, TV_pwL or second-order TGV. Every solver starts from
//! `u = ubar = f` and `p = grad f`, alternates a dual proximal step, a primal
//! projection onto the fidelity ball and the extrapolation
//! `ubar = u_new + theta (u_new - u)`, and stops once the iterate-difference
//! residual drops below `tol`.

use std::time::Instant;

use crate::diffops::{div_into, grad_into, tgv_opnorm_estimate, GridSpacing, TgvOperator};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::prox::{
    check_gamma, project_ball_in_place, project_l2_ball_in_place, project_tensor_ball_in_place,
    prox_rstar_in_place,
};

/// Squared norm bound of the forward-difference gradient at unit spacing.
pub const GRAD_NORM_SQ_BOUND: f64 = 8.0;

/// The solvers work on the unit grid.
const UNIT_H: f64 = 1.0;

/// Safety factor applied to the power-iteration estimate of the TGV operator norm.
pub const TGV_NORM_SAFETY: f64 = 1.01;

/// Power iterations used to estimate the TGV operator norm.
pub const TGV_NORM_ITERS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub record_history: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        let step = 0.99 / GRAD_NORM_SQ_BOUND.sqrt();
        Self {
            sigma: step,
            tau: step,
            theta: 1.0,
            tol: 1e-3,
            max_iter: 100_000,
            record_history: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::param("theta", format!("must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        let product = self.sigma * self.tau * GRAD_NORM_SQ_BOUND;
        if product >= 1.0 {
            return Err(Error::param(
                "sigma*tau",
                format!("sigma * tau * L^2 = {product} violates the step condition (< 1)"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TgvParams {
    /// Weight of the symmetrised-gradient term.
    pub beta: f64,
}

impl Default for TgvParams {
    fn default() -> Self {
        Self { beta: 1.25 }
    }
}

impl TgvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::param("beta", format!("must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// `delta - ||u_k - f||` after every primal step.
    pub gap_history: Vec<f64>,
    /// Seconds spent inside the iteration loop, including setup.
    pub wall_time: f64,
    pub final_u: ScalarField,
    pub final_residual: f64,
    pub converged: bool,
    /// Step sizes actually used (rescaled for TGV).
    pub sigma: f64,
    pub tau: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param("delta", format!("must be nonnegative, got {delta}")));
    }
    Ok(())
}

#[inline]
fn abs_sum(acc: f64, v: f64) -> f64 {
    acc + v.abs()
}

/// Shared residual evaluation from precomputed operator images.
///
/// `div_p`/`div_p_next` are `div p_k`, `div p_{k+1}` and `grad_e` is
/// `grad(u_k - ubar_{k+1})`.
#[allow(clippy::too_many_arguments)]
fn residual_from_parts(
    u: &[f64],
    u_next: &[f64],
    div_p: &[f64],
    div_p_next: &[f64],
    p: (&[f64], &[f64]),
    p_next: (&[f64], &[f64]),
    grad_e: (&[f64], &[f64]),
    sigma: f64,
    tau: f64,
) -> f64 {
    let n = u.len();
    let mut primal = 0.0;
    for k in 0..n {
        // grad^* = -div, so -tau grad^*(p_k - p_{k+1}) = tau (div p_k - div p_{k+1}).
        primal = abs_sum(primal, (u[k] - u_next[k] + tau * (div_p[k] - div_p_next[k])) / tau);
    }
    let mut dual = 0.0;
    for k in 0..n {
        dual = abs_sum(dual, (p.0[k] - p_next.0[k] - sigma * grad_e.0[k]) / sigma);
    }
    for k in 0..n {
        dual = abs_sum(dual, (p.1[k] - p_next.1[k] - sigma * grad_e.1[k]) / sigma);
    }
    (primal + dual) / n as f64
}

/// Normalised primal-dual residual between consecutive iterates:
///
/// ```text
/// ( sum |(u_k - u_{k+1} - tau grad^*(p_k - p_{k+1})) / tau|
///   + sum |(p_k - p_{k+1} - sigma grad(u_k - ubar_{k+1})) / sigma| ) / (M N)
/// ```
///
/// The absolute values are taken entrywise, over both components of `p`.
#[allow(clippy::too_many_arguments)]
pub fn residual(
    u_k: &ScalarField,
    u_next: &ScalarField,
    p_k: &VectorField,
    p_next: &VectorField,
    ubar_next: &ScalarField,
    sigma: f64,
    tau: f64,
) -> Result<f64> {
    let shape = u_k.shape();
    u_next.ensure_same_shape(shape)?;
    ubar_next.ensure_same_shape(shape)?;
    p_k.ensure_same_shape(shape)?;
    p_next.ensure_same_shape(shape)?;
    let (rows, cols) = shape;
    let n = rows * cols;
    let (mut dp, mut dpn) = (vec![0.0; n], vec![0.0; n]);
    div_into(p_k.first(), p_k.second(), rows, cols, UNIT_H, &mut dp);
    div_into(p_next.first(), p_next.second(), rows, cols, UNIT_H, &mut dpn);
    let e: Vec<f64> = u_k.as_slice().iter().zip(ubar_next.as_slice()).map(|(a, b)| a - b).collect();
    let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);
    grad_into(&e, rows, cols, UNIT_H, &mut g1, &mut g2);
    Ok(residual_from_parts(
        u_k.as_slice(),
        u_next.as_slice(),
        &dp,
        &dpn,
        (p_k.first(), p_k.second()),
        (p_next.first(), p_next.second()),
        (&g1, &g2),
        sigma,
        tau,
    ))
}

/// Generic first-order loop with `K = grad`. `dual_prox` acts in place on
/// `p + sigma grad ubar`; `primal_prox(u, tau)` acts in place on
/// `u + tau div p`. When `delta` is given, the fidelity gap is recorded.
pub(crate) fn run_grad_pdhg(
    f: &ScalarField,
    params: &SolverParams,
    delta: Option<f64>,
    mut dual_prox: impl FnMut(&mut [f64], &mut [f64]),
    mut primal_prox: impl FnMut(&mut [f64], f64),
) -> SolveReport {
    let start = Instant::now();
    let (rows, cols) = f.shape();
    let n = rows * cols;
    let h = UNIT_H;
    let (sigma, tau, theta) = (params.sigma, params.tau, params.theta);
    let fs = f.as_slice();

    let mut u = fs.to_vec();
    let mut ubar = fs.to_vec();
    let (mut p1, mut p2) = (vec![0.0; n], vec![0.0; n]);
    grad_into(&u, rows, cols, h, &mut p1, &mut p2);
    let mut div_p = vec![0.0; n];
    div_into(&p1, &p2, rows, cols, h, &mut div_p);

    let (mut pn1, mut pn2) = (vec![0.0; n], vec![0.0; n]);
    let mut div_pn = vec![0.0; n];
    let mut un = vec![0.0; n];
    let mut ubar_n = vec![0.0; n];
    let mut e = vec![0.0; n];
    let (mut g1, mut g2) = (vec![0.0; n], vec![0.0; n]);

    let mut residual_history = Vec::new();
    let mut gap_history = Vec::new();
    let mut iterations = 0;
    let mut final_residual = f64::INFINITY;
    let mut converged = false;

    for _ in 0..params.max_iter {
        grad_into(&ubar, rows, cols, h, &mut g1, &mut g2);
        for k in 0..n {
            pn1[k] = p1[k] + sigma * g1[k];
            pn2[k] = p2[k] + sigma * g2[k];
        }
        dual_prox(&mut pn1, &mut pn2);

        div_into(&pn1, &pn2, rows, cols, h, &mut div_pn);
        for k in 0..n {
            un[k] = u[k] + tau * div_pn[k];
        }
        primal_prox(&mut un, tau);

        for k in 0..n {
            ubar_n[k] = un[k] + theta * (un[k] - u[k]);
            e[k] = u[k] - ubar_n[k];
        }
        grad_into(&e, rows, cols, h, &mut g1, &mut g2);
        let res = residual_from_parts(
            &u,
            &un,
            &div_p,
            &div_pn,
            (&p1, &p2),
            (&pn1, &pn2),
            (&g1, &g2),
            sigma,
            tau,
        );
        iterations += 1;
        final_residual = res;
        if params.record_history {
            residual_history.push(res);
            if let Some(delta) = delta {
                let dist = un.iter().zip(fs).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b)).sqrt();
                gap_history.push(delta - dist);
            }
        }

        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut ubar, &mut ubar_n);
        std::mem::swap(&mut p1, &mut pn1);
        std::mem::swap(&mut p2, &mut pn2);
        std::mem::swap(&mut div_p, &mut div_pn);

        if res <= params.tol {
            converged = true;
            break;
        }
    }

    SolveReport {
        iterations,
        residual_history,
        gap_history,
        wall_time: start.elapsed().as_secs_f64(),
        final_u: ScalarField::from_raw(rows, cols, u),
        final_residual,
        converged,
        sigma,
        tau,
    }
}

/// TV_pwL denoising with the per-pixel Lipschitz budget `gamma`.
pub fn solve_tvpwl(
    f: &ScalarField,
    gamma: &ScalarField,
    delta: f64,
    params: &SolverParams,
) -> Result<SolveReport> {
    params.validate()?;
    check_delta(delta)?;
    f.ensure_same_shape(gamma.shape())?;
    check_gamma(gamma)?;
    let sigma = params.sigma;
    let g = gamma.as_slice();
    let fs = f.as_slice();
    Ok(run_grad_pdhg(
        f,
        params,
        Some(delta),
        |p1, p2| prox_rstar_in_place(p1, p2, sigma, g),
        |u, _| project_l2_ball_in_place(u, fs, delta),
    ))
}

/// TV denoising; the dual step is the projection onto the unit ball.
pub fn solve_tv(f: &ScalarField, delta: f64, params: &SolverParams) -> Result<SolveReport> {
    params.validate()?;
    check_delta(delta)?;
    let fs = f.as_slice();
    Ok(run_grad_pdhg(
        f,
        params,
        Some(delta),
        |p1, p2| project_ball_in_place(p1, p2, 1.0),
        |u, _| project_l2_ball_in_place(u, fs, delta),
    ))
}

/// Second-order TGV denoising,
///
/// ```text
/// min_{u, w} ||grad u - w||_{2,1} + beta ||E w||_{F,1}   s.t. ||u - f|| <= delta,
/// ```
///
/// solved on the stacked operator `K(u, w) = (grad u - w, E w)`. The step
/// sizes in `params` (valid for `||grad||^2 <= 8`) are rescaled by
/// `sqrt(8 / (1.01 ||K||^2_est))`.
pub fn solve_tgv2(
    f: &ScalarField,
    delta: f64,
    tgv: &TgvParams,
    params: &SolverParams,
) -> Result<SolveReport> {
    params.validate()?;
    tgv.validate()?;
    check_delta(delta)?;
    let start = Instant::now();

    let (rows, cols) = f.shape();
    let n = rows * cols;
    let h = UNIT_H;
    let k_norm_sq = tgv_opnorm_estimate((rows, cols), GridSpacing::UNIT, TGV_NORM_ITERS)? * TGV_NORM_SAFETY;
    let scale = if k_norm_sq > 0.0 {
        (GRAD_NORM_SQ_BOUND / k_norm_sq).sqrt()
    } else {
        1.0
    };
    let (sigma, tau, theta) = (params.sigma * scale, params.tau * scale, params.theta);
    let beta = tgv.beta;
    let op = TgvOperator { rows, cols, h };
    let fs = f.as_slice();

    let zeros = || vec![0.0; n];
    let mut u = fs.to_vec();
    let mut ubar = fs.to_vec();
    let (mut w1, mut w2, mut wbar1, mut wbar2) = (zeros(), zeros(), zeros(), zeros());
    let (mut p1, mut p2) = (zeros(), zeros());
    let (mut q11, mut q22, mut q12) = (zeros(), zeros(), zeros());
    op.forward(&u, &w1, &w2, (&mut p1, &mut p2), (&mut q11, &mut q22, &mut q12));
    // K^*(p_k, q_k), carried between iterations.
    let (mut au, mut aw1, mut aw2) = (zeros(), zeros(), zeros());
    op.adjoint(&p1, &p2, (&q11, &q22, &q12), &mut au, (&mut aw1, &mut aw2));

    let (mut pn1, mut pn2) = (zeros(), zeros());
    let (mut qn11, mut qn22, mut qn12) = (zeros(), zeros(), zeros());
    let (mut kp1, mut kp2) = (zeros(), zeros());
    let (mut kq11, mut kq22, mut kq12) = (zeros(), zeros(), zeros());
    let (mut aun, mut awn1, mut awn2) = (zeros(), zeros(), zeros());
    let (mut un, mut wn1, mut wn2) = (zeros(), zeros(), zeros());
    let (mut ubar_n, mut wbar_n1, mut wbar_n2) = (zeros(), zeros(), zeros());
    let (mut eu, mut ew1, mut ew2) = (zeros(), zeros(), zeros());

    let mut residual_history = Vec::new();
    let mut gap_history = Vec::new();
    let mut iterations = 0;
    let mut final_residual = f64::INFINITY;
    let mut converged = false;

    for _ in 0..params.max_iter {
        op.forward(&ubar, &wbar1, &wbar2, (&mut kp1, &mut kp2), (&mut kq11, &mut kq22, &mut kq12));
        for k in 0..n {
            pn1[k] = p1[k] + sigma * kp1[k];
            pn2[k] = p2[k] + sigma * kp2[k];
            qn11[k] = q11[k] + sigma * kq11[k];
            qn22[k] = q22[k] + sigma * kq22[k];
            qn12[k] = q12[k] + sigma * kq12[k];
        }
        project_ball_in_place(&mut pn1, &mut pn2, 1.0);
        project_tensor_ball_in_place(&mut qn11, &mut qn22, &mut qn12, beta);

        op.adjoint(&pn1, &pn2, (&qn11, &qn22, &qn12), &mut aun, (&mut awn1, &mut awn2));
        for k in 0..n {
            un[k] = u[k] - tau * aun[k];
            wn1[k] = w1[k] - tau * awn1[k];
            wn2[k] = w2[k] - tau * awn2[k];
        }
        project_l2_ball_in_place(&mut un, fs, delta);

        for k in 0..n {
            ubar_n[k] = un[k] + theta * (un[k] - u[k]);
            wbar_n1[k] = wn1[k] + theta * (wn1[k] - w1[k]);
            wbar_n2[k] = wn2[k] + theta * (wn2[k] - w2[k]);
            eu[k] = u[k] - ubar_n[k];
            ew1[k] = w1[k] - wbar_n1[k];
            ew2[k] = w2[k] - wbar_n2[k];
        }

        // Same residual as the first-order solvers, on the stacked variables.
        let mut primal = 0.0;
        for k in 0..n {
            primal = abs_sum(primal, (u[k] - un[k] - tau * (au[k] - aun[k])) / tau);
            primal = abs_sum(primal, (w1[k] - wn1[k] - tau * (aw1[k] - awn1[k])) / tau);
            primal = abs_sum(primal, (w2[k] - wn2[k] - tau * (aw2[k] - awn2[k])) / tau);
        }
        op.forward(&eu, &ew1, &ew2, (&mut kp1, &mut kp2), (&mut kq11, &mut kq22, &mut kq12));
        let mut dual = 0.0;
        for k in 0..n {
            dual = abs_sum(dual, (p1[k] - pn1[k] - sigma * kp1[k]) / sigma);
            dual = abs_sum(dual, (p2[k] - pn2[k] - sigma * kp2[k]) / sigma);
            dual = abs_sum(dual, (q11[k] - qn11[k] - sigma * kq11[k]) / sigma);
            dual = abs_sum(dual, (q22[k] - qn22[k] - sigma * kq22[k]) / sigma);
            // off-diagonal stands for two matrix entries
            dual = abs_sum(dual, 2.0 * (q12[k] - qn12[k] - sigma * kq12[k]) / sigma);
        }
        let res = (primal + dual) / n as f64;

        iterations += 1;
        final_residual = res;
        if params.record_history {
            residual_history.push(res);
            let dist = un.iter().zip(fs).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b)).sqrt();
            gap_history.push(delta - dist);
        }

        std::mem::swap(&mut u, &mut un);
        std::mem::swap(&mut w1, &mut wn1);
        std::mem::swap(&mut w2, &mut wn2);
        std::mem::swap(&mut ubar, &mut ubar_n);
        std::mem::swap(&mut wbar1, &mut wbar_n1);
        std::mem::swap(&mut wbar2, &mut wbar_n2);
        std::mem::swap(&mut p1, &mut pn1);
        std::mem::swap(&mut p2, &mut pn2);
        std::mem::swap(&mut q11, &mut qn11);
        std::mem::swap(&mut q22, &mut qn22);
        std::mem::swap(&mut q12, &mut qn12);
        std::mem::swap(&mut au, &mut aun);
        std::mem::swap(&mut aw1, &mut awn1);
        std::mem::swap(&mut aw2, &mut awn2);

        if res <= params.tol {
            converged = true;
            break;
        }
    }

    Ok(SolveReport {
        iterations,
        residual_history,
        gap_history,
        wall_time: start.elapsed().as_secs_f64(),
        final_u: ScalarField::from_raw(rows, cols, u),
        final_residual,
        converged,
        sigma,
        tau,
    })
}
