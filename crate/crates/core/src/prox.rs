//! Closed-form proximal maps used by the primal-dual solvers.

use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField, VectorField};

/// Step sizes and data shared by the proximal maps of one solve.
#[derive(Clone, Copy, Debug)]
pub struct ProxContext<'a> {
    pub sigma: f64,
    pub tau: f64,
    /// Per-pixel Lipschitz budget, nonnegative.
    pub gamma: &'a ScalarField,
    /// Fidelity radius around `f`.
    pub delta: f64,
    pub f: &'a ScalarField,
}

impl<'a> ProxContext<'a> {
    pub fn new(
        sigma: f64,
        tau: f64,
        gamma: &'a ScalarField,
        delta: f64,
        f: &'a ScalarField,
    ) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::param("delta", format!("must be nonnegative, got {delta}")));
        }
        check_gamma(gamma)?;
        gamma.ensure_same_shape(f.shape())?;
        Ok(Self {
            sigma,
            tau,
            gamma,
            delta,
            f,
        })
    }
}

pub(crate) fn check_gamma(gamma: &ScalarField) -> Result<()> {
    match gamma.as_slice().iter().position(|&g| g < 0.0) {
        Some(index) => Err(Error::NegativeGamma {
            index,
            value: gamma.as_slice()[index],
        }),
        None => Ok(()),
    }
}

/// Prox of `sigma * R^*` at one pixel, where `R^*(p) = gamma |p|` restricted
/// to the unit ball. `sigma_gamma` is `sigma * gamma(x)`.
#[inline]
pub(crate) fn prox_rstar_point(p1: f64, p2: f64, sigma_gamma: f64) -> (f64, f64) {
    let n = (p1 * p1 + p2 * p2).sqrt();
    if n <= sigma_gamma {
        (0.0, 0.0)
    } else if n >= 1.0 + sigma_gamma {
        let s = 1.0 / n;
        (p1 * s, p2 * s)
    } else {
        let a = 1.0 - sigma_gamma / n;
        (a * p1, a * p2)
    }
}

pub(crate) fn prox_rstar_in_place(p1: &mut [f64], p2: &mut [f64], sigma: f64, gamma: &[f64]) {
    for k in 0..p1.len() {
        let (a, b) = prox_rstar_point(p1[k], p2[k], sigma * gamma[k]);
        p1[k] = a;
        p2[k] = b;
    }
}

/// Proximal map of the dual regulariser term.
///
/// Pointwise with `n = |p(x)|`: zero when `n <= sigma gamma(x)`, the radial
/// projection `p / n` when `n >= 1 + sigma gamma(x)`, and the shrinkage
/// `(1 - sigma gamma(x) / n) p` in between. The result has pointwise norm at
/// most one.
pub fn prox_rstar(p_diamond: &VectorField, ctx: &ProxContext<'_>) -> Result<VectorField> {
    p_diamond.ensure_same_shape(ctx.gamma.shape())?;
    let mut out = p_diamond.clone();
    let (p1, p2) = out.planes_mut();
    prox_rstar_in_place(p1, p2, ctx.sigma, ctx.gamma.as_slice());
    Ok(out)
}

pub(crate) fn project_l2_ball_in_place(u: &mut [f64], f: &[f64], delta: f64) {
    let dist = u
        .iter()
        .zip(f)
        .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
        .sqrt();
    if dist <= delta {
        return;
    }
    let s = delta / dist;
    for (uk, fk) in u.iter_mut().zip(f) {
        *uk = fk + s * (*uk - fk);
    }
}

/// Projection onto the fidelity ball `{u : ||u - f|| <= delta}`.
pub fn prox_f(u_diamond: &ScalarField, ctx: &ProxContext<'_>) -> Result<ScalarField> {
    u_diamond.ensure_same_shape(ctx.f.shape())?;
    let mut out = u_diamond.clone();
    project_l2_ball_in_place(out.as_mut_slice(), ctx.f.as_slice(), ctx.delta);
    Ok(out)
}

pub(crate) fn project_ball_in_place(p1: &mut [f64], p2: &mut [f64], radius: f64) {
    for k in 0..p1.len() {
        let n = (p1[k] * p1[k] + p2[k] * p2[k]).sqrt();
        if n > radius {
            let s = radius / n;
            p1[k] *= s;
            p2[k] *= s;
        }
    }
}

pub(crate) fn project_tensor_ball_in_place(
    q11: &mut [f64],
    q22: &mut [f64],
    q12: &mut [f64],
    radius: f64,
) {
    for k in 0..q11.len() {
        let n = (q11[k] * q11[k] + q22[k] * q22[k] + 2.0 * q12[k] * q12[k]).sqrt();
        if n > radius {
            let s = radius / n;
            q11[k] *= s;
            q22[k] *= s;
            q12[k] *= s;
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    Ok(())
}

/// Pointwise radial projection onto `{|p(x)| <= radius}`.
pub fn project_unit_ball(p: &VectorField, radius: f64) -> Result<VectorField> {
    check_radius(radius)?;
    let mut out = p.clone();
    let (p1, p2) = out.planes_mut();
    project_ball_in_place(p1, p2, radius);
    Ok(out)
}

/// Pointwise projection onto the Frobenius ball of the given radius.
pub fn project_tensor_ball(q: &SymTensorField, radius: f64) -> Result<SymTensorField> {
    check_radius(radius)?;
    let mut out = q.clone();
    let (a, b, c) = out.planes_mut();
    project_tensor_ball_in_place(a, b, c, radius);
    Ok(out)
}
