//! Direct evaluation of TV and TV_pwL.
//!
//! TV_pwL has three discrete formulations that must agree: the primal
//! projection `min_{|g| <= gamma} sum |grad u - g|`, the closed form
//! `sum (|grad u| - gamma)_+`, and the dual supremum over unit-bounded test
//! fields. All sums are area weighted by `h^2`.

use serde::Serialize;

use crate::diffops::{div, grad, GridSpacing};
use crate::error::{Error, Result};
use crate::field::{Inner, ScalarField, VectorField};
use crate::prox::check_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    PrimalProjection,
    ClosedForm,
    DualLowerBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegulariserValue {
    pub value: f64,
    pub formulation: Formulation,
}

fn check_pair(u: &ScalarField, gamma: &ScalarField) -> Result<()> {
    u.ensure_same_shape(gamma.shape())?;
    check_gamma(gamma)
}

/// Isotropic total variation `sum |grad u| h^2`.
pub fn tv(u: &ScalarField, h: GridSpacing) -> f64 {
    grad(u, h).norm2_pointwise().sum() * h.get().powi(2)
}

/// `sum max(|grad u| - gamma, 0) h^2`.
pub fn tvpwl_closed_form(u: &ScalarField, gamma: &ScalarField, h: GridSpacing) -> Result<f64> {
    check_pair(u, gamma)?;
    let mag = grad(u, h).norm2_pointwise();
    let excess = mag
        .as_slice()
        .iter()
        .zip(gamma.as_slice())
        .fold(0.0, |acc, (m, g)| acc + (m - g).max(0.0));
    Ok(excess * h.get().powi(2))
}

/// Minimiser of `|grad u - g|` subject to `|g| <= gamma` at every pixel:
/// the gradient clipped radially to length `gamma`.
pub fn optimal_jump_free_part(u: &ScalarField, gamma: &ScalarField, h: GridSpacing) -> Result<VectorField> {
    check_pair(u, gamma)?;
    let du = grad(u, h);
    let (rows, cols) = u.shape();
    let mut g1 = Vec::with_capacity(rows * cols);
    let mut g2 = Vec::with_capacity(rows * cols);
    for k in 0..rows * cols {
        let (a, b) = (du.first()[k], du.second()[k]);
        let n = (a * a + b * b).sqrt();
        let s = if n > gamma.as_slice()[k] { gamma.as_slice()[k] / n } else { 1.0 };
        g1.push(s * a);
        g2.push(s * b);
    }
    Ok(VectorField::from_raw(rows, cols, g1, g2))
}

/// Primal formulation evaluated at its explicit minimiser.
pub fn tvpwl_primal(u: &ScalarField, gamma: &ScalarField, h: GridSpacing) -> Result<f64> {
    let g = optimal_jump_free_part(u, gamma, h)?;
    let jump = grad(u, h).sub(&g)?;
    Ok(jump.norm2_pointwise().sum() * h.get().powi(2))
}

/// Dual objective `h^2 (<u, div phi> - sum gamma |phi|)` for a test field
/// with `|phi| <= 1`. Every feasible `phi` gives a lower bound on TV_pwL.
pub fn tvpwl_dual_value(
    u: &ScalarField,
    gamma: &ScalarField,
    phi: &VectorField,
    h: GridSpacing,
) -> Result<f64> {
    check_pair(u, gamma)?;
    phi.ensure_same_shape(u.shape())?;
    let norms = phi.norm2_pointwise();
    if let Some(index) = norms.as_slice().iter().position(|&n| n > 1.0 + 1e-12) {
        return Err(Error::InfeasibleDual {
            index,
            norm: norms.as_slice()[index],
        });
    }
    let coupling = u.inner(&div(phi, h))?;
    let penalty = norms.inner(gamma)?;
    Ok((coupling - penalty) * h.get().powi(2))
}

/// Dual certificate attaining the closed form: `-grad u / |grad u|` where the
/// gradient exceeds its budget, zero elsewhere.
pub fn optimal_dual_field(u: &ScalarField, gamma: &ScalarField, h: GridSpacing) -> Result<VectorField> {
    check_pair(u, gamma)?;
    let du = grad(u, h);
    let (rows, cols) = u.shape();
    let mut p1 = vec![0.0; rows * cols];
    let mut p2 = vec![0.0; rows * cols];
    for k in 0..rows * cols {
        let (a, b) = (du.first()[k], du.second()[k]);
        let n = (a * a + b * b).sqrt();
        if n > gamma.as_slice()[k] {
            p1[k] = -a / n;
            p2[k] = -b / n;
        }
    }
    Ok(VectorField::from_raw(rows, cols, p1, p2))
}

/// Evaluates TV_pwL with the chosen formulation. The dual formulation is
/// evaluated at [`optimal_dual_field`].
pub fn tvpwl(
    u: &ScalarField,
    gamma: &ScalarField,
    h: GridSpacing,
    formulation: Formulation,
) -> Result<RegulariserValue> {
    let value = match formulation {
        Formulation::PrimalProjection => tvpwl_primal(u, gamma, h)?,
        Formulation::ClosedForm => tvpwl_closed_form(u, gamma, h)?,
        Formulation::DualLowerBound => {
            let phi = optimal_dual_field(u, gamma, h)?;
            tvpwl_dual_value(u, gamma, &phi, h)?.max(0.0)
        }
    };
    Ok(RegulariserValue { value, formulation })
}

/// `TV(u) - sum gamma h^2 <= TV_pwL(u) <= TV(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl Sandwich {
    /// Whether the ordering holds up to `tol` times the magnitude of the
    /// bounds.
    pub fn holds(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * (1.0 + self.upper.abs() + self.lower.abs());
        self.lower <= self.value + slack && self.value <= self.upper + slack
    }
}

pub fn sandwich_check(u: &ScalarField, gamma: &ScalarField, h: GridSpacing) -> Result<Sandwich> {
    let value = tvpwl_closed_form(u, gamma, h)?;
    let upper = tv(u, h);
    let lower = upper - gamma.sum() * h.get().powi(2);
    let s = Sandwich { lower, value, upper };
    debug_assert!(s.holds(1e-10), "{s:?}");
    Ok(s)
}
