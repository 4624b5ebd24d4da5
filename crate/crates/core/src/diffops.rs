//! Forward-difference gradient with Neumann boundary, its negative adjoint
//! (divergence), the symmetrised gradient used by TGV, and power-iteration
//! operator-norm estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField, VectorField};

/// Pixel spacing `h > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpacing(f64);

impl GridSpacing {
    pub const UNIT: Self = Self(1.0);

    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param("h", format!("spacing must be positive, got {h}")));
        }
        Ok(Self(h))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for GridSpacing {
    fn default() -> Self {
        Self(1.0)
    }
}

/// Seed of the deterministic start vector for power iteration.
pub const POWER_ITERATION_SEED: u64 = 42;

pub(crate) fn grad_into(
    u: &[f64],
    rows: usize,
    cols: usize,
    h: f64,
    out1: &mut [f64],
    out2: &mut [f64],
) {
    let inv_h = 1.0 / h;
    for i in 0..rows {
        let row = i * cols;
        for j in 0..cols {
            let k = row + j;
            out1[k] = if i + 1 < rows { (u[k + cols] - u[k]) * inv_h } else { 0.0 };
            out2[k] = if j + 1 < cols { (u[k + 1] - u[k]) * inv_h } else { 0.0 };
        }
    }
}

/// Backward difference of the first component, zero-flux at both ends.
#[inline]
fn back_diff_rows(p: &[f64], rows: usize, cols: usize, i: usize, k: usize) -> f64 {
    let here = if i + 1 < rows { p[k] } else { 0.0 };
    let above = if i > 0 { p[k - cols] } else { 0.0 };
    here - above
}

#[inline]
fn back_diff_cols(p: &[f64], cols: usize, j: usize, k: usize) -> f64 {
    let here = if j + 1 < cols { p[k] } else { 0.0 };
    let left = if j > 0 { p[k - 1] } else { 0.0 };
    here - left
}

pub(crate) fn div_into(
    p1: &[f64],
    p2: &[f64],
    rows: usize,
    cols: usize,
    h: f64,
    out: &mut [f64],
) {
    let inv_h = 1.0 / h;
    for i in 0..rows {
        let row = i * cols;
        for j in 0..cols {
            let k = row + j;
            out[k] = (back_diff_rows(p1, rows, cols, i, k) + back_diff_cols(p2, cols, j, k)) * inv_h;
        }
    }
}

/// Forward differences: `(u[i+1,j] - u[i,j]) / h` below the last row and
/// `(u[i,j+1] - u[i,j]) / h` left of the last column, zero on the far edge.
pub fn grad(u: &ScalarField, h: GridSpacing) -> VectorField {
    let (rows, cols) = u.shape();
    let mut d1 = vec![0.0; rows * cols];
    let mut d2 = vec![0.0; rows * cols];
    grad_into(u.as_slice(), rows, cols, h.get(), &mut d1, &mut d2);
    VectorField::from_raw(rows, cols, d1, d2)
}

/// Negative adjoint of [`grad`]: `<grad u, p> = -<u, div p>`.
///
/// Per component this is the three-case backward stencil: `p[0]` on the
/// first row, `p[i] - p[i-1]` inside, `-p[M-2]` on the last row.
pub fn div(p: &VectorField, h: GridSpacing) -> ScalarField {
    let (rows, cols) = p.shape();
    let mut out = vec![0.0; rows * cols];
    div_into(p.first(), p.second(), rows, cols, h.get(), &mut out);
    ScalarField::from_raw(rows, cols, out)
}

pub(crate) fn sym_grad_into(
    w1: &[f64],
    w2: &[f64],
    rows: usize,
    cols: usize,
    h: f64,
    out: (&mut [f64], &mut [f64], &mut [f64]),
) {
    let (e11, e22, e12) = out;
    let inv_h = 1.0 / h;
    for i in 0..rows {
        let row = i * cols;
        for j in 0..cols {
            let k = row + j;
            let (d1w1, d1w2) = if i + 1 < rows {
                ((w1[k + cols] - w1[k]) * inv_h, (w2[k + cols] - w2[k]) * inv_h)
            } else {
                (0.0, 0.0)
            };
            let (d2w1, d2w2) = if j + 1 < cols {
                ((w1[k + 1] - w1[k]) * inv_h, (w2[k + 1] - w2[k]) * inv_h)
            } else {
                (0.0, 0.0)
            };
            e11[k] = d1w1;
            e22[k] = d2w2;
            e12[k] = 0.5 * (d2w1 + d1w2);
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sym_div_into(
    q11: &[f64],
    q22: &[f64],
    q12: &[f64],
    rows: usize,
    cols: usize,
    h: f64,
    out1: &mut [f64],
    out2: &mut [f64],
) {
    let inv_h = 1.0 / h;
    for i in 0..rows {
        let row = i * cols;
        for j in 0..cols {
            let k = row + j;
            out1[k] = (back_diff_rows(q11, rows, cols, i, k) + back_diff_cols(q12, cols, j, k)) * inv_h;
            out2[k] = (back_diff_rows(q12, rows, cols, i, k) + back_diff_cols(q22, cols, j, k)) * inv_h;
        }
    }
}

/// Symmetrised gradient `(Jw + Jw^T) / 2` with the same forward/Neumann
/// stencil applied to each component of `w`.
pub fn sym_grad(w: &VectorField, h: GridSpacing) -> SymTensorField {
    let (rows, cols) = w.shape();
    let n = rows * cols;
    let (mut e11, mut e22, mut e12) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    sym_grad_into(w.first(), w.second(), rows, cols, h.get(), (&mut e11, &mut e22, &mut e12));
    SymTensorField::from_raw(rows, cols, e11, e22, e12)
}

/// Negative adjoint of [`sym_grad`] under the tensor inner product that
/// counts the off-diagonal twice: `<E w, q> = -<w, sym_div q>`.
pub fn sym_div(q: &SymTensorField, h: GridSpacing) -> VectorField {
    let (rows, cols) = q.shape();
    let n = rows * cols;
    let (mut o1, mut o2) = (vec![0.0; n], vec![0.0; n]);
    sym_div_into(q.d11(), q.d22(), q.d12(), rows, cols, h.get(), &mut o1, &mut o2);
    VectorField::from_raw(rows, cols, o1, o2)
}

fn seeded_unit_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

/// Power-iteration estimate of `||grad||^2` on an `M x N` grid.
///
/// Returns the Rayleigh quotient `||grad x||^2 / ||x||^2` after `iters`
/// applications of `-div grad` to a fixed pseudo-random start field, which
/// never exceeds the true squared norm (at most `8 / h^2`).
pub fn opnorm_estimate(shape: (usize, usize), h: GridSpacing, iters: usize) -> Result<f64> {
    let (rows, cols) = shape;
    if iters == 0 {
        return Err(Error::param("iters", "power iteration needs at least one step"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape {
            rows,
            cols,
            reason: "both dimensions must be positive",
        });
    }
    let n = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut x = seeded_unit_field(n, &mut rng);
    let (mut g1, mut g2, mut y) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let h = h.get();

    for _ in 0..iters {
        grad_into(&x, rows, cols, h, &mut g1, &mut g2);
        div_into(&g1, &g2, rows, cols, h, &mut y);
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        for (xk, yk) in x.iter_mut().zip(&y) {
            *xk = -yk / ny;
        }
    }
    grad_into(&x, rows, cols, h, &mut g1, &mut g2);
    let gx = norm(&g1).powi(2) + norm(&g2).powi(2);
    Ok(gx / norm(&x).powi(2))
}

/// Applies the stacked TGV operator `K(u, w) = (grad u - w, E w)`.
pub(crate) struct TgvOperator {
    pub rows: usize,
    pub cols: usize,
    pub h: f64,
}

impl TgvOperator {
    /// `(p, q) = K(u, w)`.
    pub fn forward(
        &self,
        u: &[f64],
        w1: &[f64],
        w2: &[f64],
        p: (&mut [f64], &mut [f64]),
        q: (&mut [f64], &mut [f64], &mut [f64]),
    ) {
        let (p1, p2) = p;
        grad_into(u, self.rows, self.cols, self.h, p1, p2);
        for k in 0..u.len() {
            p1[k] -= w1[k];
            p2[k] -= w2[k];
        }
        sym_grad_into(w1, w2, self.rows, self.cols, self.h, q);
    }

    /// `(u, w) = K^*(p, q) = (-div p, -p - sym_div q)`.
    pub fn adjoint(
        &self,
        p1: &[f64],
        p2: &[f64],
        q: (&[f64], &[f64], &[f64]),
        u: &mut [f64],
        w: (&mut [f64], &mut [f64]),
    ) {
        let (w1, w2) = w;
        div_into(p1, p2, self.rows, self.cols, self.h, u);
        for v in u.iter_mut() {
            *v = -*v;
        }
        sym_div_into(q.0, q.1, q.2, self.rows, self.cols, self.h, w1, w2);
        for k in 0..p1.len() {
            w1[k] = -p1[k] - w1[k];
            w2[k] = -p2[k] - w2[k];
        }
    }
}

/// Power-iteration estimate of `||K||^2` for the stacked TGV operator
/// `K(u, w) = (grad u - w, E w)`, using the same seeded start as
/// [`opnorm_estimate`].
pub fn tgv_opnorm_estimate(shape: (usize, usize), h: GridSpacing, iters: usize) -> Result<f64> {
    let (rows, cols) = shape;
    if iters == 0 {
        return Err(Error::param("iters", "power iteration needs at least one step"));
    }
    let n = rows * cols;
    let op = TgvOperator { rows, cols, h: h.get() };
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut u = seeded_unit_field(n, &mut rng);
    let mut w1 = seeded_unit_field(n, &mut rng);
    let mut w2 = seeded_unit_field(n, &mut rng);
    let (mut p1, mut p2) = (vec![0.0; n], vec![0.0; n]);
    let (mut q11, mut q22, mut q12) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut au, mut aw1, mut aw2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    let stacked_norm = |u: &[f64], w1: &[f64], w2: &[f64]| {
        (norm(u).powi(2) + norm(w1).powi(2) + norm(w2).powi(2)).sqrt()
    };
    let range_norm_sq = |p1: &[f64], p2: &[f64], q11: &[f64], q22: &[f64], q12: &[f64]| {
        norm(p1).powi(2) + norm(p2).powi(2) + norm(q11).powi(2) + norm(q22).powi(2) + 2.0 * norm(q12).powi(2)
    };

    for _ in 0..iters {
        op.forward(&u, &w1, &w2, (&mut p1, &mut p2), (&mut q11, &mut q22, &mut q12));
        op.adjoint(&p1, &p2, (&q11, &q22, &q12), &mut au, (&mut aw1, &mut aw2));
        let na = stacked_norm(&au, &aw1, &aw2);
        if na == 0.0 {
            return Ok(0.0);
        }
        for k in 0..n {
            u[k] = au[k] / na;
            w1[k] = aw1[k] / na;
            w2[k] = aw2[k] / na;
        }
    }
    op.forward(&u, &w1, &w2, (&mut p1, &mut p2), (&mut q11, &mut q22, &mut q12));
    Ok(range_norm_sq(&p1, &p2, &q11, &q22, &q12) / stacked_norm(&u, &w1, &w2).powi(2))
}
