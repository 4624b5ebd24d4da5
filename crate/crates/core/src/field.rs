//! Dense two-dimensional fields.
//!
//! All fields are stored row-major with `(i, j) = (row, col)` indexing and
//! 64-bit floats. Reductions (`inner`, `l2_norm`, `sum`) run serially in
//! storage order so results are bit-stable across runs.

use crate::error::{Error, Result};

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape {
            rows,
            cols,
            reason: "both dimensions must be positive",
        });
    }
    Ok(())
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Euclidean-style inner product over all co-indexed samples.
pub trait Inner {
    fn inner(&self, other: &Self) -> Result<f64>;
}

/// `M x N` grid of real values (images, gamma maps, residuals).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScalarField {
    /// Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    /// Panics if either dimension is zero or `value` is not finite.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "field dimensions must be positive");
        assert!(value.is_finite(), "field values must be finite");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::InvalidShape {
                rows,
                cols,
                reason: "data length does not equal rows * cols",
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a field by evaluating `f(i, j)` at every pixel.
    ///
    /// Panics on zero dimensions or a non-finite sample.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "field dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        assert!(check_finite(&data).is_ok(), "field values must be finite");
        Self { rows, cols, data }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other.shape())?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc + v)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sqrt(sum of squares)`.
    pub fn l2_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }
}

impl Inner for ScalarField {
    fn inner(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other.shape())?;
        Ok(dot(&self.data, &other.data))
    }
}

/// `M x N` grid of 2-vectors. The first component pairs with differences
/// along the row index `i`, the second with differences along `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    rows: usize,
    cols: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl VectorField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "field dimensions must be positive");
        Self {
            rows,
            cols,
            first: vec![0.0; rows * cols],
            second: vec![0.0; rows * cols],
        }
    }

    pub fn from_components(first: ScalarField, second: ScalarField) -> Result<Self> {
        first.ensure_same_shape(second.shape())?;
        let (rows, cols) = first.shape();
        Ok(Self {
            rows,
            cols,
            first: first.into_vec(),
            second: second.into_vec(),
        })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, first: Vec<f64>, second: Vec<f64>) -> Self {
        debug_assert_eq!(first.len(), rows * cols);
        debug_assert_eq!(second.len(), rows * cols);
        Self {
            rows,
            cols,
            first,
            second,
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * self.cols + j;
        (self.first[k], self.second[k])
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    pub fn second(&self) -> &[f64] {
        &self.second
    }

    pub(crate) fn planes_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.first, &mut self.second)
    }

    pub fn first_field(&self) -> ScalarField {
        ScalarField::from_raw(self.rows, self.cols, self.first.clone())
    }

    pub fn second_field(&self) -> ScalarField {
        ScalarField::from_raw(self.rows, self.cols, self.second.clone())
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other.shape())?;
        let first = self.first.iter().zip(&other.first).map(|(&a, &b)| f(a, b)).collect();
        let second = self.second.iter().zip(&other.second).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(self.rows, self.cols, first, second))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.first.iter().map(|v| c * v).collect(),
            self.second.iter().map(|v| c * v).collect(),
        )
    }

    /// Pointwise Euclidean norm `sqrt(p1^2 + p2^2)`.
    pub fn norm2_pointwise(&self) -> ScalarField {
        let data = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .collect();
        ScalarField::from_raw(self.rows, self.cols, data)
    }

    pub fn l2_norm(&self) -> f64 {
        (dot(&self.first, &self.first) + dot(&self.second, &self.second)).sqrt()
    }
}

impl Inner for VectorField {
    fn inner(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other.shape())?;
        Ok(dot(&self.first, &other.first) + dot(&self.second, &other.second))
    }
}

/// Free-function form of [`VectorField::norm2_pointwise`].
pub fn norm2_pointwise(v: &VectorField) -> ScalarField {
    v.norm2_pointwise()
}

/// Field of symmetric 2x2 tensors stored as `(d11, d22, d12)`.
///
/// The off-diagonal entry stands for both `(1,2)` and `(2,1)` positions, so
/// it is counted twice in inner products and Frobenius norms.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    rows: usize,
    cols: usize,
    d11: Vec<f64>,
    d22: Vec<f64>,
    d12: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "field dimensions must be positive");
        let n = rows * cols;
        Self {
            rows,
            cols,
            d11: vec![0.0; n],
            d22: vec![0.0; n],
            d12: vec![0.0; n],
        }
    }

    pub fn from_components(d11: ScalarField, d22: ScalarField, d12: ScalarField) -> Result<Self> {
        d11.ensure_same_shape(d22.shape())?;
        d11.ensure_same_shape(d12.shape())?;
        let (rows, cols) = d11.shape();
        Ok(Self::from_raw(rows, cols, d11.into_vec(), d22.into_vec(), d12.into_vec()))
    }

    pub(crate) fn from_raw(
        rows: usize,
        cols: usize,
        d11: Vec<f64>,
        d22: Vec<f64>,
        d12: Vec<f64>,
    ) -> Self {
        Self {
            rows,
            cols,
            d11,
            d22,
            d12,
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `(d11, d22, d12)` at pixel `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> (f64, f64, f64) {
        let k = i * self.cols + j;
        (self.d11[k], self.d22[k], self.d12[k])
    }

    pub fn d11(&self) -> &[f64] {
        &self.d11
    }

    pub fn d22(&self) -> &[f64] {
        &self.d22
    }

    pub fn d12(&self) -> &[f64] {
        &self.d12
    }

    pub(crate) fn planes_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.d11, &mut self.d22, &mut self.d12)
    }

    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other.shape())?;
        let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
        Ok(Self::from_raw(
            self.rows,
            self.cols,
            z(&self.d11, &other.d11),
            z(&self.d22, &other.d22),
            z(&self.d12, &other.d12),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise Frobenius norm of the full symmetric matrix.
    pub fn frobenius_pointwise(&self) -> ScalarField {
        let data = (0..self.d11.len())
            .map(|k| {
                let (a, b, c) = (self.d11[k], self.d22[k], self.d12[k]);
                (a * a + b * b + 2.0 * c * c).sqrt()
            })
            .collect();
        ScalarField::from_raw(self.rows, self.cols, data)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).sqrt()
    }
}

impl Inner for SymTensorField {
    fn inner(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other.shape())?;
        Ok(dot(&self.d11, &other.d11)
            + dot(&self.d22, &other.d22)
            + 2.0 * dot(&self.d12, &other.d12))
    }
}
