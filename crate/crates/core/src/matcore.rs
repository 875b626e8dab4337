//! Small dense matrix kernel.
//!
//! Every fiber endomorphism is stored as a complex `d × d` matrix together
//! with a [`Field`] tag. Real data keeps exactly zero imaginary parts, so the
//! same code path serves `End(ℝᵈ)` and `End(ℂᵈ)`.

use std::fmt;
use std::ops::Deref;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar entry of an [`EndMap`].
pub type Scalar = Complex64;

/// Default threshold on the smallest singular value of a [`GaugeMap`].
pub const SINGULAR_TOL: f64 = 1e-10;

/// Base field of the fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    Real,
    Complex,
}

impl Field {
    /// The smallest field containing both operands.
    pub fn join(self, other: Field) -> Field {
        if self == Field::Complex || other == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        }
    }
}

/// Matrix norm used by [`operator_distance_in`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Frobenius,
    /// Spectral norm (largest singular value).
    Operator,
}

/// An element of `End(V)`: a square matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct EndMap {
    field: Field,
    data: DMatrix<Scalar>,
}

impl fmt::Debug for EndMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.dim())
            .map(|i| {
                (0..self.dim())
                    .map(|j| {
                        let z = self.data[(i, j)];
                        match self.field {
                            Field::Real => format!("{:.6e}", z.re),
                            Field::Complex => format!("{:.6e}{:+.6e}i", z.re, z.im),
                        }
                    })
                    .collect()
            })
            .collect();
        f.debug_struct("EndMap")
            .field("field", &self.field)
            .field("rows", &rows)
            .finish()
    }
}

impl EndMap {
    /// Wraps a complex matrix, validating shape and finiteness.
    pub fn new(field: Field, data: DMatrix<Scalar>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::InvalidInput(format!(
                "endomorphism must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.nrows() == 0 {
            return Err(Error::InvalidInput("endomorphism of a zero-dimensional space".into()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        let mut data = data;
        if field == Field::Real {
            if data.iter().any(|z| z.im != 0.0) {
                return Err(Error::InvalidInput(
                    "real endomorphism with nonzero imaginary part".into(),
                ));
            }
            data.iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(Self { field, data })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts(field: Field, mut data: DMatrix<Scalar>) -> Self {
        debug_assert_eq!(data.nrows(), data.ncols());
        if field == Field::Real {
            data.iter_mut().for_each(|z| z.im = 0.0);
        }
        Self { field, data }
    }

    pub fn from_real(data: DMatrix<f64>) -> Result<Self> {
        Self::new(Field::Real, data.map(|x| Scalar::new(x, 0.0)))
    }

    pub fn from_complex(data: DMatrix<Scalar>) -> Result<Self> {
        Self::new(Field::Complex, data)
    }

    /// Builds a real matrix from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("rows do not form a square matrix".into()));
        }
        Self::from_real(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(Field::Real, DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(Field::Real, DMatrix::zeros(dim, dim))
    }

    /// Real diagonal matrix.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        let n = entries.len();
        Self::from_real(DMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn matrix(&self) -> &DMatrix<Scalar> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Scalar> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Scalar {
        self.data[(row, col)]
    }

    /// Real parts of the entries.
    pub fn real_part(&self) -> DMatrix<f64> {
        self.data.map(|z| z.re)
    }

    pub fn trace(&self) -> Scalar {
        self.data.trace()
    }

    pub fn transpose(&self) -> Self {
        Self::from_parts(self.field, self.data.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_parts(self.field, &self.data * Scalar::new(s, 0.0))
    }

    pub fn scale_complex(&self, s: Scalar) -> Self {
        let field = if s.im == 0.0 { self.field } else { Field::Complex };
        Self::from_parts(field, &self.data * s)
    }

    pub fn add(&self, other: &EndMap) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::from_parts(self.field.join(other.field), &self.data + &other.data))
    }

    pub fn sub(&self, other: &EndMap) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::from_parts(self.field.join(other.field), &self.data - &other.data))
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &EndMap) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::from_parts(self.field.join(other.field), &self.data * &other.data))
    }

    /// Adds `s · other` in place.
    pub(crate) fn axpy(&mut self, s: f64, other: &EndMap) {
        self.field = self.field.join(other.field);
        self.data += &other.data * Scalar::new(s, 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm(&self, norm: Norm) -> f64 {
        match norm {
            Norm::Frobenius => self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            Norm::Operator => singular_values(&self.data).into_iter().fold(0.0, f64::max),
        }
    }

    /// Smallest singular value.
    pub fn sigma_min(&self) -> f64 {
        singular_values(&self.data).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Ratio of largest to smallest singular value.
    pub fn condition_number(&self) -> f64 {
        let sv = singular_values(&self.data);
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn singular_values(m: &DMatrix<Scalar>) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)].norm()];
    }
    m.clone().singular_values().iter().copied().collect()
}

fn check_same_dim(a: &EndMap, b: &EndMap) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// An element of `GL(V)`. Construction checks the smallest singular value.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeMap(EndMap);

impl GaugeMap {
    pub fn new(m: EndMap) -> Result<Self> {
        Self::with_tolerance(m, SINGULAR_TOL)
    }

    pub fn with_tolerance(m: EndMap, tol: f64) -> Result<Self> {
        let sigma_min = m.sigma_min();
        if sigma_min.is_nan() || sigma_min <= tol {
            return Err(Error::SingularMatrix { sigma_min, tol });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(EndMap::identity(dim))
    }

    pub fn as_end(&self) -> &EndMap {
        &self.0
    }

    pub fn into_end(self) -> EndMap {
        self.0
    }

    /// Composition `self ∘ other`, staying in `GL(V)`.
    pub fn compose_gauge(&self, other: &GaugeMap) -> Result<GaugeMap> {
        Ok(GaugeMap(self.0.compose(&other.0)?))
    }

    pub fn transpose(&self) -> GaugeMap {
        GaugeMap(self.0.transpose())
    }
}

impl Deref for GaugeMap {
    type Target = EndMap;

    fn deref(&self) -> &EndMap {
        &self.0
    }
}

impl From<GaugeMap> for EndMap {
    fn from(g: GaugeMap) -> EndMap {
        g.0
    }
}

/// `exp(m)` by Padé scaling-and-squaring.
pub fn matrix_exponential(m: &EndMap) -> Result<GaugeMap> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let e = m.matrix().exp();
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix exponential overflowed".into()));
    }
    Ok(GaugeMap(EndMap::from_parts(m.field(), e)))
}

pub fn matrix_inverse(m: &GaugeMap) -> Result<GaugeMap> {
    matrix_inverse_with_tolerance(m, SINGULAR_TOL)
}

pub fn matrix_inverse_with_tolerance(m: &GaugeMap, tol: f64) -> Result<GaugeMap> {
    let sigma_min = m.sigma_min();
    if sigma_min.is_nan() || sigma_min <= tol {
        return Err(Error::SingularMatrix { sigma_min, tol });
    }
    let inv = m
        .matrix()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { sigma_min, tol })?;
    Ok(GaugeMap(EndMap::from_parts(m.field(), inv)))
}

/// Frobenius distance `‖a − b‖`.
pub fn operator_distance(a: &EndMap, b: &EndMap) -> Result<f64> {
    operator_distance_in(a, b, Norm::Frobenius)
}

pub fn operator_distance_in(a: &EndMap, b: &EndMap, norm: Norm) -> Result<f64> {
    Ok(a.sub(b)?.norm(norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn series_exp(m: &EndMap) -> EndMap {
        // Plain Taylor sum; the arguments used here have small norm.
        let mut term = EndMap::identity(m.dim());
        let mut sum = term.clone();
        for k in 1..60 {
            term = term.compose(m).unwrap().scale(1.0 / k as f64);
            sum = sum.add(&term).unwrap();
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = matrix_exponential(&EndMap::zeros(2)).unwrap();
        assert_eq!(operator_distance(&e, &EndMap::identity(2)).unwrap(), 0.0);
    }

    #[test]
    fn exp_of_nilpotent_truncates() {
        let n = EndMap::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = matrix_exponential(&n).unwrap();
        let expected = EndMap::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(operator_distance(&e, &expected).unwrap() < 1e-15);
    }

    #[test]
    fn exp_of_quarter_rotation_generator_matches_series() {
        let j = EndMap::from_rows(&[vec![0.0, -FRAC_PI_2], vec![FRAC_PI_2, 0.0]]).unwrap();
        let oracle = series_exp(&j);
        let expected = EndMap::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(operator_distance(&oracle, &expected).unwrap() < 1e-14);
        let e = matrix_exponential(&j).unwrap();
        assert!(operator_distance(&e, &oracle).unwrap() < 1e-14);
    }

    #[test]
    fn exp_relative_error_at_norm_ten() {
        // exp(10 J) for a rotation generator is a rotation by 10 rad.
        let j = EndMap::from_rows(&[vec![0.0, -10.0], vec![10.0, 0.0]]).unwrap();
        let e = matrix_exponential(&j).unwrap();
        let (c, s) = (10f64.cos(), 10f64.sin());
        let expected = EndMap::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let rel = operator_distance(&e, &expected).unwrap() / expected.norm(Norm::Frobenius);
        assert!(rel < 1e-12, "relative error {rel:e}");
    }

    #[test]
    fn complex_exp_of_phase() {
        let m = EndMap::from_complex(DMatrix::from_element(1, 1, Scalar::new(0.0, 1.0))).unwrap();
        let e = matrix_exponential(&m).unwrap();
        assert_eq!(e.field(), Field::Complex);
        assert!((e.get(0, 0) - Scalar::new(1f64.cos(), 1f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn exp_rejects_non_finite() {
        let m = EndMap::from_parts(Field::Real, DMatrix::from_element(2, 2, Scalar::new(f64::NAN, 0.0)));
        assert!(matches!(matrix_exponential(&m), Err(Error::InvalidInput(_))));
        assert!(EndMap::from_rows(&[vec![1.0, f64::INFINITY], vec![0.0, 1.0]]).is_err());
        assert!(EndMap::from_real(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inverse_of_identity_and_diagonal() {
        let i = GaugeMap::identity(3);
        assert_eq!(matrix_inverse(&i).unwrap(), i);
        let d = GaugeMap::new(EndMap::diagonal(&[2.0, 4.0]).unwrap()).unwrap();
        let inv = matrix_inverse(&d).unwrap();
        let expected = EndMap::diagonal(&[0.5, 0.25]).unwrap();
        assert!(operator_distance(&inv, &expected).unwrap() < 1e-16);
    }

    #[test]
    fn singular_maps_are_rejected() {
        let m = EndMap::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(GaugeMap::new(m), Err(Error::SingularMatrix { .. })));
        let tiny = EndMap::diagonal(&[1.0, 1e-11]).unwrap();
        assert!(GaugeMap::new(tiny.clone()).is_err());
        assert!(GaugeMap::with_tolerance(tiny, 1e-12).is_ok());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(operator_distance(&EndMap::identity(2), &EndMap::identity(2)).unwrap(), 0.0);
        let d = operator_distance(&EndMap::zeros(2), &EndMap::identity(2)).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert!(operator_distance(&EndMap::zeros(2), &EndMap::zeros(3)).is_err());
        let op = operator_distance_in(&EndMap::zeros(2), &EndMap::identity(2), Norm::Operator).unwrap();
        assert!((op - 1.0).abs() < 1e-14);
    }
}
