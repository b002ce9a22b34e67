//! Hypersphere primitives: unit vectors, angular and chordal metrics, uniform
//! sampling on `S^{n-1}`, orthonormal plane bases and in-plane rotation.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;
/// Tolerance on `| |v| - 1 |` for a vector to count as unit norm.
pub const UNIT_TOLERANCE: f64 = 1e-9;
/// `|<x, z>|` above `1 - COLLINEAR_TOLERANCE` is rejected by [`orthonormal_pair`].
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;
/// Largest dimension for which [`rotation_matrix`] will materialize `R`.
pub const DENSE_ROTATION_MAX_DIM: usize = 64;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Eight independent partial sums so the loop vectorizes.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// A vector of dimension at least 2 with L2 norm 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v` onto the sphere.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::DimTooSmall(v.len()));
        }
        let n = norm(&v);
        if !(n >= ZERO_NORM) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        let mut v = v;
        v.iter_mut().for_each(|c| *c /= n);
        Ok(Self(v))
    }

    /// Accepts `v` as-is if it is already unit norm within [`UNIT_TOLERANCE`].
    pub fn from_unit(v: Vec<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::DimTooSmall(v.len()));
        }
        let n = norm(&v);
        if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NotUnitNorm(n));
        }
        Ok(Self(v))
    }

    pub(crate) fn from_unit_unchecked(v: Vec<f64>) -> Self {
        debug_assert!(v.len() >= 2);
        debug_assert!((norm(&v) - 1.0).abs() <= UNIT_TOLERANCE, "norm {}", norm(&v));
        Self(v)
    }

    /// The standard basis vector `e_axis`.
    pub fn basis(dim: usize, axis: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimTooSmall(dim));
        }
        if axis >= dim {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for dim {dim}"
            )));
        }
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// The antipode `-x`.
    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_unit(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// An angle in `[0, pi]`, stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AngularDistance(f64);

impl AngularDistance {
    pub const ZERO: Self = Self(0.0);
    pub const RIGHT: Self = Self(FRAC_PI_2);
    pub const STRAIGHT: Self = Self(PI);

    pub fn new(radians: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&radians) {
            return Err(Error::InvalidParameter(format!(
                "angle {radians} rad is outside [0, pi]"
            )));
        }
        Ok(Self(radians))
    }

    /// Converts degrees to radians. `180` maps to exactly `pi`.
    pub fn from_degrees(degrees: f64) -> Result<Self> {
        if degrees == 180.0 {
            return Ok(Self::STRAIGHT);
        }
        Self::new(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

impl TryFrom<f64> for AngularDistance {
    type Error = Error;

    fn try_from(r: f64) -> Result<Self> {
        Self::new(r)
    }
}

impl From<AngularDistance> for f64 {
    fn from(a: AngularDistance) -> f64 {
        a.0
    }
}

/// Orthonormal basis `(b1, b2)` of a 2-plane in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneBasis {
    b1: UnitVector,
    b2: UnitVector,
}

impl PlaneBasis {
    /// Checks orthogonality and matching dimensions.
    pub fn new(b1: UnitVector, b2: UnitVector) -> Result<Self> {
        check_dims(&b1, &b2)?;
        let d = b1.dot(&b2);
        if d.abs() >= 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "basis vectors are not orthogonal (<b1, b2> = {d})"
            )));
        }
        Ok(Self { b1, b2 })
    }

    pub fn b1(&self) -> &UnitVector {
        &self.b1
    }

    pub fn b2(&self) -> &UnitVector {
        &self.b2
    }

    pub fn dim(&self) -> usize {
        self.b1.dim()
    }
}

fn check_dims(x: &UnitVector, y: &UnitVector) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    UnitVector::new(v.to_vec())
}

/// `arccos(<x, y>)` with the inner product clamped to `[-1, 1]`.
pub fn angular_distance(x: &UnitVector, y: &UnitVector) -> Result<AngularDistance> {
    check_dims(x, y)?;
    Ok(AngularDistance(x.dot(y).clamp(-1.0, 1.0).acos()))
}

/// Chord length `|x - y|`.
pub fn euclidean_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.0
        .iter()
        .zip(&y.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// A uniformly distributed direction on `S^{dim-1}` (normalized Gaussian).
pub fn uniform_sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitVector> {
    if dim < 2 {
        return Err(Error::DimTooSmall(dim));
    }
    let mut v = vec![0.0; dim];
    loop {
        v.iter_mut()
            .for_each(|c| *c = rng.sample::<f64, _>(StandardNormal));
        let n = norm(&v);
        if n >= ZERO_NORM {
            v.iter_mut().for_each(|c| *c /= n);
            return Ok(UnitVector(v));
        }
    }
}

/// Orthonormal basis of `span{x, z}` with `b1 = x`, built by modified
/// Gram-Schmidt with one re-orthogonalization pass.
pub fn orthonormal_pair(x: &UnitVector, z: &UnitVector) -> Result<PlaneBasis> {
    check_dims(x, z)?;
    let c = x.dot(z);
    if c.abs() > 1.0 - COLLINEAR_TOLERANCE {
        return Err(Error::DegeneratePlane(c.abs()));
    }
    let b1 = x.clone();
    let mut r: Vec<f64> = z.0.iter().zip(&b1.0).map(|(zi, bi)| zi - c * bi).collect();
    let c2 = dot(&r, &b1.0);
    r.iter_mut().zip(&b1.0).for_each(|(ri, bi)| *ri -= c2 * bi);
    let n = norm(&r);
    if n < ZERO_NORM {
        return Err(Error::DegeneratePlane(c.abs()));
    }
    r.iter_mut().for_each(|ri| *ri /= n);
    Ok(PlaneBasis {
        b1,
        b2: UnitVector(r),
    })
}

fn sin_cos(theta: AngularDistance) -> (f64, f64) {
    // Exact values at the angles callers use to reason about reversibility.
    if theta.0 == PI {
        (0.0, -1.0)
    } else if theta.0 == FRAC_PI_2 {
        (1.0, 0.0)
    } else {
        theta.0.sin_cos()
    }
}

/// Applies `R = I + (b2 b1^T - b1 b2^T) sin(theta) + (b1 b1^T + b2 b2^T)(cos(theta) - 1)`
/// to `x` in O(dim) using the projections `<b1, x>` and `<b2, x>`.
pub fn rotate_in_plane(
    x: &UnitVector,
    basis: &PlaneBasis,
    theta: AngularDistance,
) -> Result<UnitVector> {
    check_dims(x, &basis.b1)?;
    let (s, c) = sin_cos(theta);
    let p1 = basis.b1.dot(x);
    let p2 = basis.b2.dot(x);
    let coef1 = p1 * (c - 1.0) - p2 * s;
    let coef2 = p2 * (c - 1.0) + p1 * s;
    let out: Vec<f64> = x
        .0
        .iter()
        .zip(basis.b1.0.iter().zip(&basis.b2.0))
        .map(|(xi, (b1i, b2i))| xi + coef1 * b1i + coef2 * b2i)
        .collect();
    Ok(UnitVector::from_unit_unchecked(out))
}

/// Materializes the rotation matrix `R` for `dim <= 64`. Cross-check path only.
pub fn rotation_matrix(basis: &PlaneBasis, theta: AngularDistance) -> Result<DMatrix<f64>> {
    let n = basis.dim();
    if n > DENSE_ROTATION_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "dense rotation matrix limited to dim <= {DENSE_ROTATION_MAX_DIM}, got {n}"
        )));
    }
    let (s, c) = sin_cos(theta);
    let b1 = DMatrix::from_column_slice(n, 1, basis.b1.as_slice());
    let b2 = DMatrix::from_column_slice(n, 1, basis.b2.as_slice());
    let r = DMatrix::identity(n, n)
        + (&b2 * b1.transpose() - &b1 * b2.transpose()) * s
        + (&b1 * b1.transpose() + &b2 * b2.transpose()) * (c - 1.0);
    Ok(r)
}

/// Natural log of the surface area `2 pi^{n/2} / Gamma(n/2)` of `S^{dim-1}`.
pub fn log_unit_sphere_area(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::DimTooSmall(dim));
    }
    let half = dim as f64 / 2.0;
    Ok(std::f64::consts::LN_2 + half * PI.ln() - ln_gamma(half))
}
