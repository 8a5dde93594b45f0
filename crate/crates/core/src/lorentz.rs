//! Points of the hyperboloid ('Loid) model and the Lorentzian form.
//!
//! A point of d-dimensional hyperbolic space is a vector `x` in R^(d+1) with
//! `[x, x] = -1` and `x[0] > 0`, where
//! `[u, v] = -u[0] v[0] + u[1] v[1] + ... + u[d] v[d]`.
//!
//! The projection `P` drops the leading coordinate; its inverse `Q` lifts a
//! parameter vector `z` to `(sqrt(1 + |z|^2), z)`.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance on `|[x, x] + 1|` accepted when validating a point.
pub const ON_MANIFOLD_TOL: f64 = 1e-9;

/// Lorentzian inner product of two raw (d+1)-vectors.
pub fn lorentzian_inner(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(Error::TooShort(u.len()));
    }
    Ok(inner_unchecked(u, v))
}

#[inline]
pub(crate) fn inner_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let tail: f64 = u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum();
    tail - u[0] * v[0]
}

/// A point on the upper sheet of the hyperboloid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoidPoint {
    coords: DVector<f64>,
}

impl LoidPoint {
    /// Validates raw coordinates against the sheet equation.
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::TooShort(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        if coords[0] <= 0.0 {
            return Err(Error::LowerSheet(coords[0]));
        }
        let s = coords.as_slice();
        let residual = (inner_unchecked(s, s) + 1.0).abs();
        if residual > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { residual });
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// Recomputes the leading coordinate from the tail, putting the vector
    /// back on the sheet. Only the tail of `coords` is read.
    pub fn renormalized(mut coords: DVector<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::TooShort(coords.len()));
        }
        let tail = coords.rows(1, coords.len() - 1);
        if tail.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        coords[0] = (1.0 + tail.norm_squared()).sqrt();
        Ok(Self { coords })
    }

    /// The base point `(1, 0, ..., 0)`.
    pub fn origin(d: usize) -> Self {
        let mut coords = DVector::zeros(d + 1);
        coords[0] = 1.0;
        Self { coords }
    }

    /// Hyperbolic dimension d.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    /// `[x, x] + 1`, zero on the sheet.
    pub fn manifold_residual(&self) -> f64 {
        inner_unchecked(self.as_slice(), self.as_slice()) + 1.0
    }
}

/// Geodesic distance `acosh(-[x, x'])`.
///
/// Evaluated through the Lorentzian chord `s = [x - x', x - x'] = 2(-[x, x'] - 1)`
/// as `2 asinh(sqrt(s) / 2)`. The two forms agree exactly in real arithmetic,
/// but the chord keeps full relative accuracy for nearly coincident points,
/// where `acosh` near 1 would amplify round-off to `sqrt(eps)`. A negative
/// chord from round-off is clamped to zero.
pub fn loid_distance(x: &LoidPoint, y: &LoidPoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(distance_unchecked(x.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn distance_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let head = x[0] - y[0];
    let tail: f64 = x[1..]
        .iter()
        .zip(&y[1..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let chord = (tail - head * head).max(0.0);
    2.0 * (0.5 * chord.sqrt()).asinh()
}

/// `P`: drops the leading coordinate.
pub fn project(x: &LoidPoint) -> DVector<f64> {
    x.coords.rows(1, x.dim()).into_owned()
}

/// `Q`: lifts a parameter vector onto the sheet.
pub fn lift(z: &DVector<f64>) -> Result<LoidPoint> {
    if z.is_empty() {
        return Err(Error::TooShort(1));
    }
    if z.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("parameter vector"));
    }
    let mut coords = DVector::zeros(z.len() + 1);
    coords[0] = (1.0 + z.norm_squared()).sqrt();
    coords.rows_mut(1, z.len()).copy_from(z);
    Ok(LoidPoint { coords })
}

/// An ordered, nonempty list of points sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<LoidPoint>,
}

impl PointSet {
    pub fn new(points: Vec<LoidPoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet)?;
        let d = first.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self { points })
    }

    /// Lifts every parameter vector with `Q`.
    pub fn from_params(params: &[DVector<f64>]) -> Result<Self> {
        Self::new(params.iter().map(lift).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[LoidPoint] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LoidPoint> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<LoidPoint> {
        self.points
    }

    /// Coordinate-wise mean of the ambient (d+1)-vectors.
    pub fn ambient_mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim() + 1);
        for p in &self.points {
            acc += p.coords();
        }
        acc / self.len() as f64
    }

    /// Mean of the projections `P(x_n)`.
    pub fn projected_mean(&self) -> DVector<f64> {
        self.ambient_mean().rows(1, self.dim()).into_owned()
    }

    pub(crate) fn check_matches(&self, other: &PointSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a LoidPoint;
    type IntoIter = std::slice::Iter<'a, LoidPoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}
