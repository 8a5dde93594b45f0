//! Poincare-ball model: stereographic transport from the hyperboloid,
//! Mobius addition and gyration, and the ball images of the elementary
//! hyperboloid isometries.
//!
//! Alignment itself is always solved on the hyperboloid; this module only
//! moves points and maps between the two models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::isometry::RotationParam;
use crate::lorentz::LoidPoint;

/// Lifting refuses points with `|y| >= 1 - BOUNDARY_GUARD`.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincarePoint(DVector<f64>);

impl PoincarePoint {
    pub fn new(y: DVector<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::TooShort(1));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ball coordinates"));
        }
        let norm = y.norm();
        if norm >= 1.0 {
            return Err(Error::OutsideBall(norm));
        }
        Ok(Self(y))
    }

    pub fn from_slice(y: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(y))
    }

    pub fn origin(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Mobius negation, which is plain negation.
    pub fn neg(&self) -> Self {
        Self(-&self.0)
    }
}

fn same_dim(a: &PoincarePoint, b: &PoincarePoint) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Stereographic projection `h(x) = tail(x) / (1 + x[0])`.
pub fn to_poincare(x: &LoidPoint) -> PoincarePoint {
    let c = x.coords();
    let tail = c.rows(1, x.dim()) / (1.0 + c[0]);
    PoincarePoint(tail)
}

/// Inverse projection `((1 + |y|^2), 2y) / (1 - |y|^2)`.
pub fn from_poincare(y: &PoincarePoint) -> Result<LoidPoint> {
    let n2 = y.0.norm_squared();
    let norm = n2.sqrt();
    if norm >= 1.0 - BOUNDARY_GUARD {
        return Err(Error::OutsideBall(norm));
    }
    let denom = 1.0 - n2;
    let mut coords = DVector::zeros(y.dim() + 1);
    coords[0] = (1.0 + n2) / denom;
    coords
        .rows_mut(1, y.dim())
        .copy_from(&(&y.0 * (2.0 / denom)));
    // The tail determines the point; recomputing the head keeps it on the sheet.
    LoidPoint::renormalized(coords)
}

/// Mobius addition
/// `u + v = ((1 + 2<u,v> + |v|^2) u + (1 - |u|^2) v) / (1 + 2<u,v> + |u|^2 |v|^2)`.
pub fn mobius_add(u: &PoincarePoint, v: &PoincarePoint) -> Result<PoincarePoint> {
    same_dim(u, v)?;
    let uv = u.0.dot(&v.0);
    let uu = u.0.norm_squared();
    let vv = v.0.norm_squared();
    let denom = 1.0 + 2.0 * uv + uu * vv;
    if denom <= 1e-300 {
        return Err(Error::Numerical(format!("Mobius denominator {denom:e}")));
    }
    let sum = (&u.0 * (1.0 + 2.0 * uv + vv) + &v.0 * (1.0 - uu)) / denom;
    PoincarePoint::new(sum).map_err(|e| match e {
        Error::OutsideBall(n) => Error::Numerical(format!("Mobius sum left the ball (norm {n})")),
        other => other,
    })
}

/// `gyr[u, v] w = -(u + v) + (u + (v + w))`.
pub fn gyration(u: &PoincarePoint, v: &PoincarePoint, w: &PoincarePoint) -> Result<PoincarePoint> {
    let uv = mobius_add(u, v)?;
    let inner = mobius_add(u, &mobius_add(v, w)?)?;
    mobius_add(&uv.neg(), &inner)
}

/// `2 atanh |(-y) + y'|`.
pub fn poincare_distance(y: &PoincarePoint, y2: &PoincarePoint) -> Result<f64> {
    let diff = mobius_add(&y.neg(), y2)?;
    Ok(2.0 * diff.norm().atanh())
}

/// Ball image of the hyperboloid translation `R_b`, with `shift = h(Q(b))`.
pub fn poincare_translate(shift: &PoincarePoint, y: &PoincarePoint) -> Result<PoincarePoint> {
    mobius_add(shift, y)
}

/// Ball image of the hyperboloid rotation `R_U`.
pub fn poincare_rotate(u: &RotationParam, y: &PoincarePoint) -> Result<PoincarePoint> {
    if u.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: y.dim(),
        });
    }
    Ok(PoincarePoint(u.matrix() * &y.0))
}

/// Matrix of the linear map `w -> gyr[u, v] w`, assembled column by column.
pub fn gyration_matrix(u: &PoincarePoint, v: &PoincarePoint) -> Result<DMatrix<f64>> {
    same_dim(u, v)?;
    let d = u.dim();
    let scale = 0.5;
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = scale;
        let col = gyration(u, v, &PoincarePoint(e))?;
        m.set_column(j, &(col.0 / scale));
    }
    Ok(m)
}
