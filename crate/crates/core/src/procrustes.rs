//! Closed-form alignment: hyperbolic centering followed by an SVD rotation
//! estimate, recomposed as `R_{m_target} R_U R_{-m_source}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::isometry::{
    apply, compose, rotation_matrix, translation_matrix, HUnitary, RotationParam, TranslationParam,
};
use crate::lorentz::{distance_unchecked, inner_unchecked, LoidPoint, PointSet};

/// Largest `|mean P(x)|` accepted as centered by [`estimate_rotation`].
pub const CENTERED_TOL: f64 = 1e-6;

/// Positive per-point weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidWeights("no weights".into()));
        }
        if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weight {bad} is not a positive finite number"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Estimated isometry together with its factors.
///
/// `isometry = R_{target_centroid} R_{rotation} R_{-source_centroid}` and it
/// maps the source set onto the target set.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub isometry: HUnitary,
    pub target_centroid: TranslationParam,
    pub source_centroid: TranslationParam,
    pub rotation: RotationParam,
    /// Normalized discrepancy between the target and the mapped source.
    pub residual: f64,
}

impl AlignmentResult {
    /// Wraps an arbitrary isometry, reading its factors as `R_c R_V`.
    pub fn from_isometry(isometry: HUnitary, residual: f64) -> Result<Self> {
        let (c, v) = crate::isometry::factor(&isometry)?;
        let d = isometry.dim();
        Ok(Self {
            isometry,
            target_centroid: c,
            source_centroid: TranslationParam::zeros(d),
            rotation: v,
            residual,
        })
    }
}

/// Centroid `m = mean P(x_n) / sqrt(-[xbar, xbar])` with `xbar` the ambient mean.
pub fn centroid(set: &PointSet) -> TranslationParam {
    let mean = set.ambient_mean();
    let scale = (-inner_unchecked(mean.as_slice(), mean.as_slice())).sqrt();
    let tail = mean.rows(1, set.dim()).into_owned();
    TranslationParam::new(tail / scale).expect("mean of finite points is finite")
}

/// Translates the set by `R_{-m}` so that its projections average to zero.
pub fn center(set: &PointSet) -> Result<(PointSet, TranslationParam)> {
    let m = centroid(set);
    let shift = translation_matrix(&m.neg());
    let moved = set
        .iter()
        .map(|x| apply(&shift, x))
        .collect::<Result<Vec<_>>>()?;
    Ok((PointSet::new(moved)?, m))
}

/// Orthogonal `U` maximizing `sum_n w_n <a_n, U b_n>`.
///
/// With `M = sum_n w_n a_n b_n^T = U_l S U_r^T` the maximizer is `U_l U_r^T`;
/// it is unique only when the singular values of `M` are distinct and nonzero.
pub(crate) fn trace_maximizer<'a, I>(d: usize, pairs: I) -> Result<RotationParam>
where
    I: IntoIterator<Item = (f64, &'a [f64], &'a [f64])>,
{
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (w, a, b) in pairs {
        for i in 0..d {
            let wa = w * a[i];
            for j in 0..d {
                m[(i, j)] += wa * b[j];
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite cross-covariance".into()));
    }
    RotationParam::polar(m)
}

/// Rotation between two centered sets: SVD of `P(Xc) W P(Yc)^T`.
pub fn estimate_rotation(
    target: &PointSet,
    source: &PointSet,
    weights: &Weights,
) -> Result<RotationParam> {
    target.check_matches(source)?;
    if weights.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: target.len(),
            right: weights.len(),
        });
    }
    for set in [target, source] {
        let off = set.projected_mean().norm();
        if off > CENTERED_TOL {
            return Err(Error::NotCentered(off));
        }
    }
    trace_maximizer(
        target.dim(),
        weights
            .as_slice()
            .iter()
            .zip(target.iter().zip(source.iter()))
            .map(|(&w, (x, y))| (w, &x.as_slice()[1..], &y.as_slice()[1..])),
    )
}

/// Weighted cost `sum_n w_n cosh d(x_n, R_V y_n)`, minimized by [`estimate_rotation`].
pub fn rotation_cost(
    target: &PointSet,
    source: &PointSet,
    weights: &Weights,
    v: &RotationParam,
) -> Result<f64> {
    target.check_matches(source)?;
    let rv = rotation_matrix(v);
    let mut cost = 0.0;
    for ((x, y), w) in target.iter().zip(source).zip(weights.as_slice()) {
        let moved = rv.matrix() * y.coords();
        cost += w * -inner_unchecked(x.as_slice(), moved.as_slice());
    }
    Ok(cost)
}

/// Closed-form estimate of the isometry taking `source` onto `target`.
pub fn align(target: &PointSet, source: &PointSet, weights: &Weights) -> Result<AlignmentResult> {
    target.check_matches(source)?;
    let (target_c, m_target) = center(target)?;
    let (source_c, m_source) = center(source)?;
    let rotation = estimate_rotation(&target_c, &source_c, weights)?;

    let isometry = compose(
        &translation_matrix(&m_target),
        &compose(
            &rotation_matrix(&rotation),
            &translation_matrix(&m_source.neg()),
        )?,
    )?;
    let residual = discrepancy_after(target, source, &isometry)?;
    Ok(AlignmentResult {
        isometry,
        target_centroid: m_target,
        source_centroid: m_source,
        rotation,
        residual,
    })
}

/// `(1 / (N d)) sum_n d(x_n, y_n)`.
pub fn normalized_discrepancy(a: &PointSet, b: &PointSet) -> Result<f64> {
    a.check_matches(b)?;
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| distance_unchecked(x.as_slice(), y.as_slice()))
        .sum();
    Ok(total / (a.len() * a.dim()) as f64)
}

/// `e(target, R source)`.
pub fn discrepancy_after(target: &PointSet, source: &PointSet, r: &HUnitary) -> Result<f64> {
    target.check_matches(source)?;
    if r.dim() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: r.dim(),
        });
    }
    let total: f64 = target
        .iter()
        .zip(source)
        .map(|(x, y)| {
            let moved = r.matrix() * y.coords();
            let moved = LoidPoint::renormalized(moved)
                .map(|p| distance_unchecked(x.as_slice(), p.as_slice()));
            moved.unwrap_or(f64::INFINITY)
        })
        .sum();
    Ok(total / (target.len() * target.dim()) as f64)
}

/// Applies `r` to every point.
pub fn transform(r: &HUnitary, set: &PointSet) -> Result<PointSet> {
    PointSet::new(set.iter().map(|x| apply(r, x)).collect::<Result<_>>()?)
}
