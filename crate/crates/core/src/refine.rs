//! Gradient-descent alignment and fine-tuning of an existing estimate.
//!
//! Each iteration takes a translation step `b = -alpha * grad_b e(X, R_b R Y)`
//! at `b = 0`, then the best orthogonal factor for the translated set, and
//! left-multiplies both onto the running isometry.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::{compose, rotation_matrix, translation_matrix, HUnitary, TranslationParam};
use crate::lorentz::{distance_unchecked, PointSet};
use crate::procrustes::{discrepancy_after, trace_maximizer, transform, AlignmentResult};

/// Pairs with `cosh d - 1` below this sit on the kink of the distance and are
/// left out of the gradient.
pub const COINCIDENT_TOL: f64 = 1e-12;
/// Step halvings tried per iteration before giving up.
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdConfig {
    pub alpha: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    /// Accept a step only if it lowers the discrepancy, halving `alpha`
    /// until it does. When false every step is taken as computed.
    pub backtracking: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_iters: 500,
            stop_tol: 1e-12,
            backtracking: true,
        }
    }
}

impl GdConfig {
    /// Plain gradient descent without step control.
    pub fn literal() -> Self {
        Self {
            backtracking: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.stop_tol.is_finite() && self.stop_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stop_tol must be positive, got {}",
                self.stop_tol
            )));
        }
        Ok(())
    }
}

/// Gradient of the normalized discrepancy with respect to a left translation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyGradient {
    pub gradient: DVector<f64>,
    /// Pairs dropped because they (nearly) coincide.
    pub skipped: usize,
}

/// `d/db e(X, R_b Y)` at `b = 0`.
///
/// With `u_n = -[x_n, R_b y_n]`, the derivative of `R_b` at zero along `b_i`
/// is the symmetric elementary matrix coupling coordinates 0 and i, so
/// `du_n/db_i = x_n[0] y_n[i] - x_n[i] y_n[0]` and `d acosh(u)/du = 1/sinh(d_n)`.
pub fn discrepancy_gradient_b(target: &PointSet, source: &PointSet) -> Result<DiscrepancyGradient> {
    target.check_matches(source)?;
    let d = target.dim();
    let mut gradient = DVector::zeros(d);
    let mut skipped = 0;
    for (x, y) in target.iter().zip(source) {
        let (x, y) = (x.as_slice(), y.as_slice());
        let dist = distance_unchecked(x, y);
        let half = (0.5 * dist).sinh();
        if 2.0 * half * half < COINCIDENT_TOL {
            skipped += 1;
            continue;
        }
        let inv = 1.0 / dist.sinh();
        for i in 0..d {
            gradient[i] += (x[0] * y[i + 1] - x[i + 1] * y[0]) * inv;
        }
    }
    gradient /= (target.len() * d) as f64;
    Ok(DiscrepancyGradient { gradient, skipped })
}

/// Output of a gradient-descent run.
#[derive(Debug, Clone)]
pub struct GdAlignment {
    /// Final estimate; its factors are read as `R_c R_V` (zero source centroid).
    pub alignment: AlignmentResult,
    pub iterations: usize,
    /// Discrepancy before the first iteration and after every accepted one.
    pub history: Vec<f64>,
    /// Pairs skipped in the last gradient evaluation.
    pub skipped_pairs: usize,
    /// False when `max_iters` ran out before the stopping rule fired.
    pub converged: bool,
}

/// One candidate update `R_U R_b R` for a given translation step.
fn candidate(
    target: &PointSet,
    moved: &PointSet,
    source: &PointSet,
    current: &HUnitary,
    b: DVector<f64>,
) -> Result<(HUnitary, f64)> {
    let rb = translation_matrix(&TranslationParam::new(b)?);
    let shifted = transform(&rb, moved)?;
    let u = trace_maximizer(
        target.dim(),
        target
            .iter()
            .zip(&shifted)
            .map(|(x, z)| (1.0, &x.as_slice()[1..], &z.as_slice()[1..])),
    )?;
    let next = compose(&rotation_matrix(&u), &compose(&rb, current)?)?.reprojected()?;
    let e = discrepancy_after(target, source, &next)?;
    Ok((next, e))
}

/// Gradient-descent estimate of the isometry taking `source` onto `target`,
/// started from the identity.
///
/// Convergence is not guaranteed; without backtracking the iteration can
/// overshoot and wander.
pub fn gd_align(target: &PointSet, source: &PointSet, cfg: &GdConfig) -> Result<GdAlignment> {
    cfg.validate()?;
    target.check_matches(source)?;
    let d = target.dim();

    let mut current = HUnitary::identity(d);
    let mut e = discrepancy_after(target, source, &current)?;
    let mut history = vec![e];
    let mut iterations = 0;
    let mut skipped_pairs = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let moved = transform(&current, source)?;
        let grad = discrepancy_gradient_b(target, &moved)?;
        skipped_pairs = grad.skipped;
        if grad.gradient.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }

        let attempts = if cfg.backtracking {
            MAX_HALVINGS + 1
        } else {
            1
        };
        let mut step = cfg.alpha;
        let mut accepted = None;
        for _ in 0..attempts {
            let (next, e_next) =
                candidate(target, &moved, source, &current, &grad.gradient * -step)?;
            if !cfg.backtracking || e_next < e {
                accepted = Some((next, e_next));
                break;
            }
            step *= 0.5;
        }

        let Some((next, e_next)) = accepted else {
            converged = true;
            break;
        };
        if !e_next.is_finite() {
            return Err(Error::Numerical(format!(
                "discrepancy diverged at iteration {iterations}"
            )));
        }
        let decrease = e - e_next;
        current = next;
        e = e_next;
        history.push(e);
        if decrease.abs() < cfg.stop_tol {
            converged = true;
            break;
        }
    }

    Ok(GdAlignment {
        alignment: AlignmentResult::from_isometry(current, e)?,
        iterations,
        history,
        skipped_pairs,
        converged,
    })
}

/// Fine-tunes `init` by running [`gd_align`] on `(target, init * source)`
/// and composing the correction onto `init`.
pub fn refine(
    target: &PointSet,
    source: &PointSet,
    init: &HUnitary,
    cfg: &GdConfig,
) -> Result<GdAlignment> {
    cfg.validate()?;
    target.check_matches(source)?;
    let moved = transform(init, source)?;
    let mut run = gd_align(target, &moved, cfg)?;
    let total = compose(&run.alignment.isometry, init)?.reprojected()?;
    let residual = discrepancy_after(target, source, &total)?;
    run.alignment = AlignmentResult::from_isometry(total, residual)?;
    Ok(run)
}
