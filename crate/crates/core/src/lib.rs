//! Procrustes analysis in the hyperboloid ('Loid) model of hyperbolic space.
//!
//! Two index-matched point sets related by an unknown isometry are aligned in
//! closed form: both sets are translated so their projected means vanish,
//! the remaining orthogonal factor comes from an SVD, and the pieces are
//! recomposed into one H-unitary matrix. A gradient-descent estimator and a
//! fine-tuning pass are provided for comparison, together with a seeded
//! Monte-Carlo harness and flat-file I/O.

pub mod bench;
pub mod error;
pub mod io;
pub mod isometry;
pub mod lorentz;
pub mod poincare;
pub mod procrustes;
pub mod refine;

pub use error::{Error, Result};
pub use isometry::{HUnitary, RotationParam, TranslationParam};
pub use lorentz::{LoidPoint, PointSet};
pub use poincare::PoincarePoint;
pub use procrustes::{align, AlignmentResult, Weights};
pub use refine::{gd_align, refine, GdAlignment, GdConfig};
