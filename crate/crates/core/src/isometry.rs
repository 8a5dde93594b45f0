//! H-unitary matrices: the isometries of the hyperboloid model.
//!
//! Every sheet-preserving isometry factors as a hyperbolic translation
//! `R_b` followed or preceded by a block-diagonal rotation `R_U = diag(1, U)`
//! with `U` in O(d).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lorentz::LoidPoint;

/// Tolerance on `max |R^T H R - H|` for accepting an H-unitary matrix.
pub const HUNITARY_TOL: f64 = 1e-8;
/// Tolerance on `max |U^T U - I|` for accepting an orthogonal matrix.
pub const ORTHOGONAL_TOL: f64 = 1e-8;
/// Largest off-block entry tolerated after removing the translation factor.
pub const FACTOR_RESIDUAL_TOL: f64 = 1e-6;

/// Translation parameter `b` of `R_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationParam(DVector<f64>);

impl TranslationParam {
    pub fn new(b: DVector<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::TooShort(1));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("translation parameter"));
        }
        Ok(Self(b))
    }

    pub fn from_slice(b: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(b))
    }

    pub fn zeros(d: usize) -> Self {
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

    pub fn neg(&self) -> Self {
        Self(-&self.0)
    }
}

/// Orthogonal factor `U` of `R_U`; reflections are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationParam(DMatrix<f64>);

impl RotationParam {
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::NotSquare {
                rows: u.nrows(),
                cols: u.ncols(),
            });
        }
        if u.nrows() == 0 {
            return Err(Error::TooShort(1));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rotation matrix"));
        }
        let deviation = orthogonality_defect(&u);
        if deviation > ORTHOGONAL_TOL {
            return Err(Error::NotOrthogonal { deviation });
        }
        Ok(Self(u))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Nearest orthogonal matrix (polar factor) to `m`, as `U_l U_r^T` from
    /// its SVD. faer is used here because nalgebra's SVD can return wrong
    /// singular vectors for rank-deficient input.
    pub(crate) fn polar(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
        let svd = fm
            .svd()
            .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let p = svd.U() * svd.V().transpose();
        Ok(Self(DMatrix::from_fn(rows, cols, |i, j| p[(i, j)])))
    }
}

pub(crate) fn orthogonality_defect(u: &DMatrix<f64>) -> f64 {
    let n = u.nrows();
    (u.transpose() * u - DMatrix::<f64>::identity(n, n)).amax()
}

/// `max |R^T H R - H|`.
pub fn hunitary_defect(r: &DMatrix<f64>) -> f64 {
    let n = r.nrows();
    let h = signature(n);
    (r.transpose() * &h * r - h).amax()
}

fn signature(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::identity(n, n);
    h[(0, 0)] = -1.0;
    h
}

/// Membership test: `R^T H R = H` within `tol` and `R[0][0] > 0`.
pub fn is_hunitary(r: &DMatrix<f64>, tol: f64) -> bool {
    r.is_square()
        && r.nrows() >= 2
        && r.iter().all(|v| v.is_finite())
        && r[(0, 0)] > 0.0
        && hunitary_defect(r) <= tol
}

/// A sheet-preserving isometry of the hyperboloid, as a (d+1)x(d+1) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HUnitary(DMatrix<f64>);

impl HUnitary {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.nrows() < 2 {
            return Err(Error::TooShort(mat.nrows()));
        }
        if !is_hunitary(&mat, HUNITARY_TOL) {
            return Err(Error::NotHUnitary {
                deviation: hunitary_defect(&mat),
                corner: mat[(0, 0)],
            });
        }
        Ok(Self(mat))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d + 1, d + 1))
    }

    /// Hyperbolic dimension d.
    pub fn dim(&self) -> usize {
        self.0.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Rebuilds the matrix as `R_c R_V` from its own factors, removing
    /// accumulated drift.
    pub fn reprojected(&self) -> Result<Self> {
        let (c, v) = factor(self)?;
        Ok(Self(translation_matrix(&c).0 * rotation_matrix(&v).0))
    }
}

/// `R_b`: top-left `sqrt(1 + |b|^2)`, off-diagonal blocks `b`, and lower-right
/// `(I + b b^T)^(1/2) = I + b b^T / (1 + sqrt(1 + |b|^2))`.
pub fn translation_matrix(b: &TranslationParam) -> HUnitary {
    let b = b.vector();
    let d = b.len();
    let head = (1.0 + b.norm_squared()).sqrt();
    // (sqrt(1 + s) - 1) / s rewritten without the removable singularity at s = 0.
    let coef = 1.0 / (1.0 + head);
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m[(0, 0)] = head;
    for i in 0..d {
        m[(0, i + 1)] = b[i];
        m[(i + 1, 0)] = b[i];
        for j in 0..d {
            m[(i + 1, j + 1)] = coef * b[i] * b[j];
        }
        m[(i + 1, i + 1)] += 1.0;
    }
    HUnitary(m)
}

/// `R_U = diag(1, U)`.
pub fn rotation_matrix(u: &RotationParam) -> HUnitary {
    let d = u.dim();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m[(0, 0)] = 1.0;
    m.view_mut((1, 1), (d, d)).copy_from(u.matrix());
    HUnitary(m)
}

/// Applies the isometry and recomputes the leading coordinate from the tail.
pub fn apply(r: &HUnitary, x: &LoidPoint) -> Result<LoidPoint> {
    if r.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: x.dim(),
        });
    }
    LoidPoint::renormalized(&r.0 * x.coords())
}

/// Matrix product `R1 R2`, i.e. apply `R2` first.
pub fn compose(r1: &HUnitary, r2: &HUnitary) -> Result<HUnitary> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch {
            expected: r1.dim(),
            found: r2.dim(),
        });
    }
    HUnitary::new(&r1.0 * &r2.0)
}

/// H-adjoint `H R^T H`, which equals the inverse for H-unitary `R`.
pub fn inverse(r: &HUnitary) -> HUnitary {
    let n = r.0.nrows();
    let sign = |i: usize| if i == 0 { -1.0 } else { 1.0 };
    HUnitary(DMatrix::from_fn(n, n, |i, j| {
        sign(i) * sign(j) * r.0[(j, i)]
    }))
}

/// Splits `R = R_c R_V`.
///
/// The first column of `R` is `Q(c)`, so `c` is read off directly; `V` is the
/// lower-right block of `R_{-c} R`, snapped to the nearest orthogonal matrix.
pub fn factor(r: &HUnitary) -> Result<(TranslationParam, RotationParam)> {
    let d = r.dim();
    let c = TranslationParam(r.0.view((1, 0), (d, 1)).column(0).into_owned());
    let rest = translation_matrix(&c.neg()).0 * &r.0;

    let mut off_block = (rest[(0, 0)] - 1.0).abs();
    for i in 1..=d {
        off_block = off_block.max(rest[(0, i)].abs()).max(rest[(i, 0)].abs());
    }
    if off_block > FACTOR_RESIDUAL_TOL {
        return Err(Error::FactorResidual(off_block));
    }

    let block = rest.view((1, 1), (d, d)).into_owned();
    let deviation = orthogonality_defect(&block);
    if deviation > ORTHOGONAL_TOL {
        return Err(Error::NotOrthogonal { deviation });
    }
    Ok((c, RotationParam::polar(block)?))
}

/// Haar-distributed element of O(d): QR of a Gaussian matrix with the signs
/// of `R`'s diagonal pushed into `Q`.
pub fn random_orthogonal<G: Rng + ?Sized>(d: usize, rng: &mut G) -> RotationParam {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    RotationParam(q)
}

/// Standard-normal translation composed with a Haar-random orthogonal factor.
pub fn random_hunitary<G: Rng + ?Sized>(d: usize, rng: &mut G) -> HUnitary {
    let b = TranslationParam(DVector::from_fn(d, |_, _| rng.sample(StandardNormal)));
    let u = random_orthogonal(d, rng);
    HUnitary(translation_matrix(&b).0 * rotation_matrix(&u).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{lift, loid_distance, project};
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0x5eed)
    }

    #[test]
    fn zero_translation_is_identity() {
        let r = translation_matrix(&TranslationParam::zeros(3));
        assert_eq!(r, HUnitary::identity(3));
    }

    #[test]
    fn translation_block_is_square_root() {
        let b = TranslationParam::from_slice(&[3.0, 4.0]).unwrap();
        let r = translation_matrix(&b);
        assert_eq!(r.matrix()[(0, 0)], 26f64.sqrt());

        let bv = b.vector();
        let expected =
            DMatrix::identity(2, 2) + bv * bv.transpose() * ((26f64.sqrt() - 1.0) / 25.0);
        let block = r.matrix().view((1, 1), (2, 2)).into_owned();
        assert!((&block - &expected).amax() < 1e-14);

        let squared = &block * &block;
        let target = DMatrix::identity(2, 2) + bv * bv.transpose();
        assert!((squared - target).amax() < 1e-12);
        assert!(is_hunitary(r.matrix(), 1e-12));
    }

    #[test]
    fn translation_first_column_is_lift() {
        let mut g = rng();
        for _ in 0..20 {
            let b = DVector::from_fn(4, |_, _| g.sample::<f64, _>(StandardNormal) * 2.0);
            let r = translation_matrix(&TranslationParam::new(b.clone()).unwrap());
            let image = apply(&r, &LoidPoint::origin(4)).unwrap();
            assert!((image.coords() - lift(&b).unwrap().coords()).amax() < 1e-12);
        }
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(
            rotation_matrix(&RotationParam::identity(2)),
            HUnitary::identity(2)
        );

        let quarter = RotationParam::new(dmatrix![0.0, -1.0; 1.0, 0.0]).unwrap();
        let r = rotation_matrix(&quarter);
        let o = LoidPoint::origin(2);
        assert_eq!(apply(&r, &o).unwrap(), o);
        let moved = apply(&r, &lift(&dvector![1.0, 0.0]).unwrap()).unwrap();
        assert!((project(&moved) - dvector![0.0, 1.0]).amax() < 1e-15);

        let reflection = RotationParam::new(dmatrix![1.0, 0.0; 0.0, -1.0]).unwrap();
        assert!(HUnitary::new(rotation_matrix(&reflection).into_matrix()).is_ok());

        assert!(matches!(
            RotationParam::new(dmatrix![1.0, 0.1; 0.0, 1.0]),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn membership_examples() {
        assert!(is_hunitary(&DMatrix::identity(3, 3), 1e-8));
        assert!(!is_hunitary(
            &DMatrix::from_diagonal(&dvector![-1.0, 1.0, 1.0]),
            1e-8
        ));
        // Ones^T H Ones has every entry equal to d - 1 = 1.
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert_eq!(hunitary_defect(&ones), 2.0);
        assert!(!is_hunitary(&ones, 1e-8));
    }

    #[test]
    fn apply_preserves_distance() {
        let mut g = rng();
        for _ in 0..100 {
            let r = random_hunitary(3, &mut g);
            let x = lift(&DVector::from_fn(3, |_, _| g.sample(StandardNormal))).unwrap();
            let y = lift(&DVector::from_fn(3, |_, _| g.sample(StandardNormal))).unwrap();
            let before = loid_distance(&x, &y).unwrap();
            let after = loid_distance(&apply(&r, &x).unwrap(), &apply(&r, &y).unwrap()).unwrap();
            assert!((before - after).abs() <= 1e-9);
        }
    }

    #[test]
    fn apply_checks_dimension() {
        assert!(apply(&HUnitary::identity(2), &LoidPoint::origin(3)).is_err());
        let x = lift(&dvector![0.3, -0.2]).unwrap();
        assert_eq!(apply(&HUnitary::identity(2), &x).unwrap(), x);
    }

    #[test]
    fn inverse_matches_fact_two() {
        let mut g = rng();
        let b = TranslationParam::from_slice(&[0.4, -1.3, 2.0]).unwrap();
        let lhs = inverse(&translation_matrix(&b));
        let rhs = translation_matrix(&b.neg());
        assert!((lhs.matrix() - rhs.matrix()).amax() <= 1e-12);

        let u = random_orthogonal(3, &mut g);
        let lhs = inverse(&rotation_matrix(&u));
        let rhs = rotation_matrix(&u.transpose());
        assert!((lhs.matrix() - rhs.matrix()).amax() <= 1e-12);

        assert_eq!(inverse(&HUnitary::identity(2)), HUnitary::identity(2));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut g = rng();
        for _ in 0..50 {
            let r = random_hunitary(4, &mut g);
            let prod = compose(&r, &inverse(&r)).unwrap();
            assert!((prod.matrix() - DMatrix::identity(5, 5)).amax() <= 1e-9);
        }
    }

    #[test]
    fn rotations_compose_blockwise() {
        let mut g = rng();
        let u1 = random_orthogonal(3, &mut g);
        let u2 = random_orthogonal(3, &mut g);
        let lhs = compose(&rotation_matrix(&u1), &rotation_matrix(&u2)).unwrap();
        let u12 = RotationParam::new(u1.matrix() * u2.matrix()).unwrap();
        assert!((lhs.matrix() - rotation_matrix(&u12).matrix()).amax() < 1e-14);
    }

    #[test]
    fn factor_examples() {
        let mut g = rng();
        let b = TranslationParam::from_slice(&[0.5, -0.25]).unwrap();
        let (c, v) = factor(&translation_matrix(&b)).unwrap();
        assert!((c.vector() - b.vector()).amax() < 1e-15);
        assert!((v.matrix() - DMatrix::identity(2, 2)).amax() < 1e-12);

        let u = random_orthogonal(2, &mut g);
        let (c, v) = factor(&rotation_matrix(&u)).unwrap();
        assert_eq!(c.norm(), 0.0);
        assert!((v.matrix() - u.matrix()).amax() < 1e-12);

        for _ in 0..50 {
            let b = TranslationParam::new(DVector::from_fn(3, |_, _| g.sample(StandardNormal)))
                .unwrap();
            let u = random_orthogonal(3, &mut g);
            let r = compose(&translation_matrix(&b), &rotation_matrix(&u)).unwrap();
            let (c, v) = factor(&r).unwrap();
            assert!((c.vector() - b.vector()).amax() < 1e-9);
            assert!((v.matrix() - u.matrix()).amax() < 1e-9);
        }
    }

    #[test]
    fn factor_rejects_broken_input() {
        // Sheet-preserving with correct first column but a skewed lower block.
        let mut m = DMatrix::identity(3, 3);
        m[(1, 2)] = 1e-3;
        let bad = HUnitary(m);
        assert!(factor(&bad).is_err());
    }

    #[test]
    fn translations_do_not_commute() {
        let b1 = TranslationParam::from_slice(&[1.0, 0.0]).unwrap();
        let b2 = TranslationParam::from_slice(&[0.0, 1.0]).unwrap();
        let prod = compose(&translation_matrix(&b1), &translation_matrix(&b2)).unwrap();
        let (t, v) = factor(&prod).unwrap();
        let rebuilt = compose(&translation_matrix(&t), &rotation_matrix(&v)).unwrap();
        assert!((rebuilt.matrix() - prod.matrix()).amax() < 1e-12);
        assert!((t.vector() - (b1.vector() + b2.vector())).amax() > 1e-3);
        // The gyration is a genuine rotation.
        assert!((v.matrix() - DMatrix::identity(2, 2)).amax() > 1e-3);
    }

    #[test]
    fn one_dimensional_sampling_hits_both_signs() {
        let mut g = rng();
        let mut signs = [false; 2];
        for _ in 0..200 {
            let u = random_orthogonal(1, &mut g);
            let s = u.matrix()[(0, 0)];
            assert_eq!(s.abs(), 1.0);
            signs[(s > 0.0) as usize] = true;
        }
        assert_eq!(signs, [true, true]);
    }

    #[test]
    fn reprojection_is_close() {
        let mut g = rng();
        let r = random_hunitary(3, &mut g);
        let p = r.reprojected().unwrap();
        assert!((p.matrix() - r.matrix()).amax() < 1e-12);
    }
}
