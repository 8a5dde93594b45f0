use hyperbolic_procrustes::bench::synth_pair;
use hyperbolic_procrustes::isometry::{
    apply, compose, factor, inverse, random_hunitary, rotation_matrix, translation_matrix,
};
use hyperbolic_procrustes::lorentz::{lift, loid_distance, lorentzian_inner, project};
use hyperbolic_procrustes::poincare::{from_poincare, to_poincare};
use hyperbolic_procrustes::{align, TranslationParam, Weights};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(d: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0f64, d).prop_map(DVector::from_vec)
}

fn triple() -> impl Strategy<Value = (DVector<f64>, DVector<f64>, DVector<f64>)> {
    (1usize..6).prop_flat_map(|d| (params(d), params(d), params(d)))
}

proptest! {
    #[test]
    fn lift_then_project_is_identity(z in (1usize..8).prop_flat_map(params)) {
        let x = lift(&z).unwrap();
        prop_assert!((project(&x) - &z).amax() <= 1e-12 * (1.0 + z.amax()));
        let q = lorentzian_inner(x.as_slice(), x.as_slice()).unwrap();
        prop_assert!((q + 1.0).abs() <= 1e-9);
    }

    #[test]
    fn distance_is_a_metric((a, b, c) in triple()) {
        let (x, y, z) = (lift(&a).unwrap(), lift(&b).unwrap(), lift(&c).unwrap());
        let dxy = loid_distance(&x, &y).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!(loid_distance(&x, &x).unwrap() == 0.0);
        prop_assert!((dxy - loid_distance(&y, &x).unwrap()).abs() <= 1e-12 * (1.0 + dxy));
        let via = loid_distance(&x, &z).unwrap() + loid_distance(&z, &y).unwrap();
        prop_assert!(dxy <= via + 1e-9);
    }

    #[test]
    fn isometries_preserve_distance((a, b, _) in triple(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_hunitary(a.len(), &mut rng);
        let (x, y) = (lift(&a).unwrap(), lift(&b).unwrap());
        let before = loid_distance(&x, &y).unwrap();
        let after = loid_distance(&apply(&r, &x).unwrap(), &apply(&r, &y).unwrap()).unwrap();
        prop_assert!((before - after).abs() <= 1e-8 * (1.0 + before));
    }

    #[test]
    fn factor_reconstructs(d in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_hunitary(d, &mut rng);
        let (c, v) = factor(&r).unwrap();
        let back = compose(&translation_matrix(&c), &rotation_matrix(&v)).unwrap();
        prop_assert!((back.matrix() - r.matrix()).amax() <= 1e-9 * r.matrix().amax());
        let id = compose(&inverse(&r), &r).unwrap();
        prop_assert!((id.matrix() - nalgebra::DMatrix::identity(d + 1, d + 1)).amax() <= 1e-9 * r.matrix().amax().powi(2));
    }

    #[test]
    fn ball_round_trip(z in (1usize..6).prop_flat_map(params)) {
        let x = lift(&z).unwrap();
        let back = from_poincare(&to_poincare(&x)).unwrap();
        prop_assert!((back.coords() - x.coords()).amax() <= 1e-10 * x.coords().amax());
    }

    #[test]
    fn translations_compose_along_a_line(t in -2.0..2.0f64, s in -2.0..2.0f64, d in 1usize..5) {
        let mut dir = DVector::zeros(d);
        dir[0] = 1.0;
        let b = |k: f64| TranslationParam::new(&dir * k.sinh()).unwrap();
        let prod = compose(&translation_matrix(&b(t)), &translation_matrix(&b(s))).unwrap();
        let direct = translation_matrix(&b(t + s));
        prop_assert!((prod.matrix() - direct.matrix()).amax() <= 1e-10 * direct.matrix().amax());
    }

    #[test]
    fn noise_free_alignment_is_exact(n in 2usize..12, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = synth_pair(n, d, 0.0, &mut rng).unwrap();
        let fit = align(&pair.target, &pair.source, &Weights::uniform(n)).unwrap();
        prop_assert!(fit.residual <= 1e-9, "residual {}", fit.residual);
    }
}
