use super::*;
use crate::mesh::{build_mesh, select_gamma, Domain};
use crate::C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn disk(h: f64) -> (Mesh, GammaSpec) {
    let mesh = build_mesh(&Domain::unit_disk(), h).unwrap();
    let gamma = select_gamma(&mesh, |_| true).unwrap();
    (mesh, gamma)
}

fn cos_current(mesh: &Mesh, gamma: &GammaSpec) -> BoundaryCurrent {
    BoundaryCurrent::from_fn(mesh, gamma, |p| C64::new(p[1].atan2(p[0]).cos(), 0.0)).mean_free()
}

fn constant(mesh: &Mesh, m: Mat2) -> MatrixField {
    MatrixField::constant(mesh.n_triangles(), m)
}

fn complex_iso(mesh: &Mesh) -> MatrixField {
    MatrixField::from_fn(mesh.n_triangles(), |t| {
        let x = mesh.centroid(t)[0];
        Mat2::real(1.5 + 0.3 * x, 0.2, 0.2, 1.0) + Mat2::new(C64::new(0.0, 0.5), 0.0.into(), 0.0.into(), C64::new(0.0, 0.3))
    })
}

#[test]
fn disk_oracle_for_the_general_bounds() {
    let (mesh, gamma) = disk(0.05);
    let f = cos_current(&mesh, &gamma);
    let r = general_mono_bounds(&constant(&mesh, Mat2::IDENTITY), &constant(&mesh, Mat2::identity_times(2.0)), &f, &mesh, &gamma)
        .unwrap();
    assert!(r.pass);
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(r.lower_bound, PI / 4.0) < 0.03, "{r:?}");
    assert!(rel(r.lhs, PI / 2.0) < 0.03, "{r:?}");
    assert!(rel(r.upper_bound, PI / 2.0) < 0.03, "{r:?}");
    // isotropic real pair: the upper bound is attained
    assert!((r.upper_bound - r.lhs).abs() < 1e-10 * r.scale);
}

#[test]
fn equal_self_adjoint_fields_give_zero_everywhere() {
    let (mesh, gamma) = disk(0.15);
    let a = constant(&mesh, Mat2::real(1.3, 0.2, 0.2, 0.9));
    let f = cos_current(&mesh, &gamma);
    for r in [general_mono_bounds(&a, &a, &f, &mesh, &gamma).unwrap(), improved_mono_bounds(&a, &a, &f, &mesh, &gamma).unwrap()]
    {
        assert!(r.lhs.abs() < 1e-10 && r.lower_bound.abs() < 1e-10 && r.upper_bound.abs() < 1e-10, "{r:?}");
    }
}

#[test]
fn equal_complex_fields_separate_the_two_bound_sets() {
    let (mesh, gamma) = disk(0.12);
    let a = complex_iso(&mesh);
    let f = cos_current(&mesh, &gamma);
    let (gen, imp, mixed) = all_mono_bounds(&a, &a, &f, &mesh, &gamma).unwrap();
    assert!(gen.lhs.abs() < 1e-12);
    assert!(gen.lower_bound < -0.01 && gen.upper_bound > 0.01, "{gen:?}");
    assert!(gen.pass && imp.pass);
    let s = gen.scale;
    assert!(imp.lower_bound.abs() < 1e-9 * s && imp.upper_bound.abs() < 1e-9 * s, "{imp:?}");
    assert!(mixed.residual < 1e-10, "{mixed:?}");
}

#[test]
fn self_adjoint_pairs_make_both_sets_agree() {
    let (mesh, gamma) = disk(0.12);
    let a1 = constant(&mesh, Mat2::real(1.0, 0.3, 0.3, 2.0));
    let a2 = MatrixField::from_fn(mesh.n_triangles(), |t| {
        if mesh.centroid(t)[0] > 0.2 {
            Mat2::diag(2.5, 1.2)
        } else {
            Mat2::real(1.0, 0.3, 0.3, 2.0)
        }
    });
    let f = cos_current(&mesh, &gamma);
    let (gen, imp, _) = all_mono_bounds(&a1, &a2, &f, &mesh, &gamma).unwrap();
    assert!((gen.lower_bound - imp.lower_bound).abs() < 1e-10 * gen.scale);
    assert!((gen.upper_bound - imp.upper_bound).abs() < 1e-10 * gen.scale);
    assert_eq!(gen.term("cross_skew"), Some(0.0));
}

#[test]
fn random_pairs_satisfy_both_bound_sets() {
    let (mesh, gamma) = disk(0.15);
    let spec = RandomFieldSpec::default();
    for seed in 0..6 {
        let (a1, a2) = random_pair(&mesh, &spec, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for _ in 0..3 {
            let f = random_current(&mesh, &gamma, &mut rng);
            assert!(f.is_mean_free(1e-12) && (f.l2_norm() - 1.0).abs() < 1e-12);
            let (gen, imp, mixed) = all_mono_bounds(&a1, &a2, &f, &mesh, &gamma).unwrap();
            assert!(gen.pass, "seed {seed}: {gen:?}");
            assert!(imp.pass, "seed {seed}: {imp:?}");
            assert!(gen.imag_residual <= 1e-10 * gen.scale);
            assert!(mixed.residual < 1e-10, "seed {seed}: {mixed:?}");
            assert!(gen.relative_margin() >= -REL_TOL && imp.relative_margin() >= -REL_TOL);
        }
    }
}

#[test]
fn random_pairs_are_reproducible() {
    let (mesh, _) = disk(0.2);
    let spec = RandomFieldSpec::default();
    assert_eq!(random_pair(&mesh, &spec, 9).unwrap(), random_pair(&mesh, &spec, 9).unwrap());
    assert_ne!(random_pair(&mesh, &spec, 9).unwrap(), random_pair(&mesh, &spec, 10).unwrap());
}

#[test]
fn loewner_examples() {
    let (mesh, _) = disk(0.3);
    let n = mesh.n_triangles();
    let v = RegionMask::full(n);
    let c = |m: Mat2| MatrixField::constant(n, m);
    let r = loewner_product_check(&c(Mat2::IDENTITY), &c(Mat2::identity_times(2.0)), &v, 1.0, LoewnerCase::Increase).unwrap();
    assert!(r.hypothesis_holds && r.conclusion_holds);
    assert!((r.extreme_eigenvalue - 2.0).abs() < 1e-14);
    // 1·(1/2)·(−1) = −1/2, below both −(α/β)² = −1/4 and −α/β = −1/2
    let r = loewner_product_check(&c(Mat2::identity_times(2.0)), &c(Mat2::IDENTITY), &v, 1.0, LoewnerCase::Decrease).unwrap();
    assert!(r.hypothesis_holds && r.conclusion_holds && r.isotropic);
    assert!((r.extreme_eigenvalue + 0.5).abs() < 1e-14);
    assert!((r.bound + 0.25).abs() < 1e-14);
    assert_eq!(r.sharper_bound, Some(-0.5));
    assert_eq!(r.sharper_holds, Some(true));
    let r = loewner_product_check(&c(Mat2::diag(1.0, 2.0)), &c(Mat2::diag(3.0, 4.0)), &v, 1.0, LoewnerCase::Increase).unwrap();
    assert!(r.conclusion_holds && r.extreme_eigenvalue >= 1.0 && !r.isotropic);
    // hypothesis failure is reported, not raised
    let r = loewner_product_check(&c(Mat2::IDENTITY), &c(Mat2::identity_times(1.5)), &v, 1.0, LoewnerCase::Increase).unwrap();
    assert!(!r.hypothesis_holds && r.hypothesis_violations == n);
    let complex = c(Mat2::scalar(C64::new(1.0, 0.2)));
    assert!(matches!(
        loewner_product_check(&complex, &c(Mat2::IDENTITY), &v, 1.0, LoewnerCase::Increase),
        Err(Error::Verify(_))
    ));
}

#[test]
fn remainder_chain_vanishing_cases() {
    let (mesh, gamma) = disk(0.15);
    let f = cos_current(&mesh, &gamma);
    let a = complex_iso(&mesh);
    let r = remainder_chain_check(&mesh, &gamma, &a, &a, 1, &f, 3, None).unwrap();
    assert!(r.pass, "{:?}", r.steps);
    assert_eq!((r.final_bound, r.integral_grad_w, r.w_elements), (0.0, 0.0, 0));
    assert!(r.cross_term.abs() < 1e-14);
    // A_2^I = 0: cross term vanishes, bound is non-negative
    let a2 = constant(&mesh, Mat2::real(1.2, 0.1, 0.1, 1.0));
    let r = remainder_chain_check(&mesh, &gamma, &a, &a2, 2, &f, 4, None).unwrap();
    assert_eq!(r.cross_term, 0.0);
    assert!(r.final_bound >= 0.0 && r.pass);
    assert!(remainder_chain_check(&mesh, &gamma, &a, &a2, 3, &f, 4, None).is_err());
    assert!(remainder_chain_check(&mesh, &gamma, &a, &a2, 1, &f, 1, None).is_err());
}

#[test]
fn remainder_chain_closes_for_a_complex_pair() {
    let (mesh, gamma) = disk(0.12);
    let (a1, a2) = random_pair(&mesh, &RandomFieldSpec::default(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_current(&mesh, &gamma, &mut rng);
    let errs: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&q| {
            let r = remainder_chain_check(&mesh, &gamma, &a1, &a2, 1, &f, q, None).unwrap();
            assert!(r.pass, "{:?}", r.steps);
            assert!(r.cross_term.abs() > 0.0 && r.slack.unwrap() >= 1.0);
            assert!(r.self_term.abs() < 1e-12);
            r.taylor_error
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] <= 1e-8, "{errs:?}");
}

#[test]
fn trace_constant_matches_the_disk() {
    let (mesh, gamma) = disk(0.08);
    let tc = trace_constant(&mesh, &gamma).unwrap();
    // first non-trivial Neumann eigenvalue of the unit disk, j'_{1,1}²
    assert!((tc.lambda1 - 3.3900).abs() < 0.05, "{tc:?}");
}

#[test]
fn frechet_and_truncation_limits() {
    let (mesh, gamma) = disk(0.15);
    let a0 = constant(&mesh, Mat2::real(1.2, 0.1, 0.1, 1.0));
    let c = RegionMask::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.4);
    let bounds = CoefficientBounds::new(0.8, 2.0, 0.4).unwrap();
    let fr = frechet_fd_check(&mesh, &gamma, &a0, &c, &bounds, &[1e-2, 1e-3, 1e-4]).unwrap();
    assert!(fr.first_order, "{fr:?}");
    assert!(frechet_fd_check(&mesh, &gamma, &a0, &c, &bounds, &[1e-3, 1e-2]).is_err());
    let ad = constant(&mesh, Mat2::identity_times(2.0));
    let ex = extreme_limit_check(&mesh, &gamma, &a0, &ad, &c, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
    assert!(ex.strictly_decreasing, "{ex:?}");
    assert!(ex.distances[3] <= 1e-3 * ex.conducting_norm, "{ex:?}");
}

#[test]
fn cross_skew_term_vanishes_where_expected() {
    let (mesh, _) = disk(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = RandomFieldSpec::default();
    let a = random_field(&mesh, &spec, &mut rng).unwrap();
    let b = random_field(&mesh, &spec, &mut rng).unwrap();
    let same_re = MatrixField::from_fn(a.len(), |t| a.re(t) + b.im(t).scale(C64::new(0.0, 1.0)));
    let real_b = b.re_field();
    for t in 0..a.len() {
        assert!(cross_skew_matrix(&a, &same_re, t).unwrap().max_abs() <= 1e-12);
        assert!(cross_skew_matrix(&a, &real_b, t).unwrap().max_abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pointwise_matrix_bounds_hold(seed in 0u64..1000, alpha in 0.2f64..1.0, spread in 1.0f64..4.0, eta in 0.0f64..2.0) {
        let (mesh, _) = disk(0.4);
        let spec = RandomFieldSpec { alpha, beta: alpha * spread, eta, pieces: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0 = random_field(&mesh, &spec, &mut rng).unwrap();
        let ad = random_field(&mesh, &spec, &mut rng).unwrap();
        let bounds = CoefficientBounds::new(alpha, alpha * spread, eta).unwrap();
        let r = matrix_bounds_check(&a0, &ad, &bounds).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn isotropic_pairs_have_no_cross_skew(r1 in 0.3f64..3.0, r2 in 0.3f64..3.0, i2 in -2.0f64..2.0) {
        let a1 = MatrixField::constant(1, Mat2::identity_times(r1));
        let a2 = MatrixField::constant(1, Mat2::scalar(C64::new(r2, i2)));
        prop_assert!(cross_skew_matrix(&a1, &a2, 0).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn random_hermitian_respects_its_range(seed in 0u64..10_000, lo in -3.0f64..3.0, width in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_hermitian(&mut rng, lo, lo + width);
        prop_assert!(m.is_hermitian(1e-12));
        let ev = m.hermitian_eigenvalues();
        prop_assert!(ev[0] >= lo - 1e-12 && ev[1] <= lo + width + 1e-12);
    }
}
