use super::*;
use crate::coeff::{CoefficientBounds, TestSign};
use crate::forward::{assemble_and_factor, energy_integral};
use crate::linalg::Mat2;
use crate::mesh::{build_mesh, select_gamma, Domain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn disk(h: f64) -> (Mesh, GammaSpec) {
    let mesh = build_mesh(&Domain::unit_disk(), h).unwrap();
    let gamma = select_gamma(&mesh, |_| true).unwrap();
    (mesh, gamma)
}

fn partial_disk(h: f64) -> (Mesh, GammaSpec) {
    let mesh = build_mesh(&Domain::unit_disk(), h).unwrap();
    let gamma = select_gamma(&mesh, |p| p[1] > -0.3).unwrap();
    (mesh, gamma)
}

fn ball(mesh: &Mesh, center: [f64; 2], r: f64) -> RegionMask {
    RegionMask::from_predicate(mesh, |p| (p[0] - center[0]).hypot(p[1] - center[1]) < r)
}

fn random_field(mesh: &Mesh, rng: &mut ChaCha8Rng) -> MatrixField {
    let inc = ball(mesh, [0.1, -0.1], 0.4);
    let mut pick = || {
        let d1 = rng.gen_range(0.8..2.0);
        let d2 = rng.gen_range(0.8..2.0);
        let o = rng.gen_range(-0.3..0.3);
        let s: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.5..0.5));
        Mat2::real(d1, o, o, d2) + Mat2::new(c(s[0], 0.0), c(s[1], s[2]), c(s[1], -s[2]), c(s[3], 0.0)).scale(c(0.0, 1.0))
    };
    let (inner, outer) = (pick(), pick());
    MatrixField::from_fn(mesh.n_triangles(), |t| if inc.contains(t) { inner } else { outer })
}

fn random_coeffs(d: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
    DVector::from_fn(d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

#[test]
fn basis_is_orthonormal_and_mean_free() {
    let (mesh, gamma) = partial_disk(0.2);
    let basis = BoundaryBasis::new(&mesh, &gamma).unwrap();
    assert_eq!(basis.dim(), gamma.len() - 1);
    let g = basis.gram();
    assert!((&g - DMatrix::<C64>::identity(basis.dim(), basis.dim())).iter().all(|z| z.norm() < 1e-13));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_coeffs(basis.dim(), &mut rng);
    let f = basis.current(&mesh, &gamma, &x).unwrap();
    assert!(f.is_mean_free(1e-12));
    let back = basis.coefficients(&f).unwrap();
    assert!((back - x).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn pairing_contract_matches_direct_solves() {
    let (mesh, gamma) = partial_disk(0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_field(&mesh, &mut rng);
    let sys = assemble_and_factor(&mesh, &a, &gamma).unwrap();
    let basis = BoundaryBasis::new(&mesh, &gamma).unwrap();
    let nd = compute_nd_in(&mesh, &gamma, &sys, &basis).unwrap();
    for _ in 0..3 {
        let (x, y) = (random_coeffs(basis.dim(), &mut rng), random_coeffs(basis.dim(), &mut rng));
        let f = basis.current(&mesh, &gamma, &x).unwrap();
        let g = basis.current(&mesh, &gamma, &y).unwrap();
        let direct = sys.solve_neumann(&mesh, &gamma, &g).unwrap().pairing(&mesh, &gamma, &f);
        let via = nd.operator.pairing(&x, &y);
        assert!((direct - via).norm() < 1e-10 * direct.norm().max(1.0), "{direct} vs {via}");
        // the combined solution reproduces the direct one
        let u = nd.solutions.combine(&y);
        let v = sys.solve_neumann(&mesh, &gamma, &g).unwrap();
        assert!(u.values().iter().zip(v.values()).all(|(p, q)| (p - q).norm() < 1e-10));
    }
}

#[test]
fn adjoint_field_gives_adjoint_operator() {
    let (mesh, gamma) = partial_disk(0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_field(&mesh, &mut rng);
    let l = nd_for_coefficient(&mesh, &gamma, &a).unwrap().operator;
    let ls = nd_for_coefficient(&mesh, &gamma, &a.adjoint()).unwrap().operator;
    assert!(ls.sub(&l.adjoint()).max_abs() < 1e-10 * l.max_abs());
    assert!(l.hermitian_defect() > 1e-6);
}

#[test]
fn scaling_and_self_adjoint_structure() {
    let (mesh, gamma) = disk(0.2);
    let a = MatrixField::from_fn(mesh.n_triangles(), |t| {
        let x = mesh.centroid(t)[0];
        Mat2::real(1.5 + x, 0.2, 0.2, 1.0)
    });
    let l = nd_for_coefficient(&mesh, &gamma, &a).unwrap().operator;
    let l2 = nd_for_coefficient(&mesh, &gamma, &a.scaled(c(2.0, 0.0))).unwrap().operator;
    assert!(l2.sub(&l.scale(0.5)).max_abs() < 1e-12 * l.max_abs());
    assert!(l.hermitian_defect() < 1e-10);
    let (_, li) = l.hermitian_split();
    assert!(li.max_abs() < 1e-10 * l.max_abs());
}

#[test]
fn split_forms_are_energies() {
    let (mesh, gamma) = partial_disk(0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_field(&mesh, &mut rng);
    let nd = nd_for_coefficient(&mesh, &gamma, &a).unwrap();
    let (lr, li) = nd.operator.hermitian_split();
    assert!(lr.hermitian_defect() < 1e-12 && li.hermitian_defect() < 1e-12);
    let full = RegionMask::full(mesh.n_triangles());
    for _ in 0..3 {
        let x = random_coeffs(nd.operator.dim(), &mut rng);
        let u = nd.solutions.combine(&x);
        let er = energy_integral(&mesh, &u, &u, &a.re_field(), &full).unwrap();
        let ei = energy_integral(&mesh, &u, &u, &a.im_field(), &full).unwrap();
        let qr = lr.pairing(&x, &x);
        let qi = li.pairing(&x, &x);
        assert!((qr - er).norm() < 1e-10 * er.norm());
        assert!((qi + ei).norm() < 1e-10 * er.norm());
    }
}

#[test]
fn energy_form_matches_energy_integral() {
    let (mesh, gamma) = partial_disk(0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_field(&mesh, &mut rng);
    let x_field = random_field(&mesh, &mut rng);
    let nd = nd_for_coefficient(&mesh, &gamma, &a).unwrap();
    let region = ball(&mesh, [-0.2, 0.1], 0.5);
    let e = nd.solutions.energy_form(&mesh, &x_field, &region).unwrap();
    let d = nd.operator.dim();
    let (x, y) = (random_coeffs(d, &mut rng), random_coeffs(d, &mut rng));
    let (ux, uy) = (nd.solutions.combine(&x), nd.solutions.combine(&y));
    // yᴴ E x = ∫ X ∇u_x · conj(∇u_y)
    let direct = energy_integral(&mesh, &ux, &uy, &x_field, &region).unwrap();
    let via = y.dotc(&(&e * &x));
    assert!((direct - via).norm() < 1e-10 * direct.norm(), "{direct} vs {via}");
    let empty = nd.solutions.energy_form(&mesh, &x_field, &RegionMask::empty(mesh.n_triangles())).unwrap();
    assert!(empty.iter().all(|z| *z == c(0.0, 0.0)));
}

#[test]
fn disk_spectrum_approximates_inverse_mode_numbers() {
    let (mesh, gamma) = disk(0.05);
    let a = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
    let op = nd_for_coefficient(&mesh, &gamma, &a).unwrap().operator;
    let mut ev = op.generalized_eigenvalues().unwrap();
    ev.reverse();
    for n in 1..=4 {
        for k in [2 * n - 2, 2 * n - 1] {
            let rel = (ev[k] * n as f64 - 1.0).abs();
            assert!(rel < 0.03, "mode {n}: {} (rel {rel})", ev[k]);
        }
    }
}

#[test]
fn csv_round_trip() {
    let (mesh, gamma) = partial_disk(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let op = nd_for_coefficient(&mesh, &gamma, &random_field(&mesh, &mut rng)).unwrap().operator;
    let back = NDOperator::from_csv(&op.to_csv(), &op.gram_to_csv()).unwrap();
    assert!(back.sub(&op).max_abs() <= 1e-11 * op.max_abs());
    assert!(op.to_csv().starts_with(&format!("dimension,{}\ni,j,re,im\n", op.dim())));
    assert!(matrix_from_csv("dimension,2\n0,5,1,0\n").is_err());
    assert!(matrix_from_csv("0,0,1,0\n").is_err());
}

fn complex_background(mesh: &Mesh, m: &RegionMask) -> MatrixField {
    let skew = Mat2::new(c(0.3, 0.0), c(0.0, 0.2), c(0.0, -0.2), c(0.1, 0.0));
    MatrixField::from_fn(mesh.n_triangles(), |t| {
        let base = Mat2::real(1.2, 0.1, 0.1, 1.0);
        if m.contains(t) {
            base + skew.scale(c(0.0, 1.0))
        } else {
            base
        }
    })
}

#[test]
fn derivative_outside_c_is_negative_and_vanishes_on_trivial_supports() {
    let (mesh, gamma) = partial_disk(0.12);
    let n = mesh.n_triangles();
    let m = ball(&mesh, [0.35, 0.3], 0.2);
    let a0 = complex_background(&mesh, &m);
    let bounds = CoefficientBounds::new(0.8, 2.5, 0.6).unwrap();
    let c_far = ball(&mesh, [-0.3, -0.2], 0.3);
    let ops = nonlinear_test_operators(&mesh, &a0, &c_far, &bounds, &gamma).unwrap();
    let ev = ops.d_plus_outside.generalized_eigenvalues().unwrap();
    assert!(*ev.last().unwrap() <= 1e-10 * ev[0].abs());
    assert!(ev[0] < 0.0);
    // M ⊆ C
    let c_big = ball(&mesh, [0.2, 0.2], 0.6);
    let ops = nonlinear_test_operators(&mesh, &a0, &c_big, &bounds, &gamma).unwrap();
    assert_eq!(ops.d_plus_outside.max_abs(), 0.0);
    // M = ∅
    let real = a0.re_field();
    let (_, lin) = linearized_test_operators(&mesh, &real, &c_far, &bounds, &gamma).unwrap();
    assert_eq!(lin.d_outside.max_abs(), 0.0);
    // C = ∅
    let (_, lin) = linearized_test_operators(&mesh, &a0, &RegionMask::empty(n), &bounds, &gamma).unwrap();
    assert_eq!(lin.d_plus.max_abs(), 0.0);
    assert_eq!(lin.d_minus.max_abs(), 0.0);
}

#[test]
fn linearized_operators_have_definite_signs() {
    let (mesh, gamma) = partial_disk(0.12);
    let m = ball(&mesh, [0.35, 0.3], 0.2);
    let a0 = complex_background(&mesh, &m);
    let bounds = CoefficientBounds::new(0.8, 2.5, 0.6).unwrap();
    let cc = ball(&mesh, [-0.2, -0.1], 0.35);
    let (_, lin) = linearized_test_operators(&mesh, &a0, &cc, &bounds, &gamma).unwrap();
    // β + η²/α ≥ A₀^R and A₀^R ≤ β²/α, so DΛ_C^+ ⪯ 0 and DΛ_C^- ⪰ 0
    assert!(*lin.d_plus.generalized_eigenvalues().unwrap().last().unwrap() <= 1e-12);
    assert!(lin.d_minus.generalized_eigenvalues().unwrap()[0] >= -1e-12);
    assert!(*lin.d_outside.generalized_eigenvalues().unwrap().last().unwrap() <= 1e-12);
    // identity background with α = β = 1, η = 0: the bracket vanishes
    let id = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
    let unit = CoefficientBounds::new(1.0, 1.0, 0.0).unwrap();
    let (_, lin) = linearized_test_operators(&mesh, &id, &cc, &unit, &gamma).unwrap();
    assert!(lin.d_plus.max_abs() < 1e-14);
}

#[test]
fn test_operators_are_monotone_in_c() {
    let (mesh, gamma) = partial_disk(0.12);
    let a0 = MatrixField::constant(mesh.n_triangles(), Mat2::real(1.2, 0.1, 0.1, 1.0));
    let bounds = CoefficientBounds::new(0.8, 2.5, 0.0).unwrap();
    let c1 = ball(&mesh, [0.0, 0.0], 0.25);
    let c2 = ball(&mesh, [0.05, 0.0], 0.45);
    assert!(c1.is_subset_of(&c2));
    let o1 = nonlinear_test_operators(&mesh, &a0, &c1, &bounds, &gamma).unwrap();
    let o2 = nonlinear_test_operators(&mesh, &a0, &c2, &bounds, &gamma).unwrap();
    // a larger C lowers A_C^- and raises A_C^+
    assert!(o2.minus.sub(&o1.minus).generalized_eigenvalues().unwrap()[0] >= -1e-9);
    assert!(o1.plus.sub(&o2.plus).generalized_eigenvalues().unwrap()[0] >= -1e-9);
    assert!(o2.minus.sub(&o1.minus).generalized_eigenvalues().unwrap().last().unwrap() > &1e-6);
}

#[test]
fn extreme_operators_bracket_the_background() {
    let (mesh, gamma) = partial_disk(0.12);
    let a0 = MatrixField::constant(mesh.n_triangles(), Mat2::real(1.2, 0.1, 0.1, 1.0));
    let cc = ball(&mesh, [0.1, 0.0], 0.35);
    let ext = extreme_operators(&mesh, &a0, &cc, &gamma).unwrap();
    let l0 = nd_for_coefficient(&mesh, &gamma, &a0).unwrap().operator;
    assert!(ext.insulating.sub(&l0).generalized_eigenvalues().unwrap()[0] >= -1e-12);
    assert!(l0.sub(&ext.conducting).generalized_eigenvalues().unwrap()[0] >= -1e-12);
    let empty = extreme_operators(&mesh, &a0, &RegionMask::empty(mesh.n_triangles()), &gamma).unwrap();
    assert!(empty.insulating.sub(&l0).max_abs() == 0.0);
    let skew = complex_background(&mesh, &ball(&mesh, [0.0, 0.0], 0.2));
    assert!(extreme_operators(&mesh, &skew, &cc, &gamma).is_err());
}

#[test]
fn finite_differences_converge_to_the_derivative() {
    let (mesh, gamma) = partial_disk(0.15);
    let a0 = MatrixField::from_fn(mesh.n_triangles(), |t| Mat2::real(1.2 + 0.2 * mesh.centroid(t)[0], 0.1, 0.1, 1.0));
    let bounds = CoefficientBounds::new(0.8, 2.0, 0.4).unwrap();
    let cc = ball(&mesh, [0.0, 0.1], 0.4);
    let (base, lin) = linearized_test_operators(&mesh, &a0, &cc, &bounds, &gamma).unwrap();
    let level = Mat2::identity_times(bounds.plus_level());
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&t| {
            let at = a0.map(|k, r| if cc.contains(k) { r + (level - r).scale_re(t) } else { r });
            let lt = nd_for_coefficient(&mesh, &gamma, &at).unwrap().operator;
            let fd = lt.sub(&base).scale(1.0 / t);
            fd.sub(&lin.d_plus).operator_norm().unwrap()
        })
        .collect();
    let norm = lin.d_plus.operator_norm().unwrap();
    assert!(errs[0] / errs[1] > 8.0 && errs[1] / errs[2] > 8.0, "{errs:?}");
    assert!(errs[2] < 1e-3 * norm);
    let _ = TestSign::Plus;
}
