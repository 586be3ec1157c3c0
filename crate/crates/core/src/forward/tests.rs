use super::*;
use crate::mesh::{build_mesh, select_gamma, Domain};
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn disk(h: f64) -> (Mesh, GammaSpec) {
    let mesh = build_mesh(&Domain::unit_disk(), h).unwrap();
    let gamma = select_gamma(&mesh, |_| true).unwrap();
    (mesh, gamma)
}

fn cos_current(mesh: &Mesh, gamma: &GammaSpec, k: f64) -> BoundaryCurrent {
    BoundaryCurrent::from_fn(mesh, gamma, |p| c((k * p[1].atan2(p[0])).cos(), 0.0)).mean_free()
}

fn ball(mesh: &Mesh, r: f64) -> RegionMask {
    RegionMask::from_predicate(mesh, |p| p[0].hypot(p[1]) < r)
}

#[test]
fn identity_stiffness_is_hermitian_with_zero_row_sums() {
    let (mesh, gamma) = disk(0.2);
    let sys = assemble_and_factor(&mesh, &MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY), &gamma).unwrap();
    let k = sys.stiffness();
    for r in 0..k.n {
        let s: C64 = k.row(r).map(|(_, v)| v).sum();
        assert!(s.norm() < 1e-12);
        for (col, v) in k.row(r) {
            assert!((v - k.get(col, r).conj()).norm() < 1e-14);
        }
    }
}

#[test]
fn disk_cosine_oracle_converges() {
    // A = σI, f = cos θ on the whole circle: u = x / σ and ⟨f, Λf⟩ = π / σ
    let sigma = 2.0;
    let mut errs = Vec::new();
    for h in [0.1, 0.05] {
        let (mesh, gamma) = disk(h);
        let a = MatrixField::constant(mesh.n_triangles(), Mat2::identity_times(sigma));
        let sys = assemble_and_factor(&mesh, &a, &gamma).unwrap();
        let f = cos_current(&mesh, &gamma, 1.0);
        let u = sys.solve_neumann(&mesh, &gamma, &f).unwrap();
        assert!(u.gamma_integral(&mesh, &gamma).norm() < 1e-12);
        let pair = u.pairing(&mesh, &gamma, &f);
        assert!(pair.im.abs() < 1e-12);
        let nodal = mesh
            .nodes()
            .iter()
            .zip(u.values())
            .map(|(p, v)| (v - c(p[0] / sigma, 0.0)).norm())
            .fold(0.0, f64::max);
        errs.push(((pair.re - PI / sigma).abs(), nodal));
    }
    assert!(errs[1].0 < 0.01 && errs[1].1 < 0.01, "{errs:?}");
    assert!(errs[1].0 < errs[0].0 && errs[1].1 < errs[0].1, "{errs:?}");
}

#[test]
fn solution_is_linear_in_the_current() {
    let (mesh, gamma) = disk(0.15);
    let a = MatrixField::constant(mesh.n_triangles(), Mat2::new(c(2.0, 0.3), c(0.2, 0.5), c(-0.1, -0.4), c(1.0, 0.1)));
    let sys = assemble_and_factor(&mesh, &a, &gamma).unwrap();
    let f = cos_current(&mesh, &gamma, 1.0);
    let g = cos_current(&mesh, &gamma, 3.0);
    let s = c(0.7, -2.0);
    let lhs = sys.solve_neumann(&mesh, &gamma, &f.add(&g.scale(s))).unwrap();
    let mut rhs = sys.solve_neumann(&mesh, &gamma, &f).unwrap();
    rhs.axpy(s, &sys.solve_neumann(&mesh, &gamma, &g).unwrap());
    let err = lhs.values().iter().zip(rhs.values()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err}");
}

#[test]
fn adjoint_coefficient_gives_adjoint_map() {
    // ⟨f, Λ(A) g⟩ = conj ⟨g, Λ(A*) f⟩
    let (mesh, gamma) = disk(0.15);
    let a = MatrixField::from_fn(mesh.n_triangles(), |t| {
        let x = mesh.centroid(t)[0];
        Mat2::new(c(1.5 + x, 0.4), c(0.3, 0.6 * x), c(0.1, -0.2), c(1.0, 0.2))
    });
    let sys = assemble_and_factor(&mesh, &a, &gamma).unwrap();
    let adj = assemble_and_factor(&mesh, &a.adjoint(), &gamma).unwrap();
    let f = cos_current(&mesh, &gamma, 1.0);
    let g = BoundaryCurrent::from_fn(&mesh, &gamma, |p| c(p[1], p[0] * p[0])).mean_free();
    let lhs = sys.solve_neumann(&mesh, &gamma, &g).unwrap().pairing(&mesh, &gamma, &f);
    let rhs = adj.solve_neumann(&mesh, &gamma, &f).unwrap().pairing(&mesh, &gamma, &g).conj();
    assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
}

#[test]
fn non_mean_free_current_is_rejected() {
    let (mesh, gamma) = disk(0.3);
    let sys = assemble_and_factor(&mesh, &MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY), &gamma).unwrap();
    let f = BoundaryCurrent::from_fn(&mesh, &gamma, |_| c(1.0, 0.0));
    assert!(matches!(sys.solve_neumann(&mesh, &gamma, &f), Err(Error::Forward(_))));
}

#[test]
fn indefinite_coefficient_is_rejected() {
    let (mesh, gamma) = disk(0.3);
    let a = MatrixField::constant(mesh.n_triangles(), Mat2::diag(1.0, -0.5));
    assert!(matches!(assemble_and_factor(&mesh, &a, &gamma), Err(Error::Forward(_))));
}

#[test]
fn partial_gamma_has_zero_flux_elsewhere() {
    let mesh = build_mesh(&Domain::unit_disk(), 0.1).unwrap();
    let gamma = select_gamma(&mesh, |p| p[1] > 0.0).unwrap();
    let a = MatrixField::constant(mesh.n_triangles(), Mat2::new(c(1.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(1.0, 0.0)));
    let sys = assemble_and_factor(&mesh, &a, &gamma).unwrap();
    let f = BoundaryCurrent::from_fn(&mesh, &gamma, |p| c(p[0], 0.3 * p[0] * p[1])).mean_free();
    let b = f.load(&mesh, &gamma);
    let u = sys.solve_load(&b).unwrap();
    assert!(sys.relative_residual(&u, &b) < 1e-10);
    assert!(u.gamma_integral(&mesh, &gamma).norm() < 1e-12);
}

fn disk_insulating_check(kind: ExtremeKind, level: f64) {
    let (mesh, gamma) = disk(0.1);
    let n = mesh.n_triangles();
    let inc = RegionMask::from_predicate(&mesh, |p| (p[0] - 0.2).hypot(p[1]) < 0.3);
    let a0 = MatrixField::constant(n, Mat2::IDENTITY);
    let f = cos_current(&mesh, &gamma, 1.0);
    let ext = solve_extreme(&mesh, &a0, &gamma, &inc, kind, &f).unwrap();
    let lim = MatrixField::from_fn(n, |t| if inc.contains(t) { Mat2::identity_times(level) } else { Mat2::IDENTITY });
    let u = assemble_and_factor(&mesh, &lim, &gamma).unwrap().solve_neumann(&mesh, &gamma, &f).unwrap();
    let p_ext = ext.pairing(&mesh, &gamma, &f).re;
    let p_lim = u.pairing(&mesh, &gamma, &f).re;
    let p_bg = assemble_and_factor(&mesh, &a0, &gamma).unwrap().solve_neumann(&mesh, &gamma, &f).unwrap().pairing(&mesh, &gamma, &f).re;
    assert!((p_ext - p_lim).abs() < 1e-4 * p_ext, "{p_ext} vs {p_lim}");
    match kind {
        ExtremeKind::Insulating => assert!(p_ext > p_lim && p_lim > p_bg),
        ExtremeKind::Conducting => assert!(p_ext < p_lim && p_lim < p_bg),
    }
    // energy identity holds for the limit solutions as well
    let e = energy_integral(&mesh, &ext, &ext, &a0, &RegionMask::full(n)).unwrap();
    assert!((e - c(p_ext, 0.0)).norm() < 1e-10 * p_ext);
}

#[test]
fn insulating_limit_matches_small_coefficient() {
    disk_insulating_check(ExtremeKind::Insulating, 1e-6);
}

#[test]
fn conducting_limit_matches_large_coefficient() {
    disk_insulating_check(ExtremeKind::Conducting, 1e6);
}

#[test]
fn conducting_solution_is_constant_on_the_inclusion() {
    let (mesh, gamma) = disk(0.1);
    let n = mesh.n_triangles();
    let inc = ball(&mesh, 0.4);
    let f = cos_current(&mesh, &gamma, 1.0);
    let u = solve_extreme(&mesh, &MatrixField::constant(n, Mat2::IDENTITY), &gamma, &inc, ExtremeKind::Conducting, &f).unwrap();
    assert!(gradient_norm(&mesh, &u, &inc) < 1e-14);
    assert!(gradient_norm(&mesh, &u, &RegionMask::full(n)) > 0.1);
}

#[test]
fn extreme_rejects_bad_inclusions() {
    let (mesh, gamma) = disk(0.15);
    let n = mesh.n_triangles();
    let a0 = MatrixField::constant(n, Mat2::IDENTITY);
    let touching = RegionMask::from_predicate(&mesh, |p| p[0] > 0.7);
    assert!(factor_extreme(&mesh, &a0, &gamma, &touching, ExtremeKind::Insulating).is_err());
    let ring = RegionMask::from_predicate(&mesh, |p| (0.3..0.6).contains(&p[0].hypot(p[1])));
    assert!(factor_extreme(&mesh, &a0, &gamma, &ring, ExtremeKind::Conducting).is_err());
    let skew = MatrixField::constant(n, Mat2::new(c(1.0, 0.0), c(0.0, 0.2), c(0.0, 0.2), c(1.0, 0.0)));
    assert!(factor_extreme(&mesh, &skew, &gamma, &ball(&mesh, 0.3), ExtremeKind::Insulating).is_err());
}

#[test]
fn csv_export_has_header_and_one_row_per_node() {
    let u = FieldSolution::new(vec![c(1.0, -2.0), c(0.5, 0.0)]);
    let csv = u.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "node,re,im");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,1.00000000000e0,-2.00000000000e0"));
}

fn mat2_strategy() -> impl Strategy<Value = Mat2> {
    // Hermitian part diagonal-dominant, arbitrary skew part
    (0.5f64..3.0, 0.5f64..3.0, -0.4f64..0.4, prop::array::uniform4(-1.0f64..1.0)).prop_map(|(d1, d2, o, s)| {
        let re = Mat2::real(d1, o, o, d2);
        let im = Mat2::new(c(s[0], 0.0), c(s[1], s[2]), c(s[1], -s[2]), c(s[3], 0.0));
        re + im.scale(c(0.0, 1.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn energy_identity_and_positive_real_part(inner in mat2_strategy(), outer in mat2_strategy(), k in 1usize..4) {
        let (mesh, gamma) = disk(0.25);
        let inc = ball(&mesh, 0.5);
        let a = MatrixField::from_fn(mesh.n_triangles(), |t| if inc.contains(t) { inner } else { outer });
        let sys = assemble_and_factor(&mesh, &a, &gamma).unwrap();
        let f = cos_current(&mesh, &gamma, k as f64);
        let u = sys.solve_neumann(&mesh, &gamma, &f).unwrap();
        let pair = u.pairing(&mesh, &gamma, &f);
        let e = energy_integral(&mesh, &u, &u, &a, &RegionMask::full(mesh.n_triangles())).unwrap();
        prop_assert!((pair - e).norm() < 1e-10 * pair.norm());
        prop_assert!(pair.re > 0.0);
        // Re⟨f,Λf⟩ = ∫A^R∇u·conj∇u and Im⟨f,Λf⟩ = ∫A^I∇u·conj∇u
        let full = RegionMask::full(mesh.n_triangles());
        let er = energy_integral(&mesh, &u, &u, &a.re_field(), &full).unwrap();
        let ei = energy_integral(&mesh, &u, &u, &a.im_field(), &full).unwrap();
        prop_assert!((er.re - pair.re).abs() < 1e-10 * pair.norm());
        prop_assert!((ei.re - pair.im).abs() < 1e-10 * pair.norm());
    }
}
