use eit_mono::coeff::{joint_bounds, MatrixField};
use eit_mono::linalg::Mat2;
use eit_mono::locpot::localized_current;
use eit_mono::mesh::{build_mesh, select_gamma, Domain, RegionMask};
use eit_mono::mono::{generate_candidates, reconstruct, Dictionary, Method, TestContext};
use eit_mono::ndmap::nd_for_coefficient;

fn ball(mesh: &eit_mono::mesh::Mesh, center: [f64; 2], r: f64) -> RegionMask {
    RegionMask::from_predicate(mesh, |p| (p[0] - center[0]).hypot(p[1] - center[1]) < r)
}

#[test]
fn mesh_to_reconstruction() {
    let mesh = build_mesh(&Domain::unit_disk(), 0.1).unwrap();
    let gamma = select_gamma(&mesh, |p| p[1] > -0.5).unwrap();
    let d = ball(&mesh, [0.2, 0.1], 0.25);
    let a0 = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
    let ad = MatrixField::from_fn(mesh.n_triangles(), |t| {
        if d.contains(t) { Mat2::identity_times(2.5) } else { Mat2::IDENTITY }
    });
    let data = nd_for_coefficient(&mesh, &gamma, &ad).unwrap().operator;
    let bounds = joint_bounds(&a0, &ad).unwrap();
    let ctx = TestContext::new(&mesh, &gamma, &a0, bounds, &data).unwrap();
    let none = RegionMask::empty(mesh.n_triangles());
    let cands =
        generate_candidates(&mesh, &none, &Dictionary::HalfspaceCaps { n_dirs: 8, n_offsets: 8, margin: 0.2 }).unwrap();
    for method in [Method::Linearized, Method::Corollary] {
        let rec = reconstruct(method, &ctx, &cands).unwrap();
        assert!(!rec.empty_pass_set, "{method:?}");
        // caps shaving one element layer off D sit below rounding and may pass
        let kept = d.intersection(&rec.mask).area(&mesh) / d.area(&mesh);
        assert!(kept > 0.9, "{method:?}: kept {kept}");
        // every cap holding D passes
        for (cand, rep) in cands.iter().zip(&rec.reports) {
            if d.is_subset_of(&cand.mask) {
                assert!(rep.pass, "{method:?} {}", cand.label);
            }
        }
        assert!(rec.mask.area(&mesh) < 0.6 * std::f64::consts::PI);
    }
}

#[test]
fn localized_current_on_a_partial_boundary() {
    let mesh = build_mesh(&Domain::unit_disk(), 0.1).unwrap();
    let gamma = select_gamma(&mesh, |p| p[0] > 0.0).unwrap();
    let a = MatrixField::constant(mesh.n_triangles(), Mat2::real(1.0, 0.1, 0.1, 1.3));
    let u = RegionMask::from_predicate(&mesh, |p| p[0] > -0.1);
    let b = ball(&mesh, [0.4, 0.0], 0.15);
    let loose = localized_current(&mesh, &a, &gamma, &u, &b, 1e-4).unwrap();
    let tight = localized_current(&mesh, &a, &gamma, &u, &b, 1e-8).unwrap();
    assert!(tight.ratio >= loose.ratio && tight.ratio > 10.0);
    assert!((tight.current.l2_norm() - 1.0).abs() < 1e-10);
}
