//! Localized potentials: boundary currents whose solutions carry much
//! gradient energy in a ball `B` and little outside a set `U` reaching Γ.
//!
//! The current maximizes `E_B(f) / (E_{Ω∖U}(f) + reg ‖f‖²)` with
//! `E_V(f) = ∫_V |∇u_f|²`, i.e. it is the top eigenvector of a Hermitian
//! pencil on the mean-free boundary space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coeff::MatrixField;
use crate::forward::BoundaryCurrent;
use crate::linalg::{generalized_eigen, hermitian_part, Mat2};
use crate::mesh::{element_components, GammaSpec, Mesh, RegionMask};
use crate::ndmap::{nd_for_coefficient, BoundaryBasis};
use crate::{Error, Result, C64};

/// Which sufficient condition for unique continuation the caller relies on.
/// Recorded only; nothing is checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UcpAssumption {
    /// Two-dimensional domain with real part of the coefficient.
    #[default]
    PlanarRealPart,
    LipschitzRealPart,
}

/// The two energy forms and the boundary Gram matrix.
#[derive(Clone, Debug)]
pub struct LocpotForms {
    pub inside: DMatrix<C64>,
    pub outside: DMatrix<C64>,
    pub gram: DMatrix<C64>,
}

impl LocpotForms {
    pub fn quotient(&self, x: &DVector<C64>, reg: f64) -> f64 {
        let e_b = x.dotc(&(&self.inside * x)).re;
        let e_out = x.dotc(&(&self.outside * x)).re;
        let norm2 = x.dotc(&(&self.gram * x)).re;
        e_b / (e_out + reg * norm2)
    }
}

#[derive(Clone, Debug)]
pub struct LocpotResult {
    pub current: BoundaryCurrent,
    pub coefficients: DVector<C64>,
    pub energy_in_b: f64,
    pub energy_outside_u: f64,
    /// Optimal quotient `E_B / (E_out + reg ‖f‖²)`.
    pub quotient: f64,
    /// `E_B / max(E_out, reg ‖f‖²)`
    pub ratio: f64,
    pub reg: f64,
    pub iterations: usize,
    pub forms: LocpotForms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocpotSummary {
    pub energy_in_b: f64,
    pub energy_outside_u: f64,
    pub quotient: f64,
    pub ratio: f64,
    pub reg: f64,
    pub iterations: usize,
}

impl LocpotResult {
    pub fn summary(&self) -> LocpotSummary {
        LocpotSummary {
            energy_in_b: self.energy_in_b,
            energy_outside_u: self.energy_outside_u,
            quotient: self.quotient,
            ratio: self.ratio,
            reg: self.reg,
            iterations: self.iterations,
        }
    }
}

fn check_sets(mesh: &Mesh, gamma: &GammaSpec, u: &RegionMask, b: &RegionMask, reg: f64) -> Result<()> {
    let n = mesh.n_triangles();
    if u.len() != n || b.len() != n {
        return Err(Error::Dimension { expected: n, got: u.len().min(b.len()) });
    }
    if !(reg > 0.0) {
        return Err(Error::Locpot(format!("regularization must be positive, got {reg}")));
    }
    if b.is_empty() {
        return Err(Error::Locpot("target ball B is empty".into()));
    }
    if !b.is_subset_of(u) {
        return Err(Error::Locpot("B is not contained in U".into()));
    }
    if element_components(mesh, u).len() != 1 {
        return Err(Error::Locpot("U is not connected".into()));
    }
    if !gamma.edge_indices().iter().any(|&e| u.contains(mesh.boundary_owner(e))) {
        return Err(Error::Locpot("U does not reach Γ".into()));
    }
    Ok(())
}

pub fn localized_current(
    mesh: &Mesh,
    a: &MatrixField,
    gamma: &GammaSpec,
    u: &RegionMask,
    b: &RegionMask,
    reg: f64,
) -> Result<LocpotResult> {
    check_sets(mesh, gamma, u, b, reg)?;
    let nd = nd_for_coefficient(mesh, gamma, a)?;
    let identity = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
    let inside = hermitian_part(&nd.solutions.energy_form(mesh, &identity, b)?);
    let outside = hermitian_part(&nd.solutions.energy_form(mesh, &identity, &u.complement())?);
    let gram = nd.operator.gram().clone();
    let pencil = &outside + &gram * C64::new(reg, 0.0);
    let (values, vectors) = generalized_eigen(&inside, &pencil)?;
    let top = values.len() - 1;
    let mut x: DVector<C64> = vectors.column(top).into_owned();
    let norm = x.dotc(&(&gram * &x)).re.sqrt();
    x /= C64::new(norm, 0.0);
    let forms = LocpotForms { inside, outside, gram };
    let energy_in_b = x.dotc(&(&forms.inside * &x)).re;
    let energy_outside_u = x.dotc(&(&forms.outside * &x)).re.max(0.0);
    let basis = BoundaryBasis::new(mesh, gamma)?;
    let current = basis.current(mesh, gamma, &x)?;
    Ok(LocpotResult {
        current,
        coefficients: x,
        energy_in_b,
        energy_outside_u,
        quotient: values[top],
        ratio: energy_in_b / energy_outside_u.max(reg),
        reg,
        iterations: 1,
        forms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, select_gamma, Domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(h: f64) -> (Mesh, GammaSpec) {
        let mesh = build_mesh(&Domain::unit_disk(), h).unwrap();
        let gamma = select_gamma(&mesh, |_| true).unwrap();
        (mesh, gamma)
    }

    fn half_and_ball(mesh: &Mesh) -> (RegionMask, RegionMask) {
        let u = RegionMask::from_predicate(mesh, |p| p[0] > 0.0);
        let b = RegionMask::from_predicate(mesh, |p| (p[0] - 0.4).hypot(p[1]) < 0.12);
        (u, b)
    }

    #[test]
    fn optimum_beats_random_currents() {
        let (mesh, gamma) = disk(0.1);
        let a = MatrixField::constant(mesh.n_triangles(), Mat2::real(1.0, 0.2, 0.2, 1.5));
        let (u, b) = half_and_ball(&mesh);
        let reg = 1e-6;
        let res = localized_current(&mesh, &a, &gamma, &u, &b, reg).unwrap();
        assert!(res.current.is_mean_free(1e-12));
        assert!((res.current.l2_norm() - 1.0).abs() < 1e-10);
        assert!((res.forms.quotient(&res.coefficients, reg) - res.quotient).abs() < 1e-8 * res.quotient);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = res.coefficients.len();
        for _ in 0..50 {
            let x = DVector::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            assert!(res.forms.quotient(&x, reg) <= res.quotient * (1.0 + 1e-8));
        }
        assert!(res.energy_in_b > 0.0 && res.energy_outside_u >= 0.0);
    }

    #[test]
    fn ratio_grows_as_regularization_shrinks() {
        let (mesh, gamma) = disk(0.1);
        let a = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
        let (u, b) = half_and_ball(&mesh);
        let ratios: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&reg| localized_current(&mesh, &a, &gamma, &u, &b, reg).unwrap().ratio)
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] >= w[0]), "{ratios:?}");
    }

    #[test]
    fn whole_domain_u_concentrates_strongly() {
        let (mesh, gamma) = disk(0.1);
        let a = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
        let u = RegionMask::full(mesh.n_triangles());
        let b = RegionMask::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.15);
        let res = localized_current(&mesh, &a, &gamma, &u, &b, 1e-8).unwrap();
        assert_eq!(res.energy_outside_u, 0.0);
        assert!(res.ratio >= 1e3);
    }

    #[test]
    fn preconditions() {
        let (mesh, gamma) = disk(0.2);
        let a = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
        let (u, b) = half_and_ball(&mesh);
        let outside = RegionMask::from_predicate(&mesh, |p| (p[0] + 0.4).hypot(p[1]) < 0.2);
        assert!(matches!(localized_current(&mesh, &a, &gamma, &u, &outside, 1e-6), Err(Error::Locpot(_))));
        assert!(matches!(localized_current(&mesh, &a, &gamma, &u, &b, 0.0), Err(Error::Locpot(_))));
        let inner = RegionMask::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.5);
        let small_b = RegionMask::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.2);
        assert!(matches!(localized_current(&mesh, &a, &gamma, &inner, &small_b, 1e-6), Err(Error::Locpot(_))));
    }
}
