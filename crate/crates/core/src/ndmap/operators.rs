//! Test operators: ND maps of the test coefficients and the Fréchet
//! derivative forms, all assembled from one set of basis solutions each.

use nalgebra::DMatrix;

use super::{compute_nd, nd_for_coefficient, NDOperator, NdData};
use crate::coeff::{build_test_coeff, CoefficientBounds, MatrixField, TestSign};
use crate::forward::{factor_extreme, ExtremeKind};
use crate::linalg::{hermitian_part, Mat2};
use crate::mesh::{GammaSpec, Mesh, RegionMask};
use crate::{Error, Result, C64};

/// `A^I (A^R)⁻¹ A^I` elementwise.
pub fn skew_quadratic_field(a: &MatrixField) -> Result<MatrixField> {
    let mut out = Vec::with_capacity(a.len());
    for t in 0..a.len() {
        let inv = a
            .re(t)
            .inverse()
            .ok_or_else(|| Error::Coefficient(format!("A^R is singular on element {t}")))?;
        out.push(a.im(t) * inv * a.im(t));
    }
    Ok(MatrixField::new(out))
}

fn check_mask(mesh: &Mesh, c: &RegionMask) -> Result<()> {
    if c.len() != mesh.n_triangles() {
        return Err(Error::Dimension { expected: mesh.n_triangles(), got: c.len() });
    }
    Ok(())
}

fn negated_form(nd: &NdData, e: DMatrix<C64>) -> NDOperator {
    NDOperator { matrix: -hermitian_part(&e), gram: nd.operator.gram.clone() }
}

#[derive(Clone, Debug)]
pub struct NonlinearOperators {
    /// `Λ_C^-`
    pub minus: NDOperator,
    /// `Λ_C^+`
    pub plus: NDOperator,
    /// `DΛ⁺_{M∖C}`
    pub d_plus_outside: NDOperator,
}

pub fn nonlinear_test_operators(
    mesh: &Mesh,
    a0: &MatrixField,
    c: &RegionMask,
    bounds: &CoefficientBounds,
    gamma: &GammaSpec,
) -> Result<NonlinearOperators> {
    check_mask(mesh, c)?;
    bounds.validate()?;
    let minus = nd_for_coefficient(mesh, gamma, &build_test_coeff(a0, c, bounds, TestSign::Minus))?.operator;
    let plus = nd_for_coefficient(mesh, gamma, &build_test_coeff(a0, c, bounds, TestSign::Plus))?;
    let outside = a0.skew_support().difference(c);
    let q = skew_quadratic_field(a0)?;
    let e = plus.solutions.energy_form(mesh, &q, &outside)?;
    let d_plus_outside = negated_form(&plus, e);
    Ok(NonlinearOperators { minus, plus: plus.operator, d_plus_outside })
}

#[derive(Clone, Debug)]
pub struct LinearizedOperators {
    /// `DΛ_C^+`, form `−∫_C [(β + η²/α)I − A₀^R] ∇u·∇ū`
    pub d_plus: NDOperator,
    /// `DΛ_C^-`, form `−∫_C [A₀^R − (β²/α)I] ∇u·∇ū`
    pub d_minus: NDOperator,
    /// `DΛ_{M∖C}`, form `−∫_{M∖C} A₀^I (A₀^R)⁻¹ A₀^I ∇u·∇ū`
    pub d_outside: NDOperator,
}

/// Solutions with `A₀^R`, shared by the linearized operators of every `C`.
#[derive(Clone, Debug)]
pub struct LinearizedBase {
    pub nd: NdData,
    pub a0_re: MatrixField,
    pub q: MatrixField,
    pub m: RegionMask,
}

impl LinearizedBase {
    pub fn new(mesh: &Mesh, a0: &MatrixField, gamma: &GammaSpec) -> Result<Self> {
        let a0_re = a0.re_field();
        let nd = nd_for_coefficient(mesh, gamma, &a0_re)?;
        Ok(Self { nd, a0_re, q: skew_quadratic_field(a0)?, m: a0.skew_support() })
    }

    /// `Λ(A₀^R)`
    pub fn base(&self) -> &NDOperator {
        &self.nd.operator
    }

    pub fn operators(&self, mesh: &Mesh, c: &RegionMask, bounds: &CoefficientBounds) -> Result<LinearizedOperators> {
        check_mask(mesh, c)?;
        bounds.validate()?;
        let (cp, cm) = (bounds.plus_level(), bounds.minus_linear_level());
        let plus_x = self.a0_re.map(|_, r| Mat2::identity_times(cp) - r);
        let minus_x = self.a0_re.map(|_, r| r - Mat2::identity_times(cm));
        let sols = &self.nd.solutions;
        Ok(LinearizedOperators {
            d_plus: negated_form(&self.nd, sols.energy_form(mesh, &plus_x, c)?),
            d_minus: negated_form(&self.nd, sols.energy_form(mesh, &minus_x, c)?),
            d_outside: negated_form(&self.nd, sols.energy_form(mesh, &self.q, &self.m.difference(c))?),
        })
    }
}

/// `Λ(A₀^R)` and the three derivative operators for `C`.
pub fn linearized_test_operators(
    mesh: &Mesh,
    a0: &MatrixField,
    c: &RegionMask,
    bounds: &CoefficientBounds,
    gamma: &GammaSpec,
) -> Result<(NDOperator, LinearizedOperators)> {
    let base = LinearizedBase::new(mesh, a0, gamma)?;
    let ops = base.operators(mesh, c, bounds)?;
    Ok((base.nd.operator, ops))
}

#[derive(Clone, Debug)]
pub struct ExtremeOperators {
    /// `Λ_C^∅`
    pub insulating: NDOperator,
    /// `Λ_∅^C`
    pub conducting: NDOperator,
}

pub fn extreme_operators(mesh: &Mesh, a0: &MatrixField, c: &RegionMask, gamma: &GammaSpec) -> Result<ExtremeOperators> {
    check_mask(mesh, c)?;
    if !a0.is_self_adjoint(crate::coeff::SKEW_TOL) {
        return Err(Error::NdMap("extreme operators need a self-adjoint background".into()));
    }
    if c.is_empty() {
        let op = nd_for_coefficient(mesh, gamma, a0)?.operator;
        return Ok(ExtremeOperators { insulating: op.clone(), conducting: op });
    }
    let ins = factor_extreme(mesh, a0, gamma, c, ExtremeKind::Insulating)?;
    let con = factor_extreme(mesh, a0, gamma, c, ExtremeKind::Conducting)?;
    Ok(ExtremeOperators {
        insulating: compute_nd(mesh, gamma, &ins)?.operator,
        conducting: compute_nd(mesh, gamma, &con)?.operator,
    })
}
