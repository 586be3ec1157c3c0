//! Numerical oracles for the monotonicity inequalities: the general and the
//! improved two-sided bounds, the mixed identities, the remainder chain that
//! controls the cross term, pointwise matrix bounds and the derivative and
//! truncation limits.

mod limits;
mod random;
mod remainder;

pub use limits::{extreme_limit_check, frechet_fd_check, ExtremeLimitReport, FrechetReport};
pub use random::{random_current, random_field, random_hermitian, random_pair, RandomFieldSpec};
pub use remainder::{remainder_chain_check, trace_constant, ChainStep, RemainderReport, TraceConstant, TaylorSample};

use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientBounds, MatrixField};
use crate::forward::{assemble_and_factor, energy_integral, BoundaryCurrent, FieldSolution};
use crate::linalg::Mat2;
use crate::mesh::{GammaSpec, Mesh, RegionMask};
use crate::{Error, Result};

/// Relative slack allowed in the exact (Galerkin) inequalities.
pub const REL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsKind {
    General,
    Improved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonoBoundsReport {
    pub kind: BoundsKind,
    /// `⟨f, (Λ₁^R − Λ₂^R) f⟩`
    pub lhs: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `lhs − lower`
    pub lower_margin: f64,
    /// `upper − lhs`
    pub upper_margin: f64,
    /// `|lhs| + Σ|terms| + ∫A₂^R∇u₂·conj∇u₂`, the reference for relative
    /// margins.
    pub scale: f64,
    pub terms: Vec<Term>,
    /// Largest imaginary part among the Hermitian-form integrals.
    pub imag_residual: f64,
    pub pass: bool,
}

impl MonoBoundsReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    /// Smallest of the two margins divided by `scale` (raw margin if `scale` is 0).
    pub fn relative_margin(&self) -> f64 {
        let m = self.lower_margin.min(self.upper_margin);
        if self.scale > 0.0 {
            m / self.scale
        } else {
            m
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedIdentityReport {
    /// `Re ∫ A₁^R ∇u₁·conj ∇u₂`
    pub first_lhs: f64,
    /// `∫ A₂^R ∇u₂·conj ∇u₂ + Im ∫ A₁^I ∇u₁·conj ∇u₂`
    pub first_rhs: f64,
    /// `Re ∫ A₂^R ∇u₁·conj ∇u₂`
    pub second_lhs: f64,
    /// `∫ A₁^R ∇u₁·conj ∇u₁ − Im ∫ A₂^I ∇u₁·conj ∇u₂`
    pub second_rhs: f64,
    /// Larger of the two mismatches relative to the magnitudes involved.
    pub residual: f64,
}

/// `u₁`, `u₂` for a common current.
pub struct PairSolutions {
    pub u1: FieldSolution,
    pub u2: FieldSolution,
}

pub fn solve_pair(
    mesh: &Mesh,
    gamma: &GammaSpec,
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
) -> Result<PairSolutions> {
    let u1 = assemble_and_factor(mesh, a1, gamma)?.solve_neumann(mesh, gamma, f)?;
    let u2 = assemble_and_factor(mesh, a2, gamma)?.solve_neumann(mesh, gamma, f)?;
    Ok(PairSolutions { u1, u2 })
}

fn inv_re(a: &MatrixField, t: usize) -> Result<Mat2> {
    a.re(t)
        .inverse()
        .ok_or_else(|| Error::Verify(format!("real part is singular on element {t}")))
}

/// `[A₂^R (A₁^R)⁻¹ A₂^I]^I` on element `t`.
pub fn cross_skew_matrix(a1: &MatrixField, a2: &MatrixField, t: usize) -> Result<Mat2> {
    Ok((a2.re(t) * inv_re(a1, t)? * a2.im(t)).im_part())
}

fn lhs(mesh: &Mesh, gamma: &GammaSpec, f: &BoundaryCurrent, sol: &PairSolutions) -> f64 {
    // ⟨f, Λ f⟩ = ∫_Γ f conj(u)
    sol.u1.pairing(mesh, gamma, f).re - sol.u2.pairing(mesh, gamma, f).re
}

struct Integrals<'a> {
    mesh: &'a Mesh,
    full: RegionMask,
    imag: f64,
}

impl<'a> Integrals<'a> {
    fn new(mesh: &'a Mesh) -> Self {
        Self { mesh, full: RegionMask::full(mesh.n_triangles()), imag: 0.0 }
    }

    /// `∫ X ∇u·conj ∇u` for Hermitian `X`; records the imaginary residue.
    fn hermitian(&mut self, u: &FieldSolution, x: &MatrixField) -> Result<f64> {
        let z = energy_integral(self.mesh, u, u, x, &self.full)?;
        self.imag = self.imag.max(z.im.abs());
        Ok(z.re)
    }

    fn mixed(&self, u: &FieldSolution, v: &FieldSolution, x: &MatrixField) -> Result<crate::C64> {
        energy_integral(self.mesh, u, v, x, &self.full)
    }
}

fn field(a1: &MatrixField, f: impl Fn(usize) -> Result<Mat2>) -> Result<MatrixField> {
    Ok(MatrixField::new((0..a1.len()).map(f).collect::<Result<_>>()?))
}

fn finish(
    kind: BoundsKind,
    lhs: f64,
    lower: f64,
    upper: f64,
    terms: Vec<Term>,
    energy: f64,
    imag: f64,
) -> MonoBoundsReport {
    let scale = lhs.abs() + terms.iter().map(|t| t.value.abs()).sum::<f64>() + energy.abs();
    let (lower_margin, upper_margin) = (lhs - lower, upper - lhs);
    let pass = lower_margin >= -REL_TOL * scale && upper_margin >= -REL_TOL * scale && imag <= 1e-10 * scale.max(1e-300);
    MonoBoundsReport {
        kind,
        lhs,
        lower_bound: lower,
        upper_bound: upper,
        lower_margin,
        upper_margin,
        scale,
        terms,
        imag_residual: imag,
        pass,
    }
}

fn term(name: &str, value: f64) -> Term {
    Term { name: name.into(), value }
}

fn check_pair(mesh: &Mesh, a1: &MatrixField, a2: &MatrixField) -> Result<()> {
    let n = mesh.n_triangles();
    if a1.len() != n || a2.len() != n {
        return Err(Error::Dimension { expected: n, got: a1.len().min(a2.len()) });
    }
    Ok(())
}

/// Two-sided bounds on `⟨f,(Λ₁^R − Λ₂^R)f⟩` in terms of `u₂` only:
///
/// lower `= ∫[(A₂^R − A₁^R) − A₁^I(A₁^R)⁻¹A₁^I]∇u₂·conj∇u₂`,
/// upper `= ∫[A₂^R(A₁^R)⁻¹(A₂^R − A₁^R) + A₂^I(A₁^R)⁻¹A₂^I − 2[A₂^R(A₁^R)⁻¹A₂^I]^I]∇u₂·conj∇u₂`.
pub fn general_mono_bounds(
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
    mesh: &Mesh,
    gamma: &GammaSpec,
) -> Result<MonoBoundsReport> {
    check_pair(mesh, a1, a2)?;
    let sol = solve_pair(mesh, gamma, a1, a2, f)?;
    general_from_solutions(a1, a2, f, mesh, gamma, &sol)
}

fn general_from_solutions(
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
    mesh: &Mesh,
    gamma: &GammaSpec,
    sol: &PairSolutions,
) -> Result<MonoBoundsReport> {
    let mut ig = Integrals::new(mesh);
    let u2 = &sol.u2;
    let re_diff = ig.hermitian(u2, &field(a1, |t| Ok(a2.re(t) - a1.re(t)))?)?;
    let skew1 = ig.hermitian(u2, &field(a1, |t| Ok(a1.im(t) * inv_re(a1, t)? * a1.im(t)))?)?;
    let real_prod = ig.hermitian(u2, &field(a1, |t| Ok(a2.re(t) * inv_re(a1, t)? * (a2.re(t) - a1.re(t))))?)?;
    let skew2 = ig.hermitian(u2, &field(a1, |t| Ok(a2.im(t) * inv_re(a1, t)? * a2.im(t)))?)?;
    let cross = ig.hermitian(u2, &field(a1, |t| cross_skew_matrix(a1, a2, t))?)?;
    let lower = re_diff - skew1;
    let upper = real_prod + skew2 - 2.0 * cross;
    let terms = vec![
        term("re_difference", re_diff),
        term("skew_quadratic_1", skew1),
        term("real_product", real_prod),
        term("skew_quadratic_2", skew2),
        term("cross_skew", cross),
    ];
    let energy = ig.hermitian(u2, &a2.re_field())?;
    Ok(finish(BoundsKind::General, lhs(mesh, gamma, f, sol), lower, upper, terms, energy, ig.imag))
}

/// Bounds that vanish for `A₁ = A₂`; they need both `u₁` and `u₂`:
///
/// lower `= ∫(A₂^R − A₁^R)∇u₂·conj∇u₂ + 2 Im∫A₁^I∇u₁·conj∇u₂`,
/// upper `= ∫A₂^R(A₁^R)⁻¹(A₂^R − A₁^R)∇u₂·conj∇u₂ + 2 Im∫A₂^I∇u₁·conj∇u₂`.
pub fn improved_mono_bounds(
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
    mesh: &Mesh,
    gamma: &GammaSpec,
) -> Result<MonoBoundsReport> {
    check_pair(mesh, a1, a2)?;
    let sol = solve_pair(mesh, gamma, a1, a2, f)?;
    improved_from_solutions(a1, a2, f, mesh, gamma, &sol)
}

fn improved_from_solutions(
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
    mesh: &Mesh,
    gamma: &GammaSpec,
    sol: &PairSolutions,
) -> Result<MonoBoundsReport> {
    let mut ig = Integrals::new(mesh);
    let re_diff = ig.hermitian(&sol.u2, &field(a1, |t| Ok(a2.re(t) - a1.re(t)))?)?;
    let real_prod =
        ig.hermitian(&sol.u2, &field(a1, |t| Ok(a2.re(t) * inv_re(a1, t)? * (a2.re(t) - a1.re(t))))?)?;
    let mixed1 = ig.mixed(&sol.u1, &sol.u2, &a1.im_field())?.im;
    let mixed2 = ig.mixed(&sol.u1, &sol.u2, &a2.im_field())?.im;
    let lower = re_diff + 2.0 * mixed1;
    let upper = real_prod + 2.0 * mixed2;
    let terms = vec![
        term("re_difference", re_diff),
        term("real_product", real_prod),
        term("mixed_cross_1", mixed1),
        term("mixed_cross_2", mixed2),
    ];
    let energy = ig.hermitian(&sol.u2, &a2.re_field())?;
    Ok(finish(BoundsKind::Improved, lhs(mesh, gamma, f, sol), lower, upper, terms, energy, ig.imag))
}

/// Both bound sets and the mixed identities from one pair of solves.
pub fn all_mono_bounds(
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
    mesh: &Mesh,
    gamma: &GammaSpec,
) -> Result<(MonoBoundsReport, MonoBoundsReport, MixedIdentityReport)> {
    check_pair(mesh, a1, a2)?;
    let sol = solve_pair(mesh, gamma, a1, a2, f)?;
    Ok((
        general_from_solutions(a1, a2, f, mesh, gamma, &sol)?,
        improved_from_solutions(a1, a2, f, mesh, gamma, &sol)?,
        mixed_from_solutions(a1, a2, mesh, &sol)?,
    ))
}

pub fn mixed_identities(
    a1: &MatrixField,
    a2: &MatrixField,
    f: &BoundaryCurrent,
    mesh: &Mesh,
    gamma: &GammaSpec,
) -> Result<MixedIdentityReport> {
    check_pair(mesh, a1, a2)?;
    let sol = solve_pair(mesh, gamma, a1, a2, f)?;
    mixed_from_solutions(a1, a2, mesh, &sol)
}

fn mixed_from_solutions(
    a1: &MatrixField,
    a2: &MatrixField,
    mesh: &Mesh,
    sol: &PairSolutions,
) -> Result<MixedIdentityReport> {
    let ig = Integrals::new(mesh);
    let (r1, r2, i1, i2) = (a1.re_field(), a2.re_field(), a1.im_field(), a2.im_field());
    let first_lhs = ig.mixed(&sol.u1, &sol.u2, &r1)?.re;
    let e22 = ig.mixed(&sol.u2, &sol.u2, &r2)?.re;
    let m1 = ig.mixed(&sol.u1, &sol.u2, &i1)?.im;
    let second_lhs = ig.mixed(&sol.u1, &sol.u2, &r2)?.re;
    let e11 = ig.mixed(&sol.u1, &sol.u1, &r1)?.re;
    let m2 = ig.mixed(&sol.u1, &sol.u2, &i2)?.im;
    let (first_rhs, second_rhs) = (e22 + m1, e11 - m2);
    let rel = |a: f64, b: f64, s: f64| if s > 0.0 { (a - b).abs() / s } else { (a - b).abs() };
    let residual = rel(first_lhs, first_rhs, first_lhs.abs() + e22.abs() + m1.abs())
        .max(rel(second_lhs, second_rhs, second_lhs.abs() + e11.abs() + m2.abs()));
    Ok(MixedIdentityReport { first_lhs, first_rhs, second_lhs, second_rhs, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoewnerCase {
    /// `A₂ − A₁ ⪰ cI ⇒ A₂A₁⁻¹(A₂ − A₁) ⪰ cI`
    #[serde(rename = "i")]
    Increase,
    /// `A₂ − A₁ ⪯ −cI ⇒ A₂A₁⁻¹(A₂ − A₁) ⪯ −c(α/β)²I`
    #[serde(rename = "ii")]
    Decrease,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoewnerReport {
    pub case: LoewnerCase,
    pub c: f64,
    /// `min λ(A₂)` over `V`
    pub alpha: f64,
    /// `max λ(A₁)` over `V`
    pub beta: f64,
    pub isotropic: bool,
    pub hypothesis_holds: bool,
    pub hypothesis_violations: usize,
    /// Smallest (case i) or largest (case ii) eigenvalue of the product.
    pub extreme_eigenvalue: f64,
    pub bound: f64,
    pub conclusion_holds: bool,
    /// `−c α/β` for isotropic input in case ii.
    pub sharper_bound: Option<f64>,
    pub sharper_holds: Option<bool>,
}

/// Checks the Loewner product bound element-wise on `V`. Hypothesis
/// violations are reported, not raised.
pub fn loewner_product_check(
    a1: &MatrixField,
    a2: &MatrixField,
    v: &RegionMask,
    c: f64,
    case: LoewnerCase,
) -> Result<LoewnerReport> {
    if a1.len() != v.len() || a2.len() != v.len() {
        return Err(Error::Dimension { expected: v.len(), got: a1.len().min(a2.len()) });
    }
    if v.is_empty() {
        return Err(Error::Verify("region V is empty".into()));
    }
    if !(c >= 0.0) {
        return Err(Error::Verify(format!("c must be non-negative, got {c}")));
    }
    let sa_tol = crate::coeff::SKEW_TOL;
    if v.iter().any(|t| a1.im(t).spectral_norm() > sa_tol || a2.im(t).spectral_norm() > sa_tol) {
        return Err(Error::Verify("Loewner product check needs self-adjoint A₁, A₂ on V".into()));
    }
    let alpha = v.iter().map(|t| a2.re(t).hermitian_eigenvalues()[0]).fold(f64::INFINITY, f64::min);
    let beta = v.iter().map(|t| a1.re(t).hermitian_eigenvalues()[1]).fold(f64::NEG_INFINITY, f64::max);
    let scale = v.iter().map(|t| a1.re(t).spectral_norm().max(a2.re(t).spectral_norm())).fold(1.0, f64::max);
    let tol = 1e-12 * scale * scale;
    let iso_tol = 1e-12 * scale;
    let isotropic = v.iter().all(|t| a1.re(t).is_isotropic(iso_tol) && a2.re(t).is_isotropic(iso_tol));
    let mut violations = 0;
    let mut extreme = match case {
        LoewnerCase::Increase => f64::INFINITY,
        LoewnerCase::Decrease => f64::NEG_INFINITY,
    };
    for t in v.iter() {
        let (r1, r2) = (a1.re(t), a2.re(t));
        let d = (r2 - r1).hermitian_eigenvalues();
        let inv = r1.inverse().ok_or_else(|| Error::Verify(format!("A₁ is singular on element {t}")))?;
        let p = (r2 * inv * (r2 - r1)).hermitian_eigenvalues();
        match case {
            LoewnerCase::Increase => {
                violations += usize::from(d[0] < c - tol);
                extreme = extreme.min(p[0]);
            }
            LoewnerCase::Decrease => {
                violations += usize::from(d[1] > -c + tol);
                extreme = extreme.max(p[1]);
            }
        }
    }
    let ratio = alpha / beta;
    let (bound, conclusion_holds, sharper_bound, sharper_holds) = match case {
        LoewnerCase::Increase => (c, extreme >= c - tol, None, None),
        LoewnerCase::Decrease => {
            let b = -c * ratio * ratio;
            let sharp = isotropic.then_some(-c * ratio);
            (b, extreme <= b + tol, sharp, sharp.map(|s| extreme <= s + tol))
        }
    };
    Ok(LoewnerReport {
        case,
        c,
        alpha,
        beta,
        isotropic,
        hypothesis_holds: violations == 0,
        hypothesis_violations: violations,
        extreme_eigenvalue: extreme,
        bound,
        conclusion_holds,
        sharper_bound,
        sharper_holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixBoundsReport {
    /// `max_t λ_max(A^I(A^R)⁻¹A^I) − η²/α` over both fields.
    pub skew_excess: f64,
    /// `max_t λ_max(A₀^R(A_D^R)⁻¹A₀^R) − β²/α`
    pub real_excess: f64,
    pub pass: bool,
}

/// Element-wise `A^I(A^R)⁻¹A^I ⪯ (η²/α)I` for `A₀` and `A_D`, and
/// `A₀^R(A_D^R)⁻¹A₀^R ⪯ (β²/α)I`.
pub fn matrix_bounds_check(a0: &MatrixField, ad: &MatrixField, bounds: &CoefficientBounds) -> Result<MatrixBoundsReport> {
    if a0.len() != ad.len() {
        return Err(Error::Dimension { expected: a0.len(), got: ad.len() });
    }
    bounds.validate()?;
    let (alpha, beta, eta) = (bounds.alpha, bounds.beta, bounds.eta);
    let mut skew_excess = f64::NEG_INFINITY;
    let mut real_excess = f64::NEG_INFINITY;
    for t in 0..a0.len() {
        for a in [a0, ad] {
            let q = a.im(t) * inv_re(a, t)? * a.im(t);
            skew_excess = skew_excess.max(q.hermitian_eigenvalues()[1] - eta * eta / alpha);
        }
        let r = a0.re(t) * inv_re(ad, t)? * a0.re(t);
        real_excess = real_excess.max(r.hermitian_eigenvalues()[1] - beta * beta / alpha);
    }
    let tol = 1e-12 * (beta * beta / alpha).max(1.0);
    Ok(MatrixBoundsReport { skew_excess, real_excess, pass: skew_excess <= tol && real_excess <= tol })
}

#[cfg(test)]
mod tests;
