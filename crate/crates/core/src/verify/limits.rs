use serde::{Deserialize, Serialize};

use crate::coeff::{build_truncated_coeff, CoefficientBounds, MatrixField};
use crate::linalg::Mat2;
use crate::mesh::{GammaSpec, Mesh, RegionMask};
use crate::ndmap::{extreme_operators, nd_for_coefficient, LinearizedBase};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetReport {
    pub steps: Vec<f64>,
    /// `‖(Λ(A₀^R + tH) − Λ(A₀^R))/t − DΛ_C^+‖`
    pub errors: Vec<f64>,
    /// `errors[k] / errors[k+1]`
    pub reduction: Vec<f64>,
    pub derivative_norm: f64,
    /// Every reduction factor is at least `0.5 · steps[k]/steps[k+1]`.
    pub first_order: bool,
}

/// Difference quotients of `t ↦ Λ(A₀^R + tH)` with
/// `H = [(β + η²/α)I − A₀^R]χ_C` against the assembled `DΛ_C^+`.
pub fn frechet_fd_check(
    mesh: &Mesh,
    gamma: &GammaSpec,
    a0: &MatrixField,
    c: &RegionMask,
    bounds: &CoefficientBounds,
    steps: &[f64],
) -> Result<FrechetReport> {
    if steps.len() < 2 || steps.iter().any(|&t| !(t > 0.0)) || steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Verify("steps must be positive and strictly decreasing (at least two)".into()));
    }
    let base = LinearizedBase::new(mesh, a0, gamma)?;
    let d = base.operators(mesh, c, bounds)?.d_plus;
    let level = Mat2::identity_times(bounds.plus_level());
    let mut errors = Vec::with_capacity(steps.len());
    for &t in steps {
        let at = base.a0_re.map(|k, r| if c.contains(k) { r + (level - r).scale_re(t) } else { r });
        let lt = nd_for_coefficient(mesh, gamma, &at)?.operator;
        let fd = lt.sub(base.base()).scale(1.0 / t);
        errors.push(fd.sub(&d).operator_norm()?);
    }
    let reduction: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let first_order = reduction.iter().zip(steps.windows(2)).all(|(r, s)| *r >= 0.5 * s[0] / s[1]);
    Ok(FrechetReport { steps: steps.to_vec(), errors, reduction, derivative_norm: d.operator_norm()?, first_order })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeLimitReport {
    pub epsilons: Vec<f64>,
    /// `‖Λ(A_ε) − Λ_∅^C‖`
    pub distances: Vec<f64>,
    pub conducting_norm: f64,
    pub strictly_decreasing: bool,
}

/// Distance of the truncated coefficients `A_ε` (`ε⁻¹A_D^R` on `C`) to the
/// perfectly conducting limit.
pub fn extreme_limit_check(
    mesh: &Mesh,
    gamma: &GammaSpec,
    a0: &MatrixField,
    ad: &MatrixField,
    c: &RegionMask,
    epsilons: &[f64],
) -> Result<ExtremeLimitReport> {
    let conducting = extreme_operators(mesh, a0, c, gamma)?.conducting;
    let ad_re = ad.re_field();
    let distances = epsilons
        .iter()
        .map(|&eps| {
            let ae = build_truncated_coeff(a0, &ad_re, c, eps)?;
            nd_for_coefficient(mesh, gamma, &ae)?.operator.sub(&conducting).operator_norm()
        })
        .collect::<Result<Vec<f64>>>()?;
    let strictly_decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    Ok(ExtremeLimitReport {
        epsilons: epsilons.to_vec(),
        distances,
        conducting_norm: conducting.operator_norm()?,
        strictly_decreasing,
    })
}
