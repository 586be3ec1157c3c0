//! Piecewise-constant 2×2 complex coefficient fields.

mod phantom;

pub use phantom::{
    build_phantom, check_assumptions, default_collar, AssumptionReport, MarginCase, Phantom, PhantomPiece, PhantomSpec,
};

use serde::{Deserialize, Serialize};

use crate::linalg::Mat2;
use crate::mesh::RegionMask;
use crate::{Error, Result, C64};

/// Threshold below which a skew part counts as zero.
pub const SKEW_TOL: f64 = 1e-12;

/// One 2×2 complex matrix per element, with the self-adjoint part `A^R` and
/// the skew part `A^I` cached so that `A = A^R + i A^I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    values: Vec<Mat2>,
    re: Vec<Mat2>,
    im: Vec<Mat2>,
}

impl MatrixField {
    pub fn new(values: Vec<Mat2>) -> Self {
        let re = values.iter().map(Mat2::re_part).collect();
        let im = values.iter().map(Mat2::im_part).collect();
        Self { values, re, im }
    }

    pub fn constant(n: usize, value: Mat2) -> Self {
        Self::new(vec![value; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> Mat2) -> Self {
        Self::new((0..n).map(f).collect())
    }

    /// `A^R + i A^I`
    pub fn from_parts(re: &MatrixField, im: &MatrixField) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Dimension { expected: re.len(), got: im.len() });
        }
        let i = C64::new(0.0, 1.0);
        Ok(Self::from_fn(re.len(), |t| re.values[t] + im.values[t].scale(i)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Mat2] {
        &self.values
    }

    pub fn value(&self, t: usize) -> Mat2 {
        self.values[t]
    }

    pub fn re(&self, t: usize) -> Mat2 {
        self.re[t]
    }

    pub fn im(&self, t: usize) -> Mat2 {
        self.im[t]
    }

    /// `A^R` as a field of its own.
    pub fn re_field(&self) -> MatrixField {
        MatrixField::new(self.re.clone())
    }

    /// `A^I` as a field of its own.
    pub fn im_field(&self) -> MatrixField {
        MatrixField::new(self.im.clone())
    }

    /// Element-wise adjoint `A*`.
    pub fn adjoint(&self) -> MatrixField {
        MatrixField::new(self.values.iter().map(Mat2::adjoint).collect())
    }

    pub fn scaled(&self, s: C64) -> MatrixField {
        MatrixField::new(self.values.iter().map(|a| a.scale(s)).collect())
    }

    pub fn map(&self, f: impl Fn(usize, Mat2) -> Mat2) -> MatrixField {
        MatrixField::new(self.values.iter().enumerate().map(|(t, &a)| f(t, a)).collect())
    }

    /// `self` on `region`, `other` elsewhere.
    pub fn overlay(&self, other: &MatrixField, region: &RegionMask) -> MatrixField {
        MatrixField::from_fn(self.len(), |t| if region.contains(t) { self.values[t] } else { other.values[t] })
    }

    pub fn max_skew_norm(&self) -> f64 {
        self.im.iter().map(Mat2::spectral_norm).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.max_skew_norm() <= tol
    }

    /// Elements where `A^I ≠ 0`, i.e. `supp A^I`.
    pub fn skew_support(&self) -> RegionMask {
        RegionMask::from_flags(self.im.iter().map(|m| m.spectral_norm() > SKEW_TOL).collect())
    }

    /// Elements where the two fields differ.
    pub fn support_of_difference(&self, other: &MatrixField) -> RegionMask {
        RegionMask::from_flags(self.values.iter().zip(&other.values).map(|(a, b)| (*a - *b).max_abs() > 0.0).collect())
    }

    /// `sup_t ‖A_t‖₂` over `region`, i.e. the ℋ(V) norm (0 on an empty region).
    pub fn sup_norm(&self, region: &RegionMask) -> f64 {
        region.iter().map(|t| self.values[t].spectral_norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm_im(&self, region: &RegionMask) -> f64 {
        region.iter().map(|t| self.im[t].spectral_norm()).fold(0.0, f64::max)
    }
}

/// `(A^R, A^I)` as separate Hermitian fields.
pub fn decompose(a: &MatrixField) -> (MatrixField, MatrixField) {
    (a.re_field(), a.im_field())
}

/// True iff `λ_min(A^R) ≥ c_min` on every element.
pub fn check_admissible_field(a: &MatrixField, c_min: f64) -> bool {
    a.re.iter().all(|m| m.hermitian_eigenvalues()[0] >= c_min)
}

/// Smallest `λ_min(A^R)` over the whole field.
pub fn min_re_eigenvalue(a: &MatrixField) -> f64 {
    a.re.iter().map(|m| m.hermitian_eigenvalues()[0]).fold(f64::INFINITY, f64::min)
}

/// Scalars `0 < α ≤ β`, `η ≥ 0` with `αI ≤ A^R ≤ βI` and `‖A^I‖ ≤ η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
}

impl CoefficientBounds {
    pub fn new(alpha: f64, beta: f64, eta: f64) -> Result<Self> {
        let b = Self { alpha, beta, eta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= self.beta && self.eta >= 0.0 && self.beta.is_finite() && self.eta.is_finite())
        {
            return Err(Error::Coefficient(format!(
                "invalid bounds alpha={} beta={} eta={} (need 0 < alpha <= beta, eta >= 0)",
                self.alpha, self.beta, self.eta
            )));
        }
        Ok(())
    }

    /// Value of `A_C^+` inside `C`: `β + η²/α`.
    pub fn plus_level(&self) -> f64 {
        self.beta + self.eta * self.eta / self.alpha
    }

    /// `β²/α`, the level used by the linearized lower test.
    pub fn minus_linear_level(&self) -> f64 {
        self.beta * self.beta / self.alpha
    }

    /// Largest truncation parameter for which `A_ε` still dominates the
    /// skew contribution: `1/(1 + (η/α)²)`.
    pub fn truncation_threshold(&self) -> f64 {
        1.0 / (1.0 + (self.eta / self.alpha).powi(2))
    }

    /// Smallest bounds valid for all the given bounds at once.
    pub fn hull(&self, other: &CoefficientBounds) -> CoefficientBounds {
        CoefficientBounds {
            alpha: self.alpha.min(other.alpha),
            beta: self.beta.max(other.beta),
            eta: self.eta.max(other.eta),
        }
    }
}

/// Bounds together with the ℋ(V) norms of the field on the region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsEstimate {
    pub bounds: CoefficientBounds,
    pub norm: f64,
    pub norm_re: f64,
    pub norm_im: f64,
}

/// `α = min λ_min(A^R)`, `β = max λ_max(A^R)`, `η = max ‖A^I‖` over `region`.
pub fn bounds_estimate(a: &MatrixField, region: &RegionMask) -> Result<BoundsEstimate> {
    if region.len() != a.len() {
        return Err(Error::Dimension { expected: a.len(), got: region.len() });
    }
    if region.is_empty() {
        return Err(Error::Coefficient("bounds requested on an empty region".into()));
    }
    let (mut alpha, mut beta, mut eta) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let (mut norm, mut norm_re) = (0.0f64, 0.0f64);
    for t in region.iter() {
        let [lo, hi] = a.re[t].hermitian_eigenvalues();
        alpha = alpha.min(lo);
        beta = beta.max(hi);
        eta = eta.max(a.im[t].spectral_norm());
        norm = norm.max(a.values[t].spectral_norm());
        norm_re = norm_re.max(a.re[t].spectral_norm());
    }
    Ok(BoundsEstimate { bounds: CoefficientBounds { alpha, beta, eta }, norm, norm_re, norm_im: eta })
}

/// Joint bounds for a background and an inclusion field over the whole
/// domain, as required of the known bounds on `A_D` and `A₀`.
pub fn joint_bounds(a0: &MatrixField, ad: &MatrixField) -> Result<CoefficientBounds> {
    let all = RegionMask::full(a0.len());
    let b0 = bounds_estimate(a0, &all)?.bounds;
    let bd = bounds_estimate(ad, &all)?.bounds;
    let b = b0.hull(&bd);
    b.validate()?;
    Ok(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSign {
    Minus,
    Plus,
}

/// `A_C^-` (αI on C) or `A_C^+` ((β + η²/α)I on C), `A₀^R` elsewhere.
pub fn build_test_coeff(a0: &MatrixField, c: &RegionMask, bounds: &CoefficientBounds, sign: TestSign) -> MatrixField {
    let level = match sign {
        TestSign::Minus => bounds.alpha,
        TestSign::Plus => bounds.plus_level(),
    };
    let inside = Mat2::identity_times(level);
    MatrixField::from_fn(a0.len(), |t| if c.contains(t) { inside } else { a0.re(t) })
}

/// `A_ε`: `A₀` off `C`, `ε⁻¹ A_D^R` on `C`.
pub fn build_truncated_coeff(
    a0: &MatrixField,
    ad_re: &MatrixField,
    c: &RegionMask,
    epsilon: f64,
) -> Result<MatrixField> {
    if !(epsilon > 0.0) {
        return Err(Error::Coefficient(format!("truncation parameter must be positive, got {epsilon}")));
    }
    Ok(MatrixField::from_fn(a0.len(), |t| {
        if c.contains(t) {
            ad_re.re(t).scale_re(1.0 / epsilon)
        } else {
            a0.value(t)
        }
    }))
}
