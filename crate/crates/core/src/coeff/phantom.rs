use serde::{Deserialize, Serialize};

use super::{joint_bounds, CoefficientBounds, MatrixField};
use crate::linalg::Mat2;
use crate::mesh::{element_components, outer_shape, GammaSpec, Mesh, RegionMask};
use crate::{Error, Result};

/// One inclusion piece: constant matrix value on a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomPiece {
    pub mask: RegionMask,
    pub value: Mat2,
}

/// Background field plus inclusion pieces and optional margin scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub background: MatrixField,
    pub pieces: Vec<PhantomPiece>,
    pub tau_plus: Option<f64>,
    pub tau_minus: Option<f64>,
}

impl PhantomSpec {
    pub fn new(background: MatrixField, pieces: Vec<PhantomPiece>) -> Self {
        Self { background, pieces, tau_plus: None, tau_minus: None }
    }
}

/// `A_D` with `D = supp(A_D − A₀)` and `M = supp(A₀^I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub a0: MatrixField,
    pub ad: MatrixField,
    pub d: RegionMask,
    pub m: RegionMask,
}

pub fn build_phantom(spec: &PhantomSpec, mesh: &Mesh) -> Result<Phantom> {
    let n = mesh.n_triangles();
    if spec.background.len() != n {
        return Err(Error::Dimension { expected: n, got: spec.background.len() });
    }
    let mut values: Vec<Option<Mat2>> = vec![None; n];
    for (k, piece) in spec.pieces.iter().enumerate() {
        if piece.mask.len() != n {
            return Err(Error::Dimension { expected: n, got: piece.mask.len() });
        }
        for t in piece.mask.iter() {
            match values[t] {
                Some(v) if (v - piece.value).max_abs() > 0.0 => {
                    return Err(Error::Coefficient(format!(
                        "piece {k} overlaps an earlier piece with a different value at element {t}"
                    )))
                }
                _ => values[t] = Some(piece.value),
            }
        }
    }
    let a0 = spec.background.clone();
    let ad = MatrixField::from_fn(n, |t| values[t].unwrap_or_else(|| a0.value(t)));
    let d = ad.support_of_difference(&a0);
    let m = a0.skew_support();
    Ok(Phantom { a0, ad, d, m })
}

/// Evaluation of one of the two definiteness options near `∂D•`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginCase {
    pub holds: bool,
    /// Threshold the margin scalar must exceed.
    pub tau_required: f64,
    /// Margin scalar actually used (user value, or the threshold).
    pub tau_used: f64,
    /// Extreme eigenvalue of `A_D^R − A₀^R` over V: the minimum for the
    /// positive case, the maximum for the negative case.
    pub jump_on_v: f64,
    /// Strict margin `c` on B beyond `τ` (must be positive).
    pub margin_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub bounds: CoefficientBounds,
    pub d_compactly_contained: bool,
    pub case_a: MarginCase,
    pub case_b: MarginCase,
    /// Sharper positive-case threshold `β/α² ‖A₀^I‖²`, reported when all
    /// coefficients on V are isotropic.
    pub isotropic_tau_plus_required: Option<f64>,
    /// One component of `Ω ∖ (D ∪ M)` borders all of `∂D•`.
    pub s_covers_boundary: bool,
    /// That component also reaches Γ.
    pub s_touches_gamma: bool,
    pub ucp: String,
    pub v_elements: usize,
    pub b_elements: usize,
}

/// Default collar `V`: elements of `D•` within `layers` element rings of its
/// boundary.
pub fn default_collar(mesh: &Mesh, phantom: &Phantom, layers: usize) -> RegionMask {
    outer_shape(mesh, &phantom.d).inner_collar(mesh, layers)
}

/// Checks the known-bounds, margin and connectivity hypotheses on a phantom
/// for a collar `v` and ball `b ⊆ v`. Report only: never fails on a
/// violated hypothesis.
pub fn check_assumptions(
    spec: &PhantomSpec,
    phantom: &Phantom,
    mesh: &Mesh,
    gamma: &GammaSpec,
    v: &RegionMask,
    b: &RegionMask,
) -> Result<AssumptionReport> {
    let bounds = joint_bounds(&phantom.a0, &phantom.ad)?;
    let (alpha, beta) = (bounds.alpha, bounds.beta);
    let jump = |t: usize| (phantom.ad.re(t) - phantom.a0.re(t)).hermitian_eigenvalues();

    let a0_im_v = phantom.a0.sup_norm_im(v);
    let ad_im_v = phantom.ad.sup_norm_im(v);

    let tau_a_req = beta * beta / alpha.powi(3) * a0_im_v * a0_im_v;
    let tau_a = spec.tau_plus.unwrap_or(tau_a_req);
    let min_jump_v = v.iter().map(|t| jump(t)[0]).fold(f64::INFINITY, f64::min);
    let min_jump_b = b.iter().map(|t| jump(t)[0]).fold(f64::INFINITY, f64::min);
    let case_a = MarginCase {
        holds: !v.is_empty() && !b.is_empty() && tau_a >= tau_a_req && min_jump_v >= tau_a && min_jump_b - tau_a > 0.0,
        tau_required: tau_a_req,
        tau_used: tau_a,
        jump_on_v: min_jump_v,
        margin_c: min_jump_b - tau_a,
    };

    let tau_b_req = ad_im_v * ad_im_v / alpha;
    let tau_b = spec.tau_minus.unwrap_or(tau_b_req);
    let max_jump_v = v.iter().map(|t| jump(t)[1]).fold(f64::NEG_INFINITY, f64::max);
    let max_jump_b = b.iter().map(|t| jump(t)[1]).fold(f64::NEG_INFINITY, f64::max);
    let case_b = MarginCase {
        holds: !v.is_empty() && !b.is_empty() && tau_b >= tau_b_req && max_jump_v <= -tau_b && -max_jump_b - tau_b > 0.0,
        tau_required: tau_b_req,
        tau_used: tau_b,
        jump_on_v: max_jump_v,
        margin_c: -max_jump_b - tau_b,
    };

    let iso = v.iter().all(|t| phantom.a0.value(t).is_isotropic(1e-14) && phantom.ad.value(t).is_isotropic(1e-14));
    let isotropic_tau_plus_required = iso.then(|| beta / (alpha * alpha) * a0_im_v * a0_im_v);

    let d_compactly_contained =
        phantom.d.iter().all(|t| mesh.triangles()[t].iter().all(|&v| !mesh.is_boundary_node(v)));

    let (s_covers_boundary, s_touches_gamma) = s_component(mesh, phantom, gamma);

    Ok(AssumptionReport {
        bounds,
        d_compactly_contained,
        case_a,
        case_b,
        isotropic_tau_plus_required,
        s_covers_boundary,
        s_touches_gamma,
        ucp: "assumed, not checked".into(),
        v_elements: v.count(),
        b_elements: b.count(),
    })
}

fn s_component(mesh: &Mesh, phantom: &Phantom, gamma: &GammaSpec) -> (bool, bool) {
    let n = mesh.n_triangles();
    let dbullet = outer_shape(mesh, &phantom.d);
    // elements just outside ∂D•
    let mut rim = Vec::new();
    for t in 0..n {
        if !dbullet.contains(t) && mesh.neighbors(t).iter().flatten().any(|&s| dbullet.contains(s)) {
            rim.push(t);
        }
    }
    if rim.is_empty() {
        return (false, false);
    }
    let outside = phantom.d.union(&phantom.m).complement();
    let mut comp = vec![usize::MAX; n];
    for (k, members) in element_components(mesh, &outside).iter().enumerate() {
        for &t in members {
            comp[t] = k;
        }
    }
    let first = comp[rim[0]];
    let covers = first != usize::MAX && rim.iter().all(|&t| comp[t] == first);
    let touches = covers && gamma.edge_indices().iter().any(|&e| comp[mesh.boundary_owner(e)] == first);
    (covers, touches)
}
