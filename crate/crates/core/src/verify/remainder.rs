//! The chain bounding `Im ∫ A_j^I ∇u₁·conj ∇u₂` by `u₂` alone.
//!
//! With `A_t = A₂ + t(A₁ − A₂)`, `u_t` its solution and `w_t` the solution of
//! `∫ A_t ∇w_t·conj∇v = ∫ (A₂ − A₁) ∇u_t·conj∇v`, one has
//! `u₁ = u₂ + ∫₀¹ w_t dt` and each factor of the final estimate is checked
//! separately.
//!
//! Discrete constants: `C₁ = sqrt(1 + 1/λ₁)` with `λ₁` the smallest
//! eigenvalue of `(K, M)` on `{∫_Γ v = 0}`, which bounds `‖v‖_{H¹}/‖∇v‖`;
//! `C₂ = 1`, since the Neumann functional is measured in the dual of `H¹`
//! and `⟨g, v⟩ = ∫ A₂∇u₂·conj∇v`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{min_re_eigenvalue, MatrixField};
use crate::forward::skyline::{CsrMatrix, SkylineLu};
use crate::forward::{assemble_and_factor, energy_integral, gradient_norm, ordering, BoundaryCurrent, FieldSolution};
use crate::linalg::{gauss_legendre_01, Mat2};
use crate::mesh::{GammaSpec, Mesh, RegionMask};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorSample {
    pub t: f64,
    pub weight: f64,
    /// `‖∇w_t‖_{L²(Ω)}`
    pub grad_w: f64,
    /// `‖∇w_t‖_{L²(W)}`
    pub grad_w_in_w: f64,
    /// `‖∇u_t‖_{L²(Ω)}`
    pub grad_u: f64,
    /// `‖∇u_t‖_{L²(W)}`
    pub grad_u_in_w: f64,
    /// `α⁻¹ ‖A₁ − A₂‖_{ℋ(W)} ‖∇u_t‖_{L²(W)}`
    pub w_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConstant {
    pub lambda1: f64,
    pub c1: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub j: usize,
    pub n_quad: usize,
    /// `Im ∫ A_j^I ∇u₁·conj ∇u₂`
    pub cross_term: f64,
    /// `Im ∫ A_j^I ∇u₂·conj ∇u₂`, zero up to rounding.
    pub self_term: f64,
    pub alpha: f64,
    pub w_elements: usize,
    /// `‖A_j^I‖_{ℋ(M)}`, `M = supp A_j^I`
    pub skew_norm: f64,
    /// `‖A_j^I‖_{ℋ(W∩M)}`
    pub skew_norm_in_w: f64,
    /// `‖A₁ − A₂‖_{ℋ(W)}`
    pub difference_norm: f64,
    /// `‖A₂‖_{ℋ(Ω)}`
    pub a2_norm: f64,
    pub grad_u2: f64,
    pub grad_u2_in_m: f64,
    pub grad_u2_in_wm: f64,
    pub samples: Vec<TaylorSample>,
    /// `Σ ω_k ‖∇w_{t_k}‖_{L²(Ω)}`
    pub integral_grad_w: f64,
    /// `Σ ω_k ‖∇u_{t_k}‖_{L²(W)}`
    pub integral_grad_u_in_w: f64,
    /// `‖∇(u₁ − u₂ − Σ ω_k w_{t_k})‖ / ‖∇u₂‖`
    pub taylor_error: f64,
    /// Dual `H¹` norm of the Neumann data.
    pub neumann_norm: f64,
    /// `‖A₂ ∇u₂‖_{L²(Ω)}`
    pub flux_norm: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda1: f64,
    /// `C/α² ‖A_j^I‖_M ‖A₁−A₂‖_W ‖A₂‖_Ω ‖∇u₂‖_Ω ‖∇u₂‖_M`
    pub final_bound: f64,
    /// Same with `W ∩ M` in place of `M`; valid only when every `∇w_t`
    /// vanishes off `W`, which is not the case in general.
    pub final_bound_localized: f64,
    /// `final_bound / |cross_term|`, absent when the cross term is zero.
    pub slack: Option<f64>,
    pub steps: Vec<ChainStep>,
    pub pass: bool,
}

fn mass_apply(mesh: &Mesh, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t) / 12.0;
        let s: C64 = tri.iter().map(|&p| v[p]).sum();
        for &p in tri {
            out[p] += (s + v[p]) * a;
        }
    }
    out
}

fn mass_norm2(mesh: &Mesh, v: &[C64]) -> f64 {
    mass_apply(mesh, v).iter().zip(v).map(|(m, x)| (x.conj() * m).re).sum()
}

/// `C₁` from inverse iteration with the gauged Laplace solver.
pub fn trace_constant(mesh: &Mesh, gamma: &GammaSpec) -> Result<TraceConstant> {
    let id = MatrixField::constant(mesh.n_triangles(), Mat2::IDENTITY);
    let sys = assemble_and_factor(mesh, &id, gamma)?;
    let full = RegionMask::full(mesh.n_triangles());
    let mut v: Vec<C64> = mesh.nodes().iter().map(|p| C64::new(p[0] + 0.7 * p[1] + 0.2 * p[0] * p[1], 0.0)).collect();
    let mut lambda = f64::INFINITY;
    for it in 1..=500 {
        let u = sys.solve_load(&mass_apply(mesh, &v))?;
        let m2 = mass_norm2(mesh, u.values());
        let next = gradient_norm(mesh, &u, &full).powi(2) / m2;
        let scale = 1.0 / m2.sqrt();
        v = u.values().iter().map(|x| x * scale).collect();
        if (next - lambda).abs() <= 1e-12 * next {
            return Ok(TraceConstant { lambda1: next, c1: (1.0 + 1.0 / next).sqrt(), iterations: it });
        }
        lambda = next;
    }
    Err(Error::Verify("inverse iteration for the Poincaré constant did not converge".into()))
}

/// `sqrt(bᴴ (K + M)⁻¹ b)` for a nodal load `b`.
fn dual_h1_norm(mesh: &Mesh, b: &[C64]) -> Result<f64> {
    let n = mesh.n_nodes();
    let mut adj = vec![Vec::new(); n];
    for tri in mesh.triangles() {
        for &p in tri {
            for &q in tri {
                if p != q {
                    adj[p].push(q);
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let perm = ordering::reverse_cuthill_mckee(&adj);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let pairs = mesh
        .triangles()
        .iter()
        .flat_map(|tri| tri.iter().flat_map(move |&p| tri.iter().map(move |&q| (p, q))))
        .map(|(p, q)| (inv[p], inv[q]))
        .collect();
    let mut a = CsrMatrix::from_pattern(n, pairs);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(t);
        let area = mesh.area(t);
        for i in 0..3 {
            for j in 0..3 {
                let k = (g[i][0] * g[j][0] + g[i][1] * g[j][1]) * area;
                let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                a.add(inv[tri[i]], inv[tri[j]], C64::new(k + m, 0.0));
            }
        }
    }
    let lu = SkylineLu::factor(&a)?;
    let mut x: Vec<C64> = perm.iter().map(|&old| b[old]).collect();
    lu.solve_in_place(&mut x);
    let q: C64 = perm.iter().enumerate().map(|(new, &old)| b[old].conj() * x[new]).sum();
    Ok(q.re.max(0.0).sqrt())
}

/// Nodal load `b_i = ∫ X ∇u·∇φ_i`.
fn field_load(mesh: &Mesh, x: &MatrixField, u: &FieldSolution) -> Vec<C64> {
    let mut b = vec![C64::new(0.0, 0.0); mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let xg = x.value(t).apply(u.gradient(mesh, t));
        let g = mesh.hat_gradients(t);
        for i in 0..3 {
            b[tri[i]] += (xg[0] * g[i][0] + xg[1] * g[i][1]) * mesh.area(t);
        }
    }
    b
}

fn flux_norm(mesh: &Mesh, a: &MatrixField, u: &FieldSolution) -> f64 {
    (0..mesh.n_triangles())
        .map(|t| {
            let v = a.value(t).apply(u.gradient(mesh, t));
            (v[0].norm_sqr() + v[1].norm_sqr()) * mesh.area(t)
        })
        .sum::<f64>()
        .sqrt()
}

fn step(name: &str, lhs: f64, rhs: f64, abs_tol: f64) -> ChainStep {
    ChainStep { name: name.into(), lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) + abs_tol }
}

/// Runs the chain for `j ∈ {1, 2}` with an `n_quad`-point Gauss rule.
/// `w` defaults to `supp(A₁ − A₂)` grown by one element ring.
pub fn remainder_chain_check(
    mesh: &Mesh,
    gamma: &GammaSpec,
    a1: &MatrixField,
    a2: &MatrixField,
    j: usize,
    f: &BoundaryCurrent,
    n_quad: usize,
    w: Option<&RegionMask>,
) -> Result<RemainderReport> {
    if j != 1 && j != 2 {
        return Err(Error::Verify(format!("j must be 1 or 2, got {j}")));
    }
    if n_quad < 2 {
        return Err(Error::Verify(format!("need at least 2 quadrature points, got {n_quad}")));
    }
    let n = mesh.n_triangles();
    if a1.len() != n || a2.len() != n {
        return Err(Error::Dimension { expected: n, got: a1.len().min(a2.len()) });
    }
    let support = a1.support_of_difference(a2);
    let w = match w {
        Some(w) => w.clone(),
        None => support.dilate(mesh, 1),
    };
    if !support.is_subset_of(&w) {
        return Err(Error::Verify("W must contain the support of A₁ − A₂".into()));
    }
    let full = RegionMask::full(n);
    let aj = if j == 1 { a1 } else { a2 };
    let skew = aj.im_field();
    let m = aj.skew_support();
    let wm = w.intersection(&m);
    let diff = MatrixField::from_fn(n, |t| a2.value(t) - a1.value(t));
    let alpha = min_re_eigenvalue(a1).min(min_re_eigenvalue(a2));

    let sys1 = assemble_and_factor(mesh, a1, gamma)?;
    let sys2 = assemble_and_factor(mesh, a2, gamma)?;
    let u1 = sys1.solve_neumann(mesh, gamma, f)?;
    let u2 = sys2.solve_neumann(mesh, gamma, f)?;
    let cross_term = energy_integral(mesh, &u1, &u2, &skew, &full)?.im;
    let self_term = energy_integral(mesh, &u2, &u2, &skew, &full)?.im;

    let difference_norm = diff.sup_norm(&w);
    let (nodes, weights) = gauss_legendre_01(n_quad);
    let solved: Vec<(TaylorSample, FieldSolution)> = nodes
        .par_iter()
        .zip(&weights)
        .map(|(&t, &weight)| {
            let at = MatrixField::from_fn(n, |k| a2.value(k) + (a1.value(k) - a2.value(k)).scale_re(t));
            let sys = assemble_and_factor(mesh, &at, gamma)?;
            let ut = sys.solve_neumann(mesh, gamma, f)?;
            let wt = sys.solve_load(&field_load(mesh, &diff, &ut))?;
            let grad_u_in_w = gradient_norm(mesh, &ut, &w);
            let sample = TaylorSample {
                t,
                weight,
                grad_w: gradient_norm(mesh, &wt, &full),
                grad_w_in_w: gradient_norm(mesh, &wt, &w),
                grad_u: gradient_norm(mesh, &ut, &full),
                grad_u_in_w,
                w_bound: difference_norm * grad_u_in_w / alpha,
            };
            Ok((sample, wt))
        })
        .collect::<Result<_>>()?;

    let mut residual = u1.sub(&u2);
    for ((_, wt), &weight) in solved.iter().zip(&weights) {
        residual.axpy(C64::new(-weight, 0.0), wt);
    }
    let grad_u2 = gradient_norm(mesh, &u2, &full);
    let grad_residual = gradient_norm(mesh, &residual, &full);
    let samples: Vec<TaylorSample> = solved.into_iter().map(|(s, _)| s).collect();
    let integral_grad_w: f64 = samples.iter().map(|s| s.weight * s.grad_w).sum();
    let integral_grad_u_in_w: f64 = samples.iter().map(|s| s.weight * s.grad_u_in_w).sum();

    let tc = trace_constant(mesh, gamma)?;
    let c2 = 1.0;
    let neumann_norm = dual_h1_norm(mesh, &f.load(mesh, gamma))?;
    let flux = flux_norm(mesh, a2, &u2);
    let skew_norm = aj.sup_norm_im(&m);
    let skew_norm_in_w = aj.sup_norm_im(&wm);
    let a2_norm = a2.sup_norm(&full);
    let grad_u2_in_m = gradient_norm(mesh, &u2, &m);
    let grad_u2_in_wm = gradient_norm(mesh, &u2, &wm);
    let c = tc.c1 * c2;
    let common = c / (alpha * alpha) * difference_norm * a2_norm * grad_u2;
    let final_bound = common * skew_norm * grad_u2_in_m;
    let final_bound_localized = common * skew_norm_in_w * grad_u2_in_wm;

    let abs_tol = 1e-12 * a2_norm.max(1.0) * grad_u2 * grad_u2;
    let max_grad_u = samples.iter().map(|s| s.grad_u).fold(grad_u2, f64::max);
    let worst_w = samples.iter().map(|s| s.grad_w - s.w_bound * (1.0 + 1e-9)).fold(f64::NEG_INFINITY, f64::max);
    let mut steps = vec![
        step(
            "taylor_remainder",
            cross_term.abs(),
            skew_norm * (integral_grad_w + grad_residual) * grad_u2_in_m,
            abs_tol,
        ),
        step("derivative_energy", integral_grad_w, integral_grad_u_in_w * difference_norm / alpha, abs_tol),
        step("lax_milgram", max_grad_u, tc.c1 * neumann_norm / alpha, abs_tol),
        step("normal_trace", neumann_norm, c2 * flux, abs_tol),
        step("flux", flux, a2_norm * grad_u2, abs_tol),
        step("final", cross_term.abs(), final_bound, abs_tol),
    ];
    if worst_w > abs_tol {
        steps[1].holds = false;
    }
    let pass = steps.iter().all(|s| s.holds) && self_term.abs() <= abs_tol.max(1e-12 * grad_u2 * grad_u2);
    let slack = (cross_term != 0.0).then(|| final_bound / cross_term.abs());
    Ok(RemainderReport {
        j,
        n_quad,
        cross_term,
        self_term,
        alpha,
        w_elements: w.count(),
        skew_norm,
        skew_norm_in_w,
        difference_norm,
        a2_norm,
        grad_u2,
        grad_u2_in_m,
        grad_u2_in_wm,
        samples,
        integral_grad_w,
        integral_grad_u_in_w,
        taylor_error: if grad_u2 > 0.0 { grad_residual / grad_u2 } else { grad_residual },
        neumann_norm,
        flux_norm: flux,
        c1: tc.c1,
        c2,
        lambda1: tc.lambda1,
        final_bound,
        final_bound_localized,
        slack,
        steps,
        pass,
    })
}
