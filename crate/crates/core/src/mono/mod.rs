//! Semidefiniteness tests, candidate dictionaries and the reconstruction
//! `D• ≈ ⋂ {C : C passes}`.

mod candidates;

pub use candidates::{generate_candidates, Candidate, Dictionary};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientBounds, MatrixField, SKEW_TOL};
use crate::linalg::{hermitian_part, Mat2};
use crate::mesh::{admissible_test_inclusion, GammaSpec, Mesh, RegionMask};
use crate::ndmap::{extreme_operators, nonlinear_test_operators, LinearizedBase, NDOperator};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nonlinear,
    Linearized,
    Corollary,
    Extreme,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonlinear" => Ok(Method::Nonlinear),
            "linearized" => Ok(Method::Linearized),
            "corollary" => Ok(Method::Corollary),
            "extreme" => Ok(Method::Extreme),
            _ => Err(Error::Mono(format!("unknown method `{s}`"))),
        }
    }
}

/// Which side of the two-sided tests to evaluate. `UpperOnly` keeps the
/// inequalities with `Λ^R(A_D)` on the large side (enough when the
/// inclusion is a positive jump), `LowerOnly` the others.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneSided {
    #[default]
    Both,
    UpperOnly,
    LowerOnly,
}

impl OneSided {
    fn wants(self, upper: bool) -> bool {
        match self {
            OneSided::Both => true,
            OneSided::UpperOnly => upper,
            OneSided::LowerOnly => !upper,
        }
    }
}

/// Minimal generalized eigenvalue of a Hermitian form and whether it is
/// `≥ −tol`.
pub fn is_psd(h: &NDOperator, tol: f64) -> Result<(bool, f64)> {
    psd_at_scale(h, tol, 0.0)
}

/// As [`is_psd`], with the Hermitian defect measured against
/// `max(‖H‖_max, scale)`. A difference of nearly equal operators is zero up
/// to rounding, and its defect relative to itself is meaningless.
fn psd_at_scale(h: &NDOperator, tol: f64, scale: f64) -> Result<(bool, f64)> {
    if !(tol >= 0.0) {
        return Err(Error::Mono(format!("tolerance must be non-negative, got {tol}")));
    }
    let m = h.matrix();
    let abs_defect = (m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let reference = h.max_abs().max(scale);
    let defect = if reference > 0.0 { abs_defect / reference } else { 0.0 };
    if defect > 1e-8 {
        return Err(Error::Mono(format!("form is not Hermitian (relative defect {defect:.3e})")));
    }
    let min = h.generalized_eigenvalues()?.first().copied().unwrap_or(0.0);
    Ok((min >= -tol, min))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub candidate: usize,
    pub label: String,
    pub tol: f64,
    pub inequalities: Vec<InequalityCheck>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconResult {
    pub method: Method,
    pub one_sided: OneSided,
    pub tol: f64,
    pub passing: Vec<usize>,
    /// Element-wise AND of the passing masks; all of Ω if nothing passed.
    pub mask: RegionMask,
    pub empty_pass_set: bool,
    pub reports: Vec<TestReport>,
}

/// Known quantities shared by all candidate tests.
#[derive(Clone, Debug)]
pub struct TestContext<'a> {
    pub mesh: &'a Mesh,
    pub gamma: &'a GammaSpec,
    pub a0: &'a MatrixField,
    pub bounds: CoefficientBounds,
    /// Measured `Λ(A_D)`.
    pub data: &'a NDOperator,
    pub tol: f64,
    pub one_sided: OneSided,
}

impl<'a> TestContext<'a> {
    /// Uses the default tolerance `1e−9 · max |λ(Λ^R(A_D))|`.
    pub fn new(
        mesh: &'a Mesh,
        gamma: &'a GammaSpec,
        a0: &'a MatrixField,
        bounds: CoefficientBounds,
        data: &'a NDOperator,
    ) -> Result<Self> {
        Ok(Self { mesh, gamma, a0, bounds, data, tol: default_tolerance(data)?, one_sided: OneSided::Both })
    }
}

pub fn default_tolerance(data: &NDOperator) -> Result<f64> {
    let ev = data.re().generalized_eigenvalues()?;
    let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(1e-9 * scale)
}

/// Per-method state computed once: `Λ^R(A_D)`, `M` and the `A₀^R`
/// solutions for the linearized forms.
struct Prepared<'a> {
    ctx: &'a TestContext<'a>,
    method: Method,
    data_re: NDOperator,
    m: RegionMask,
    linear: Option<LinearBlocks>,
}

/// Energy blocks of the `A₀^R` solutions used by the linearized tests.
struct LinearBlocks {
    base: LinearizedBase,
    /// `Λ^R(A_D) − Λ(A₀^R)`
    jump: NDOperator,
    identity: MatrixField,
    q_on_m: DMatrix<C64>,
}

/// Energies over a test inclusion, accumulated along nested chains.
#[derive(Clone)]
struct CapEnergies {
    mask: RegionMask,
    e_id: DMatrix<C64>,
    e_re: DMatrix<C64>,
    e_q: DMatrix<C64>,
}

impl<'a> Prepared<'a> {
    fn new(ctx: &'a TestContext<'a>, method: Method) -> Result<Self> {
        ctx.bounds.validate()?;
        if ctx.a0.len() != ctx.mesh.n_triangles() {
            return Err(Error::Dimension { expected: ctx.mesh.n_triangles(), got: ctx.a0.len() });
        }
        let self_adjoint = ctx.a0.max_skew_norm() <= SKEW_TOL;
        match method {
            Method::Corollary if !self_adjoint => {
                return Err(Error::Mono("self-adjoint background required for the corollary method".into()))
            }
            Method::Extreme if !self_adjoint => {
                return Err(Error::Mono("self-adjoint background required for extreme test operators".into()))
            }
            _ => {}
        }
        let data_re = ctx.data.re();
        let m = ctx.a0.skew_support();
        let linear = if matches!(method, Method::Linearized | Method::Corollary) {
            let base = LinearizedBase::new(ctx.mesh, ctx.a0, ctx.gamma)?;
            if base.base().dim() != data_re.dim() {
                return Err(Error::Dimension { expected: base.base().dim(), got: data_re.dim() });
            }
            let jump = data_re.sub(base.base());
            let q_on_m = base.nd.solutions.energy_form(ctx.mesh, &base.q, &m)?;
            let identity = MatrixField::constant(ctx.mesh.n_triangles(), Mat2::IDENTITY);
            Some(LinearBlocks { base, jump, identity, q_on_m })
        } else {
            None
        };
        Ok(Self { ctx, method, data_re, m, linear })
    }

    fn check_admissible(&self, c: &RegionMask) -> Result<()> {
        let rep = admissible_test_inclusion(self.ctx.mesh, c, &self.m);
        if !rep.admissible {
            let why: Vec<String> = rep.reasons.iter().map(|r| r.to_string()).collect();
            return Err(Error::Mono(format!("inadmissible test inclusion: {}", why.join(", "))));
        }
        Ok(())
    }

    fn energies(&self, c: &RegionMask, previous: Option<&CapEnergies>) -> Result<CapEnergies> {
        let lin = self.linear.as_ref().expect("linear blocks prepared");
        let sols = &lin.base.nd.solutions;
        let mesh = self.ctx.mesh;
        let (region, mut acc) = match previous {
            Some(p) if p.mask.is_subset_of(c) => (c.difference(&p.mask), p.clone()),
            _ => {
                let d = lin.base.base().dim();
                let z = DMatrix::zeros(d, d);
                (c.clone(), CapEnergies { mask: c.clone(), e_id: z.clone(), e_re: z.clone(), e_q: z })
            }
        };
        acc.mask = c.clone();
        if region.count() > 0 {
            acc.e_id += sols.energy_form(mesh, &lin.identity, &region)?;
            acc.e_re += sols.energy_form(mesh, &lin.base.a0_re, &region)?;
            let on_m = region.intersection(&self.m);
            if on_m.count() > 0 {
                acc.e_q += sols.energy_form(mesh, &lin.base.q, &on_m)?;
            }
        }
        Ok(acc)
    }

    fn check(&self, name: &str, h: &NDOperator, out: &mut Vec<InequalityCheck>) -> Result<()> {
        let (pass, min) = psd_at_scale(h, self.ctx.tol, self.data_re.max_abs())?;
        out.push(InequalityCheck { name: name.to_string(), min_eigenvalue: min, pass });
        Ok(())
    }

    fn nonlinear_checks(&self, c: &RegionMask, out: &mut Vec<InequalityCheck>, prefix: &str) -> Result<()> {
        let ctx = self.ctx;
        let ops = nonlinear_test_operators(ctx.mesh, ctx.a0, c, &ctx.bounds, ctx.gamma)?;
        if ctx.one_sided.wants(true) {
            let h = self.data_re.sub(&ops.plus).sub(&ops.d_plus_outside);
            self.check(&format!("{prefix}upper"), &h, out)?;
        }
        if ctx.one_sided.wants(false) {
            self.check(&format!("{prefix}lower"), &ops.minus.sub(&self.data_re), out)?;
        }
        Ok(())
    }

    fn linearized_checks(&self, e: &CapEnergies, out: &mut Vec<InequalityCheck>, prefix: &str) -> Result<()> {
        let lin = self.linear.as_ref().expect("linear blocks prepared");
        let b = &self.ctx.bounds;
        let (cp, cm) = (C64::new(b.plus_level(), 0.0), C64::new(b.minus_linear_level(), 0.0));
        let gram = lin.jump.gram().clone();
        let form = |m: DMatrix<C64>| NDOperator::new(hermitian_part(&m), gram.clone());
        // DΛ_C^+ = −(c₊E_I − E_R), DΛ_C^- = −(E_R − c₋E_I), DΛ_{M∖C} = −(E_Q(M) − E_Q(M∩C))
        if self.ctx.one_sided.wants(true) {
            let d_plus = &e.e_re - &e.e_id * cp;
            let d_out = &e.e_q - &lin.q_on_m;
            let h = lin.jump.sub(&form(d_plus)?).sub(&form(d_out)?);
            self.check(&format!("{prefix}upper"), &h, out)?;
        }
        if self.ctx.one_sided.wants(false) {
            let d_minus = &e.e_id * cm - &e.e_re;
            let h = form(d_minus)?.sub(&lin.jump);
            self.check(&format!("{prefix}lower"), &h, out)?;
        }
        Ok(())
    }

    fn extreme_checks(&self, c: &RegionMask, out: &mut Vec<InequalityCheck>) -> Result<()> {
        let ctx = self.ctx;
        let ops = extreme_operators(ctx.mesh, ctx.a0, c, ctx.gamma)?;
        if ctx.one_sided.wants(true) {
            self.check("upper", &self.data_re.sub(&ops.conducting), out)?;
        }
        if ctx.one_sided.wants(false) {
            self.check("lower", &ops.insulating.sub(&self.data_re), out)?;
        }
        Ok(())
    }

    fn evaluate(&self, cand: &Candidate, previous: Option<&CapEnergies>) -> Result<(TestReport, Option<CapEnergies>)> {
        self.check_admissible(&cand.mask)?;
        let mut checks = Vec::new();
        let mut energies = None;
        match self.method {
            Method::Nonlinear => self.nonlinear_checks(&cand.mask, &mut checks, "")?,
            Method::Linearized => {
                let e = self.energies(&cand.mask, previous)?;
                self.linearized_checks(&e, &mut checks, "")?;
                energies = Some(e);
            }
            Method::Corollary => {
                self.nonlinear_checks(&cand.mask, &mut checks, "nonlinear_")?;
                let e = self.energies(&cand.mask, previous)?;
                self.linearized_checks(&e, &mut checks, "linearized_")?;
                energies = Some(e);
            }
            Method::Extreme => self.extreme_checks(&cand.mask, &mut checks)?,
        }
        let pass = checks.iter().all(|c| c.pass);
        let report = TestReport {
            candidate: cand.id,
            label: cand.label.clone(),
            tol: self.ctx.tol,
            inequalities: checks,
            pass,
        };
        Ok((report, energies))
    }
}

/// Evaluates the inequalities of `method` for one test inclusion.
pub fn run_inclusion_test(method: Method, ctx: &TestContext<'_>, c: &RegionMask) -> Result<TestReport> {
    let prepared = Prepared::new(ctx, method)?;
    let cand = Candidate { id: 0, label: "C".into(), mask: c.clone(), chain: None };
    Ok(prepared.evaluate(&cand, None)?.0)
}

fn test_all(method: Method, ctx: &TestContext<'_>, candidates: &[Candidate]) -> Result<Vec<TestReport>> {
    if candidates.is_empty() {
        return Err(Error::Mono("no candidates to test".into()));
    }
    let prepared = Prepared::new(ctx, method)?;
    let mut groups: Vec<Vec<&Candidate>> = Vec::new();
    let incremental = matches!(method, Method::Linearized | Method::Corollary);
    for cand in candidates {
        match (incremental, cand.chain) {
            (true, Some((chain, _))) => match groups.iter_mut().find(|g| g[0].chain.map(|c| c.0) == Some(chain)) {
                Some(g) => g.push(cand),
                None => groups.push(vec![cand]),
            },
            _ => groups.push(vec![cand]),
        }
    }
    for g in &mut groups {
        g.sort_by_key(|c| (c.chain.map(|x| x.1), c.id));
    }
    let results: Vec<Vec<TestReport>> = groups
        .par_iter()
        .map(|group| {
            let mut prev: Option<CapEnergies> = None;
            let mut out = Vec::with_capacity(group.len());
            for cand in group {
                let (rep, e) = prepared.evaluate(cand, prev.as_ref())?;
                if e.is_some() {
                    prev = e;
                }
                out.push(rep);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut reports: Vec<TestReport> = results.into_iter().flatten().collect();
    reports.sort_by_key(|r| r.candidate);
    Ok(reports)
}

/// Tests every candidate and intersects the passing ones. Candidates that
/// share a chain id are evaluated in order, reusing the energies of the
/// previous (smaller) cap.
pub fn reconstruct(method: Method, ctx: &TestContext<'_>, candidates: &[Candidate]) -> Result<ReconResult> {
    let reports = test_all(method, ctx, candidates)?;
    let n = ctx.mesh.n_triangles();
    let mut mask = RegionMask::full(n);
    let mut passing = Vec::new();
    for r in &reports {
        if r.pass {
            passing.push(r.candidate);
            let cand = candidates.iter().find(|c| c.id == r.candidate).expect("report of a known candidate");
            mask = mask.intersection(&cand.mask);
        }
    }
    let empty_pass_set = passing.is_empty();
    if empty_pass_set {
        log::warn!("no candidate passed; returning the whole domain");
    }
    Ok(ReconResult { method, one_sided: ctx.one_sided, tol: ctx.tol, passing, mask, empty_pass_set, reports })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Largest violation `max(−λ_min, 0)` seen on the background data.
    pub noise: f64,
    pub factor: f64,
    pub tol: f64,
}

/// Tolerance from a run on data known to contain no inclusion: every test
/// must pass there, so each negative eigenvalue is discretization noise.
/// `ctx.data` must be the background measurement; `ctx.tol` is ignored.
pub fn calibrate_tolerance(
    method: Method,
    ctx: &TestContext<'_>,
    candidates: &[Candidate],
    factor: f64,
) -> Result<Calibration> {
    if !(factor >= 1.0) {
        return Err(Error::Mono(format!("calibration factor must be at least 1, got {factor}")));
    }
    let mut exact = ctx.clone();
    exact.tol = 0.0;
    let noise = test_all(method, &exact, candidates)?
        .iter()
        .flat_map(|r| &r.inequalities)
        .fold(0.0f64, |m, q| m.max(-q.min_eigenvalue));
    let floor = f64::EPSILON * default_tolerance(ctx.data)? / 1e-9;
    let tol = (factor * noise).max(floor);
    log::info!("calibrated tolerance {tol:e} from background noise {noise:e}");
    Ok(Calibration { noise, factor, tol })
}
