use anyhow::anyhow;
use eit_mono::coeff::{check_assumptions, default_collar, joint_bounds, MatrixField};
use eit_mono::forward::{assemble_and_factor, energy_integral, BoundaryCurrent};
use eit_mono::linalg::Mat2;
use eit_mono::locpot::localized_current;
use eit_mono::mesh::{admissible_test_inclusion, mask_to_csv, mask_to_pgm, MeshFile, RegionMask};
use eit_mono::mono::{
    calibrate_tolerance, default_tolerance, generate_candidates, reconstruct, run_inclusion_test, Calibration,
    Candidate, Dictionary, Method, TestContext, TestReport,
};
use eit_mono::ndmap::{nd_for_coefficient, NDOperator};
use eit_mono::verify::{
    all_mono_bounds, extreme_limit_check, frechet_fd_check, matrix_bounds_check, random_current, random_pair,
    remainder_chain_check, MixedIdentityReport, MonoBoundsReport, RemainderReport,
};
use eit_mono::C64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_mask, CurrentSpec, DictionarySpec, RunConfig, Setup, ToleranceSpec};
use crate::output::{fmt, RunDir};
use crate::{Classify, Failure, Io};

type Res = Result<(), Failure>;

#[derive(Serialize)]
struct FieldFile<'a> {
    n_elements: usize,
    values: &'a [Mat2],
}

fn write_field(out: &mut RunDir, name: &str, a: &MatrixField) -> Res {
    out.write_json(name, &FieldFile { n_elements: a.len(), values: a.values() }).io()
}

fn write_mask(out: &mut RunDir, cfg: &RunConfig, setup: &Setup, stem: &str, mask: &RegionMask) -> Res {
    out.write(&format!("{stem}.csv"), &mask_to_csv(mask)).io()?;
    out.write(&format!("{stem}.pgm"), &mask_to_pgm(&setup.mesh, mask, cfg.pgm_size, cfg.pgm_size)).io()
}

fn current_csv(c: &BoundaryCurrent, setup: &Setup) -> String {
    let mut s = String::from("edge,re,im\n");
    for (e, v) in setup.gamma.edge_indices().iter().zip(c.values()) {
        s.push_str(&format!("{e},{},{}\n", fmt(v.re), fmt(v.im)));
    }
    s
}

pub fn mesh(_cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary {
        n_nodes: usize,
        n_triangles: usize,
        n_boundary_edges: usize,
        h_max: f64,
        area: f64,
        gamma_edges: usize,
        gamma_length: f64,
    }
    let mesh = &setup.mesh;
    // geometry is written unrounded so that reloading gives the same mesh
    let text = serde_json::to_string(&MeshFile::from(mesh)).map_err(|e| Failure::Solver(e.into()))?;
    out.write("mesh.json", &(text + "\n")).io()?;
    let mut g = String::from("edge,length\n");
    for &e in setup.gamma.edge_indices() {
        g.push_str(&format!("{e},{}\n", fmt(mesh.edge_length(e))));
    }
    out.write("gamma.csv", &g).io()?;
    out.write_json(
        "mesh_summary.json",
        &Summary {
            n_nodes: mesh.n_nodes(),
            n_triangles: mesh.n_triangles(),
            n_boundary_edges: mesh.boundary_edges().len(),
            h_max: setup.h,
            area: mesh.areas().iter().sum(),
            gamma_edges: setup.gamma.len(),
            gamma_length: setup.gamma.arc_length(),
        },
    )
    .io()
}

pub fn phantom(cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary {
        bounds_used: eit_mono::coeff::CoefficientBounds,
        bounds_estimated: eit_mono::coeff::CoefficientBounds,
        bounds_overridden: bool,
        matrix_bounds: eit_mono::verify::MatrixBoundsReport,
        d_elements: usize,
        d_area: f64,
        m_elements: usize,
        a0_self_adjoint: bool,
        assumptions: Option<eit_mono::coeff::AssumptionReport>,
    }
    let (mesh, ph) = (&setup.mesh, &setup.phantom);
    write_field(out, "a0.json", &ph.a0)?;
    write_field(out, "ad.json", &ph.ad)?;
    write_mask(out, cfg, setup, "d", &ph.d)?;
    write_mask(out, cfg, setup, "m", &ph.m)?;
    let assumptions = if ph.d.is_empty() {
        None
    } else {
        let v = default_collar(mesh, ph, cfg.collar_layers);
        Some(check_assumptions(&setup.spec, ph, mesh, &setup.gamma, &v, &v).core()?)
    };
    let summary = Summary {
        bounds_used: setup.bounds,
        bounds_estimated: joint_bounds(&ph.a0, &ph.ad).core()?,
        bounds_overridden: cfg.bounds.is_some(),
        matrix_bounds: matrix_bounds_check(&ph.a0, &ph.ad, &setup.bounds).core()?,
        d_elements: ph.d.count(),
        d_area: ph.d.area(mesh),
        m_elements: ph.m.count(),
        a0_self_adjoint: ph.a0.is_self_adjoint(eit_mono::coeff::SKEW_TOL),
        assumptions,
    };
    out.write_json("phantom.json", &summary).io()
}

fn center(setup: &Setup) -> [f64; 2] {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in setup.mesh.nodes() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]
}

fn build_current(cfg: &RunConfig, setup: &Setup, k: usize, spec: &CurrentSpec) -> Result<(String, BoundaryCurrent), Failure> {
    let c = center(setup);
    let (mesh, gamma) = (&setup.mesh, &setup.gamma);
    let angular = |n: u32, cos: bool| {
        BoundaryCurrent::from_fn(mesh, gamma, |p| {
            let th = n as f64 * (p[1] - c[1]).atan2(p[0] - c[0]);
            C64::new(if cos { th.cos() } else { th.sin() }, 0.0)
        })
        .mean_free()
    };
    let f = match *spec {
        CurrentSpec::Cos(0) | CurrentSpec::Sin(0) => {
            return Err(Failure::Validation(anyhow!("config: current {k} has mode 0")));
        }
        CurrentSpec::Cos(n) => (format!("cos{n}"), angular(n, true)),
        CurrentSpec::Sin(n) => (format!("sin{n}"), angular(n, false)),
        CurrentSpec::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
            (format!("random{k}"), random_current(mesh, gamma, &mut rng))
        }
    };
    if !(f.1.l2_norm() > 0.0) {
        return Err(Failure::Validation(anyhow!("config: current {k} ({}) vanishes on Γ", f.0)));
    }
    Ok(f)
}

pub fn forward(cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Entry {
        index: usize,
        label: String,
        /// `∫_Γ f ū`
        pairing: [f64; 2],
        energy: [f64; 2],
        relative_residual: f64,
        current_l2: f64,
    }
    if cfg.currents.is_empty() {
        return Err(Failure::Validation(anyhow!("config: no currents given")));
    }
    let (mesh, gamma) = (&setup.mesh, &setup.gamma);
    let currents = cfg
        .currents
        .iter()
        .enumerate()
        .map(|(k, s)| build_current(cfg, setup, k, s))
        .collect::<Result<Vec<_>, _>>()?;
    let system = assemble_and_factor(mesh, &setup.phantom.ad, gamma).core()?;
    let loads: Vec<Vec<C64>> = currents.iter().map(|(_, f)| f.load(mesh, gamma)).collect();
    let sols = system.solve_loads(&loads).core()?;
    let all = RegionMask::full(mesh.n_triangles());
    let mut entries = Vec::new();
    for (k, ((label, f), u)) in currents.iter().zip(&sols).enumerate() {
        out.write(&format!("current_{k}.csv"), &current_csv(f, setup)).io()?;
        out.write(&format!("u_{k}.csv"), &u.to_csv()).io()?;
        let p = u.pairing(mesh, gamma, f);
        let e = energy_integral(mesh, u, u, &setup.phantom.ad, &all).core()?;
        entries.push(Entry {
            index: k,
            label: label.clone(),
            pairing: [p.re, p.im],
            energy: [e.re, e.im],
            relative_residual: system.relative_residual(u, &loads[k]),
            current_l2: f.l2_norm(),
        });
    }
    out.write_json("forward.json", &entries).io()
}

/// `mode,value` rows of the generalized spectrum of `Λ^R`, largest first.
fn spectrum(op: &NDOperator) -> Result<Vec<f64>, Failure> {
    let mut ev = op.re().generalized_eigenvalues().core()?;
    ev.reverse();
    Ok(ev)
}

pub fn ndmap(_cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary {
        dimension: usize,
        hermitian_defect_data: f64,
        data_max_abs: f64,
        background_max_abs: f64,
        difference_norm: f64,
        leading_data: Vec<f64>,
        leading_background: Vec<f64>,
    }
    let (mesh, gamma, ph) = (&setup.mesh, &setup.gamma, &setup.phantom);
    let data = nd_for_coefficient(mesh, gamma, &ph.ad).core()?.operator;
    let background = nd_for_coefficient(mesh, gamma, &ph.a0).core()?.operator;
    out.write("nd_data.csv", &data.to_csv()).io()?;
    out.write("nd_background.csv", &background.to_csv()).io()?;
    out.write("nd_gram.csv", &data.gram_to_csv()).io()?;
    let (sd, sb) = (spectrum(&data)?, spectrum(&background)?);
    let mut csv = String::from("mode,data,background\n");
    for (k, (a, b)) in sd.iter().zip(&sb).enumerate() {
        csv.push_str(&format!("{},{},{}\n", k + 1, fmt(*a), fmt(*b)));
    }
    out.write("spectrum.csv", &csv).io()?;
    let lead = |v: &[f64]| v.iter().take(8).copied().collect();
    out.write_json(
        "ndmap.json",
        &Summary {
            dimension: data.dim(),
            hermitian_defect_data: data.re().hermitian_defect(),
            data_max_abs: data.max_abs(),
            background_max_abs: background.max_abs(),
            difference_norm: data.sub(&background).operator_norm().core()?,
            leading_data: lead(&sd),
            leading_background: lead(&sb),
        },
    )
    .io()
}

/// Data, background data (only when calibrating) and the tolerance.
struct Measured {
    data: NDOperator,
    tol: f64,
    calibration: Option<Calibration>,
}

fn measure(cfg: &RunConfig, setup: &Setup, method: Method, candidates: &[Candidate]) -> Result<Measured, Failure> {
    let (mesh, gamma, ph) = (&setup.mesh, &setup.gamma, &setup.phantom);
    let data = nd_for_coefficient(mesh, gamma, &ph.ad).core()?.operator;
    let (tol, calibration) = match cfg.tolerance {
        ToleranceSpec::Default => (default_tolerance(&data).core()?, None),
        ToleranceSpec::Fixed(t) => (t, None),
        ToleranceSpec::Calibrated { factor } => {
            let bg = nd_for_coefficient(mesh, gamma, &ph.a0).core()?.operator;
            let mut ctx = TestContext::new(mesh, gamma, &ph.a0, setup.bounds, &bg).core()?;
            ctx.one_sided = cfg.one_sided;
            let cal = calibrate_tolerance(method, &ctx, candidates, factor).core()?;
            (cal.tol, Some(cal))
        }
    };
    Ok(Measured { data, tol, calibration })
}

pub fn test(cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary {
        method: Method,
        tol: f64,
        calibration: Option<Calibration>,
        admissibility: eit_mono::mesh::AdmissibilityReport,
        c_elements: usize,
        d_subset_of_c: bool,
        report: TestReport,
    }
    setup.validate_method(cfg.method).map_err(Failure::Validation)?;
    let src = cfg
        .test_inclusion
        .as_ref()
        .ok_or_else(|| Failure::Validation(anyhow!("config: `test` needs `test_inclusion`")))?;
    let mesh = &setup.mesh;
    let c = load_mask(src, mesh).map_err(Failure::Validation)?;
    let admissibility = admissible_test_inclusion(mesh, &c, &setup.phantom.m);
    let cand = [Candidate { id: 0, label: "c".into(), mask: c.clone(), chain: None }];
    let m = measure(cfg, setup, cfg.method, &cand)?;
    let mut ctx = TestContext::new(mesh, &setup.gamma, &setup.phantom.a0, setup.bounds, &m.data).core()?;
    ctx.tol = m.tol;
    ctx.one_sided = cfg.one_sided;
    let report = run_inclusion_test(cfg.method, &ctx, &c).core()?;
    write_mask(out, cfg, setup, "c", &c)?;
    out.write_json(
        "test_report.json",
        &Summary {
            method: cfg.method,
            tol: m.tol,
            calibration: m.calibration,
            admissibility,
            c_elements: c.count(),
            d_subset_of_c: setup.phantom.d.is_subset_of(&c),
            report,
        },
    )
    .io()
}

pub fn candidates(cfg: &RunConfig, setup: &Setup) -> Result<Vec<Candidate>, Failure> {
    let mesh = &setup.mesh;
    let dict = match &cfg.dictionary {
        DictionarySpec::HalfspaceCaps { n_dirs, n_offsets, margin } => Dictionary::HalfspaceCaps {
            n_dirs: *n_dirs,
            n_offsets: *n_offsets,
            margin: margin.unwrap_or(2.0 * setup.h),
        },
        DictionarySpec::UserMasks(list) => Dictionary::UserMasks(
            list.iter().map(|s| load_mask(s, mesh)).collect::<anyhow::Result<_>>().map_err(Failure::Validation)?,
        ),
    };
    // an empty dictionary after filtering is a config problem, not a solver one
    generate_candidates(mesh, &setup.phantom.m, &dict).map_err(|e| match e {
        eit_mono::Error::Mono(_) => Failure::Validation(e.into()),
        e => Failure::from_core(e),
    })
}

pub fn reconstruct_cmd(cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary<'a> {
        method: Method,
        one_sided: eit_mono::mono::OneSided,
        tol: f64,
        calibration: Option<Calibration>,
        n_candidates: usize,
        passing: Vec<&'a str>,
        empty_pass_set: bool,
        mask_elements: usize,
        mask_area: f64,
        d_area: f64,
        d_covered: bool,
        reports: &'a [TestReport],
    }
    setup.validate_method(cfg.method).map_err(Failure::Validation)?;
    let cands = candidates(cfg, setup)?;
    let m = measure(cfg, setup, cfg.method, &cands)?;
    let mesh = &setup.mesh;
    let mut ctx = TestContext::new(mesh, &setup.gamma, &setup.phantom.a0, setup.bounds, &m.data).core()?;
    ctx.tol = m.tol;
    ctx.one_sided = cfg.one_sided;
    let rec = reconstruct(cfg.method, &ctx, &cands).core()?;

    let mut csv = String::from("id,label,direction,position,offset,min_eigenvalue,pass\n");
    let n_dirs = match cfg.dictionary {
        DictionarySpec::HalfspaceCaps { n_dirs, .. } => n_dirs,
        DictionarySpec::UserMasks(_) => 0,
    };
    for (cand, rep) in cands.iter().zip(&rec.reports) {
        let min = rep.inequalities.iter().map(|q| q.min_eigenvalue).fold(f64::INFINITY, f64::min);
        let (dir, pos, offset) = match cand.chain {
            Some((i, j)) if n_dirs > 0 => {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n_dirs as f64;
                let off = cand
                    .mask
                    .iter()
                    .map(|t| {
                        let c = mesh.centroid(t);
                        c[0] * th.cos() + c[1] * th.sin()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                (i.to_string(), j.to_string(), fmt(off))
            }
            _ => (String::new(), String::new(), String::new()),
        };
        csv.push_str(&format!("{},{},{dir},{pos},{offset},{},{}\n", cand.id, cand.label, fmt(min), u8::from(rep.pass)));
    }
    out.write("min_eig_vs_offset.csv", &csv).io()?;
    write_mask(out, cfg, setup, "mask", &rec.mask)?;
    write_mask(out, cfg, setup, "d", &setup.phantom.d)?;
    let passing = cands.iter().zip(&rec.reports).filter(|(_, r)| r.pass).map(|(c, _)| c.label.as_str()).collect();
    out.write_json(
        "recon.json",
        &Summary {
            method: rec.method,
            one_sided: rec.one_sided,
            tol: rec.tol,
            calibration: m.calibration,
            n_candidates: cands.len(),
            passing,
            empty_pass_set: rec.empty_pass_set,
            mask_elements: rec.mask.count(),
            mask_area: rec.mask.area(mesh),
            d_area: setup.phantom.d.area(mesh),
            d_covered: setup.phantom.d.is_subset_of(&rec.mask),
            reports: &rec.reports,
        },
    )
    .io()
}

pub fn locpot(cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary {
        ucp: eit_mono::locpot::UcpAssumption,
        u_elements: usize,
        b_elements: usize,
        result: eit_mono::locpot::LocpotSummary,
    }
    let (mesh, gamma) = (&setup.mesh, &setup.gamma);
    let u = load_mask(&cfg.locpot.u, mesh).map_err(Failure::Validation)?;
    let b = load_mask(&cfg.locpot.b, mesh).map_err(Failure::Validation)?;
    let a0 = &setup.phantom.a0;
    let res = match localized_current(mesh, a0, gamma, &u, &b, cfg.locpot.reg) {
        Err(e @ eit_mono::Error::Locpot(_)) => return Err(Failure::Validation(e.into())),
        r => r.core()?,
    };
    let sol = assemble_and_factor(mesh, a0, gamma).core()?.solve_neumann(mesh, gamma, &res.current).core()?;
    out.write("locpot_current.csv", &current_csv(&res.current, setup)).io()?;
    out.write("locpot_u.csv", &sol.to_csv()).io()?;
    write_mask(out, cfg, setup, "locpot_u_set", &u)?;
    write_mask(out, cfg, setup, "locpot_b_set", &b)?;
    out.write_json(
        "locpot.json",
        &Summary { ucp: cfg.locpot.ucp, u_elements: u.count(), b_elements: b.count(), result: res.summary() },
    )
    .io()
}

#[derive(Serialize)]
struct PairRecord {
    seed: u64,
    general: Vec<MonoBoundsReport>,
    improved: Vec<MonoBoundsReport>,
    mixed: Vec<MixedIdentityReport>,
    remainder: Vec<RemainderReport>,
}

pub fn verify(cfg: &RunConfig, setup: &Setup, out: &mut RunDir) -> Res {
    #[derive(Serialize)]
    struct Summary {
        seed: u64,
        field: eit_mono::verify::RandomFieldSpec,
        bounds_pass: bool,
        remainder_pass: bool,
        worst_relative_margin: f64,
        max_mixed_residual: f64,
        pairs: Vec<PairRecord>,
        matrix_bounds: eit_mono::verify::MatrixBoundsReport,
        frechet: Option<eit_mono::verify::FrechetReport>,
        extreme_limit: Option<eit_mono::verify::ExtremeLimitReport>,
    }
    let v = &cfg.verify;
    if v.pairs == 0 || v.currents == 0 {
        return Err(Failure::Validation(anyhow!("config: verify needs at least one pair and one current")));
    }
    let (mesh, gamma) = (&setup.mesh, &setup.gamma);
    let pairs: Vec<PairRecord> = (0..v.pairs)
        .into_par_iter()
        .map(|p| -> eit_mono::Result<PairRecord> {
            let seed = cfg.seed.wrapping_add(p as u64);
            let (a1, a2) = random_pair(mesh, &v.field, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut rec =
                PairRecord { seed, general: vec![], improved: vec![], mixed: vec![], remainder: vec![] };
            for c in 0..v.currents {
                let f = random_current(mesh, gamma, &mut rng);
                let (g, i, m) = all_mono_bounds(&a1, &a2, &f, mesh, gamma)?;
                rec.general.push(g);
                rec.improved.push(i);
                rec.mixed.push(m);
                if c == 0 && p < v.remainder_pairs {
                    for j in [1, 2] {
                        rec.remainder.push(remainder_chain_check(mesh, gamma, &a1, &a2, j, &f, v.n_quad, None)?);
                    }
                }
            }
            Ok(rec)
        })
        .collect::<eit_mono::Result<_>>()
        .core()?;
    let ph = &setup.phantom;
    let c = cfg.test_inclusion.as_ref().map(|s| load_mask(s, mesh)).transpose().map_err(Failure::Validation)?;
    let frechet = match &c {
        Some(c) => Some(frechet_fd_check(mesh, gamma, &ph.a0, c, &setup.bounds, &v.frechet_steps).core()?),
        None => None,
    };
    let extreme_limit = match &c {
        Some(c) if ph.a0.is_self_adjoint(eit_mono::coeff::SKEW_TOL) => {
            Some(extreme_limit_check(mesh, gamma, &ph.a0, &ph.ad, c, &v.epsilons).core()?)
        }
        _ => None,
    };
    let mut csv = String::from("pair,current,kind,lhs,lower,upper,relative_margin,pass\n");
    for (p, rec) in pairs.iter().enumerate() {
        for (k, (g, i)) in rec.general.iter().zip(&rec.improved).enumerate() {
            for (kind, r) in [("general", g), ("improved", i)] {
                csv.push_str(&format!(
                    "{p},{k},{kind},{},{},{},{},{}\n",
                    fmt(r.lhs),
                    fmt(r.lower_bound),
                    fmt(r.upper_bound),
                    fmt(r.relative_margin()),
                    u8::from(r.pass)
                ));
            }
        }
    }
    out.write("verify_margins.csv", &csv).io()?;
    let bounds = pairs.iter().flat_map(|r| r.general.iter().chain(&r.improved));
    let summary = Summary {
        seed: cfg.seed,
        field: v.field,
        bounds_pass: bounds.clone().all(|r| r.pass),
        remainder_pass: pairs.iter().flat_map(|r| &r.remainder).all(|r| r.pass),
        worst_relative_margin: bounds.map(|r| r.relative_margin()).fold(f64::INFINITY, f64::min),
        max_mixed_residual: pairs.iter().flat_map(|r| &r.mixed).map(|m| m.residual).fold(0.0, f64::max),
        matrix_bounds: matrix_bounds_check(&ph.a0, &ph.ad, &setup.bounds).core()?,
        frechet,
        extreme_limit,
        pairs,
    };
    if !summary.bounds_pass || !summary.remainder_pass {
        log::warn!("verify: some checks failed, see verify.json");
    }
    out.write_json("verify.json", &summary).io()
}
