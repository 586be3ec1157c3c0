use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use eit_mono::coeff::{joint_bounds, CoefficientBounds, MatrixField, Phantom, PhantomPiece, PhantomSpec};
use eit_mono::linalg::Mat2;
use eit_mono::locpot::UcpAssumption;
use eit_mono::mesh::{build_mesh, mask_from_csv, select_gamma, Domain, GammaSelector, GammaSpec, Mesh, RegionMask, Shape};
use eit_mono::mono::{Method, OneSided};
use eit_mono::verify::RandomFieldSpec;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Generate { domain: Domain, h: f64 },
    File(PathBuf),
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::Generate { domain: Domain::unit_disk(), h: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    Shape(Shape),
    Csv(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub mask: MaskSource,
    pub value: Mat2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSpec {
    pub value: Mat2,
    pub pieces: Vec<PieceSpec>,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self { value: Mat2::IDENTITY, pieces: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// `margin` defaults to twice the mesh size.
    HalfspaceCaps { n_dirs: usize, n_offsets: usize, margin: Option<f64> },
    UserMasks(Vec<MaskSource>),
}

impl Default for DictionarySpec {
    fn default() -> Self {
        DictionarySpec::HalfspaceCaps { n_dirs: 8, n_offsets: 10, margin: None }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ToleranceSpec {
    /// `1e−9 · max |λ(Λ^R(A_D))|`
    #[default]
    Default,
    Fixed(f64),
    /// Background run at zero tolerance, scaled by `factor`.
    Calibrated { factor: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurrentSpec {
    Cos(u32),
    Sin(u32),
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocpotConfig {
    pub u: MaskSource,
    pub b: MaskSource,
    pub reg: f64,
    pub ucp: UcpAssumption,
}

impl Default for LocpotConfig {
    fn default() -> Self {
        Self {
            u: MaskSource::Shape(Shape::HalfPlane { normal: [-1.0, 0.0], offset: 0.0 }),
            b: MaskSource::Shape(Shape::Ball { center: [0.4, 0.0], radius: 0.15 }),
            reg: 1e-8,
            ucp: UcpAssumption::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub pairs: usize,
    pub currents: usize,
    pub field: RandomFieldSpec,
    /// Pairs (from the front) that also get the remainder chain.
    pub remainder_pairs: usize,
    pub n_quad: usize,
    pub frechet_steps: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pairs: 4,
            currents: 3,
            field: RandomFieldSpec::default(),
            remainder_pairs: 1,
            n_quad: 8,
            frechet_steps: vec![1e-2, 1e-3, 1e-4],
            epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub gamma: GammaSelector,
    pub background: BackgroundSpec,
    pub phantom: Vec<PieceSpec>,
    pub tau_plus: Option<f64>,
    pub tau_minus: Option<f64>,
    pub collar_layers: usize,
    pub bounds: Option<CoefficientBounds>,
    pub method: Method,
    pub one_sided: OneSided,
    pub dictionary: DictionarySpec,
    pub tolerance: ToleranceSpec,
    pub test_inclusion: Option<MaskSource>,
    pub currents: Vec<CurrentSpec>,
    pub locpot: LocpotConfig,
    pub verify: VerifyConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub pgm_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshSpec::default(),
            gamma: GammaSelector::Full,
            background: BackgroundSpec::default(),
            phantom: Vec::new(),
            tau_plus: None,
            tau_minus: None,
            collar_layers: 2,
            bounds: None,
            method: Method::Linearized,
            one_sided: OneSided::Both,
            dictionary: DictionarySpec::default(),
            tolerance: ToleranceSpec::default(),
            test_inclusion: None,
            currents: vec![CurrentSpec::Cos(1), CurrentSpec::Sin(1), CurrentSpec::Cos(2)],
            locpot: LocpotConfig::default(),
            verify: VerifyConfig::default(),
            output_dir: PathBuf::from("run"),
            seed: 0,
            pgm_size: 128,
        }
    }
}

impl RunConfig {
    /// Reads the config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("config: cannot read {}", path.display()))
            .map_err(Failure::Validation)?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("config: {} is not a valid run config", path.display()))
            .map_err(Failure::Validation)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let MeshSpec::File(p) = &mut self.mesh {
            fix(p);
        }
        let mut sources: Vec<&mut MaskSource> = Vec::new();
        sources.extend(self.background.pieces.iter_mut().map(|p| &mut p.mask));
        sources.extend(self.phantom.iter_mut().map(|p| &mut p.mask));
        if let DictionarySpec::UserMasks(m) = &mut self.dictionary {
            sources.extend(m.iter_mut());
        }
        sources.extend(self.test_inclusion.iter_mut());
        sources.push(&mut self.locpot.u);
        sources.push(&mut self.locpot.b);
        for s in sources {
            if let MaskSource::Csv(p) = s {
                fix(p);
            }
        }
        fix(&mut self.output_dir);
    }

    /// File references and method constraints that can be checked without
    /// solving anything.
    pub fn validate(&self) -> anyhow::Result<()> {
        if let MeshSpec::Generate { h, .. } = &self.mesh {
            if !(*h > 0.0) {
                bail!("config: mesh size must be positive, got {h}");
            }
        }
        if let MeshSpec::File(p) = &self.mesh {
            if !p.is_file() {
                bail!("config: mesh file {} does not exist", p.display());
            }
        }
        for s in self.mask_sources() {
            if let MaskSource::Csv(p) = s {
                if !p.is_file() {
                    bail!("config: mask file {} does not exist", p.display());
                }
            }
        }
        if let ToleranceSpec::Fixed(t) = self.tolerance {
            if !(t >= 0.0) {
                bail!("config: fixed tolerance must be non-negative, got {t}");
            }
        }
        if let ToleranceSpec::Calibrated { factor } = self.tolerance {
            if !(factor >= 1.0) {
                bail!("config: calibration factor must be at least 1, got {factor}");
            }
        }
        if self.pgm_size == 0 {
            bail!("config: pgm_size must be positive");
        }
        Ok(())
    }

    fn mask_sources(&self) -> Vec<&MaskSource> {
        let mut out: Vec<&MaskSource> = Vec::new();
        out.extend(self.background.pieces.iter().map(|p| &p.mask));
        out.extend(self.phantom.iter().map(|p| &p.mask));
        if let DictionarySpec::UserMasks(m) = &self.dictionary {
            out.extend(m.iter());
        }
        out.extend(self.test_inclusion.iter());
        out.push(&self.locpot.u);
        out.push(&self.locpot.b);
        out
    }
}

pub fn load_mask(src: &MaskSource, mesh: &Mesh) -> anyhow::Result<RegionMask> {
    Ok(match src {
        MaskSource::Shape(s) => s.mask(mesh),
        MaskSource::Csv(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("config: cannot read {}", p.display()))?;
            mask_from_csv(&text, mesh.n_triangles())?
        }
    })
}

/// Mesh, Γ, phantom and bounds shared by all subcommands.
pub struct Setup {
    pub mesh: Mesh,
    pub gamma: GammaSpec,
    pub spec: PhantomSpec,
    pub phantom: Phantom,
    pub bounds: CoefficientBounds,
    /// Longest edge, used as the mesh size when the mesh came from a file.
    pub h: f64,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self, Failure> {
        let mesh = match &cfg.mesh {
            MeshSpec::Generate { domain, h } => build_mesh(domain, *h).map_err(Failure::from_core)?,
            MeshSpec::File(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("config: cannot read {}", p.display()))
                    .map_err(Failure::Validation)?;
                Mesh::from_json(&text).map_err(|e| Failure::Validation(e.into()))?
            }
        };
        let sel = cfg.gamma.clone();
        let gamma = select_gamma(&mesh, |p| sel.contains(p)).map_err(|e| Failure::Validation(e.into()))?;
        let n = mesh.n_triangles();
        let pieces = |list: &[PieceSpec]| -> Result<Vec<PhantomPiece>, Failure> {
            list.iter()
                .map(|p| Ok(PhantomPiece { mask: load_mask(&p.mask, &mesh).map_err(Failure::Validation)?, value: p.value }))
                .collect()
        };
        let mut background = MatrixField::constant(n, cfg.background.value);
        for piece in pieces(&cfg.background.pieces)? {
            background = MatrixField::constant(n, piece.value).overlay(&background, &piece.mask);
        }
        let spec = PhantomSpec {
            background,
            pieces: pieces(&cfg.phantom)?,
            tau_plus: cfg.tau_plus,
            tau_minus: cfg.tau_minus,
        };
        let phantom = eit_mono::coeff::build_phantom(&spec, &mesh).map_err(|e| Failure::Validation(e.into()))?;
        let bounds = match cfg.bounds {
            Some(b) => {
                b.validate().map_err(|e| Failure::Validation(e.into()))?;
                b
            }
            None => joint_bounds(&phantom.a0, &phantom.ad).map_err(|e| Failure::Validation(e.into()))?,
        };
        let h = (0..mesh.n_triangles())
            .flat_map(|t| {
                let [a, b, c] = mesh.triangles()[t].map(|v| mesh.nodes()[v]);
                [(a, b), (b, c), (c, a)]
            })
            .fold(0.0f64, |m, (p, q)| m.max((p[0] - q[0]).hypot(p[1] - q[1])));
        Ok(Self { mesh, gamma, spec, phantom, bounds, h })
    }

    /// Method-specific constraints, checked before any solve.
    pub fn validate_method(&self, method: Method) -> anyhow::Result<()> {
        if matches!(method, Method::Corollary | Method::Extreme) && !self.phantom.a0.is_self_adjoint(eit_mono::coeff::SKEW_TOL) {
            bail!(
                "mono: method `{}` needs a self-adjoint background (max ‖A₀^I‖ = {:.3e}); \
                 self-adjoint background required",
                format!("{method:?}").to_lowercase(),
                self.phantom.a0.max_skew_norm()
            );
        }
        Ok(())
    }
}
