use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::coeff::MatrixField;
use crate::forward::BoundaryCurrent;
use crate::linalg::Mat2;
use crate::mesh::{GammaSpec, Mesh};
use crate::{Error, Result, C64};

/// Sampling ranges: `spec(A^R) ⊂ [α, β]`, `‖A^I‖ ≤ η`, and the number of
/// constant pieces (nearest-seed cells) per field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub pieces: usize,
}

impl Default for RandomFieldSpec {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 3.0, eta: 1.0, pieces: 4 }
    }
}

impl RandomFieldSpec {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= self.beta && self.eta >= 0.0) || self.pieces == 0 {
            return Err(Error::Verify(format!("invalid random field spec {self:?}")));
        }
        Ok(())
    }
}

/// Hermitian 2×2 matrix with eigenvalues drawn from `[lo, hi]` and a random
/// unitary eigenbasis.
pub fn random_hermitian<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Mat2 {
    let l1 = rng.gen_range(lo..=hi);
    let l2 = rng.gen_range(lo..=hi);
    let th: f64 = rng.gen_range(0.0..PI);
    let ph: f64 = rng.gen_range(0.0..2.0 * PI);
    let (c, s) = (C64::new(th.cos(), 0.0), th.sin());
    let e = C64::from_polar(s, ph);
    let u = Mat2::new(c, -e, e.conj(), c);
    u * Mat2::new(l1.into(), 0.0.into(), 0.0.into(), l2.into()) * u.adjoint()
}

fn random_matrix<R: Rng>(rng: &mut R, spec: &RandomFieldSpec) -> Mat2 {
    let re = random_hermitian(rng, spec.alpha, spec.beta);
    let im = random_hermitian(rng, -spec.eta, spec.eta);
    re + im.scale(C64::new(0.0, 1.0))
}

fn bbox(mesh: &Mesh) -> ([f64; 2], [f64; 2]) {
    mesh.nodes().iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    })
}

/// Piecewise-constant field on nearest-seed cells.
pub fn random_field<R: Rng>(mesh: &Mesh, spec: &RandomFieldSpec, rng: &mut R) -> Result<MatrixField> {
    spec.validate()?;
    let (lo, hi) = bbox(mesh);
    let seeds: Vec<[f64; 2]> =
        (0..spec.pieces).map(|_| [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])]).collect();
    let values: Vec<Mat2> = (0..spec.pieces).map(|_| random_matrix(rng, spec)).collect();
    Ok(MatrixField::from_fn(mesh.n_triangles(), |t| {
        let c = mesh.centroid(t);
        let k = (0..seeds.len())
            .min_by(|&a, &b| {
                let da = (c[0] - seeds[a][0]).hypot(c[1] - seeds[a][1]);
                let db = (c[0] - seeds[b][0]).hypot(c[1] - seeds[b][1]);
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        values[k]
    }))
}

/// `(A₁, A₂)`: `A₂` a random field and `A₁` equal to it except on a random
/// disk, where it takes another random value.
pub fn random_pair(mesh: &Mesh, spec: &RandomFieldSpec, seed: u64) -> Result<(MatrixField, MatrixField)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a2 = random_field(mesh, spec, &mut rng)?;
    let (lo, hi) = bbox(mesh);
    let size = (hi[0] - lo[0]).min(hi[1] - lo[1]);
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let r = rng.gen_range(0.15..0.3) * size;
    let off = rng.gen_range(0.0..0.2) * size;
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let center = [mid[0] + off * phi.cos(), mid[1] + off * phi.sin()];
    let inside = random_matrix(&mut rng, spec);
    let a1 = a2.map(|t, v| {
        let c = mesh.centroid(t);
        if (c[0] - center[0]).hypot(c[1] - center[1]) < r {
            inside
        } else {
            v
        }
    });
    Ok((a1, a2))
}

/// Mean-free current with unit `L²(Γ)` norm built from a few random
/// angular Fourier modes about the mesh centre.
pub fn random_current<R: Rng>(mesh: &Mesh, gamma: &GammaSpec, rng: &mut R) -> BoundaryCurrent {
    let (lo, hi) = bbox(mesh);
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let coeffs: Vec<(C64, C64)> = (1..=4)
        .map(|_| {
            (
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let f = BoundaryCurrent::from_fn(mesh, gamma, |p| {
        let th = (p[1] - mid[1]).atan2(p[0] - mid[0]);
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let k = (k + 1) as f64;
                a * (k * th).cos() + b * (k * th).sin()
            })
            .sum()
    })
    .mean_free();
    let n = f.l2_norm();
    f.scale(C64::new(1.0 / n, 0.0))
}
