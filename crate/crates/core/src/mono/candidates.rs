use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::mesh::{admissible_test_inclusion, Mesh, RegionMask};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub label: String,
    pub mask: RegionMask,
    /// `(chain, position)`: candidates of one chain are nested and ordered by
    /// position.
    pub chain: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dictionary {
    /// `C = {T ⊂ Ω_δ : centroid·θ_i ≤ t_ij}` with `θ_i = 2πi/n_dirs` and
    /// `t_ij` the `(j+1)/n_offsets` quantile of `centroid·θ_i` over `Ω_δ`,
    /// where `Ω_δ` holds the elements whose centroid is farther than `margin`
    /// from `∂Ω`.
    HalfspaceCaps { n_dirs: usize, n_offsets: usize, margin: f64 },
    UserMasks(Vec<RegionMask>),
}

/// Builds the dictionary and drops inadmissible candidates (logging why).
/// Ids refer to the position in the unfiltered dictionary.
pub fn generate_candidates(mesh: &Mesh, m: &RegionMask, dictionary: &Dictionary) -> Result<Vec<Candidate>> {
    let raw = match dictionary {
        Dictionary::HalfspaceCaps { n_dirs, n_offsets, margin } => caps(mesh, *n_dirs, *n_offsets, *margin)?,
        Dictionary::UserMasks(masks) => masks
            .iter()
            .enumerate()
            .map(|(id, mask)| {
                if mask.len() != mesh.n_triangles() {
                    return Err(Error::Dimension { expected: mesh.n_triangles(), got: mask.len() });
                }
                Ok(Candidate { id, label: format!("mask{id}"), mask: mask.clone(), chain: None })
            })
            .collect::<Result<_>>()?,
    };
    let total = raw.len();
    let kept: Vec<Candidate> = raw
        .into_iter()
        .filter(|c| {
            let rep = admissible_test_inclusion(mesh, &c.mask, m);
            if !rep.admissible {
                let why: Vec<String> = rep.reasons.iter().map(|r| r.to_string()).collect();
                log::info!("candidate {} dropped: {}", c.label, why.join(", "));
            }
            rep.admissible
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::Mono(format!("all {total} candidates were inadmissible")));
    }
    log::info!("{} of {total} candidates admissible", kept.len());
    Ok(kept)
}

fn caps(mesh: &Mesh, n_dirs: usize, n_offsets: usize, margin: f64) -> Result<Vec<Candidate>> {
    if n_dirs == 0 || n_offsets == 0 {
        return Err(Error::Mono("n_dirs and n_offsets must be at least 1".into()));
    }
    if !(margin >= 0.0) {
        return Err(Error::Mono(format!("margin must be non-negative, got {margin}")));
    }
    let n = mesh.n_triangles();
    let inner: Vec<usize> =
        (0..n).filter(|&t| mesh.distance_to_boundary(mesh.centroid(t)) > margin).collect();
    if inner.is_empty() {
        return Err(Error::Mono(format!("no element is farther than {margin} from the boundary")));
    }
    let mut out = Vec::with_capacity(n_dirs * n_offsets);
    for i in 0..n_dirs {
        let th = 2.0 * PI * i as f64 / n_dirs as f64;
        let dir = [th.cos(), th.sin()];
        let proj = |t: usize| {
            let c = mesh.centroid(t);
            c[0] * dir[0] + c[1] * dir[1]
        };
        let mut s: Vec<f64> = inner.iter().map(|&t| proj(t)).collect();
        s.sort_by(f64::total_cmp);
        for j in 0..n_offsets {
            let k = ((j + 1) * s.len()).div_ceil(n_offsets) - 1;
            let offset = s[k];
            let mask = RegionMask::from_indices(n, inner.iter().copied().filter(|&t| proj(t) <= offset));
            out.push(Candidate {
                id: i * n_offsets + j,
                label: format!("cap_d{i}_o{j}"),
                mask,
                chain: Some((i, j)),
            });
        }
    }
    Ok(out)
}
