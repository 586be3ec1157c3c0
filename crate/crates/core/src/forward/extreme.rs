//! Limits of the Neumann problem where `C` becomes perfectly insulating
//! (coefficient → 0) or perfectly conducting (coefficient → ∞).
//!
//! Insulating: `C` is removed and its boundary carries a zero-flux
//! condition. Conducting: the potential is constant on each component of
//! `C`, realised by giving all nodes of a component one shared unknown.

use serde::{Deserialize, Serialize};

use super::{check_field, BoundaryCurrent, FactorizedSystem, FieldSolution, NO_DOF};
use crate::coeff::{MatrixField, SKEW_TOL};
use crate::mesh::{connected_complement, GammaSpec, Mesh, RegionMask};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremeKind {
    Insulating,
    Conducting,
}

pub fn factor_extreme(
    mesh: &Mesh,
    a0: &MatrixField,
    gamma: &GammaSpec,
    c: &RegionMask,
    kind: ExtremeKind,
) -> Result<FactorizedSystem> {
    check_field(mesh, a0)?;
    if c.len() != mesh.n_triangles() {
        return Err(Error::Dimension { expected: mesh.n_triangles(), got: c.len() });
    }
    if !a0.is_self_adjoint(SKEW_TOL) {
        return Err(Error::Forward("extreme inclusions need a self-adjoint background".into()));
    }
    if c.iter().any(|t| mesh.triangles()[t].iter().any(|&v| mesh.is_boundary_node(v))) {
        return Err(Error::Forward("inclusion touches the outer boundary".into()));
    }
    if !connected_complement(mesh, c) {
        return Err(Error::Forward("complement of the inclusion is not connected".into()));
    }
    let active: Vec<bool> = (0..mesh.n_triangles()).map(|t| !c.contains(t)).collect();
    let n = mesh.n_nodes();
    match kind {
        ExtremeKind::Insulating => {
            let mut used = vec![false; n];
            for t in (0..mesh.n_triangles()).filter(|&t| active[t]) {
                for v in mesh.triangles()[t] {
                    used[v] = true;
                }
            }
            let mut next = 0;
            let node_dof = used
                .iter()
                .map(|&u| {
                    if u {
                        next += 1;
                        next - 1
                    } else {
                        NO_DOF
                    }
                })
                .collect();
            FactorizedSystem::build(mesh, a0, gamma, node_dof, &active, Some(c.clone()))
        }
        ExtremeKind::Conducting => {
            // union-find over the vertices of C's triangles
            let mut parent: Vec<usize> = (0..n).collect();
            fn root(p: &mut [usize], mut v: usize) -> usize {
                while p[v] != v {
                    p[v] = p[p[v]];
                    v = p[v];
                }
                v
            }
            for t in c.iter() {
                let [a, b, d] = mesh.triangles()[t];
                for w in [b, d] {
                    let (ra, rw) = (root(&mut parent, a), root(&mut parent, w));
                    if ra != rw {
                        parent[rw.max(ra)] = rw.min(ra);
                    }
                }
            }
            let mut node_dof = vec![NO_DOF; n];
            let mut next = 0;
            for v in 0..n {
                let r = root(&mut parent, v);
                if node_dof[r] == NO_DOF {
                    node_dof[r] = next;
                    next += 1;
                }
                node_dof[v] = node_dof[r];
            }
            FactorizedSystem::build(mesh, a0, gamma, node_dof, &active, None)
        }
    }
}

pub fn solve_extreme(
    mesh: &Mesh,
    a0: &MatrixField,
    gamma: &GammaSpec,
    c: &RegionMask,
    kind: ExtremeKind,
    f: &BoundaryCurrent,
) -> Result<FieldSolution> {
    factor_extreme(mesh, a0, gamma, c, kind)?.solve_neumann(mesh, gamma, f)
}
