use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Mesh;

/// Subset of the triangles of a mesh (one flag per element).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionMask {
    flags: Vec<bool>,
}

impl RegionMask {
    pub fn empty(n: usize) -> Self {
        Self { flags: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        Self { flags: vec![true; n] }
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut flags = vec![false; n];
        for i in indices {
            flags[i] = true;
        }
        Self { flags }
    }

    /// Flags exactly the triangles whose centroid satisfies `predicate`.
    pub fn from_predicate(mesh: &Mesh, predicate: impl Fn([f64; 2]) -> bool) -> Self {
        Self { flags: mesh.centroids().iter().map(|&c| predicate(c)).collect() }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.flags.iter().any(|&f| f)
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.flags[t]
    }

    pub fn set(&mut self, t: usize, value: bool) {
        self.flags[t] = value;
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(self.len(), other.len(), "mask length mismatch");
        Self { flags: self.flags.iter().zip(&other.flags).map(|(&a, &b)| op(a, b)).collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        Self { flags: self.flags.iter().map(|&f| !f).collect() }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.flags.iter().zip(&other.flags).all(|(&a, &b)| !a || b)
    }

    pub fn area(&self, mesh: &Mesh) -> f64 {
        self.iter().map(|t| mesh.area(t)).sum()
    }

    /// Nodes touched by at least one flagged triangle.
    pub fn nodes(&self, mesh: &Mesh) -> Vec<bool> {
        let mut touched = vec![false; mesh.n_nodes()];
        for t in self.iter() {
            for &v in &mesh.triangles()[t] {
                touched[v] = true;
            }
        }
        touched
    }

    /// Flagged elements within `layers` edge-steps of the unflagged part
    /// (layer 1 is the flagged elements adjacent to an unflagged one).
    pub fn inner_collar(&self, mesh: &Mesh, layers: usize) -> Self {
        let mut depth = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::new();
        for t in self.iter() {
            let exposed = mesh.neighbors(t).iter().any(|nb| match nb {
                Some(s) => !self.flags[*s],
                None => false,
            });
            if exposed {
                depth[t] = 1;
                queue.push_back(t);
            }
        }
        while let Some(t) = queue.pop_front() {
            if depth[t] >= layers {
                continue;
            }
            for s in mesh.neighbors(t).iter().flatten() {
                if self.flags[*s] && depth[*s] == usize::MAX {
                    depth[*s] = depth[t] + 1;
                    queue.push_back(*s);
                }
            }
        }
        Self { flags: depth.iter().map(|&d| d <= layers).collect() }
    }

    /// Grows the mask by `layers` rings of edge-neighbours.
    pub fn dilate(&self, mesh: &Mesh, layers: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..layers {
            let prev = out.clone();
            for t in prev.iter() {
                for s in mesh.neighbors(t).iter().flatten() {
                    out.flags[*s] = true;
                }
            }
        }
        out
    }
}

/// Edge-connected components of the flagged triangles, each sorted, ordered by
/// smallest element.
pub fn element_components(mesh: &Mesh, mask: &RegionMask) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut comps = Vec::new();
    for start in mask.iter() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            for s in mesh.neighbors(t).iter().flatten() {
                if mask.contains(*s) && !seen[*s] {
                    seen[*s] = true;
                    comp.push(*s);
                    queue.push_back(*s);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Unflagged triangles reachable from the exterior through boundary edges and
/// shared edges of unflagged triangles.
fn exterior_reach(mesh: &Mesh, mask: &RegionMask) -> Vec<bool> {
    let mut reached = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    for e in 0..mesh.boundary_edges().len() {
        let t = mesh.boundary_owner(e);
        if !mask.contains(t) && !reached[t] {
            reached[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(t) = queue.pop_front() {
        for s in mesh.neighbors(t).iter().flatten() {
            if !mask.contains(*s) && !reached[*s] {
                reached[*s] = true;
                queue.push_back(*s);
            }
        }
    }
    reached
}

/// True iff the unflagged triangles together with the exterior form a single
/// edge-connected component.
pub fn connected_complement(mesh: &Mesh, mask: &RegionMask) -> bool {
    let reached = exterior_reach(mesh, mask);
    (0..mask.len()).all(|t| mask.contains(t) || reached[t])
}

/// Discrete outer shape: `mask` plus every complement component that cannot
/// be reached from the exterior.
pub fn outer_shape(mesh: &Mesh, mask: &RegionMask) -> RegionMask {
    let reached = exterior_reach(mesh, mask);
    RegionMask::from_flags((0..mask.len()).map(|t| mask.contains(t) || !reached[t]).collect())
}

/// Interior edges separating a flagged triangle from an unflagged one, as node pairs.
pub fn edge_boundary(mesh: &Mesh, mask: &RegionMask) -> Vec<[usize; 2]> {
    let mut edges = Vec::new();
    for t in mask.iter() {
        let tri = mesh.triangles()[t];
        for (k, nb) in mesh.neighbors(t).iter().enumerate() {
            if let Some(s) = nb {
                if !mask.contains(*s) {
                    edges.push([tri[k], tri[(k + 1) % 3]]);
                }
            }
        }
    }
    edges
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inadmissible {
    /// No element flagged.
    Empty,
    /// A triangle of C has a vertex on ∂Ω.
    NotCompactlyContained,
    /// Ω∖C is not connected to the exterior.
    DisconnectedComplement,
    /// A triangle of M touches the edge-boundary of C.
    BoundaryMeetsM,
}

impl fmt::Display for Inadmissible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Inadmissible::Empty => "empty test inclusion",
            Inadmissible::NotCompactlyContained => "not compactly contained",
            Inadmissible::DisconnectedComplement => "complement not connected",
            Inadmissible::BoundaryMeetsM => "∂C ∩ M ≠ ∅",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub reasons: Vec<Inadmissible>,
}

/// Checks the discrete admissibility criteria for a test inclusion `c`
/// against the support `m` of the background's skew part.
pub fn admissible_test_inclusion(mesh: &Mesh, c: &RegionMask, m: &RegionMask) -> AdmissibilityReport {
    let mut reasons = Vec::new();
    if c.is_empty() {
        reasons.push(Inadmissible::Empty);
    }
    let touches_outer = c.iter().any(|t| mesh.triangles()[t].iter().any(|&v| mesh.is_boundary_node(v)));
    if touches_outer {
        reasons.push(Inadmissible::NotCompactlyContained);
    }
    if !connected_complement(mesh, c) {
        reasons.push(Inadmissible::DisconnectedComplement);
    }
    let mut rim = vec![false; mesh.n_nodes()];
    for [a, b] in edge_boundary(mesh, c) {
        rim[a] = true;
        rim[b] = true;
    }
    if m.iter().any(|t| mesh.triangles()[t].iter().any(|&v| rim[v])) {
        reasons.push(Inadmissible::BoundaryMeetsM);
    }
    AdmissibilityReport { admissible: reasons.is_empty(), reasons }
}
