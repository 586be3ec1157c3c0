//! Triangulated domains, boundary arcs and element masks.

mod io;
mod region;
mod shape;

pub use io::{mask_from_csv, mask_to_csv, mask_to_pgm, MeshFile};
pub use region::{
    admissible_test_inclusion, connected_complement, edge_boundary, element_components,
    outer_shape, AdmissibilityReport, Inadmissible, RegionMask,
};
pub use shape::Shape;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Geometry descriptor accepted by [`build_mesh`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Rectangle { min: [f64; 2], max: [f64; 2] },
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle { min: [0.0, 0.0], max: [1.0, 1.0] }
    }
}

/// Conforming triangulation of a polygonal domain.
///
/// Triangles are stored counter-clockwise and boundary edges are oriented so
/// that the domain lies to their left, which makes `(dy, -dx)/len` the outward
/// normal. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    region_label: Vec<i32>,
    areas: Vec<f64>,
    centroids: Vec<[f64; 2]>,
    /// `neighbors[t][k]` is the triangle across local edge `(v[k], v[k+1])`.
    neighbors: Vec<[Option<usize>; 3]>,
    /// Owning triangle of each boundary edge.
    boundary_owner: Vec<usize>,
    on_boundary: Vec<bool>,
}

impl Mesh {
    /// Validates the raw arrays and derives the topology.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
        region_label: Option<Vec<i32>>,
    ) -> Result<Self> {
        let n = nodes.len();
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        let mut areas = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {t} references a node out of range")));
            }
            let [a, b, c] = tri.map(|v| nodes[v]);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has non-positive signed area {area}")));
            }
            areas.push(area);
            centroids.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
        }

        let mut edge_owner: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_owner.entry((a.min(b), a.max(b))).or_default().push((t, k));
            }
        }
        let mut neighbors = vec![[None; 3]; triangles.len()];
        let mut open_edges = 0usize;
        for owners in edge_owner.values() {
            match owners.as_slice() {
                [_] => open_edges += 1,
                [(t0, k0), (t1, k1)] => {
                    neighbors[*t0][*k0] = Some(*t1);
                    neighbors[*t1][*k1] = Some(*t0);
                }
                _ => return Err(Error::Mesh("edge shared by more than two triangles".into())),
            }
        }

        let region_label = region_label.unwrap_or_else(|| vec![0; triangles.len()]);
        if region_label.len() != triangles.len() {
            return Err(Error::Dimension { expected: triangles.len(), got: region_label.len() });
        }

        let mut oriented = Vec::with_capacity(boundary_edges.len());
        let mut boundary_owner = Vec::with_capacity(boundary_edges.len());
        for (e, &[a, b]) in boundary_edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::Mesh(format!("boundary edge {e} references a node out of range")));
            }
            let owners = edge_owner
                .get(&(a.min(b), a.max(b)))
                .ok_or_else(|| Error::Mesh(format!("boundary edge {e} is not a mesh edge")))?;
            if owners.len() != 1 {
                return Err(Error::Mesh(format!("boundary edge {e} belongs to {} triangles", owners.len())));
            }
            let (t, k) = owners[0];
            let tri = triangles[t];
            oriented.push([tri[k], tri[(k + 1) % 3]]);
            boundary_owner.push(t);
        }
        if oriented.len() != open_edges {
            return Err(Error::Mesh(format!(
                "boundary edge list has {} edges but the triangulation has {open_edges} open edges",
                oriented.len()
            )));
        }
        // closed loops: every boundary node starts and ends exactly one edge
        let mut starts = vec![0u8; n];
        let mut ends = vec![0u8; n];
        for &[a, b] in &oriented {
            starts[a] += 1;
            ends[b] += 1;
        }
        if starts.iter().zip(&ends).any(|(&s, &e)| s != e || s > 1) {
            return Err(Error::Mesh("boundary edges do not form closed simple loops".into()));
        }
        let on_boundary = starts.iter().map(|&s| s > 0).collect();

        Ok(Self {
            nodes,
            triangles,
            boundary_edges: oriented,
            region_label,
            areas,
            centroids,
            neighbors,
            boundary_owner,
            on_boundary,
        })
    }

    /// Builds a mesh from triangles alone, deriving the boundary edge list.
    pub fn from_triangles(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut count: HashMap<(usize, usize), (usize, usize, usize)> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let entry = count.entry((a.min(b), a.max(b))).or_insert((0, a, b));
                entry.0 += 1;
            }
        }
        let mut boundary: Vec<[usize; 2]> =
            count.values().filter(|e| e.0 == 1).map(|&(_, a, b)| [a, b]).collect();
        boundary.sort_unstable();
        // chain into loops so the stored order walks the boundary
        let mut next: HashMap<usize, usize> = boundary.iter().map(|&[a, b]| (a, b)).collect();
        let mut ordered = Vec::with_capacity(boundary.len());
        for &[a, _] in &boundary {
            let mut cur = a;
            while let Some(b) = next.remove(&cur) {
                ordered.push([cur, b]);
                cur = b;
            }
        }
        Self::new(nodes, triangles, ordered, None)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn region_label(&self) -> &[i32] {
        &self.region_label
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        self.centroids[t]
    }

    pub fn centroids(&self) -> &[[f64; 2]] {
        &self.centroids
    }

    pub fn neighbors(&self, t: usize) -> &[Option<usize>; 3] {
        &self.neighbors[t]
    }

    pub fn boundary_owner(&self, e: usize) -> usize {
        self.boundary_owner[e]
    }

    pub fn is_boundary_node(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.boundary_edges[e];
        dist(self.nodes[a], self.nodes[b])
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.boundary_edges[e].map(|v| self.nodes[v]);
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
    }

    pub fn outward_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.boundary_edges[e].map(|v| self.nodes[v]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        [dy / len, -dx / len]
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.boundary_edges.len()).map(|e| self.edge_length(e)).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|tri| (0..3).map(move |k| (tri[k], tri[(k + 1) % 3])))
            .map(|(a, b)| dist(self.nodes[a], self.nodes[b]))
            .fold(0.0, f64::max)
    }

    /// Constant gradients of the three P1 hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.nodes[v]);
        let two_area = 2.0 * self.areas[t];
        // grad φ_i = rot(opposite edge) / (2|T|)
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    /// Distance from `p` to the boundary polygon.
    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        self.boundary_edges
            .iter()
            .map(|&[a, b]| segment_distance(p, self.nodes[a], self.nodes[b]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds a conforming triangulation of `domain` with target edge length `h`.
///
/// Disks are meshed with concentric rings (ring `k` carries `6k` nodes), so the
/// maximal edge stays close to `h`; rectangles use a structured grid with
/// alternating diagonals.
pub fn build_mesh(domain: &Domain, h: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Mesh(format!("target edge length must be positive, got {h}")));
    }
    match *domain {
        Domain::Disk { center, radius } => {
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(Error::Mesh(format!("degenerate disk radius {radius}")));
            }
            disk_mesh(center, radius, h)
        }
        Domain::Rectangle { min, max } => {
            let (w, ht) = (max[0] - min[0], max[1] - min[1]);
            if !(w > 0.0 && ht > 0.0) || !w.is_finite() || !ht.is_finite() {
                return Err(Error::Mesh(format!("degenerate rectangle extents {w} x {ht}")));
            }
            rectangle_mesh(min, w, ht, h)
        }
    }
}

fn disk_mesh(center: [f64; 2], radius: f64, h: f64) -> Result<Mesh> {
    let rings = (radius / h).ceil().max(1.0) as usize;
    let mut nodes = vec![center];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(nodes.len());
        let r = radius * k as f64 / rings as f64;
        let m = 6 * k;
        for j in 0..m {
            let a = 2.0 * PI * j as f64 / m as f64;
            nodes.push([center[0] + r * a.cos(), center[1] + r * a.sin()]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..6 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let (m, n) = (6 * (k - 1), 6 * k);
        let inner = |i: usize| ring_start[k - 1] + i % m;
        let outer = |o: usize| ring_start[k] + o % n;
        let (mut i, mut o) = (0usize, 0usize);
        while i < m || o < n {
            // advance along whichever ring leaves the shorter diagonal
            if o < n && (i == m || (2 * o + 1) * m < (2 * i + 1) * n) {
                triangles.push([inner(i), outer(o), outer(o + 1)]);
                o += 1;
            } else {
                triangles.push([inner(i), outer(o), inner(i + 1)]);
                i += 1;
            }
        }
    }
    orient_ccw(&nodes, &mut triangles);
    Mesh::from_triangles(nodes, triangles)
}

fn rectangle_mesh(min: [f64; 2], w: f64, ht: f64, h: f64) -> Result<Mesh> {
    let nx = (w / h).ceil().max(1.0) as usize;
    let ny = (ht / h).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([min[0] + w * i as f64 / nx as f64, min[1] + ht * j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    Mesh::from_triangles(nodes, triangles)
}

fn orient_ccw(nodes: &[[f64; 2]], triangles: &mut [[usize; 3]]) {
    for tri in triangles.iter_mut() {
        if signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
    }
}

pub(crate) fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + s * dx, a[1] + s * dy])
}

/// Measurement boundary Γ as a set of whole boundary edges.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaSpec {
    edge_indices: Vec<usize>,
    arc_length: f64,
}

impl GammaSpec {
    pub fn edge_indices(&self) -> &[usize] {
        &self.edge_indices
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length
    }

    pub fn len(&self) -> usize {
        self.edge_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_indices.is_empty()
    }

    /// Γ made of the given boundary edge indices.
    pub fn from_edges(mesh: &Mesh, mut edges: Vec<usize>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        if edges.is_empty() {
            return Err(Error::EmptyGamma);
        }
        if let Some(&e) = edges.iter().find(|&&e| e >= mesh.boundary_edges().len()) {
            return Err(Error::Mesh(format!("Γ edge {e} out of range")));
        }
        let arc_length = edges.iter().map(|&e| mesh.edge_length(e)).sum();
        Ok(Self { edge_indices: edges, arc_length })
    }
}

/// Boundary-piece selector, evaluated at boundary edge midpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSelector {
    Full,
    /// Polar angle of the midpoint (about `center`) in the open interval `(from, to)`,
    /// taken modulo 2π.
    Angular {
        from: f64,
        to: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Box { min: [f64; 2], max: [f64; 2] },
}

impl GammaSelector {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            GammaSelector::Full => true,
            GammaSelector::Angular { from, to, center } => {
                if to - from >= 2.0 * PI {
                    return true;
                }
                if to <= from {
                    return false;
                }
                let theta = (p[1] - center[1]).atan2(p[0] - center[0]);
                let rel = (theta - from).rem_euclid(2.0 * PI);
                rel > 0.0 && rel < to - from
            }
            GammaSelector::Box { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
        }
    }
}

/// Selects the boundary edges whose midpoint satisfies `predicate`.
pub fn select_gamma(mesh: &Mesh, predicate: impl Fn([f64; 2]) -> bool) -> Result<GammaSpec> {
    let edges: Vec<usize> =
        (0..mesh.boundary_edges().len()).filter(|&e| predicate(mesh.edge_midpoint(e))).collect();
    GammaSpec::from_edges(mesh, edges)
}
