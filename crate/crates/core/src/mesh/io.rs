use serde::{Deserialize, Serialize};

use super::{Mesh, RegionMask};
use crate::{Error, Result};

/// On-disk JSON layout of a mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_label: Option<Vec<i32>>,
}

impl From<&Mesh> for MeshFile {
    fn from(mesh: &Mesh) -> Self {
        Self {
            nodes: mesh.nodes().to_vec(),
            triangles: mesh.triangles().to_vec(),
            boundary_edges: mesh.boundary_edges().to_vec(),
            region_label: Some(mesh.region_label().to_vec()),
        }
    }
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<Mesh> {
        Mesh::new(self.nodes, self.triangles, self.boundary_edges, self.region_label)
    }
}

impl Mesh {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeshFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<MeshFile>(s)?.into_mesh()
    }
}

/// `element,flag` rows, one per triangle.
pub fn mask_to_csv(mask: &RegionMask) -> String {
    let mut out = String::from("element,flag\n");
    for (i, &f) in mask.flags().iter().enumerate() {
        out.push_str(&format!("{i},{}\n", u8::from(f)));
    }
    out
}

/// Parses either `element,flag` rows or a bare column of 0/1 values.
pub fn mask_from_csv(s: &str, n_triangles: usize) -> Result<RegionMask> {
    let mut flags = vec![false; n_triangles];
    let mut seen = 0usize;
    for (lineno, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("element") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (idx, flag) = match fields.as_slice() {
            [flag] => (seen, *flag),
            [idx, flag] => (
                idx.parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
                *flag,
            ),
            _ => return Err(Error::Parse(format!("line {}: expected `element,flag`", lineno + 1))),
        };
        if idx >= n_triangles {
            return Err(Error::Parse(format!("line {}: element {idx} out of range", lineno + 1)));
        }
        flags[idx] = match flag {
            "1" => true,
            "0" => false,
            other => return Err(Error::Parse(format!("line {}: bad flag {other:?}", lineno + 1))),
        };
        seen += 1;
    }
    Ok(RegionMask::from_flags(flags))
}

/// Rasterises a mask onto a `width`×`height` grid over the mesh bounding box
/// as an ASCII PGM (P2): 0 outside Ω, 127 unflagged, 255 flagged.
pub fn mask_to_pgm(mesh: &Mesh, mask: &RegionMask, width: usize, height: usize) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in mesh.nodes() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let dx = (hi[0] - lo[0]) / width as f64;
    let dy = (hi[1] - lo[1]) / height as f64;
    let mut pixels = vec![0u8; width * height];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = tri.map(|v| mesh.nodes()[v]);
        let value = if mask.contains(t) { 255 } else { 127 };
        let xmin = a[0].min(b[0]).min(c[0]);
        let xmax = a[0].max(b[0]).max(c[0]);
        let ymin = a[1].min(b[1]).min(c[1]);
        let ymax = a[1].max(b[1]).max(c[1]);
        let i0 = (((xmin - lo[0]) / dx - 0.5).floor().max(0.0)) as usize;
        let i1 = ((((xmax - lo[0]) / dx - 0.5).ceil()) as usize).min(width - 1);
        let j0 = (((ymin - lo[1]) / dy - 0.5).floor().max(0.0)) as usize;
        let j1 = ((((ymax - lo[1]) / dy - 0.5).ceil()) as usize).min(height - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = [lo[0] + (i as f64 + 0.5) * dx, lo[1] + (j as f64 + 0.5) * dy];
                if point_in_triangle(p, a, b, c) {
                    // row 0 is the top of the image
                    pixels[(height - 1 - j) * width + i] = value;
                }
            }
        }
    }
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks(width) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let eps = -1e-12;
    super::signed_area(a, b, p) >= eps && super::signed_area(b, c, p) >= eps && super::signed_area(c, a, p) >= eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain, Shape};

    #[test]
    fn mesh_json_roundtrip() {
        let mesh = build_mesh(&Domain::unit_disk(), 0.3).unwrap();
        let back = Mesh::from_json(&mesh.to_json().unwrap()).unwrap();
        assert_eq!(back.nodes(), mesh.nodes());
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.boundary_edges(), mesh.boundary_edges());
    }

    #[test]
    fn mask_csv_roundtrip_and_errors() {
        let mesh = build_mesh(&Domain::unit_disk(), 0.3).unwrap();
        let mask = Shape::Ball { center: [0.0, 0.0], radius: 0.5 }.mask(&mesh);
        let csv = mask_to_csv(&mask);
        assert_eq!(mask_from_csv(&csv, mesh.n_triangles()).unwrap(), mask);
        assert!(mask_from_csv("0,2\n", mesh.n_triangles()).is_err());
        assert!(mask_from_csv("100000,1\n", mesh.n_triangles()).is_err());
    }

    #[test]
    fn pgm_has_three_levels() {
        let mesh = build_mesh(&Domain::unit_disk(), 0.2).unwrap();
        let mask = Shape::Ball { center: [0.0, 0.0], radius: 0.5 }.mask(&mesh);
        let pgm = mask_to_pgm(&mesh, &mask, 40, 40);
        let mut lines = pgm.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("40 40"));
        assert_eq!(lines.next(), Some("255"));
        let values: Vec<u8> = lines.flat_map(|l| l.split(' ').map(|v| v.parse::<u8>().unwrap())).collect();
        assert_eq!(values.len(), 1600);
        // centre is flagged, corner is outside the disk
        assert_eq!(values[20 * 40 + 20], 255);
        assert_eq!(values[0], 0);
        assert!(values.contains(&127));
    }
}
