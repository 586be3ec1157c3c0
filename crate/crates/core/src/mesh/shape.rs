use serde::{Deserialize, Serialize};

use super::{Mesh, RegionMask};

/// Point-set description used to build element masks from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    All,
    Nothing,
    Ball { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    /// `{x : x·normal ≤ offset}`
    HalfPlane { normal: [f64; 2], offset: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
    Union(Vec<Shape>),
    Intersection(Vec<Shape>),
    Complement(Box<Shape>),
}

impl Shape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Shape::All => true,
            Shape::Nothing => false,
            Shape::Ball { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) < *radius,
            Shape::Annulus { center, inner, outer } => {
                let r = (p[0] - center[0]).hypot(p[1] - center[1]);
                r > *inner && r < *outer
            }
            Shape::HalfPlane { normal, offset } => p[0] * normal[0] + p[1] * normal[1] <= *offset,
            Shape::Rect { min, max } => p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1],
            Shape::Union(parts) => parts.iter().any(|s| s.contains(p)),
            Shape::Intersection(parts) => parts.iter().all(|s| s.contains(p)),
            Shape::Complement(s) => !s.contains(p),
        }
    }

    pub fn mask(&self, mesh: &Mesh) -> RegionMask {
        RegionMask::from_predicate(mesh, |p| self.contains(p))
    }
}
