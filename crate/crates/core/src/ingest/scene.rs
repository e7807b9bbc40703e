//! Synthetic scene description (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CameraModel, Embedding, Pose, Vec3, DEFAULT_DIM};
use crate::prompt::{object_prompt, pseudo_encode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainPatch {
    pub label: String,
    /// Ground-plane polygon (z = 0), vertices in order.
    pub polygon: Vec<[f64; 2]>,
    /// Explicit embedding; the pseudo-encoding of `label` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: String,
    pub center: Vec3,
    /// Full side lengths of the axis-aligned box.
    pub extents: Vec3,
    /// Explicit embedding; the pseudo-encoding of `"image of a {class}"` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

impl SceneObject {
    pub fn min(&self) -> Vec3 {
        std::array::from_fn(|a| self.center[a] - self.extents[a] / 2.0)
    }

    pub fn max(&self) -> Vec3 {
        std::array::from_fn(|a| self.center[a] + self.extents[a] / 2.0)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let (lo, hi) = (self.min(), self.max());
        x > lo[0] && x < hi[0] && y > lo[1] && y < hi[1]
    }
}

fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_ground_spacing() -> f64 {
    0.25
}
fn default_object_spacing() -> f64 {
    0.2
}
fn default_scan_range() -> f64 {
    60.0
}
fn default_frame_interval() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub camera: CameraModel,
    pub terrain: Vec<TerrainPatch>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    /// Sensor-to-world poses, one frame each.
    pub trajectory: Vec<Pose>,
    /// Scan point jitter standard deviation, meters.
    #[serde(default)]
    pub noise: f64,
    /// Spacing of sampled ground points, meters. Sets the map density.
    #[serde(default = "default_ground_spacing")]
    pub ground_spacing: f64,
    /// Spacing of sampled object surface points, meters.
    #[serde(default = "default_object_spacing")]
    pub object_spacing: f64,
    /// Maximum sensor range, meters.
    #[serde(default = "default_scan_range")]
    pub scan_range: f64,
    #[serde(default = "default_frame_interval")]
    pub frame_interval: f64,
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// True if the closed polygon has no crossing non-adjacent edges.
pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if self.dim == 0 {
            return Err(Error::invalid("scene dimension must be positive"));
        }
        for p in &self.terrain {
            if p.label.is_empty() {
                return Err(Error::invalid("terrain patch needs a label"));
            }
            if !polygon_is_simple(&p.polygon) {
                return Err(Error::invalid(format!(
                    "terrain polygon {:?} is not simple",
                    p.label
                )));
            }
        }
        for o in &self.objects {
            if o.extents.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::invalid(format!(
                    "object {:?} needs strictly positive extents",
                    o.class
                )));
            }
        }
        let embeddings = self
            .terrain
            .iter()
            .map(|p| p.embedding.as_ref())
            .chain(self.objects.iter().map(|o| o.embedding.as_ref()));
        for e in embeddings.flatten() {
            if e.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: e.len(),
                });
            }
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("noise must be non-negative"));
        }
        if !(self.ground_spacing > 0.0 && self.object_spacing > 0.0 && self.scan_range > 0.0) {
            return Err(Error::invalid("spacings and scan range must be positive"));
        }
        Ok(())
    }

    pub fn terrain_embedding(&self, i: usize) -> Result<Embedding> {
        match &self.terrain[i].embedding {
            Some(v) => Embedding::from_f32(v),
            None => Ok(pseudo_encode(&self.terrain[i].label, self.dim)),
        }
    }

    pub fn object_embedding(&self, i: usize) -> Result<Embedding> {
        match &self.objects[i].embedding {
            Some(v) => Embedding::from_f32(v),
            None => Ok(pseudo_encode(&object_prompt(&self.objects[i].class), self.dim)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(|e| Error::json("scene spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SceneSpec = serde_json::from_str(&text)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Downward-looking camera at the given height above the ground plane.
    pub fn nadir_pose(x: f64, y: f64, height: f64) -> Pose {
        // 180° about x: sensor z points down
        Pose::from_array([0.0, 1.0, 0.0, 0.0, x, y, height]).expect("unit quaternion")
    }

    /// Three terrain patches in a T layout with two trees and two cars.
    ///
    /// Grass (x 0–19, y 0–20) and a 4 m sidewalk (x 19–23, y 0–20) meet a 7 m
    /// asphalt road (y 20–27) running across the top.
    pub fn t_layout() -> Self {
        let patch = |label: &str, polygon| TerrainPatch {
            label: label.into(),
            polygon,
            embedding: None,
        };
        let object = |class: &str, center, extents| SceneObject {
            class: class.into(),
            center,
            extents,
            embedding: None,
        };
        SceneSpec {
            dim: DEFAULT_DIM,
            camera: CameraModel {
                fx: 120.0,
                fy: 120.0,
                cx: 119.5,
                cy: 119.5,
                width: 240,
                height: 240,
                extrinsic: Pose::identity(),
            },
            terrain: vec![
                patch("grass", rect(0.0, 0.0, 19.0, 20.0)),
                patch("sidewalk", rect(19.0, 0.0, 23.0, 20.0)),
                patch("asphalt", rect(0.0, 20.0, 42.0, 27.0)),
            ],
            objects: vec![
                object("tree", [6.0, 7.0, 2.0], [1.2, 1.2, 4.0]),
                object("tree", [12.0, 14.0, 2.0], [1.2, 1.2, 4.0]),
                object("car", [9.0, 23.5, 0.75], [4.0, 2.0, 1.5]),
                object("car", [33.0, 23.5, 0.75], [4.0, 2.0, 1.5]),
            ],
            trajectory: vec![
                Self::nadir_pose(21.0, 4.0, 16.0),
                Self::nadir_pose(21.0, 14.0, 16.0),
                Self::nadir_pose(9.0, 10.0, 16.0),
                Self::nadir_pose(9.0, 23.0, 16.0),
                Self::nadir_pose(21.0, 23.5, 16.0),
                Self::nadir_pose(33.0, 23.5, 16.0),
            ],
            noise: 0.0,
            ground_spacing: 0.25,
            object_spacing: 0.2,
            scan_range: 60.0,
            frame_interval: 0.1,
        }
    }
}
