//! Projects scans into the camera, associates points with segment-mask embeddings,
//! matches them to the sparse global map, and folds embeddings per map point.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ScanFrame;
use crate::ingest::SegmentMask;
use crate::model::{CameraModel, Embedding, SemanticPointCloud, Vec3};
use crate::raster::Border;
use crate::spatial::KdTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub source: usize,
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationConfig {
    /// Scan-to-map nearest-neighbor acceptance radius, meters.
    pub match_radius: f64,
    /// Masks shrink by this many pixels before association.
    pub interior_erosion: usize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            match_radius: 0.25,
            interior_erosion: 2,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.match_radius > 0.0 && self.match_radius.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("match radius must be positive"))
        }
    }
}

/// Applies the extrinsic then the pinhole model. Points behind the camera or outside the
/// image are dropped; survivors keep input order.
pub fn project_points(points: &[Vec3], camera: &CameraModel) -> Vec<ProjectedPoint> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let c = camera.extrinsic.transform(p);
            let (u, v) = camera.project_camera_point(&c)?;
            camera.in_bounds(u, v).then_some(ProjectedPoint {
                source: i,
                u,
                v,
                depth: c[2],
            })
        })
        .collect()
}

/// Maps projected points to mask embeddings by rounded-pixel lookup in eroded masks.
///
/// Overlaps resolve terrain before object-agnostic, then smaller area, then mask order.
pub fn associate_masks(
    projected: &[ProjectedPoint],
    masks: &[SegmentMask],
    cfg: &AssociationConfig,
    camera: &CameraModel,
) -> Result<BTreeMap<usize, Embedding>> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    for m in masks {
        if m.bitmap.width != w || m.bitmap.height != h {
            return Err(Error::invalid(format!(
                "mask is {}x{} but camera is {w}x{h}",
                m.bitmap.width, m.bitmap.height
            )));
        }
    }
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by_key(|&i| (!masks[i].is_terrain(), masks[i].area(), i));
    let mut owner = vec![usize::MAX; w * h];
    for &i in &order {
        let eroded = masks[i].bitmap.erode(cfg.interior_erosion, Border::Ignore);
        for (o, &b) in owner.iter_mut().zip(&eroded.data) {
            if b && *o == usize::MAX {
                *o = i;
            }
        }
    }
    let mut out = BTreeMap::new();
    for p in projected {
        let (u, v) = (p.u.round(), p.v.round());
        if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
            continue;
        }
        let k = owner[v as usize * w + u as usize];
        if k != usize::MAX {
            out.insert(p.source, masks[k].embedding.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuseStats {
    pub frames: usize,
    pub scan_points: usize,
    pub projected: usize,
    /// Scan points that acquired a mask embedding.
    pub associated: usize,
    /// Associated scan points matched to a map point; each produced one fold.
    pub matched: usize,
}

impl FuseStats {
    fn add(&mut self, o: &FuseStats) {
        self.frames += o.frames;
        self.scan_points += o.scan_points;
        self.projected += o.projected;
        self.associated += o.associated;
        self.matched += o.matched;
    }
}

/// Per-frame progress report passed to the [`fuse_all`] hook.
#[derive(Debug, Clone, Copy)]
pub struct FrameProgress {
    pub index: usize,
    pub timestamp: f64,
    pub stats: FuseStats,
}

/// Map-side fusion state: the global cloud plus its spatial index.
pub struct Fuser<'a> {
    cloud: &'a mut SemanticPointCloud,
    index: KdTree,
    camera: &'a CameraModel,
    cfg: AssociationConfig,
}

impl<'a> Fuser<'a> {
    pub fn new(
        cloud: &'a mut SemanticPointCloud,
        camera: &'a CameraModel,
        cfg: AssociationConfig,
    ) -> Result<Self> {
        camera.validate()?;
        cfg.validate()?;
        let index = KdTree::new(&cloud.positions());
        Ok(Self {
            cloud,
            index,
            camera,
            cfg,
        })
    }

    pub fn fuse(&mut self, frame: &ScanFrame) -> Result<FuseStats> {
        let mut stats = FuseStats {
            frames: 1,
            scan_points: frame.points.len(),
            ..Default::default()
        };
        for m in &frame.masks {
            if m.embedding.dim() != self.cloud.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.cloud.dim,
                    found: m.embedding.dim(),
                });
            }
        }
        let projected = project_points(&frame.points, self.camera);
        stats.projected = projected.len();
        let assoc = associate_masks(&projected, &frame.masks, &self.cfg, self.camera)?;
        stats.associated = assoc.len();
        if self.index.is_empty() {
            return Ok(stats);
        }
        let pose = frame.pose;
        let radius = self.cfg.match_radius;
        let index = &self.index;
        let entries: Vec<(&usize, &Embedding)> = assoc.iter().collect();
        let mut matches: Vec<(usize, usize, &Embedding)> = entries
            .par_iter()
            .filter_map(|&(&scan_idx, emb)| {
                let world = pose.transform(&frame.points[scan_idx]);
                index
                    .nearest_within(&world, radius)
                    .map(|(g, _)| (g, scan_idx, emb))
            })
            .collect();
        // single writer, grouped by map point, scan order within a group
        matches.sort_by_key(|&(g, s, _)| (g, s));
        for (g, _, emb) in &matches {
            self.cloud.points[*g].observe(emb)?;
        }
        stats.matched = matches.len();
        Ok(stats)
    }
}

/// Fuses one frame into the global cloud. Point positions never change.
pub fn fuse_frame(
    global: &mut SemanticPointCloud,
    frame: &ScanFrame,
    camera: &CameraModel,
    cfg: &AssociationConfig,
) -> Result<FuseStats> {
    Fuser::new(global, camera, *cfg)?.fuse(frame)
}

/// Left fold of [`fuse_frame`] over a frame stream, calling `progress` after each frame.
pub fn fuse_all<I>(
    global: &mut SemanticPointCloud,
    frames: I,
    camera: &CameraModel,
    cfg: &AssociationConfig,
    mut progress: impl FnMut(&FrameProgress),
) -> Result<FuseStats>
where
    I: IntoIterator<Item = Result<ScanFrame>>,
{
    let mut fuser = Fuser::new(global, camera, *cfg)?;
    let mut total = FuseStats::default();
    for (index, frame) in frames.into_iter().enumerate() {
        let frame = frame?;
        let stats = fuser.fuse(&frame)?;
        total.add(&stats);
        progress(&FrameProgress {
            index,
            timestamp: frame.timestamp,
            stats,
        });
    }
    Ok(total)
}
