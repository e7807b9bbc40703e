//! Terrain-aware place graphs: one occupancy grid per terrain label, its distance
//! map and Voronoi skeleton, and the refined node/edge graph on top of it.

pub mod distance;
pub mod grid;
pub mod gvd;
pub mod pgm;
pub mod refine;

use serde::{Deserialize, Serialize};

pub use distance::{brushfire, DistanceMap};
pub use grid::{morph_smooth, rasterize, Cell, GridGeometry, OccupancyGrid};
pub use gvd::{designate_nodes, extract_gvd, prune_spurs, seed_components, CellKind, GvdSkeleton};
pub use refine::{flood_fill, refine_graph, PlaceEdge, PlaceGraph, PlaceNode};

use crate::error::{Error, Result};
use crate::model::SemanticPointCloud;
use crate::objects::ObjectNode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaceConfig {
    /// Meters per grid cell.
    pub resolution: f64,
    /// Cells; 0 disables smoothing.
    pub morph_radius: usize,
    /// Cells.
    pub min_clearance: f64,
    /// Cells.
    pub spur_length: usize,
    /// Cells.
    pub deviation_threshold: f64,
    /// Cells.
    pub max_edge_length: usize,
    pub max_refine_iterations: usize,
}

impl Default for PlaceConfig {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            morph_radius: 1,
            min_clearance: 1.0,
            spur_length: 5,
            deviation_threshold: 2.0,
            max_edge_length: 20,
            max_refine_iterations: 10,
        }
    }
}

impl PlaceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.resolution) {
            return Err(Error::invalid("place resolution must be positive"));
        }
        if !positive(self.min_clearance) || !positive(self.deviation_threshold) {
            return Err(Error::invalid("clearance and deviation thresholds must be positive"));
        }
        if self.spur_length == 0 || self.max_edge_length == 0 || self.max_refine_iterations == 0 {
            return Err(Error::invalid(
                "spur length, max edge length and refine iterations must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Every intermediate product of one terrain's pipeline.
#[derive(Debug, Clone)]
pub struct PlaceStages {
    pub grid: OccupancyGrid,
    pub smoothed: OccupancyGrid,
    pub distance: DistanceMap,
    /// Pruned skeleton with nodes designated.
    pub skeleton: GvdSkeleton,
    pub graph: PlaceGraph,
}

/// Runs the whole place pipeline for one terrain label and keeps the intermediates.
pub fn build_place_stages(
    cloud: &SemanticPointCloud,
    labels: &[Option<String>],
    label: &str,
    cfg: &PlaceConfig,
) -> Result<PlaceStages> {
    cfg.validate()?;
    let grid = rasterize(cloud, labels, label, cfg.resolution)?;
    let smoothed = morph_smooth(&grid, cfg.morph_radius);
    let distance = brushfire(&smoothed)?;
    let raw = extract_gvd(&distance, cfg.min_clearance);
    let pruned = prune_spurs(&raw, cfg.spur_length);
    // components the junction/corner rules leave bare still need a node to stay visible
    let skeleton = seed_components(&designate_nodes(&pruned));
    let graph = if skeleton.is_empty() {
        log::warn!("terrain '{label}' has an empty skeleton; no place nodes");
        PlaceGraph::empty(label, smoothed.geometry)
    } else {
        refine_graph(&skeleton, cfg)?
    };
    log::debug!(
        "terrain '{label}': {} cells, skeleton {}, {} nodes, {} edges after {} rounds",
        smoothed.count(),
        skeleton.len(),
        graph.nodes.len(),
        graph.edges.len(),
        graph.iterations
    );
    Ok(PlaceStages {
        grid,
        smoothed,
        distance,
        skeleton,
        graph,
    })
}

pub fn build_places(
    cloud: &SemanticPointCloud,
    labels: &[Option<String>],
    label: &str,
    cfg: &PlaceConfig,
) -> Result<PlaceGraph> {
    build_place_stages(cloud, labels, label, cfg).map(|s| s.graph)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub object: u32,
    pub terrain: String,
    pub node: u32,
}

/// Nearest place node to a world (x, y) across all graphs. Distances within 1e-12
/// count as equal and go to the smaller `(terrain, node id)`.
pub fn nearest_place<'a>(graphs: &'a [PlaceGraph], xy: [f64; 2]) -> Option<(&'a str, u32, f64)> {
    let mut best: Option<(&str, u32, f64)> = None;
    for g in graphs {
        for n in &g.nodes {
            let d = (n.position[0] - xy[0]).hypot(n.position[1] - xy[1]);
            let better = match best {
                None => true,
                Some((t, id, bd)) => {
                    d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && (g.terrain.as_str(), n.id) < (t, id))
                }
            };
            if better {
                best = Some((g.terrain.as_str(), n.id, d));
            }
        }
    }
    best
}

/// Links each object to the place node closest to its box center in the plane.
pub fn attach_objects(graphs: &[PlaceGraph], objects: &[ObjectNode]) -> Result<Vec<Attachment>> {
    if objects.is_empty() {
        return Ok(Vec::new());
    }
    objects
        .iter()
        .map(|o| {
            let c = o.center();
            let (terrain, node, _) = nearest_place(graphs, [c[0], c[1]]).ok_or(Error::NoPlaceNodes)?;
            Ok(Attachment {
                object: o.id,
                terrain: terrain.to_string(),
                node,
            })
        })
        .collect()
}
