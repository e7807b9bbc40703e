//! The five-layer scene graph: classified points, objects, terrain places, regions
//! (reserved), and the task root.

mod export;
mod render;
mod task;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{export, from_json, import, to_json, SCHEMA_VERSION};
pub use render::{labels_image, to_dot};
pub use task::{QuerySpec, TaskFile, TaskParams, TaskSpec};

use crate::error::{Error, Result};
use crate::model::{Embedding, SemanticPointCloud, Vec3};
use crate::objects::{build_object_nodes, ObjectNode};
use crate::places::{attach_objects, build_places, Attachment, PlaceGraph};
use crate::prompt::{classify, partition_terrain, QueryKind};

/// What a retained layer-1 point was classified as.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointLabel {
    Terrain { name: String },
    Object { class: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetainedPoint {
    /// Index in the source cloud.
    pub index: usize,
    pub position: Vec3,
    pub label: PointLabel,
    pub embedding: Option<Embedding>,
}

/// Layer-4 region node. The schema carries the layer; construction leaves it empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNode {
    pub id: u32,
    pub members: Vec<String>,
}

/// Query as recorded in the graph: everything but the embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInfo {
    pub text: String,
    pub kind: QueryKind,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub name: String,
    pub timestamp: f64,
    pub queries: Vec<QueryInfo>,
    pub params: TaskParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub task: TaskInfo,
    pub dim: usize,
    /// Retained points in ascending source index.
    pub layer1: Vec<RetainedPoint>,
    /// Object ids equal positions.
    pub layer2: Vec<ObjectNode>,
    /// One place graph per terrain query that matched any point, in query order.
    pub layer3: Vec<PlaceGraph>,
    pub layer4: Vec<RegionNode>,
    pub attachments: Vec<Attachment>,
}

impl SceneGraph {
    pub fn place_node_count(&self) -> usize {
        self.layer3.iter().map(|g| g.nodes.len()).sum()
    }

    pub fn place_edge_count(&self) -> usize {
        self.layer3.iter().map(|g| g.edges.len()).sum()
    }

    pub fn place_graph(&self, terrain: &str) -> Option<&PlaceGraph> {
        self.layer3.iter().find(|g| g.terrain == terrain)
    }

    /// Copy with every embedding dropped.
    pub fn without_embeddings(&self) -> SceneGraph {
        let mut g = self.clone();
        for p in &mut g.layer1 {
            p.embedding = None;
        }
        for o in &mut g.layer2 {
            o.centroid = None;
        }
        g
    }

    /// Equality ignoring embeddings, which exports omit by default.
    pub fn structurally_eq(&self, other: &SceneGraph) -> bool {
        self.without_embeddings() == other.without_embeddings()
    }

    /// Globally nearest place node to a position, compared in the plane.
    pub fn nearest_place(&self, position: &Vec3) -> Result<(String, u32)> {
        crate::places::nearest_place(&self.layer3, [position[0], position[1]])
            .map(|(t, id, _)| (t.to_string(), id))
            .ok_or(Error::NoPlaceNodes)
    }

    /// Objects of one class in id order; an empty class name selects all.
    pub fn objects_of_class(&self, class: &str) -> Vec<&ObjectNode> {
        self.layer2
            .iter()
            .filter(|o| class.is_empty() || o.class == class)
            .collect()
    }
}

/// Projects the cloud onto a task: classifies points, clusters objects, builds
/// one place graph per terrain, and links objects to their nearest place.
pub fn build_scene_graph(cloud: &SemanticPointCloud, task: &TaskSpec) -> Result<SceneGraph> {
    task.validate()?;
    let n = cloud.len();
    let terrain = if task.terrain_queries.is_empty() {
        vec![None; n]
    } else {
        partition_terrain(cloud, &task.terrain_queries)?
    };
    let results = task
        .object_queries
        .iter()
        .map(|q| classify(cloud, q))
        .collect::<Result<Vec<_>>>()?;

    let mut layer2: Vec<ObjectNode> = Vec::new();
    for r in &results {
        for mut node in build_object_nodes(cloud, r, &task.params.dbscan)? {
            node.id = layer2.len() as u32;
            layer2.push(node);
        }
    }

    // label precedence: object member, then terrain, then best-scoring object class
    let mut labels: Vec<Option<PointLabel>> = terrain
        .iter()
        .map(|t| t.as_ref().map(|name| PointLabel::Terrain { name: name.clone() }))
        .collect();
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let mut best: Option<(f64, &str)> = None;
        for r in &results {
            if let Some(&s) = r.scores.get(&i) {
                if best.map_or(true, |(b, _)| s > b) {
                    best = Some((s, r.query.class_label()));
                }
            }
        }
        labels[i] = best.map(|(_, class)| PointLabel::Object { class: class.to_string() });
    }
    for o in layer2.iter().rev() {
        for &m in &o.members {
            labels[m] = Some(PointLabel::Object { class: o.class.clone() });
        }
    }
    let layer1: Vec<RetainedPoint> = labels
        .into_iter()
        .enumerate()
        .filter_map(|(i, l)| {
            l.map(|label| RetainedPoint {
                index: i,
                position: cloud.points[i].position,
                label,
                embedding: Some(cloud.points[i].embedding.clone()),
            })
        })
        .collect();
    if layer1.is_empty() {
        return Err(Error::EmptyTaskProjection);
    }

    let layer3: Vec<PlaceGraph> = task
        .terrain_queries
        .par_iter()
        .map(|q| {
            if !terrain.iter().any(|t| t.as_deref() == Some(q.text.as_str())) {
                log::warn!("terrain {:?} matched no points; no place graph", q.text);
                return Ok(None);
            }
            build_places(cloud, &terrain, &q.text, &task.params.places).map(Some)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let has_places = layer3.iter().any(|g| !g.nodes.is_empty());
    let attachments = if has_places {
        attach_objects(&layer3, &layer2)?
    } else {
        if !layer2.is_empty() {
            log::warn!("no place nodes; {} objects stay unattached", layer2.len());
        }
        Vec::new()
    };

    log::info!(
        "task {:?}: {} layer-1 points, {} objects, {} place graphs ({} nodes)",
        task.name,
        layer1.len(),
        layer2.len(),
        layer3.len(),
        layer3.iter().map(|g| g.nodes.len()).sum::<usize>()
    );
    Ok(SceneGraph {
        task: TaskInfo {
            name: task.name.clone(),
            timestamp: task.timestamp,
            queries: task
                .queries()
                .map(|q| QueryInfo {
                    text: q.text.clone(),
                    kind: q.kind,
                    threshold: q.threshold,
                })
                .collect(),
            params: task.params,
        },
        dim: cloud.dim,
        layer1,
        layer2,
        layer3,
        layer4: Vec::new(),
        attachments,
    })
}
