//! `tsg/1` JSON documents. Every cross-reference is an explicit string id:
//! `point:{index}`, `object:{id}`, `place:{terrain}:{id}`, `cell:{terrain}:{row}:{col}`,
//! `region:{id}` and `root`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PointLabel, RegionNode, RetainedPoint, SceneGraph, TaskInfo};
use crate::error::{Error, Result};
use crate::model::{Embedding, Vec3};
use crate::objects::ObjectNode;
use crate::places::{Attachment, Cell, GridGeometry, PlaceEdge, PlaceGraph, PlaceNode};

pub const SCHEMA_VERSION: &str = "tsg/1";

#[derive(Serialize, Deserialize)]
struct Doc {
    version: String,
    task: TaskInfo,
    layers: Layers,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct Layers {
    l1: PointsDoc,
    l2: Vec<ObjectDoc>,
    l3: Vec<PlaceGraphDoc>,
    l4: Vec<RegionDoc>,
    l5: RootDoc,
}

#[derive(Serialize, Deserialize)]
struct PointsDoc {
    dim: usize,
    points: Vec<PointDoc>,
}

#[derive(Serialize, Deserialize)]
struct PointDoc {
    id: String,
    position: Vec3,
    label: PointLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    id: String,
    class: String,
    min: Vec3,
    max: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centroid: Option<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
struct PlaceGraphDoc {
    terrain: String,
    grid: GridGeometry,
    iterations: usize,
    converged: bool,
    /// Skeleton cells as `[row, col]`.
    cells: Vec<[usize; 2]>,
    nodes: Vec<PlaceNodeDoc>,
    edges: Vec<PlaceEdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct PlaceNodeDoc {
    id: String,
    cell: [usize; 2],
    position: [f64; 2],
    clearance: f64,
}

#[derive(Serialize, Deserialize)]
struct PlaceEdgeDoc {
    from: String,
    to: String,
    chain: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RegionDoc {
    id: String,
    members: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RootDoc {
    id: String,
    task: String,
    timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EdgeKind {
    RootPlace,
    RootObject,
    ObjectPlace,
    ObjectPoint,
    PlaceCell,
}

impl EdgeKind {
    fn name(self) -> &'static str {
        match self {
            EdgeKind::RootPlace => "root_place",
            EdgeKind::RootObject => "root_object",
            EdgeKind::ObjectPlace => "object_place",
            EdgeKind::ObjectPoint => "object_point",
            EdgeKind::PlaceCell => "place_cell",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    kind: EdgeKind,
    from: String,
    to: String,
}

const ROOT: &str = "root";

fn point_id(index: usize) -> String {
    format!("point:{index}")
}

fn object_id(id: u32) -> String {
    format!("object:{id}")
}

fn place_id(terrain: &str, id: u32) -> String {
    format!("place:{terrain}:{id}")
}

fn cell_id(terrain: &str, c: &Cell) -> String {
    format!("cell:{terrain}:{}:{}", c.row, c.col)
}

fn rc(c: &Cell) -> [usize; 2] {
    [c.row, c.col]
}

fn cell(v: &[usize; 2]) -> Cell {
    Cell::new(v[0], v[1])
}

fn to_doc(g: &SceneGraph, embed: bool) -> Doc {
    let l1 = PointsDoc {
        dim: g.dim,
        points: g
            .layer1
            .iter()
            .map(|p| PointDoc {
                id: point_id(p.index),
                position: p.position,
                label: p.label.clone(),
                embedding: p
                    .embedding
                    .as_ref()
                    .filter(|_| embed)
                    .map(|e| e.values().to_vec()),
            })
            .collect(),
    };
    let l2 = g
        .layer2
        .iter()
        .map(|o| ObjectDoc {
            id: object_id(o.id),
            class: o.class.clone(),
            min: o.min,
            max: o.max,
            centroid: o
                .centroid
                .as_ref()
                .filter(|_| embed)
                .map(|e| e.values().to_vec()),
        })
        .collect();
    let l3 = g
        .layer3
        .iter()
        .map(|pg| {
            let t = &pg.terrain;
            let cells: BTreeSet<Cell> = pg.nodes.iter().flat_map(|n| n.region.iter().copied()).collect();
            PlaceGraphDoc {
                terrain: t.clone(),
                grid: pg.geometry,
                iterations: pg.iterations,
                converged: pg.converged,
                cells: cells.iter().map(rc).collect(),
                nodes: pg
                    .nodes
                    .iter()
                    .map(|n| PlaceNodeDoc {
                        id: place_id(t, n.id),
                        cell: rc(&n.cell),
                        position: n.position,
                        clearance: n.clearance,
                    })
                    .collect(),
                edges: pg
                    .edges
                    .iter()
                    .map(|e| PlaceEdgeDoc {
                        from: place_id(t, e.source),
                        to: place_id(t, e.target),
                        chain: e.chain.iter().map(rc).collect(),
                    })
                    .collect(),
            }
        })
        .collect();
    let l4 = g
        .layer4
        .iter()
        .map(|r| RegionDoc {
            id: format!("region:{}", r.id),
            members: r.members.clone(),
        })
        .collect();

    let mut edges = Vec::new();
    let mut push = |kind, from: String, to: String| edges.push(EdgeDoc { kind, from, to });
    for pg in &g.layer3 {
        for n in &pg.nodes {
            push(EdgeKind::RootPlace, ROOT.into(), place_id(&pg.terrain, n.id));
        }
    }
    for o in &g.layer2 {
        push(EdgeKind::RootObject, ROOT.into(), object_id(o.id));
    }
    for a in &g.attachments {
        push(EdgeKind::ObjectPlace, object_id(a.object), place_id(&a.terrain, a.node));
    }
    for o in &g.layer2 {
        for &m in &o.members {
            push(EdgeKind::ObjectPoint, object_id(o.id), point_id(m));
        }
    }
    for pg in &g.layer3 {
        for n in &pg.nodes {
            for c in &n.region {
                push(EdgeKind::PlaceCell, place_id(&pg.terrain, n.id), cell_id(&pg.terrain, c));
            }
        }
    }
    Doc {
        version: SCHEMA_VERSION.into(),
        task: g.task.clone(),
        layers: Layers {
            l1,
            l2,
            l3,
            l4,
            l5: RootDoc {
                id: ROOT.into(),
                task: g.task.name.clone(),
                timestamp: g.task.timestamp,
            },
        },
        edges,
    }
}

/// Serializes a graph; embeddings are included only when `embed` is set.
pub fn to_json(g: &SceneGraph, embed: bool) -> Result<String> {
    serde_json::to_string(&to_doc(g, embed))
        .map(|s| s + "\n")
        .map_err(|e| Error::json("scene graph", e))
}

pub fn export(g: &SceneGraph, path: impl AsRef<Path>, embed: bool) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(g, embed)?).map_err(|e| Error::io(path, e))
}

pub fn import(path: impl AsRef<Path>) -> Result<SceneGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

// which element an id names, as seen by edge validation
#[derive(Clone, Copy)]
enum Target {
    Root,
    Point(usize),
    Object(usize),
    Place(usize, u32),
    Cell(usize, Cell),
}

pub fn from_json(text: &str) -> Result<SceneGraph> {
    // check the version before the shape so newer documents fail clearly
    let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::json("scene graph", e))?;
    match probe.get("version").and_then(|v| v.as_str()) {
        Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(Error::UnknownSchemaVersion(v.to_string())),
        None => return Err(Error::UnknownSchemaVersion(String::new())),
    }
    let doc: Doc = serde_json::from_value(probe).map_err(|e| Error::json("scene graph", e))?;
    from_doc(doc)
}

fn embedding(values: Option<Vec<f32>>, dim: usize) -> Result<Option<Embedding>> {
    values
        .map(|v| {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            Embedding::from_stored(v)
        })
        .transpose()
}

fn define(ids: &mut HashMap<String, Target>, id: &str, t: Target) -> Result<()> {
    if ids.insert(id.to_string(), t).is_some() {
        return Err(Error::invalid(format!("duplicate id {id:?}")));
    }
    Ok(())
}

fn from_doc(doc: Doc) -> Result<SceneGraph> {
    let l = doc.layers;
    let dim = l.l1.dim;
    let mut ids: HashMap<String, Target> = HashMap::new();
    if l.l5.id != ROOT {
        return Err(Error::invalid(format!("root id must be {ROOT:?}")));
    }
    define(&mut ids, ROOT, Target::Root)?;

    let mut layer1 = Vec::with_capacity(l.l1.points.len());
    for p in l.l1.points {
        let index = p
            .id
            .strip_prefix("point:")
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::invalid(format!("bad point id {:?}", p.id)))?;
        define(&mut ids, &p.id, Target::Point(index))?;
        layer1.push(RetainedPoint {
            index,
            position: p.position,
            label: p.label,
            embedding: embedding(p.embedding, dim)?,
        });
    }
    if layer1.windows(2).any(|w| w[0].index >= w[1].index) {
        return Err(Error::invalid("layer-1 points must be in ascending index order"));
    }

    let mut layer2 = Vec::with_capacity(l.l2.len());
    for (k, o) in l.l2.into_iter().enumerate() {
        if o.id != object_id(k as u32) {
            return Err(Error::invalid(format!("object {:?} out of order", o.id)));
        }
        define(&mut ids, &o.id, Target::Object(k))?;
        layer2.push(ObjectNode {
            id: k as u32,
            class: o.class,
            min: o.min,
            max: o.max,
            members: Vec::new(),
            centroid: embedding(o.centroid, dim)?,
        });
    }

    let mut layer3 = Vec::with_capacity(l.l3.len());
    for (gi, pg) in l.l3.into_iter().enumerate() {
        let t = pg.terrain.clone();
        for c in &pg.cells {
            define(&mut ids, &cell_id(&t, &cell(c)), Target::Cell(gi, cell(c)))?;
        }
        let mut nodes = Vec::with_capacity(pg.nodes.len());
        for (k, n) in pg.nodes.into_iter().enumerate() {
            if n.id != place_id(&t, k as u32) {
                return Err(Error::invalid(format!("place {:?} out of order", n.id)));
            }
            define(&mut ids, &n.id, Target::Place(gi, k as u32))?;
            nodes.push(PlaceNode {
                id: k as u32,
                cell: cell(&n.cell),
                position: n.position,
                clearance: n.clearance,
                region: Vec::new(),
            });
        }
        let mut edges = Vec::with_capacity(pg.edges.len());
        for (k, e) in pg.edges.into_iter().enumerate() {
            let end = |id: &String| match ids.get(id) {
                Some(&Target::Place(g, n)) if g == gi => Ok(n),
                _ => Err(Error::DanglingEdge {
                    index: k,
                    kind: format!("place_place ({t})"),
                    id: id.clone(),
                }),
            };
            edges.push(PlaceEdge {
                source: end(&e.from)?,
                target: end(&e.to)?,
                chain: e.chain.iter().map(cell).collect(),
            });
        }
        layer3.push(PlaceGraph {
            terrain: t,
            geometry: pg.grid,
            nodes,
            edges,
            iterations: pg.iterations,
            converged: pg.converged,
        });
    }

    let layer4 = l
        .l4
        .into_iter()
        .map(|r| {
            let id = r
                .id
                .strip_prefix("region:")
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| Error::invalid(format!("bad region id {:?}", r.id)))?;
            Ok(RegionNode { id, members: r.members })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut regions: BTreeMap<(usize, u32), Vec<Cell>> = BTreeMap::new();
    let mut attachments = Vec::new();
    for (i, e) in doc.edges.iter().enumerate() {
        let dangling = |id: &String| Error::DanglingEdge {
            index: i,
            kind: e.kind.name().to_string(),
            id: id.clone(),
        };
        let from = *ids.get(&e.from).ok_or_else(|| dangling(&e.from))?;
        let to = *ids.get(&e.to).ok_or_else(|| dangling(&e.to))?;
        match (e.kind, from, to) {
            (EdgeKind::RootPlace, Target::Root, Target::Place(..)) => {}
            (EdgeKind::RootObject, Target::Root, Target::Object(_)) => {}
            (EdgeKind::ObjectPlace, Target::Object(o), Target::Place(g, n)) => attachments.push(Attachment {
                object: o as u32,
                terrain: layer3[g].terrain.clone(),
                node: n,
            }),
            (EdgeKind::ObjectPoint, Target::Object(o), Target::Point(p)) => {
                members.entry(o).or_default().push(p)
            }
            (EdgeKind::PlaceCell, Target::Place(g, n), Target::Cell(gc, c)) if g == gc => {
                regions.entry((g, n)).or_default().push(c)
            }
            _ => {
                return Err(Error::invalid(format!(
                    "edge {i} of kind {} cannot link {:?} to {:?}",
                    e.kind.name(),
                    e.from,
                    e.to
                )))
            }
        }
    }
    for (o, mut m) in members {
        m.sort_unstable();
        layer2[o].members = m;
    }
    for ((g, n), mut cells) in regions {
        cells.sort_unstable();
        layer3[g].nodes[n as usize].region = cells;
    }

    Ok(SceneGraph {
        task: doc.task,
        dim,
        layer1,
        layer2,
        layer3,
        layer4,
        attachments,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{toy_cloud, toy_task};
    use super::super::*;
    use super::*;

    fn root_only() -> SceneGraph {
        SceneGraph {
            task: TaskInfo {
                name: "empty".into(),
                timestamp: 0.0,
                queries: vec![],
                params: TaskParams::default(),
            },
            dim: 4,
            layer1: vec![],
            layer2: vec![],
            layer3: vec![],
            layer4: vec![],
            attachments: vec![],
        }
    }

    #[test]
    fn root_only_roundtrip() {
        let g = root_only();
        let back = from_json(&to_json(&g, false).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn full_roundtrip() {
        let g = build_scene_graph(&toy_cloud(), &toy_task()).unwrap();
        let plain = from_json(&to_json(&g, false).unwrap()).unwrap();
        assert!(plain.structurally_eq(&g));
        assert!(plain.layer1.iter().all(|p| p.embedding.is_none()));
        let embedded = from_json(&to_json(&g, true).unwrap()).unwrap();
        assert_eq!(embedded, g);
        // byte-stable
        assert_eq!(to_json(&plain, false).unwrap(), to_json(&g, false).unwrap());
    }

    #[test]
    fn dangling_edge_named() {
        let g = build_scene_graph(&toy_cloud(), &toy_task()).unwrap();
        let text = to_json(&g, false).unwrap();
        let bad = text.replacen("\"to\":\"object:1\"", "\"to\":\"object:99\"", 1);
        assert_ne!(bad, text);
        match from_json(&bad) {
            Err(Error::DanglingEdge { id, kind, .. }) => {
                assert_eq!(id, "object:99");
                assert_eq!(kind, "root_object");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_version() {
        let text = to_json(&root_only(), false).unwrap().replace("tsg/1", "tsg/9");
        assert!(matches!(from_json(&text), Err(Error::UnknownSchemaVersion(v)) if v == "tsg/9"));
    }
}
