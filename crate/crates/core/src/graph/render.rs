use std::fmt::Write;

use super::{PointLabel, SceneGraph};
use crate::places::{pgm, GridGeometry};

/// Graphviz text for the place graphs (optionally one terrain), with objects as boxes
/// linked to their attachment node by dashed edges.
pub fn to_dot(g: &SceneGraph, terrain: Option<&str>) -> String {
    let mut out = String::from("graph tsg {\n");
    let shown = |t: &str| terrain.map_or(true, |want| want == t);
    for pg in g.layer3.iter().filter(|pg| shown(&pg.terrain)) {
        for n in &pg.nodes {
            let _ = writeln!(
                out,
                "  \"place:{t}:{id}\" [label=\"{t} {id}\", pos=\"{x},{y}!\"];",
                t = pg.terrain,
                id = n.id,
                x = n.position[0],
                y = n.position[1]
            );
        }
        for e in &pg.edges {
            let _ = writeln!(
                out,
                "  \"place:{t}:{a}\" -- \"place:{t}:{b}\" [len={l}];",
                t = pg.terrain,
                a = e.source,
                b = e.target,
                l = e.length()
            );
        }
    }
    for a in g.attachments.iter().filter(|a| shown(&a.terrain)) {
        let o = &g.layer2[a.object as usize];
        let c = o.center();
        let _ = writeln!(
            out,
            "  \"object:{id}\" [shape=box, label=\"{class} {id}\", pos=\"{x},{y}!\"];",
            id = o.id,
            class = o.class,
            x = c[0],
            y = c[1]
        );
        let _ = writeln!(
            out,
            "  \"object:{}\" -- \"place:{}:{}\" [style=dashed];",
            o.id, a.terrain, a.node
        );
    }
    out.push_str("}\n");
    out
}

/// Top view of layer 1: objects black, terrains as evenly spaced grays from 64 to 192
/// in query order, empty cells white.
pub fn labels_image(g: &SceneGraph, resolution: f64) -> Vec<u8> {
    let terrains: Vec<&str> = g
        .task
        .queries
        .iter()
        .filter(|q| q.kind == crate::prompt::QueryKind::Terrain)
        .map(|q| q.text.as_str())
        .collect();
    let shade_of = |label: &PointLabel| -> u8 {
        match label {
            PointLabel::Object { .. } => 0,
            PointLabel::Terrain { name } => {
                let k = terrains.iter().position(|t| t == name).unwrap_or(0);
                if terrains.len() <= 1 {
                    128
                } else {
                    (64 + k * 128 / (terrains.len() - 1)) as u8
                }
            }
        }
    };
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &g.layer1 {
        for a in 0..2 {
            lo[a] = lo[a].min(p.position[a]);
            hi[a] = hi[a].max(p.position[a]);
        }
    }
    if g.layer1.is_empty() {
        lo = [0.0; 2];
        hi = [0.0; 2];
    }
    let span = |a: usize| ((hi[a] - lo[a]) / resolution).floor() as usize + 1;
    let geometry = GridGeometry {
        origin: lo,
        resolution,
        width: span(0),
        height: span(1),
    };
    let mut shade = vec![255u8; geometry.len()];
    for p in &g.layer1 {
        if let Some(c) = geometry.cell_of(p.position[0], p.position[1]).or_else(|| {
            // the max edge can land exactly on the far boundary
            let col = (((p.position[0] - lo[0]) / resolution).floor() as usize).min(geometry.width - 1);
            let row = (((p.position[1] - lo[1]) / resolution).floor() as usize).min(geometry.height - 1);
            Some(crate::places::Cell::new(row, col))
        }) {
            let i = geometry.index(&c);
            // darker wins, so objects sit on top of terrain
            shade[i] = shade[i].min(shade_of(&p.label));
        }
    }
    pgm::encode(&geometry, |c| shade[geometry.index(&c)])
}

#[cfg(test)]
mod tests {
    use super::super::tests::{toy_cloud, toy_task};
    use super::super::*;
    use super::*;

    #[test]
    fn dot_counts() {
        let g = build_scene_graph(&toy_cloud(), &toy_task()).unwrap();
        let dot = to_dot(&g, Some("grass"));
        let nodes = dot.lines().filter(|l| l.contains("label=")).count();
        let edges = dot.lines().filter(|l| l.contains(" -- \"place") && !l.contains("dashed")).count();
        assert_eq!(nodes, g.layer3[0].nodes.len() + g.layer2.len());
        assert_eq!(edges, g.layer3[0].edges.len());
        assert!(to_dot(&g, Some("asphalt")).lines().count() == 2);
    }

    #[test]
    fn labels_shading() {
        let g = build_scene_graph(&toy_cloud(), &toy_task()).unwrap();
        let img = labels_image(&g, 0.5);
        let header_end = img.iter().enumerate().filter(|(_, &b)| b == b'\n').nth(2).unwrap().0 + 1;
        let px = &img[header_end..];
        assert!(px.contains(&0));
        assert!(px.contains(&128));
    }
}
