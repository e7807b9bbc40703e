use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::grid::{Cell, GridGeometry};
use super::gvd::{CellKind, GvdSkeleton};
use super::PlaceConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceNode {
    pub id: u32,
    pub cell: Cell,
    /// World (x, y) of the cell center, meters.
    pub position: [f64; 2],
    /// Distance to the terrain boundary, meters.
    pub clearance: f64,
    /// Skeleton cells assigned to this node by the flood fill, sorted.
    pub region: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceEdge {
    pub source: u32,
    pub target: u32,
    /// Skeleton cells from source to target, both node cells included.
    pub chain: Vec<Cell>,
}

impl PlaceEdge {
    pub fn length(&self) -> usize {
        self.chain.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceGraph {
    pub terrain: String,
    pub geometry: GridGeometry,
    /// Ids equal positions; nodes are sorted by cell.
    pub nodes: Vec<PlaceNode>,
    /// Sorted by (source, target) with source < target.
    pub edges: Vec<PlaceEdge>,
    /// Promotion rounds performed.
    pub iterations: usize,
    /// True when refinement stopped because nothing was promoted.
    pub converged: bool,
}

impl PlaceGraph {
    pub fn empty(terrain: &str, geometry: GridGeometry) -> Self {
        Self {
            terrain: terrain.to_string(),
            geometry,
            nodes: Vec::new(),
            edges: Vec::new(),
            iterations: 0,
            converged: true,
        }
    }

    pub fn degree(&self, id: u32) -> usize {
        self.edges
            .iter()
            .filter(|e| e.source == id || e.target == id)
            .count()
    }

    /// Connected components as sorted id lists.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.source as usize), find(&mut parent, e.target as usize));
            parent[a.max(b)] = a.min(b);
        }
        let mut groups: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i as u32);
        }
        groups.into_values().collect()
    }
}

/// Multi-source BFS over the skeleton from every node cell at once. Cells reached
/// in the same round by several regions go to the lowest node id. Returns the
/// owning node index per skeleton cell.
pub fn flood_fill(skel: &GvdSkeleton, nodes: &[Cell]) -> BTreeMap<Cell, usize> {
    let (w, h) = (skel.geometry.width, skel.geometry.height);
    let mut owner: BTreeMap<Cell, usize> = nodes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut frontier: Vec<Cell> = nodes.to_vec();
    while !frontier.is_empty() {
        let mut next: BTreeMap<Cell, usize> = BTreeMap::new();
        for c in &frontier {
            let id = owner[c];
            for n in c.neighbors8(w, h) {
                if skel.contains(&n) && !owner.contains_key(&n) {
                    let e = next.entry(n).or_insert(id);
                    *e = (*e).min(id);
                }
            }
        }
        frontier = next.keys().copied().collect();
        owner.extend(next);
    }
    owner
}

// cheapest path from a to b through `allowed`; diagonal steps cost more so the
// path hugs orthogonal runs and passes through corners
fn chain_between(a: Cell, b: Cell, allowed: &BTreeSet<Cell>, g: &GridGeometry) -> Option<Vec<Cell>> {
    const ORTH: u32 = 1;
    const DIAG: u32 = 3;
    let mut dist: BTreeMap<Cell, u32> = BTreeMap::from([(a, 0)]);
    let mut prev: BTreeMap<Cell, Cell> = BTreeMap::new();
    let mut heap = BinaryHeap::from([Reverse((0u32, a))]);
    while let Some(Reverse((d, c))) = heap.pop() {
        if d > dist[&c] {
            continue;
        }
        if c == b {
            let mut path = vec![b];
            let mut cur = b;
            while let Some(&p) = prev.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for n in c.neighbors8(g.width, g.height) {
            if !allowed.contains(&n) {
                continue;
            }
            let nd = d + if n.is_orthogonal_to(&c) { ORTH } else { DIAG };
            if dist.get(&n).map_or(true, |&old| nd < old) {
                dist.insert(n, nd);
                prev.insert(n, c);
                heap.push(Reverse((nd, n)));
            }
        }
    }
    None
}

fn segment_distance(p: &Cell, a: &Cell, b: &Cell) -> f64 {
    let (px, py) = (p.col as f64, p.row as f64);
    let (ax, ay) = (a.col as f64, a.row as f64);
    let (bx, by) = (b.col as f64, b.row as f64);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (ax + t * dx, ay + t * dy);
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

struct Partition {
    owner: BTreeMap<Cell, usize>,
    edges: Vec<PlaceEdge>,
}

fn partition(skel: &GvdSkeleton, nodes: &[Cell]) -> Partition {
    let g = &skel.geometry;
    let owner = flood_fill(skel, nodes);
    let mut pairs = BTreeSet::new();
    for (c, &a) in &owner {
        for n in c.neighbors8(g.width, g.height) {
            if let Some(&b) = owner.get(&n) {
                if a < b {
                    pairs.insert((a, b));
                }
            }
        }
    }
    let mut regions: Vec<BTreeSet<Cell>> = vec![BTreeSet::new(); nodes.len()];
    for (&c, &i) in &owner {
        regions[i].insert(c);
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| {
            let allowed: BTreeSet<Cell> = regions[a].union(&regions[b]).copied().collect();
            let chain = chain_between(nodes[a], nodes[b], &allowed, g)
                .expect("adjacent flood-fill regions are connected");
            PlaceEdge {
                source: a as u32,
                target: b as u32,
                chain,
            }
        })
        .collect();
    Partition { owner, edges }
}

// cell to promote on one edge, if the edge breaks a constraint
fn promotion(edge: &PlaceEdge, cfg: &PlaceConfig) -> Option<Cell> {
    let chain = &edge.chain;
    let (a, b) = (chain[0], chain[chain.len() - 1]);
    let mut worst: Option<(usize, f64)> = None;
    for (i, c) in chain.iter().enumerate() {
        let d = segment_distance(c, &a, &b);
        if worst.map_or(true, |(_, w)| d > w) {
            worst = Some((i, d));
        }
    }
    if let Some((i, d)) = worst {
        if d > cfg.deviation_threshold {
            return Some(chain[i]);
        }
    }
    if chain.len() > cfg.max_edge_length {
        return Some(chain[chain.len() / 2]);
    }
    None
}

/// Flood-fills the skeleton from its nodes, links nodes whose regions touch, and
/// promotes chain cells to nodes where an edge deviates too far from the straight
/// segment between its nodes or runs too long. Repeats until nothing is promoted
/// or the iteration cap is reached.
pub fn refine_graph(skel: &GvdSkeleton, cfg: &PlaceConfig) -> Result<PlaceGraph> {
    cfg.validate()?;
    let mut skel = skel.clone();
    if skel.nodes().next().is_none() {
        return Err(Error::NoNodes);
    }
    let mut iterations = 0;
    let (part, nodes, converged) = loop {
        let nodes: Vec<Cell> = skel.nodes().collect();
        let part = partition(&skel, &nodes);
        if iterations >= cfg.max_refine_iterations {
            break (part, nodes, false);
        }
        let promoted: BTreeSet<Cell> = part
            .edges
            .iter()
            .filter_map(|e| promotion(e, cfg))
            .collect();
        if promoted.is_empty() {
            break (part, nodes, true);
        }
        for c in promoted {
            skel.cells.insert(c, CellKind::Node);
        }
        iterations += 1;
    };

    let g = skel.geometry;
    let mut regions: Vec<Vec<Cell>> = vec![Vec::new(); nodes.len()];
    for (&c, &i) in &part.owner {
        regions[i].push(c);
    }
    let nodes = nodes
        .iter()
        .zip(regions)
        .enumerate()
        .map(|(i, (&cell, region))| PlaceNode {
            id: i as u32,
            cell,
            position: g.center(&cell),
            clearance: skel.clearance(&cell) * g.resolution,
            region,
        })
        .collect();
    Ok(PlaceGraph {
        terrain: skel.label.clone(),
        geometry: g,
        nodes,
        edges: part.edges,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    fn geometry(w: usize, h: usize) -> GridGeometry {
        GridGeometry {
            origin: [0.0, 0.0],
            resolution: 1.0,
            width: w,
            height: h,
        }
    }

    fn with_nodes(cells: &[Cell], nodes: &[Cell], w: usize, h: usize) -> GvdSkeleton {
        let mut s = GvdSkeleton::from_cells("t", geometry(w, h), cells.iter().copied(), 2.0);
        for n in nodes {
            s.cells.insert(*n, CellKind::Node);
        }
        s
    }

    fn cfg(dev: f64, max_edge: usize) -> PlaceConfig {
        PlaceConfig {
            deviation_threshold: dev,
            max_edge_length: max_edge,
            ..PlaceConfig::default()
        }
    }

    fn row_chain(n: usize) -> Vec<Cell> {
        (0..n).map(|c| Cell::new(1, c)).collect()
    }

    #[test]
    fn short_straight_chain_is_one_edge() {
        let cells = row_chain(10);
        let s = with_nodes(&cells, &[cells[0], cells[9]], 10, 3);
        let g = refine_graph(&s, &cfg(2.0, 50)).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].length(), 10);
        assert!(g.converged);
        assert_eq!(g.iterations, 0);
    }

    #[test]
    fn long_chain_splits_at_midpoints() {
        let cells = row_chain(10);
        let s = with_nodes(&cells, &[cells[0], cells[9]], 10, 3);
        let g = refine_graph(&s, &cfg(2.0, 4)).unwrap();
        let cols: Vec<usize> = g.nodes.iter().map(|n| n.cell.col).collect();
        // 10 -> split at 5; 0..=5 (6 cells) at 3; 5..=9 (5 cells) at 7
        assert_eq!(cols, vec![0, 3, 5, 7, 9]);
        assert!(g.edges.iter().all(|e| e.length() <= 4));
        assert!(g.converged);
        assert_eq!(g.iterations, 2);
    }

    #[test]
    fn l_corner_promoted() {
        let mut cells: Vec<Cell> = (0..8).map(|c| Cell::new(0, c)).collect();
        cells.extend((1..8).map(|r| Cell::new(r, 7)));
        let s = with_nodes(&cells, &[Cell::new(0, 0), Cell::new(7, 7)], 8, 8);
        let g = refine_graph(&s, &cfg(1.0, 50)).unwrap();
        let got: Vec<Cell> = g.nodes.iter().map(|n| n.cell).collect();
        assert_eq!(got, vec![Cell::new(0, 0), Cell::new(0, 7), Cell::new(7, 7)]);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn no_nodes_is_error() {
        let s = GvdSkeleton::from_cells("t", geometry(5, 3), row_chain(5), 2.0);
        assert!(matches!(refine_graph(&s, &PlaceConfig::default()), Err(Error::NoNodes)));
    }

    #[test]
    fn iteration_cap_halts() {
        let cells = row_chain(40);
        let s = with_nodes(&cells, &[cells[0], cells[39]], 40, 3);
        let c = PlaceConfig {
            max_refine_iterations: 1,
            ..cfg(2.0, 4)
        };
        let g = refine_graph(&s, &c).unwrap();
        assert_eq!(g.iterations, 1);
        assert!(!g.converged);
        assert_eq!(g.nodes.len(), 3);
    }

    #[test]
    fn world_positions_and_clearance() {
        let cells = row_chain(3);
        let mut s = with_nodes(&cells, &[cells[0], cells[2]], 3, 3);
        s.geometry.origin = [10.0, -4.0];
        s.geometry.resolution = 0.5;
        let g = refine_graph(&s, &cfg(2.0, 50)).unwrap();
        assert_eq!(g.nodes[1].position, [11.25, -3.25]);
        assert_eq!(g.nodes[1].clearance, 1.0);
    }

    fn bfs_hops(skel: &GvdSkeleton, from: Cell) -> BTreeMap<Cell, usize> {
        let g = skel.geometry;
        let mut d = BTreeMap::from([(from, 0)]);
        let mut q = VecDeque::from([from]);
        while let Some(c) = q.pop_front() {
            for n in c.neighbors8(g.width, g.height) {
                if skel.contains(&n) && !d.contains_key(&n) {
                    d.insert(n, d[&c] + 1);
                    q.push_back(n);
                }
            }
        }
        d
    }

    proptest! {
        #[test]
        fn flood_fill_is_nearest_by_hops(bits in prop::collection::vec(any::<bool>(), 100), picks in prop::collection::vec(0usize..100, 1..5)) {
            let cells: Vec<Cell> = (0..100).filter(|&i| bits[i]).map(|i| Cell::new(i / 10, i % 10)).collect();
            prop_assume!(!cells.is_empty());
            let nodes: BTreeSet<Cell> = picks.iter().map(|&p| cells[p % cells.len()]).collect();
            let nodes: Vec<Cell> = nodes.into_iter().collect();
            let skel = GvdSkeleton::from_cells("t", geometry(10, 10), cells.iter().copied(), 1.0);
            let owner = flood_fill(&skel, &nodes);
            let hops: Vec<BTreeMap<Cell, usize>> = nodes.iter().map(|&n| bfs_hops(&skel, n)).collect();
            for c in &cells {
                let best = hops.iter().filter_map(|h| h.get(c)).min();
                match (owner.get(c), best) {
                    (Some(&i), Some(&b)) => {
                        prop_assert_eq!(hops[i][c], b);
                        // lowest id among the equally near
                        let first = hops.iter().position(|h| h.get(c) == Some(&b)).unwrap();
                        prop_assert_eq!(i, first);
                    }
                    (None, None) => {}
                    other => prop_assert!(false, "mismatch {:?}", other),
                }
            }
        }
    }
}
