use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::distance::DistanceMap;
use super::grid::{Cell, GridGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Edge,
    Node,
}

/// Unit-width set of equidistant cells, each tagged edge or node.
#[derive(Debug, Clone, PartialEq)]
pub struct GvdSkeleton {
    pub label: String,
    pub geometry: GridGeometry,
    /// Clearance per raster cell (cell units), row-major.
    pub distance: Vec<f64>,
    pub cells: BTreeMap<Cell, CellKind>,
}

// cyclic 8-neighborhood starting east, counter-clockwise with row 0 at the top
const RING: [(i64, i64); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

impl GvdSkeleton {
    /// Skeleton from explicit cells, all edges, with a uniform clearance. Meant for
    /// hand-built skeletons.
    pub fn from_cells(
        label: &str,
        geometry: GridGeometry,
        cells: impl IntoIterator<Item = Cell>,
        clearance: f64,
    ) -> Self {
        Self {
            label: label.to_string(),
            geometry,
            distance: vec![clearance; geometry.len()],
            cells: cells.into_iter().map(|c| (c, CellKind::Edge)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        self.cells.contains_key(cell)
    }

    pub fn is_node(&self, cell: &Cell) -> bool {
        self.cells.get(cell) == Some(&CellKind::Node)
    }

    pub fn clearance(&self, cell: &Cell) -> f64 {
        self.distance[self.geometry.index(cell)]
    }

    pub fn nodes(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .filter(|(_, &k)| k == CellKind::Node)
            .map(|(&c, _)| c)
    }

    /// Skeleton 8-neighbors of a cell, row-major.
    pub fn neighbors(&self, cell: &Cell) -> Vec<Cell> {
        neighbors_in(&self.key_set(), cell, &self.geometry)
    }

    pub fn degree(&self, cell: &Cell) -> usize {
        cell.neighbors8(self.geometry.width, self.geometry.height)
            .filter(|n| self.contains(n))
            .count()
    }

    pub fn orthogonal_degree(&self, cell: &Cell) -> usize {
        cell.neighbors4(self.geometry.width, self.geometry.height)
            .filter(|n| self.contains(n))
            .count()
    }

    /// Number of groups the skeleton neighbors of `cell` form when only orthogonal
    /// contact between them counts. A crossing center scores 4, a T center 3, and
    /// the cells right next to either score 2.
    pub fn branches(&self, cell: &Cell) -> usize {
        let nb = self.neighbors(cell);
        let mut group: Vec<usize> = (0..nb.len()).collect();
        for i in 0..nb.len() {
            for j in 0..i {
                if nb[i].is_orthogonal_to(&nb[j]) {
                    let (gi, gj) = (group[i], group[j]);
                    for g in group.iter_mut() {
                        if *g == gi {
                            *g = gj;
                        }
                    }
                }
            }
        }
        group.iter().collect::<BTreeSet<_>>().len()
    }

    /// 8-connected components, each sorted, ordered by their first cell.
    pub fn components(&self) -> Vec<Vec<Cell>> {
        let set = self.key_set();
        components_of(&set, &self.geometry)
    }

    fn key_set(&self) -> BTreeSet<Cell> {
        self.cells.keys().copied().collect()
    }
}

fn neighbors_in(set: &BTreeSet<Cell>, cell: &Cell, g: &GridGeometry) -> Vec<Cell> {
    cell.neighbors8(g.width, g.height)
        .filter(|n| set.contains(n))
        .collect()
}

fn components_of(set: &BTreeSet<Cell>, g: &GridGeometry) -> Vec<Vec<Cell>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in set {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for n in neighbors_in(set, &c, g) {
                if seen.insert(n) {
                    comp.push(n);
                    queue.push_back(n);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Yokoi 8-connectivity number: 1 means removing the cell keeps local topology.
fn connectivity_number(set: &BTreeSet<Cell>, cell: &Cell) -> usize {
    let x: Vec<bool> = RING
        .iter()
        .map(|&(dr, dc)| {
            let (r, c) = (cell.row as i64 + dr, cell.col as i64 + dc);
            r >= 0 && c >= 0 && set.contains(&Cell::new(r as usize, c as usize))
        })
        .collect();
    let off = |k: usize| !x[k % 8];
    [0, 2, 4, 6]
        .iter()
        .filter(|&&k| off(k) && !(off(k + 1) && off(k + 2)))
        .count()
}

fn removable(set: &BTreeSet<Cell>, c: &Cell, g: &GridGeometry) -> bool {
    set.contains(c) && neighbors_in(set, c, g).len() >= 2 && connectivity_number(set, c) == 1
}

fn by_clearance(cells: &mut [Cell], distance: &[f64], g: &GridGeometry) {
    cells.sort_by(|a, b| {
        distance[g.index(a)]
            .total_cmp(&distance[g.index(b)])
            .then(a.cmp(b))
    });
}

/// Directional thinning: each sub-pass only considers cells missing the neighbor on
/// one side (low row, high row, low col, high col), fixed at the start of the pass,
/// and removes the simple non-endpoint ones in clearance order. Two-cell-wide bands
/// therefore lose their lower-index side.
fn thin(set: &mut BTreeSet<Cell>, distance: &[f64], g: &GridGeometry) {
    const SIDES: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    loop {
        let mut changed = false;
        for (dr, dc) in SIDES {
            let mut border: Vec<Cell> = set
                .iter()
                .copied()
                .filter(|c| {
                    let (r, k) = (c.row as i64 + dr, c.col as i64 + dc);
                    r < 0 || k < 0 || !set.contains(&Cell::new(r as usize, k as usize))
                })
                .collect();
            by_clearance(&mut border, distance, g);
            for c in border {
                if removable(set, &c, g) {
                    set.remove(&c);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Re-thins only around cells that were just removed, spreading outward while
/// removals continue.
fn thin_near(set: &mut BTreeSet<Cell>, removed: BTreeSet<Cell>, distance: &[f64], g: &GridGeometry) {
    let mut frontier = removed;
    while !frontier.is_empty() {
        let mut around: Vec<Cell> = frontier
            .iter()
            .flat_map(|c| neighbors_in(set, c, g))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        by_clearance(&mut around, distance, g);
        frontier = BTreeSet::new();
        for c in around {
            if removable(set, &c, g) {
                set.remove(&c);
                frontier.insert(c);
            }
        }
    }
}

/// Cells where two brushfire fronts meet, thinned to unit width. All cells are edges.
///
/// A free cell `s` with clearance at least `min_clearance` qualifies when some
/// 8-neighbor `n` has a nearest obstacle `o_n` that is more than one cell (Chebyshev)
/// from the nearest obstacle of `s`, and `o_n` is itself within `d(s) + √2` of `s`.
/// The second condition keeps only the side of the bisector that both fronts reach.
pub fn extract_gvd(dm: &DistanceMap, min_clearance: f64) -> GvdSkeleton {
    let g = dm.geometry;
    let mut set = BTreeSet::new();
    for r in 0..g.height {
        for c in 0..g.width {
            let s = Cell::new(r, c);
            let d = dm.at(&s);
            if d == 0.0 || d < min_clearance {
                continue;
            }
            let own = dm.nearest_of(&s);
            let meets = s.neighbors8(g.width, g.height).any(|n| {
                let other = dm.nearest_of(&n);
                own.chebyshev(&other) > 1 && s.dist(&other) <= d + std::f64::consts::SQRT_2
            });
            if meets {
                set.insert(s);
            }
        }
    }
    thin(&mut set, &dm.distance, &g);
    GvdSkeleton {
        label: dm.label.clone(),
        geometry: g,
        distance: dm.distance.clone(),
        cells: set.into_iter().map(|c| (c, CellKind::Edge)).collect(),
    }
}

// cells of the chain starting at leaf `start`, stopping before any cell of degree >= 3
fn leaf_chain(set: &BTreeSet<Cell>, start: Cell, g: &GridGeometry) -> (Vec<Cell>, bool) {
    let mut chain = Vec::new();
    let mut visited = BTreeSet::new();
    let mut cur = start;
    loop {
        let nb = neighbors_in(set, &cur, g);
        if nb.len() >= 3 {
            return (chain, false);
        }
        chain.push(cur);
        visited.insert(cur);
        match nb.into_iter().find(|n| !visited.contains(n)) {
            Some(n) => cur = n,
            // walked the whole component
            None => return (chain, true),
        }
    }
}

/// Repeatedly removes leaf chains shorter than `spur_length` cells, re-thinning
/// around the removed cells after each round, until nothing changes. A component that is itself a short
/// open chain disappears entirely.
pub fn prune_spurs(skel: &GvdSkeleton, spur_length: usize) -> GvdSkeleton {
    let g = skel.geometry;
    let mut set = skel.key_set();
    loop {
        let leaves: Vec<Cell> = set
            .iter()
            .copied()
            .filter(|c| neighbors_in(&set, c, &g).len() <= 1)
            .collect();
        let mut doomed = BTreeSet::new();
        for leaf in leaves {
            let (chain, _) = leaf_chain(&set, leaf, &g);
            if chain.len() < spur_length {
                doomed.extend(chain);
            }
        }
        if doomed.is_empty() {
            break;
        }
        for c in &doomed {
            set.remove(c);
        }
        thin_near(&mut set, doomed, &skel.distance, &g);
    }
    GvdSkeleton {
        label: skel.label.clone(),
        geometry: g,
        distance: skel.distance.clone(),
        cells: set.into_iter().map(|c| (c, CellKind::Edge)).collect(),
    }
}

/// Marks junctions (three or more 8-neighbors) and corners (exactly one orthogonal
/// neighbor) as nodes, skipping any cell orthogonally adjacent to an already marked
/// node. Cells where three or more branches actually meet are marked first, then the
/// remaining qualifying cells, each pass in row-major order; this keeps the center of
/// a crossing from being shadowed by its junction-looking neighbors.
pub fn designate_nodes(skel: &GvdSkeleton) -> GvdSkeleton {
    let mut out = skel.clone();
    for kind in out.cells.values_mut() {
        *kind = CellKind::Edge;
    }
    let (w, h) = (skel.geometry.width, skel.geometry.height);
    let branch_points = skel.cells.keys().filter(|c| skel.branches(c) >= 3);
    let qualifying = skel
        .cells
        .keys()
        .filter(|c| skel.degree(c) >= 3 || skel.orthogonal_degree(c) == 1);
    for &cell in branch_points.chain(qualifying) {
        let blocked = cell.neighbors4(w, h).any(|n| out.is_node(&n));
        if !blocked {
            out.cells.insert(cell, CellKind::Node);
        }
    }
    out
}

/// Gives every node-less component one node: its first leaf in row-major order,
/// or its first cell when it has no leaf.
pub fn seed_components(skel: &GvdSkeleton) -> GvdSkeleton {
    let mut out = skel.clone();
    for comp in skel.components() {
        if comp.iter().any(|c| skel.is_node(c)) {
            continue;
        }
        let pick = comp
            .iter()
            .copied()
            .find(|c| skel.degree(c) <= 1)
            .unwrap_or(comp[0]);
        out.cells.insert(pick, CellKind::Node);
    }
    out
}
