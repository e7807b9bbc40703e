use super::grid::{Cell, GridGeometry, OccupancyGrid};
use crate::error::{Error, Result};

/// Euclidean distance (cell units) from each cell to the nearest obstacle cell,
/// together with that obstacle's coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub label: String,
    pub geometry: GridGeometry,
    /// Row-major, one entry per cell.
    pub distance: Vec<f64>,
    pub nearest: Vec<Cell>,
}

impl DistanceMap {
    pub fn at(&self, cell: &Cell) -> f64 {
        self.distance[self.geometry.index(cell)]
    }

    pub fn nearest_of(&self, cell: &Cell) -> Cell {
        self.nearest[self.geometry.index(cell)]
    }

    pub fn is_obstacle(&self, cell: &Cell) -> bool {
        self.at(cell) == 0.0
    }

    pub fn max_distance(&self) -> f64 {
        self.distance.iter().copied().fold(0.0, f64::max)
    }
}

/// Exact brushfire over the free (terrain) cells; obstacles are the empty cells.
///
/// Squared distances come from a separable lower-envelope transform in integer
/// arithmetic. The label of each cell is the lexicographically smallest
/// `(row, col)` obstacle at exactly that squared distance, found by walking the
/// lattice points of the circle.
pub fn brushfire(grid: &OccupancyGrid) -> Result<DistanceMap> {
    let g = grid.geometry;
    let (w, h) = (g.width, g.height);
    if grid.count() == g.len() {
        return Err(Error::NoObstacles);
    }
    let obstacle = |r: usize, c: usize| !grid.get(Cell::new(r, c));

    // column pass: squared vertical distance to the nearest obstacle in the same column
    let mut col_d2 = vec![None::<u64>; g.len()];
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if obstacle(r, c) {
                last = Some(r);
            }
            col_d2[r * w + c] = last.map(|o| ((r - o) as u64).pow(2));
        }
        last = None;
        for r in (0..h).rev() {
            if obstacle(r, c) {
                last = Some(r);
            }
            if let Some(o) = last {
                let d = ((o - r) as u64).pow(2);
                let e = &mut col_d2[r * w + c];
                *e = Some(e.map_or(d, |x| x.min(d)));
            }
        }
    }

    // row pass: lower envelope of parabolas over finite sites
    let mut d2 = vec![0u64; g.len()];
    let mut sites = Vec::with_capacity(w);
    for r in 0..h {
        sites.clear();
        for c in 0..w {
            if let Some(f) = col_d2[r * w + c] {
                sites.push((c as i64, f as i64));
            }
        }
        let row = lower_envelope(&sites, w);
        d2[r * w..(r + 1) * w].copy_from_slice(&row);
    }

    let mut distance = Vec::with_capacity(g.len());
    let mut nearest = Vec::with_capacity(g.len());
    for r in 0..h {
        for c in 0..w {
            let q = d2[r * w + c];
            distance.push((q as f64).sqrt());
            nearest.push(smallest_obstacle_at(grid, r, c, q));
        }
    }
    Ok(DistanceMap {
        label: grid.label.clone(),
        geometry: g,
        distance,
        nearest,
    })
}

// min over sites (p, f) of (x - p)^2 + f for x in 0..n; `sites` sorted by p and non-empty
fn lower_envelope(sites: &[(i64, i64)], n: usize) -> Vec<u64> {
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(sites.len());
    // x where parabola b starts to beat a, as a fraction num/den with den > 0
    let meet = |a: (i64, i64), b: (i64, i64)| -> (i64, i64) {
        ((b.1 + b.0 * b.0) - (a.1 + a.0 * a.0), 2 * (b.0 - a.0))
    };
    for &s in sites {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let (n1, d1) = meet(a, b);
            let (n2, d2) = meet(b, s);
            // b never wins if s overtakes it no later than b overtakes a
            if n2 * d1 <= n1 * d2 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(s);
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for x in 0..n as i64 {
        while k + 1 < hull.len() {
            let (a, b) = (hull[k], hull[k + 1]);
            if (x - b.0).pow(2) + b.1 <= (x - a.0).pow(2) + a.1 {
                k += 1;
            } else {
                break;
            }
        }
        let (p, f) = hull[k];
        out.push(((x - p).pow(2) + f) as u64);
    }
    out
}

fn isqrt(v: u64) -> u64 {
    let mut s = (v as f64).sqrt() as u64;
    while s * s > v {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= v {
        s += 1;
    }
    s
}

fn smallest_obstacle_at(grid: &OccupancyGrid, r: usize, c: usize, d2: u64) -> Cell {
    let (w, h) = (grid.geometry.width as i64, grid.geometry.height as i64);
    let reach = isqrt(d2) as i64;
    for dr in -reach..=reach {
        let rest = d2 - (dr * dr) as u64;
        let dc = isqrt(rest);
        if dc * dc != rest {
            continue;
        }
        let dc = dc as i64;
        let rr = r as i64 + dr;
        if rr < 0 || rr >= h {
            continue;
        }
        for cc in [c as i64 - dc, c as i64 + dc] {
            if cc >= 0 && cc < w {
                let cell = Cell::new(rr as usize, cc as usize);
                if !grid.get(cell) {
                    return cell;
                }
            }
        }
    }
    unreachable!("squared distance {d2} at ({r},{c}) has no obstacle on its circle")
}
