use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SemanticPointCloud;
use crate::raster::{BoolRaster, Border};

/// Grid cell index. Ordering is row-major: `(row, col)` lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn chebyshev(&self, o: &Cell) -> usize {
        self.row.abs_diff(o.row).max(self.col.abs_diff(o.col))
    }

    pub fn dist2(&self, o: &Cell) -> u64 {
        let dr = self.row.abs_diff(o.row) as u64;
        let dc = self.col.abs_diff(o.col) as u64;
        dr * dr + dc * dc
    }

    pub fn dist(&self, o: &Cell) -> f64 {
        (self.dist2(o) as f64).sqrt()
    }

    pub fn is_orthogonal_to(&self, o: &Cell) -> bool {
        self.dist2(o) == 1
    }

    /// 8-neighbors inside a `width`×`height` raster, in row-major order.
    pub fn neighbors8(&self, width: usize, height: usize) -> impl Iterator<Item = Cell> {
        let (r, c) = (self.row as i64, self.col as i64);
        (-1i64..=1)
            .flat_map(move |dr| (-1i64..=1).map(move |dc| (dr, dc)))
            .filter(|&(dr, dc)| dr != 0 || dc != 0)
            .map(move |(dr, dc)| (r + dr, c + dc))
            .filter(move |&(r, c)| r >= 0 && c >= 0 && r < height as i64 && c < width as i64)
            .map(|(r, c)| Cell::new(r as usize, c as usize))
    }

    pub fn neighbors4(&self, width: usize, height: usize) -> impl Iterator<Item = Cell> {
        let me = *self;
        self.neighbors8(width, height)
            .filter(move |n| n.is_orthogonal_to(&me))
    }
}

/// Placement of a raster in the world: `origin` is the outer corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub resolution: f64,
    /// Columns.
    pub width: usize,
    /// Rows.
    pub height: usize,
}

impl GridGeometry {
    /// World (x, y) of a cell center.
    pub fn center(&self, cell: &Cell) -> [f64; 2] {
        [
            self.origin[0] + (cell.col as f64 + 0.5) * self.resolution,
            self.origin[1] + (cell.row as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn index(&self, cell: &Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let c = ((x - self.origin[0]) / self.resolution).floor();
        let r = ((y - self.origin[1]) / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            None
        } else {
            Some(Cell::new(r as usize, c as usize))
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }
}

/// Binary terrain-presence raster (true = terrain present).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub label: String,
    pub geometry: GridGeometry,
    /// Indexed `x = col`, `y = row`.
    pub cells: BoolRaster,
}

impl OccupancyGrid {
    pub fn new(label: impl Into<String>, geometry: GridGeometry) -> Self {
        Self {
            label: label.into(),
            geometry,
            cells: BoolRaster::new(geometry.width, geometry.height),
        }
    }

    /// Builds a grid from rows of text: `#` or `1` is terrain, anything else is empty.
    /// The first text line is row 0.
    pub fn from_ascii(label: &str, rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut g = Self::new(
            label,
            GridGeometry {
                origin: [0.0, 0.0],
                resolution: 1.0,
                width,
                height,
            },
        );
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                g.set(Cell::new(r, c), ch == '#' || ch == '1');
            }
        }
        g
    }

    pub fn get(&self, cell: Cell) -> bool {
        self.cells.get(cell.col, cell.row)
    }

    pub fn set(&mut self, cell: Cell, v: bool) {
        self.cells.set(cell.col, cell.row, v);
    }

    pub fn count(&self) -> usize {
        self.cells.count()
    }
}

/// Bins the xy positions of points carrying `label` into a grid padded by one empty cell.
pub fn rasterize(
    cloud: &SemanticPointCloud,
    labels: &[Option<String>],
    label: &str,
    resolution: f64,
) -> Result<OccupancyGrid> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    if labels.len() != cloud.len() {
        return Err(Error::invalid("label map length differs from cloud size"));
    }
    let pts: Vec<[f64; 2]> = cloud
        .points
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.as_deref() == Some(label))
        .map(|(p, _)| [p.position[0], p.position[1]])
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyTerrain(label.to_string()));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = |a: usize| ((hi[a] - lo[a]) / resolution).floor() as usize + 1;
    let geometry = GridGeometry {
        origin: [lo[0] - resolution, lo[1] - resolution],
        resolution,
        width: span(0) + 2,
        height: span(1) + 2,
    };
    let mut grid = OccupancyGrid::new(label, geometry);
    for p in &pts {
        // clamp guards float rounding at the upper bound
        let c = (((p[0] - lo[0]) / resolution).floor() as usize).min(span(0) - 1) + 1;
        let r = (((p[1] - lo[1]) / resolution).floor() as usize).min(span(1) - 1) + 1;
        grid.set(Cell::new(r, c), true);
    }
    Ok(grid)
}

/// Morphological closing then opening with a (2r+1)² square; `radius == 0` is the identity.
pub fn morph_smooth(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    if radius == 0 {
        return grid.clone();
    }
    let pad = 2 * radius + 1;
    let (w, h) = (grid.geometry.width, grid.geometry.height);
    let work = grid.cells.padded(pad);
    let closed = work.dilate(radius).erode(radius, Border::Empty);
    let opened = closed.erode(radius, Border::Empty).dilate(radius);
    OccupancyGrid {
        label: grid.label.clone(),
        geometry: grid.geometry,
        cells: opened.cropped(pad, w, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Embedding, SemanticPoint};

    fn labeled_cloud(points: &[[f64; 2]]) -> (SemanticPointCloud, Vec<Option<String>>) {
        let mut cloud = SemanticPointCloud::new(2);
        for p in points {
            cloud
                .push(SemanticPoint::observed([p[0], p[1], 0.3], Embedding::basis(2, 0)))
                .unwrap();
        }
        let labels = vec![Some("grass".to_string()); points.len()];
        (cloud, labels)
    }

    #[test]
    fn square_fills_block_with_padding() {
        let mut pts = Vec::new();
        for i in 0..100 {
            for j in 0..100 {
                pts.push([0.05 + i as f64 * 0.1, 0.05 + j as f64 * 0.1]);
            }
        }
        let (cloud, labels) = labeled_cloud(&pts);
        let g = rasterize(&cloud, &labels, "grass", 0.5).unwrap();
        assert_eq!((g.geometry.width, g.geometry.height), (22, 22));
        assert_eq!(g.count(), 400);
        for r in 0..22 {
            for c in 0..22 {
                let inner = (1..21).contains(&r) && (1..21).contains(&c);
                assert_eq!(g.get(Cell::new(r, c)), inner);
            }
        }
    }

    #[test]
    fn single_point_single_cell() {
        let (cloud, labels) = labeled_cloud(&[[3.0, -2.0]]);
        let g = rasterize(&cloud, &labels, "grass", 0.5).unwrap();
        assert_eq!(g.count(), 1);
        assert!(g.get(Cell::new(1, 1)));
        let c = g.geometry.center(&Cell::new(1, 1));
        assert!((c[0] - 3.25).abs() < 1e-12 && (c[1] + 1.75).abs() < 1e-12);
    }

    #[test]
    fn empty_terrain_is_error() {
        let (cloud, _) = labeled_cloud(&[[0.0, 0.0]]);
        let labels = vec![Some("asphalt".to_string())];
        assert!(matches!(
            rasterize(&cloud, &labels, "grass", 0.5),
            Err(Error::EmptyTerrain(_))
        ));
    }

    #[test]
    fn l_shape_matches_binning_oracle() {
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let (x, y) = (0.13 + i as f64 * 0.21, 0.07 + j as f64 * 0.21);
                if x < 3.0 || y < 2.0 {
                    pts.push([x, y]);
                }
            }
        }
        let (cloud, labels) = labeled_cloud(&pts);
        let res = 0.5;
        let g = rasterize(&cloud, &labels, "grass", res).unwrap();
        // oracle: count points per cell by direct comparison against cell bounds
        for r in 0..g.geometry.height {
            for c in 0..g.geometry.width {
                let x0 = g.geometry.origin[0] + c as f64 * res;
                let y0 = g.geometry.origin[1] + r as f64 * res;
                let n = pts
                    .iter()
                    .filter(|p| p[0] >= x0 && p[0] < x0 + res && p[1] >= y0 && p[1] < y0 + res)
                    .count();
                assert_eq!(g.get(Cell::new(r, c)), n > 0, "cell {r},{c}");
            }
        }
    }

    #[test]
    fn morph_examples() {
        let mut rows = vec![String::from("..........................")];
        for _ in 0..20 {
            rows.push(format!("...{}...", "#".repeat(20)));
        }
        rows.push(rows[0].clone());
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        let mut g = OccupancyGrid::from_ascii("grass", &refs);
        assert_eq!(morph_smooth(&g, 0), g);
        let solid = g.clone();
        g.set(Cell::new(10, 12), false);
        assert_eq!(morph_smooth(&g, 1), solid);

        let mut lone = OccupancyGrid::from_ascii("grass", &[".....", ".....", "..#..", ".....", "....."]);
        let direct = {
            // opening written out: erosion then dilation
            let e = lone.cells.erode(1, Border::Empty);
            e.dilate(1)
        };
        assert_eq!(direct.count(), 0);
        lone = morph_smooth(&lone, 1);
        assert_eq!(lone.count(), 0);
    }
}
