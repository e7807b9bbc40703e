//! Binary PGM (P5) debug images. The top image row is the grid's highest row, so
//! north is up when grid rows grow with world y.

use std::io::Write;
use std::path::Path;

use super::distance::DistanceMap;
use super::grid::{Cell, GridGeometry, OccupancyGrid};
use super::gvd::{CellKind, GvdSkeleton};
use crate::error::{Error, Result};

/// Encodes a P5 image of the grid, asking `shade` for each cell.
pub fn encode(geometry: &GridGeometry, shade: impl Fn(Cell) -> u8) -> Vec<u8> {
    let (w, h) = (geometry.width, geometry.height);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for r in (0..h).rev() {
        for c in 0..w {
            out.push(shade(Cell::new(r, c)));
        }
    }
    out
}

/// Terrain white, everything else black.
pub fn grid_image(grid: &OccupancyGrid) -> Vec<u8> {
    encode(&grid.geometry, |c| if grid.get(c) { 255 } else { 0 })
}

/// Distance scaled linearly so the largest clearance is white.
pub fn distance_image(dm: &DistanceMap) -> Vec<u8> {
    let max = dm.max_distance();
    encode(&dm.geometry, |c| {
        if max == 0.0 {
            0
        } else {
            (dm.at(&c) / max * 255.0).round() as u8
        }
    })
}

/// Edge cells gray, node cells white.
pub fn skeleton_image(skel: &GvdSkeleton) -> Vec<u8> {
    encode(&skel.geometry, |c| match skel.cells.get(&c) {
        Some(CellKind::Node) => 255,
        Some(CellKind::Edge) => 128,
        None => 0,
    })
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_flip() {
        let g = OccupancyGrid::from_ascii("t", &["#..", "..."]);
        let img = grid_image(&g);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&img[..header.len()], header);
        // row 0 is printed last
        assert_eq!(&img[header.len()..], &[0, 0, 0, 255, 0, 0]);
    }

    #[test]
    fn distance_scaled_to_white() {
        let g = OccupancyGrid::from_ascii("t", &["...", ".#.", "..."]);
        let dm = super::super::distance::brushfire(&g).unwrap();
        let img = distance_image(&dm);
        assert_eq!(*img.iter().skip(11).max().unwrap(), 255);
    }
}
