//! Row-major boolean rasters and square-element binary morphology.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

/// What erosion assumes about pixels outside the raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Outside pixels are false: shapes touching the border erode.
    Empty,
    /// Outside pixels are ignored: the border does not erode shapes.
    Ignore,
}

impl BoolRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Bounds-checked read with signed coordinates.
    pub fn at(&self, x: i64, y: i64) -> Option<bool> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Dilation by a (2r+1)² square. Pixels outside the raster are false.
    pub fn dilate(&self, r: usize) -> Self {
        self.filter(r, true, Border::Empty)
    }

    /// Erosion by a (2r+1)² square.
    pub fn erode(&self, r: usize, border: Border) -> Self {
        self.filter(r, false, border)
    }

    // separable running max/min over rows then columns
    fn filter(&self, r: usize, dilate: bool, border: Border) -> Self {
        if r == 0 || self.data.is_empty() {
            return self.clone();
        }
        let outside = match border {
            Border::Empty => Some(false),
            Border::Ignore => None,
        };
        let pass = |src: &[bool], len: usize, stride: usize, lines: usize, line_stride: usize| {
            let mut out = vec![false; src.len()];
            for l in 0..lines {
                let base = l * line_stride;
                // prefix counts of true values along the line
                let mut prefix = vec![0usize; len + 1];
                for i in 0..len {
                    prefix[i + 1] = prefix[i] + src[base + i * stride] as usize;
                }
                for i in 0..len {
                    let lo = i as i64 - r as i64;
                    let hi = i as i64 + r as i64;
                    let clo = lo.max(0) as usize;
                    let chi = (hi.min(len as i64 - 1)) as usize;
                    let trues = prefix[chi + 1] - prefix[clo];
                    let inside = chi + 1 - clo;
                    let clipped = lo < 0 || hi >= len as i64;
                    out[base + i * stride] = if dilate {
                        trues > 0
                    } else {
                        trues == inside && !(clipped && outside == Some(false))
                    };
                }
            }
            out
        };
        let rows = pass(&self.data, self.width, 1, self.height, self.width);
        let data = pass(&rows, self.height, self.width, self.width, 1);
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Copy embedded in a larger false canvas with `pad` pixels on every side.
    pub fn padded(&self, pad: usize) -> Self {
        let mut out = Self::new(self.width + 2 * pad, self.height + 2 * pad);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x + pad, y + pad, self.get(x, y));
            }
        }
        out
    }

    pub fn cropped(&self, pad: usize, width: usize, height: usize) -> Self {
        let mut out = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                out.set(x, y, self.get(x + pad, y + pad));
            }
        }
        out
    }
}
