//! Pixel grids: color frames, label maps and scalar maps.
//!
//! All grids are stored row-major with pixel `(x, y)` at index `y * width + x`.
//! Pixel `(x, y)` covers the continuous square `[x - 0.5, x + 0.5) x [y - 0.5, y + 0.5)`,
//! so a subpixel position maps to its pixel by rounding.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Layer identifier. `0` is always the background.
pub type LayerId = u32;

pub const BACKGROUND: LayerId = 0;

/// An RGB color with channels in `[0, 1]`.
pub type Color = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub const fn len(&self) -> usize {
        self.width * self.height
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub const fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Index of the pixel at signed coordinates, if inside the grid.
    #[inline]
    pub fn checked_index(&self, x: i64, y: i64) -> Option<usize> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.index(x as usize, y as usize))
        }
    }

    /// Pixel containing a subpixel position, if inside the grid.
    pub fn pixel_of(&self, x: f64, y: f64) -> Option<usize> {
        self.checked_index(libm::round(x) as i64, libm::round(y) as i64)
    }

    /// Invokes `f(i, j)` once for every horizontal and vertical neighbor pair, `i < j`.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize)) {
        for y in 0..self.height {
            for x in 0..self.width {
                let i = self.index(x, y);
                if x + 1 < self.width {
                    f(i, i + 1);
                }
                if y + 1 < self.height {
                    f(i, i + self.width);
                }
            }
        }
    }

    /// Number of 4-connected neighbor pairs.
    pub const fn edge_count(&self) -> usize {
        if self.width == 0 || self.height == 0 {
            return 0;
        }
        (self.width - 1) * self.height + self.width * (self.height - 1)
    }

    pub fn ensure_eq(&self, other: Dims) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: *self,
                found: other,
            })
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// A color frame with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    dims: Dims,
    pixels: Vec<Color>,
}

impl Frame {
    /// Builds a frame, clamping every channel into `[0, 1]`.
    pub fn new(dims: Dims, mut pixels: Vec<Color>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter {
                name: "dims",
                reason: "frame must be at least 1x1",
            });
        }
        if pixels.len() != dims.len() {
            return Err(Error::SizeMismatch {
                expected: dims.len(),
                found: pixels.len(),
            });
        }
        for px in &mut pixels {
            for c in px.iter_mut() {
                *c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
            }
        }
        Ok(Self { dims, pixels })
    }

    pub fn filled(dims: Dims, color: Color) -> Self {
        Self {
            dims,
            pixels: vec![color; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn pixels(&self) -> &[Color] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, index: usize) -> Color {
        self.pixels[index]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Color {
        self.pixels[self.dims.index(x, y)]
    }
}

/// Per-pixel layer labels; `0` is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    dims: Dims,
    labels: Vec<LayerId>,
}

impl LabelMap {
    pub fn new(dims: Dims, labels: Vec<LayerId>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::SizeMismatch {
                expected: dims.len(),
                found: labels.len(),
            });
        }
        Ok(Self { dims, labels })
    }

    pub fn filled(dims: Dims, label: LayerId) -> Self {
        Self {
            dims,
            labels: vec![label; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[LayerId] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [LayerId] {
        &mut self.labels
    }

    #[inline]
    pub fn at(&self, index: usize) -> LayerId {
        self.labels[index]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> LayerId {
        self.labels[self.dims.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: LayerId) {
        let i = self.dims.index(x, y);
        self.labels[i] = label;
    }

    /// Sorted distinct labels present in the map.
    pub fn distinct(&self) -> Vec<LayerId> {
        let mut out: Vec<LayerId> = self.labels.clone();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn max_label(&self) -> LayerId {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

/// A real value per pixel.
///
/// Used both for probability maps (values in `[0, 1]`) and for likelihood
/// maps, which hold clamped density values that may exceed one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    dims: Dims,
    values: Vec<f64>,
}

pub type ProbabilityMap = ScalarMap;

impl ScalarMap {
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::SizeMismatch {
                expected: dims.len(),
                found: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Self {
            dims,
            values: vec![value; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, index: usize) -> f64 {
        self.values[index]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.dims.index(x, y)]
    }
}

/// Rescales a stack of maps so that the values at every pixel sum to one.
///
/// Pixels whose total is zero become uniform.
pub fn normalize_stack(stack: &mut [ScalarMap]) {
    let Some(first) = stack.first() else {
        return;
    };
    let n = first.dims.len();
    let k = stack.len() as f64;
    for i in 0..n {
        let total: f64 = stack.iter().map(|m| m.values[i]).sum();
        if total > 0.0 && total.is_finite() {
            for m in stack.iter_mut() {
                m.values[i] /= total;
            }
        } else {
            for m in stack.iter_mut() {
                m.values[i] = 1.0 / k;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_count_matches_enumeration() {
        for (w, h) in [(1, 1), (1, 5), (4, 3), (7, 7)] {
            let d = Dims::new(w, h);
            let mut n = 0;
            d.for_each_edge(|_, _| n += 1);
            assert_eq!(n, d.edge_count());
        }
    }

    #[test]
    fn pixel_of_rounds_to_containing_pixel() {
        let d = Dims::new(4, 4);
        assert_eq!(d.pixel_of(0.49, 0.0), Some(0));
        assert_eq!(d.pixel_of(-0.49, 0.0), Some(0));
        assert_eq!(d.pixel_of(1.5, 0.0), Some(2));
        assert_eq!(d.pixel_of(-0.6, 0.0), None);
        assert_eq!(d.pixel_of(3.4, 3.4), Some(15));
    }

    #[test]
    fn frame_rejects_empty_dims_and_clamps() {
        assert!(Frame::new(Dims::new(0, 3), Vec::new()).is_err());
        let f = Frame::new(Dims::new(1, 1), vec![[1.5, -0.2, 0.5]]).unwrap();
        assert_eq!(f.at(0), [1.0, 0.0, 0.5]);
    }

    #[test]
    fn normalize_stack_handles_zero_total() {
        let d = Dims::new(2, 1);
        let mut s = vec![
            ScalarMap::new(d, vec![1.0, 0.0]).unwrap(),
            ScalarMap::new(d, vec![3.0, 0.0]).unwrap(),
        ];
        normalize_stack(&mut s);
        assert_eq!(s[0].values(), &[0.25, 0.5]);
        assert_eq!(s[1].values(), &[0.75, 0.5]);
    }
}
