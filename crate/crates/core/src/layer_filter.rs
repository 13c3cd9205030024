//! Per-layer appearance models, prior propagation and Bayesian fusion.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{normalize_stack, Color, Dims, Frame, LabelMap, LayerId, ProbabilityMap, ScalarMap};
use crate::motion_field::MotionField;

/// Default number of stored color samples per pixel.
pub const DEFAULT_POOL_SIZE: usize = 20;

/// Per-pixel sliding window of recent colors.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceModel {
    dims: Dims,
    capacity: usize,
    samples: Vec<Color>,
    len: Vec<u16>,
    /// Slot of the oldest sample.
    start: Vec<u16>,
}

impl AppearanceModel {
    pub fn new(dims: Dims, capacity: usize) -> Self {
        let capacity = capacity.clamp(1, u16::MAX as usize);
        Self {
            dims,
            capacity,
            samples: vec![[0.0; 3]; dims.len() * capacity],
            len: vec![0; dims.len()],
            start: vec![0; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn count(&self, i: usize) -> usize {
        self.len[i] as usize
    }

    /// Samples at pixel `i`, oldest first.
    pub fn samples(&self, i: usize) -> impl Iterator<Item = Color> + '_ {
        let base = i * self.capacity;
        let start = self.start[i] as usize;
        (0..self.count(i)).map(move |k| self.samples[base + (start + k) % self.capacity])
    }

    pub fn push(&mut self, i: usize, color: Color) {
        let base = i * self.capacity;
        let len = self.len[i] as usize;
        let start = self.start[i] as usize;
        if len < self.capacity {
            self.samples[base + (start + len) % self.capacity] = color;
            self.len[i] += 1;
        } else {
            self.samples[base + start] = color;
            self.start[i] = ((start + 1) % self.capacity) as u16;
        }
    }

    pub fn clear(&mut self, i: usize) {
        self.len[i] = 0;
        self.start[i] = 0;
    }

    fn copy_pixel_from(&mut self, dst: usize, src: &AppearanceModel, from: usize) {
        let c = self.capacity;
        self.samples[dst * c..(dst + 1) * c].copy_from_slice(&src.samples[from * c..(from + 1) * c]);
        self.len[dst] = src.len[from];
        self.start[dst] = src.start[from];
    }

    /// Mean squared color distance between `color` and the samples at `i`;
    /// `None` for an empty pool.
    pub fn mean_distance(&self, i: usize, color: Color) -> Option<f64> {
        let n = self.count(i);
        if n == 0 {
            return None;
        }
        let total: f64 = self.samples(i).map(|s| squared_distance(s, color)).sum();
        Some(total / n as f64)
    }

    /// Median pool size over the given pixels, `0` when the set is empty.
    pub fn median_count(&self, pixels: impl IntoIterator<Item = usize>) -> usize {
        let mut counts: Vec<u16> = pixels.into_iter().map(|i| self.len[i]).collect();
        if counts.is_empty() {
            return 0;
        }
        counts.sort_unstable();
        counts[counts.len() / 2] as usize
    }
}

pub fn squared_distance(a: Color, b: Color) -> f64 {
    (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum()
}

/// Source pixel of `i` under a reverse shift by the rounded motion at `i`.
#[inline]
fn source_of(dims: Dims, field: &MotionField, i: usize) -> Option<usize> {
    let (x, y) = dims.coords(i);
    let (dx, dy) = field.offset(i);
    dims.checked_index(x as i64 - dx, y as i64 - dy)
}

/// Moves every pool along the motion field. Pixels whose source falls
/// outside the frame end up empty.
pub fn propagate_appearance(model: &AppearanceModel, field: &MotionField) -> Result<AppearanceModel> {
    model.dims.ensure_eq(field.dims())?;
    let mut out = AppearanceModel::new(model.dims, model.capacity);
    for i in 0..model.dims.len() {
        if let Some(src) = source_of(model.dims, field, i) {
            out.copy_pixel_from(i, model, src);
        }
    }
    Ok(out)
}

/// Shifts one prior map along its layer's motion. Out-of-frame sources get `1/k`.
pub fn propagate_prior(prior: &ProbabilityMap, field: &MotionField, k: usize) -> Result<ProbabilityMap> {
    let dims = prior.dims();
    dims.ensure_eq(field.dims())?;
    let fallback = 1.0 / k.max(1) as f64;
    let values = (0..dims.len())
        .map(|i| source_of(dims, field, i).map_or(fallback, |s| prior.at(s)))
        .collect();
    ProbabilityMap::new(dims, values)
}

/// Shifts each layer's prior along its own field and renormalizes per pixel.
pub fn propagate_priors(priors: &[ProbabilityMap], fields: &[&MotionField]) -> Result<Vec<ProbabilityMap>> {
    if priors.len() != fields.len() {
        return Err(Error::SizeMismatch {
            expected: priors.len(),
            found: fields.len(),
        });
    }
    let k = priors.len();
    let mut out = priors
        .iter()
        .zip(fields)
        .map(|(p, f)| propagate_prior(p, f, k))
        .collect::<Result<Vec<_>>>()?;
    normalize_stack(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeParams {
    /// Per-channel kernel standard deviation.
    pub bandwidth: [f64; 3],
    /// Density assigned to empty pools and used as a lower clamp.
    pub floor: f64,
}

impl Default for KdeParams {
    fn default() -> Self {
        Self {
            bandwidth: [0.05; 3],
            floor: 1e-6,
        }
    }
}

impl KdeParams {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "kde_sigma",
                reason: "bandwidth must be positive",
            });
        }
        if !(self.floor > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kde_floor",
                reason: "floor must be positive",
            });
        }
        Ok(())
    }
}

/// Gaussian mixture density of `x` over `samples`, or `None` when empty.
pub fn kde_density(x: Color, samples: impl IntoIterator<Item = Color>, bandwidth: [f64; 3]) -> Option<f64> {
    let norm = libm::pow(2.0 * core::f64::consts::PI, -1.5) / (bandwidth[0] * bandwidth[1] * bandwidth[2]);
    let inv2: [f64; 3] = core::array::from_fn(|c| 0.5 / (bandwidth[c] * bandwidth[c]));
    let mut total = 0.0;
    let mut n = 0usize;
    for s in samples {
        let e: f64 = (0..3).map(|c| (x[c] - s[c]) * (x[c] - s[c]) * inv2[c]).sum();
        total += libm::exp(-e);
        n += 1;
    }
    (n > 0).then(|| norm * total / n as f64)
}

/// Per-pixel color likelihood of `frame` under `model`.
pub fn kde_likelihood(frame: &Frame, model: &AppearanceModel, params: &KdeParams) -> Result<ScalarMap> {
    params.validate()?;
    let dims = frame.dims();
    dims.ensure_eq(model.dims)?;
    let values = (0..dims.len())
        .map(|i| {
            kde_density(frame.at(i), model.samples(i), params.bandwidth)
                .map_or(params.floor, |d| d.max(params.floor))
        })
        .collect();
    ScalarMap::new(dims, values)
}

/// Bayes fusion `post_k = lik_k prior_k / sum_j lik_j prior_j` at every pixel.
///
/// A pixel with zero total mass receives a uniform posterior.
pub fn posterior(likelihoods: &[ScalarMap], priors: &[ProbabilityMap]) -> Result<Vec<ProbabilityMap>> {
    if likelihoods.len() != priors.len() {
        return Err(Error::SizeMismatch {
            expected: priors.len(),
            found: likelihoods.len(),
        });
    }
    let Some(first) = priors.first() else {
        return Ok(Vec::new());
    };
    let dims = first.dims();
    for m in likelihoods.iter().chain(priors) {
        dims.ensure_eq(m.dims())?;
    }
    let mut out: Vec<ProbabilityMap> = likelihoods
        .iter()
        .zip(priors)
        .map(|(l, p)| {
            let v = l.values().iter().zip(p.values()).map(|(a, b)| a * b).collect();
            ProbabilityMap::new(dims, v).expect("same dims")
        })
        .collect();
    normalize_stack(&mut out);
    Ok(out)
}

/// Adds the current color at every pixel labeled `layer`.
pub fn update_model(model: &mut AppearanceModel, frame: &Frame, labels: &LabelMap, layer: LayerId) -> Result<()> {
    model.dims.ensure_eq(frame.dims())?;
    model.dims.ensure_eq(labels.dims())?;
    for i in 0..model.dims.len() {
        if labels.at(i) == layer {
            model.push(i, frame.at(i));
        }
    }
    Ok(())
}
