//! Synthetic sequences: textured translating background and rectangular
//! textured sprites, with exact trajectories and per-pixel ground truth.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Color, Dims, Frame, LabelMap, LayerId};
use crate::trajectory::{Point, Trajectory, TrajectorySet};

/// Smooth value-noise texture blending two colors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surface {
    pub color_a: Color,
    pub color_b: Color,
    /// Approximate lattice spacing of the noise in pixels.
    pub texture_cell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sprite {
    pub width: usize,
    pub height: usize,
    /// Top-left pixel at frame 0; may lie outside the frame.
    pub start: [f64; 2],
    /// Pixels per frame.
    pub velocity: [f64; 2],
    pub surface: Surface,
}

impl Sprite {
    pub fn origin(&self, frame: usize) -> [f64; 2] {
        let f = frame as f64;
        [self.start[0] + self.velocity[0] * f, self.start[1] + self.velocity[1] * f]
    }
}

/// Scene description. Sprites later in the list are drawn on top; sprite `k`
/// carries ground-truth label `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub dims: Dims,
    pub frames: usize,
    pub seed: u64,
    pub background: Surface,
    /// Background translation in pixels per frame; the texture wraps around.
    pub background_velocity: [f64; 2],
    pub sprites: Vec<Sprite>,
    pub trajectories_per_surface: usize,
    /// Distance kept between sprite trajectories and the sprite border.
    pub track_margin: f64,
    /// Jitter of trajectory seeds as a fraction of the grid cell.
    pub jitter: f64,
}

impl Default for SyntheticScene {
    fn default() -> Self {
        Self {
            dims: Dims::new(64, 64),
            frames: 40,
            seed: 0,
            background: Surface {
                color_a: [0.25, 0.45, 0.3],
                color_b: [0.7, 0.75, 0.55],
                texture_cell: 8.0,
            },
            background_velocity: [0.0, 0.0],
            sprites: Vec::new(),
            trajectories_per_surface: 20,
            track_margin: 1.5,
            jitter: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    pub trajectories: TrajectorySet,
    pub ground_truth: Vec<LabelMap>,
}

/// Periodic lattice noise with values in `[0, 1]`.
struct Texture {
    nx: usize,
    ny: usize,
    cell_x: f64,
    cell_y: f64,
    lattice: Vec<f64>,
    surface: Surface,
}

impl Texture {
    fn new(surface: Surface, period_x: f64, period_y: f64, rng: &mut ChaCha8Rng) -> Self {
        let nx = (libm::round(period_x / surface.texture_cell) as usize).max(1);
        let ny = (libm::round(period_y / surface.texture_cell) as usize).max(1);
        let lattice = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
        Self {
            nx,
            ny,
            cell_x: period_x / nx as f64,
            cell_y: period_y / ny as f64,
            lattice,
            surface,
        }
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        let gx = u / self.cell_x;
        let gy = v / self.cell_y;
        let (fx, fy) = (libm::floor(gx), libm::floor(gy));
        let (tx, ty) = (smooth(gx - fx), smooth(gy - fy));
        let ix = (fx as i64).rem_euclid(self.nx as i64) as usize;
        let iy = (fy as i64).rem_euclid(self.ny as i64) as usize;
        let ix1 = (ix + 1) % self.nx;
        let iy1 = (iy + 1) % self.ny;
        let l = |x: usize, y: usize| self.lattice[y * self.nx + x];
        let top = l(ix, iy) * (1.0 - tx) + l(ix1, iy) * tx;
        let bottom = l(ix, iy1) * (1.0 - tx) + l(ix1, iy1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    fn color(&self, u: f64, v: f64) -> Color {
        let t = self.value(u, v);
        let (a, b) = (self.surface.color_a, self.surface.color_b);
        core::array::from_fn(|c| quantize(a[c] + (b[c] - a[c]) * t))
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn quantize(c: f64) -> f64 {
    libm::round(c.clamp(0.0, 1.0) * 255.0) / 255.0
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if self.dims.is_empty() {
            return bad("dims", "scene must be at least 1x1");
        }
        if self.frames == 0 {
            return bad("frames", "scene needs at least one frame");
        }
        if self.trajectories_per_surface == 0 {
            return bad("trajectories_per_surface", "must be at least 1");
        }
        let surfaces = core::iter::once(&self.background).chain(self.sprites.iter().map(|s| &s.surface));
        for s in surfaces {
            if !(s.texture_cell > 0.0) {
                return bad("texture_cell", "must be positive");
            }
        }
        if self.sprites.iter().any(|s| s.width == 0 || s.height == 0) {
            return bad("sprite", "sprite size must be positive");
        }
        if self.sprites.len() >= 255 {
            return bad("sprite", "at most 254 sprites");
        }
        Ok(())
    }

    fn background_offset(&self, frame: usize) -> [f64; 2] {
        let f = frame as f64;
        [self.background_velocity[0] * f, self.background_velocity[1] * f]
    }

    /// Surface label (0 = background) visible at pixel `(x, y)`.
    fn top_label(&self, frame: usize, x: usize, y: usize) -> LayerId {
        for (k, s) in self.sprites.iter().enumerate().rev() {
            if sprite_local(s, frame, x as f64, y as f64).is_some() {
                return k as LayerId + 1;
            }
        }
        0
    }

    fn wrap(&self, u: f64, v: f64) -> (f64, f64) {
        let (w, h) = (self.dims.width as f64, self.dims.height as f64);
        (u.rem_euclid(w), v.rem_euclid(h))
    }
}

fn sprite_local(s: &Sprite, frame: usize, x: f64, y: f64) -> Option<(f64, f64)> {
    let o = s.origin(frame);
    let (lx, ly) = (x - o[0], y - o[1]);
    (lx >= 0.0 && ly >= 0.0 && lx < s.width as f64 && ly < s.height as f64).then_some((lx, ly))
}

/// Renders the scene and tracks its surfaces exactly.
pub fn generate_synthetic(scene: &SyntheticScene) -> Result<SyntheticSequence> {
    scene.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let dims = scene.dims;
    let (w, h) = (dims.width as f64, dims.height as f64);
    let bg_tex = Texture::new(scene.background, w, h, &mut rng);
    let sprite_tex: Vec<Texture> = scene
        .sprites
        .iter()
        .map(|s| Texture::new(s.surface, s.width as f64, s.height as f64, &mut rng))
        .collect();

    let mut frames = Vec::with_capacity(scene.frames);
    let mut ground_truth = Vec::with_capacity(scene.frames);
    for f in 0..scene.frames {
        let off = scene.background_offset(f);
        let mut pixels = Vec::with_capacity(dims.len());
        let mut labels = Vec::with_capacity(dims.len());
        for y in 0..dims.height {
            for x in 0..dims.width {
                let label = scene.top_label(f, x, y);
                let color = if label == 0 {
                    let (u, v) = scene.wrap(x as f64 - off[0], y as f64 - off[1]);
                    bg_tex.color(u, v)
                } else {
                    let k = label as usize - 1;
                    let (lx, ly) = sprite_local(&scene.sprites[k], f, x as f64, y as f64).expect("covered");
                    sprite_tex[k].color(lx, ly)
                };
                pixels.push(color);
                labels.push(label);
            }
        }
        frames.push(Frame::new(dims, pixels)?);
        ground_truth.push(LabelMap::new(dims, labels)?);
    }

    let mut trajectories = Vec::new();
    let mut next_id = 0u64;
    // Background seeds cover the whole wrapped texture.
    let bg_seeds = jittered_grid(scene.trajectories_per_surface, [0.0, 0.0], [w, h], scene.jitter, &mut rng);
    for seed in bg_seeds {
        let track = |f: usize| {
            let off = scene.background_offset(f);
            let (ux, uy) = (seed[0] + off[0], seed[1] + off[1]);
            // Wrap count identifies jumps across the frame border.
            let laps = (libm::floor(ux / w) as i64, libm::floor(uy / h) as i64);
            let (x, y) = scene.wrap(ux, uy);
            (Point::new(x, y), laps)
        };
        emit_tracks(scene, 0, track, &mut next_id, &mut trajectories);
    }
    for (k, s) in scene.sprites.iter().enumerate() {
        let m = scene.track_margin.min((s.width as f64 - 1.0) / 2.0).min((s.height as f64 - 1.0) / 2.0).max(0.0);
        let lo = [m, m];
        let hi = [(s.width as f64 - 1.0 - m).max(m), (s.height as f64 - 1.0 - m).max(m)];
        let seeds = jittered_grid(scene.trajectories_per_surface, lo, hi, scene.jitter, &mut rng);
        for seed in seeds {
            let track = |f: usize| {
                let o = s.origin(f);
                (Point::new(o[0] + seed[0], o[1] + seed[1]), (0i64, 0i64))
            };
            emit_tracks(scene, k as LayerId + 1, track, &mut next_id, &mut trajectories);
        }
    }
    Ok(SyntheticSequence {
        frames,
        trajectories: TrajectorySet::new(trajectories),
        ground_truth,
    })
}

/// Splits one tracked surface point into maximal visible runs.
fn emit_tracks(
    scene: &SyntheticScene,
    label: LayerId,
    track: impl Fn(usize) -> (Point, (i64, i64)),
    next_id: &mut u64,
    out: &mut Vec<Trajectory>,
) {
    let dims = scene.dims;
    let mut current: Option<Trajectory> = None;
    let mut last_laps = None;
    for f in 0..scene.frames {
        let (p, laps) = track(f);
        let visible = dims.pixel_of(p.x, p.y).is_some_and(|i| {
            let (x, y) = dims.coords(i);
            scene.top_label(f, x, y) == label
        });
        let continues = visible && last_laps == Some(laps) && current.is_some();
        if !continues {
            if let Some(t) = current.take() {
                if t.points.len() >= 2 {
                    out.push(t);
                }
            }
            if visible {
                let mut t = Trajectory::new(*next_id, f, Vec::new());
                t.label = Some(label);
                *next_id += 1;
                current = Some(t);
            }
        }
        if let Some(t) = current.as_mut() {
            t.points.push(p);
        }
        last_laps = visible.then_some(laps);
    }
    if let Some(t) = current {
        if t.points.len() >= 2 {
            out.push(t);
        }
    }
}

/// `n` points on a shuffled jittered grid over the box `[lo, hi]`.
fn jittered_grid(n: usize, lo: [f64; 2], hi: [f64; 2], jitter: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let ew = (hi[0] - lo[0]).max(1e-9);
    let eh = (hi[1] - lo[1]).max(1e-9);
    let gx = (libm::round(libm::sqrt(n as f64 * ew / eh)) as usize).clamp(1, n);
    let gy = n.div_ceil(gx);
    let mut cells: Vec<(usize, usize)> = (0..gy).flat_map(|j| (0..gx).map(move |i| (i, j))).collect();
    cells.shuffle(rng);
    cells.truncate(n);
    cells.sort_unstable_by_key(|&(i, j)| (j, i));
    let (cw, ch) = (ew / gx as f64, eh / gy as f64);
    cells
        .into_iter()
        .map(|(i, j)| {
            let jx = jitter * (rng.random::<f64>() - 0.5);
            let jy = jitter * (rng.random::<f64>() - 0.5);
            [lo[0] + (i as f64 + 0.5 + jx) * cw, lo[1] + (j as f64 + 0.5 + jy) * ch]
        })
        .collect()
}
