//! The per-frame loop: trajectory labels, per-layer filtering, segmentation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::image::{normalize_stack, Dims, Frame, LabelMap, LayerId, ProbabilityMap, BACKGROUND};
use crate::label_propagation::{
    assign_labels, detect_new_layer, propagate_labels, retire_layers, transition_matrix, LabelingProbability,
};
use crate::layer_filter::{
    kde_likelihood, posterior, propagate_appearance, propagate_prior, update_model, AppearanceModel, KdeParams,
    DEFAULT_POOL_SIZE,
};
use crate::motion_field::{estimate_motion_field, MotionField, MotionParams};
use crate::segmentation::{
    bootstrap_data_cost, data_cost_from_posterior, minimize_energy, nearest_labels, CostVolume, SegmentationParams,
};
use crate::trajectory::{Point, Trajectory, TrajectorySet};
use crate::trajectory_graph::{affinity, pairwise_distances, recursive_ncut, AffinityMatrix, DistanceParams, NcutParams};

/// Largest layer id a label map can carry in the 8-bit mask format.
pub const MAX_LAYER_ID: LayerId = 255;

/// How the background is picked among the initial clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundSelection {
    /// Cluster with the most trajectories; ties go to the larger spread.
    #[default]
    MostTrajectories,
    /// Cluster whose points are spread widest around their centroid.
    LargestSpread,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Weight of the motion distance against the spatial distance.
    pub lambda: f64,
    pub distance: DistanceParams,
    pub ncut: NcutParams,
    /// A layer splits when its best cut costs less than this.
    pub new_layer_threshold: f64,
    /// Layers labeling fewer trajectories than this are retired.
    pub min_support: usize,
    pub motion: MotionParams,
    pub kde: KdeParams,
    pub pool_size: usize,
    /// `label_cost` is replaced by [`PipelineConfig::label_cost`] when that is set,
    /// and by the area-scaled default otherwise.
    pub segmentation: SegmentationParams,
    pub label_cost: Option<f64>,
    /// Initialization window and bootstrap period of a new layer, in frames.
    pub init_frames: usize,
    /// A layer keeps bootstrap costs while its median pool count is below this.
    pub bootstrap_min_pool: usize,
    /// Lower bound applied to propagated priors before renormalizing.
    pub prior_floor: f64,
    /// Mass spread uniformly over all layers when a mask becomes the next prior.
    pub prior_smoothing: f64,
    pub background: BackgroundSelection,
    /// Recorded for reproducibility; the pipeline itself draws no random numbers.
    pub seed: u64,
    /// Keep posteriors and motion fields in each [`StepReport`].
    pub keep_debug: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lambda: 0.8,
            distance: DistanceParams::default(),
            ncut: NcutParams::default(),
            new_layer_threshold: 1e-4,
            min_support: 5,
            motion: MotionParams::default(),
            kde: KdeParams::default(),
            pool_size: DEFAULT_POOL_SIZE,
            segmentation: SegmentationParams::default(),
            label_cost: None,
            init_frames: 5,
            bootstrap_min_pool: DEFAULT_POOL_SIZE / 2,
            prior_floor: 1e-3,
            prior_smoothing: 0.2,
            background: BackgroundSelection::default(),
            seed: 0,
            keep_debug: false,
        }
    }
}

/// Data cost of a pixel whose posterior for its label is 0.9.
const CONFIDENT_PIXEL_COST: f64 = 0.105_360_515_657_826_3;

impl PipelineConfig {
    /// Label cost used on a frame of the given size.
    pub fn label_cost_for(&self, dims: Dims) -> f64 {
        self.label_cost
            .unwrap_or_else(|| 50.0 * CONFIDENT_PIXEL_COST * dims.len() as f64 / 1e4)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, bool, &'static str); 13] = [
            ("lambda", (0.0..=1.0).contains(&self.lambda), "must lie in [0, 1]"),
            ("window", self.distance.window >= 1, "must be at least 1"),
            ("no_overlap_distance", self.distance.no_overlap_distance > 0.0, "must be positive"),
            ("ncut_threshold", self.ncut.stop_threshold >= 0.0, "must be non-negative"),
            ("min_cluster_size", self.ncut.min_cluster_size >= 1, "must be at least 1"),
            ("new_layer_threshold", self.new_layer_threshold >= 0.0, "must be non-negative"),
            ("min_support", self.min_support >= 1, "must be at least 1"),
            ("sigma_m", self.motion.sigma_m > 0.0, "must be positive"),
            ("sigma_p", self.motion.sigma_p > 0.0, "must be positive"),
            ("pool_size", self.pool_size >= 1, "must be at least 1"),
            ("init_frames", self.init_frames >= 2, "must be at least 2"),
            ("prior_floor", (0.0..1.0).contains(&self.prior_floor), "must lie in [0, 1)"),
            ("prior_smoothing", (0.0..=1.0).contains(&self.prior_smoothing), "must lie in [0, 1]"),
        ];
        for (name, ok, reason) in checks {
            if !ok {
                return Err(Error::InvalidParameter { name, reason });
            }
        }
        if self.label_cost.is_some_and(|h| !(h >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "label_cost",
                reason: "must be non-negative",
            });
        }
        if self.motion.stride == 0 {
            return Err(Error::InvalidParameter {
                name: "stride",
                reason: "must be at least 1",
            });
        }
        self.kde.validate()?;
        self.segmentation.validate()
    }

    fn segmentation_for(&self, dims: Dims) -> SegmentationParams {
        let mut p = self.segmentation.clone();
        p.label_cost = self.label_cost_for(dims);
        p
    }
}

/// The processing block of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub appearance: AppearanceModel,
    pub prior: ProbabilityMap,
    /// Frames processed since the layer was created.
    pub age: usize,
}

/// Something went wrong in a frame without stopping the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Unlabeled trajectories with no affinity path to a labeled one.
    StrandedTrajectories { count: usize },
    /// No trajectory carried a label into this frame.
    NoLabeledTrajectories,
    /// The layer skipped this frame; the background falls back to zero motion.
    MotionFailed { layer: LayerId, error: Error },
    /// A split was found but every layer id is taken.
    LayerIdsExhausted,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::StrandedTrajectories { count } => {
                write!(f, "{count} trajectories have no path to a labeled trajectory")
            }
            Warning::NoLabeledTrajectories => f.write_str("no labeled trajectories"),
            Warning::MotionFailed { layer, error } => {
                write!(f, "motion estimation failed for layer {layer}: {error}")
            }
            Warning::LayerIdsExhausted => f.write_str("no free layer id for a detected layer"),
        }
    }
}

/// Per-layer intermediate maps of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DebugMaps {
    pub posteriors: Vec<(LayerId, ProbabilityMap)>,
    pub fields: Vec<(LayerId, MotionField)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub frame: usize,
    pub mask: LabelMap,
    /// Largest deviation of a pixel's posterior sum from 1.
    pub posterior_deviation: f64,
    pub warnings: Vec<Warning>,
    pub created: Vec<LayerId>,
    pub retired: Vec<LayerId>,
    /// Layers alive after the step, ascending.
    pub live: Vec<LayerId>,
    pub debug: Option<DebugMaps>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    /// Last processed frame.
    pub frame: usize,
    pub dims: Dims,
    pub layers: BTreeMap<LayerId, LayerState>,
    /// Current label of every labeled trajectory, by id.
    pub trajectory_labels: BTreeMap<u64, LayerId>,
    pub mask: LabelMap,
    pub config: PipelineConfig,
}

/// Result of [`initialize`]: the state after frame `init_frames - 1` and one
/// mask per initialization frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub state: PipelineState,
    pub masks: Vec<LabelMap>,
}

/// Trajectories alive at `frame` with a displacement, ordered by id.
fn trackable(trajectories: &TrajectorySet, frame: usize) -> Vec<&Trajectory> {
    let mut out: Vec<&Trajectory> = trajectories
        .alive_at(frame)
        .filter(|t| t.history_len(frame) >= 2)
        .collect();
    out.sort_by_key(|t| t.id);
    out
}

fn spread(members: &[&Trajectory], frame: usize) -> f64 {
    let pts: Vec<Point> = members.iter().filter_map(|t| t.position(frame)).collect();
    if pts.is_empty() {
        return 0.0;
    }
    let n = pts.len() as f64;
    let c = Point::new(pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n);
    pts.iter().map(|p| p.distance(c)).sum::<f64>() / n
}

fn pick_background(clusters: &[Vec<&Trajectory>], frame: usize, rule: BackgroundSelection) -> usize {
    let mut best = 0;
    for i in 1..clusters.len() {
        let (a, b) = (&clusters[i], &clusters[best]);
        let (sa, sb) = (spread(a, frame), spread(b, frame));
        let better = match rule {
            BackgroundSelection::MostTrajectories => a.len() > b.len() || (a.len() == b.len() && sa > sb),
            BackgroundSelection::LargestSpread => sa > sb || (sa == sb && a.len() > b.len()),
        };
        if better {
            best = i;
        }
    }
    best
}

/// `(1 - eps)` on the layer's mask plus `eps` spread over all `k` layers.
fn soft_prior(mask: &LabelMap, layer: LayerId, k: usize, eps: f64) -> ProbabilityMap {
    let base = eps / k as f64;
    let values = mask
        .labels()
        .iter()
        .map(|&l| if l == layer { 1.0 - eps + base } else { base })
        .collect();
    ProbabilityMap::new(mask.dims(), values).expect("mask dims")
}

fn labeled_points(trajs: &[&Trajectory], labels: &[Option<LayerId>], frame: usize) -> Vec<(Point, LayerId)> {
    trajs
        .iter()
        .zip(labels)
        .filter_map(|(t, l)| Some((t.position(frame)?, (*l)?)))
        .collect()
}

/// Clusters the trajectories of the first `config.init_frames` frames into layers
/// and segments those frames from trajectory points alone.
pub fn initialize(frames: &[Frame], trajectories: &TrajectorySet, config: &PipelineConfig) -> Result<Initialization> {
    config.validate()?;
    let w = config.init_frames;
    if frames.len() < w {
        return Err(Error::TooFewFrames {
            needed: w,
            found: frames.len(),
        });
    }
    let dims = frames[0].dims();
    for f in &frames[..w] {
        dims.ensure_eq(f.dims())?;
    }
    let t0 = w - 1;
    let causal = trajectories.truncated(t0);
    let members = trackable(&causal, t0);
    let needed = config.ncut.min_cluster_size;
    if members.len() < needed {
        return Err(Error::TooFewTrajectories {
            needed,
            found: members.len(),
            frame: t0,
        });
    }

    let dparams = DistanceParams {
        window: config.distance.window.max(t0),
        ..config.distance
    };
    let a = affinity(&pairwise_distances(&members, t0, &dparams), config.lambda);
    let assignment = recursive_ncut(&a, &config.ncut);
    let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
    let mut clusters: Vec<Vec<&Trajectory>> = vec![Vec::new(); n_clusters];
    for (t, &c) in members.iter().zip(&assignment) {
        clusters[c].push(t);
    }
    let bg = pick_background(&clusters, t0, config.background);
    let mut cluster_layer = vec![BACKGROUND; n_clusters];
    let mut next: LayerId = 1;
    for (c, slot) in cluster_layer.iter_mut().enumerate() {
        if c != bg {
            if next > MAX_LAYER_ID {
                return Err(Error::LayerIdsExhausted);
            }
            *slot = next;
            next += 1;
        }
    }
    let trajectory_labels: BTreeMap<u64, LayerId> = members
        .iter()
        .zip(&assignment)
        .map(|(t, &c)| (t.id, cluster_layer[c]))
        .collect();
    let mut layer_ids: Vec<LayerId> = cluster_layer.clone();
    layer_ids.sort_unstable();

    let mut models: BTreeMap<LayerId, AppearanceModel> = layer_ids
        .iter()
        .map(|&l| (l, AppearanceModel::new(dims, config.pool_size)))
        .collect();
    let seg = config.segmentation_for(dims);
    let mut masks = Vec::with_capacity(w);
    let all: Vec<&Trajectory> = {
        let mut v: Vec<&Trajectory> = causal.iter().filter(|t| trajectory_labels.contains_key(&t.id)).collect();
        v.sort_by_key(|t| t.id);
        v
    };
    let labels: Vec<Option<LayerId>> = all.iter().map(|t| trajectory_labels.get(&t.id).copied()).collect();
    for (f, frame) in frames[..w].iter().enumerate() {
        if f > 0 {
            for (&l, model) in models.iter_mut() {
                let layer_trajs = all.iter().zip(&labels).filter(|(_, x)| **x == Some(l)).map(|(t, _)| *t);
                let field = estimate_motion_field(layer_trajs, f, dims, &config.motion)
                    .unwrap_or_else(|_| MotionField::zero(dims));
                *model = propagate_appearance(model, &field)?;
            }
        }
        let points = labeled_points(&all, &labels, f);
        let data = bootstrap_data_cost(dims, &points, seg.bootstrap_c, seg.bootstrap_radius, &layer_ids)?;
        let mask = minimize_energy(&data, frame, &seg)?.labels;
        for (&l, model) in models.iter_mut() {
            update_model(model, frame, &mask, l)?;
        }
        masks.push(mask);
    }

    let k = layer_ids.len();
    let last = masks.last().expect("at least one frame").clone();
    let layers = models
        .into_iter()
        .map(|(l, appearance)| {
            let prior = soft_prior(&last, l, k, config.prior_smoothing);
            (l, LayerState { appearance, prior, age: w })
        })
        .collect();
    Ok(Initialization {
        state: PipelineState {
            frame: t0,
            dims,
            layers,
            trajectory_labels,
            mask: last,
            config: config.clone(),
        },
        masks,
    })
}

impl PipelineState {
    pub fn live_layers(&self) -> Vec<LayerId> {
        self.layers.keys().copied().collect()
    }

    fn free_layer_id(&self) -> Option<LayerId> {
        (1..=MAX_LAYER_ID).find(|l| !self.layers.contains_key(l))
    }

    fn bootstrap_active(&self, layer: LayerId) -> bool {
        let Some(state) = self.layers.get(&layer) else {
            return false;
        };
        if state.age < self.config.init_frames {
            return true;
        }
        let pixels = self
            .mask
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == layer)
            .map(|(i, _)| i);
        state.appearance.median_count(pixels) < self.config.bootstrap_min_pool
    }

    /// Processes the next frame. Trajectory points after that frame are ignored.
    pub fn step(&mut self, frame: &Frame, trajectories: &TrajectorySet) -> Result<StepReport> {
        let t = self.frame + 1;
        self.dims.ensure_eq(frame.dims())?;
        let cfg = self.config.clone();
        let dims = self.dims;
        let mut warnings = Vec::new();

        // Trajectory labels.
        let causal = trajectories.truncated(t);
        let trajs = trackable(&causal, t);
        let mut labels: Vec<Option<LayerId>> = trajs
            .iter()
            .map(|tr| self.trajectory_labels.get(&tr.id).copied().filter(|l| self.layers.contains_key(l)))
            .collect();
        let a = affinity(&pairwise_distances(&trajs, t, &cfg.distance), cfg.lambda);
        if labels.iter().all(Option::is_none) {
            if !trajs.is_empty() {
                warnings.push(Warning::NoLabeledTrajectories);
            }
        } else {
            self.propagate(&a, &mut labels, &mut warnings)?;
        }

        // New layers.
        let mut created = Vec::new();
        for layer in self.live_layers() {
            let members: Vec<usize> = (0..trajs.len()).filter(|&i| labels[i] == Some(layer)).collect();
            if members.len() < 2 * cfg.ncut.min_cluster_size {
                continue;
            }
            let model = &self.layers[&layer].appearance;
            let distances: Vec<f64> = members
                .iter()
                .map(|&i| {
                    let tr = trajs[i];
                    let (Some(now), Some(prev)) = (tr.position(t), tr.position(t - 1)) else {
                        return f64::NAN;
                    };
                    match (dims.pixel_of(now.x, now.y), dims.pixel_of(prev.x, prev.y)) {
                        (Some(pn), Some(pp)) => model.mean_distance(pp, frame.at(pn)).unwrap_or(f64::INFINITY),
                        _ => f64::NAN,
                    }
                })
                .collect();
            let sub = a.submatrix(&members);
            let Some(split) = detect_new_layer(&sub, &distances, cfg.new_layer_threshold, cfg.ncut.min_cluster_size)
            else {
                continue;
            };
            let Some(id) = self.free_layer_id() else {
                warnings.push(Warning::LayerIdsExhausted);
                continue;
            };
            for &m in &split.split_off {
                labels[members[m]] = Some(id);
            }
            self.layers.insert(
                id,
                LayerState {
                    appearance: AppearanceModel::new(dims, cfg.pool_size),
                    prior: ProbabilityMap::filled(dims, 1.0 / (self.layers.len() + 1) as f64),
                    age: 0,
                },
            );
            created.push(id);
        }

        // Retirement.
        let assigned: Vec<LayerId> = labels.iter().flatten().copied().collect();
        let retired = retire_layers(&self.live_layers(), &assigned, cfg.min_support);
        for l in &retired {
            self.layers.remove(l);
            for x in labels.iter_mut() {
                if *x == Some(*l) {
                    *x = None;
                }
            }
        }
        self.trajectory_labels = trajs
            .iter()
            .zip(&labels)
            .filter_map(|(tr, l)| Some((tr.id, (*l)?)))
            .collect();

        // Processing blocks.
        let mut active: Vec<(LayerId, MotionField)> = Vec::new();
        for &layer in self.layers.keys() {
            let layer_trajs = trajs.iter().zip(&labels).filter(|(_, l)| **l == Some(layer)).map(|(tr, _)| *tr);
            match estimate_motion_field(layer_trajs, t, dims, &cfg.motion) {
                Ok(field) => active.push((layer, field)),
                Err(error) => {
                    warnings.push(Warning::MotionFailed { layer, error });
                    if layer == BACKGROUND {
                        active.push((layer, MotionField::zero(dims)));
                    }
                }
            }
        }
        let k = active.len();
        let active_ids: Vec<LayerId> = active.iter().map(|(l, _)| *l).collect();
        let mut appearances = Vec::with_capacity(k);
        let mut priors = Vec::with_capacity(k);
        for (layer, field) in &active {
            let state = &self.layers[layer];
            appearances.push(propagate_appearance(&state.appearance, field)?);
            priors.push(propagate_prior(&state.prior, field, k)?);
        }
        normalize_stack(&mut priors);
        for p in priors.iter_mut() {
            for v in p.values_mut() {
                *v = v.max(cfg.prior_floor);
            }
        }
        normalize_stack(&mut priors);
        let likelihoods = appearances
            .iter()
            .map(|m| kde_likelihood(frame, m, &cfg.kde))
            .collect::<Result<Vec<_>>>()?;
        let post = posterior(&likelihoods, &priors)?;
        let posterior_deviation = (0..dims.len())
            .map(|i| libm::fabs(post.iter().map(|p| p.at(i)).sum::<f64>() - 1.0))
            .fold(0.0, f64::max);

        // Segmentation.
        let seg = cfg.segmentation_for(dims);
        let mut data = data_cost_from_posterior(&post, &active_ids)?;
        self.overlay_bootstrap(&mut data, &trajs, &labels, t, &appearances, &active_ids, &seg)?;
        let mask = minimize_energy(&data, frame, &seg)?.labels;

        // Model update.
        for ((layer, _), mut appearance) in active.iter().zip(appearances) {
            update_model(&mut appearance, frame, &mask, *layer)?;
            let state = self.layers.get_mut(layer).expect("active layer is live");
            state.appearance = appearance;
            state.prior = soft_prior(&mask, *layer, k, cfg.prior_smoothing);
        }
        for state in self.layers.values_mut() {
            state.age += 1;
        }

        let debug = cfg.keep_debug.then(|| DebugMaps {
            posteriors: active_ids.iter().copied().zip(post).collect(),
            fields: active,
        });
        self.mask = mask.clone();
        self.frame = t;
        Ok(StepReport {
            frame: t,
            mask,
            posterior_deviation,
            warnings,
            created,
            retired,
            live: self.live_layers(),
            debug,
        })
    }

    /// Fills unlabeled entries of `labels` by label propagation over `a`.
    fn propagate(&self, a: &AffinityMatrix, labels: &mut [Option<LayerId>], warnings: &mut Vec<Warning>) -> Result<()> {
        let mut unlabeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_none()).collect();
        if unlabeled.is_empty() {
            return Ok(());
        }
        let mut nodes: Vec<usize> = (0..labels.len()).collect();
        loop {
            let sub = a.submatrix(&nodes);
            let local = |g: usize| nodes.binary_search(&g).expect("node kept");
            let lab: Vec<usize> = nodes.iter().filter(|&&g| labels[g].is_some()).map(|&g| local(g)).collect();
            let unl: Vec<usize> = unlabeled.iter().map(|&g| local(g)).collect();
            let p = transition_matrix(&sub, &lab, &unl)?;
            let y_l: Vec<LayerId> = lab.iter().map(|&i| labels[nodes[i]].expect("labeled")).collect();
            match propagate_labels(&p, &LabelingProbability::one_hot(&y_l, &[])) {
                Ok(y) => {
                    for (&g, l) in unlabeled.iter().zip(assign_labels(&y)) {
                        labels[g] = Some(l);
                    }
                    return Ok(());
                }
                Err(Error::DisconnectedUnlabeled(stranded)) => {
                    warnings.push(Warning::StrandedTrajectories { count: stranded.len() });
                    let drop: Vec<usize> = stranded.iter().map(|&i| nodes[i]).collect();
                    nodes.retain(|g| !drop.contains(g));
                    unlabeled.retain(|g| !drop.contains(g));
                    if unlabeled.is_empty() {
                        return Ok(());
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Replaces data costs by bootstrap costs near trajectories of layers whose
    /// pools are still thin, and wherever no active layer holds samples.
    #[allow(clippy::too_many_arguments)]
    fn overlay_bootstrap(
        &self,
        data: &mut CostVolume,
        trajs: &[&Trajectory],
        labels: &[Option<LayerId>],
        t: usize,
        appearances: &[AppearanceModel],
        active: &[LayerId],
        seg: &SegmentationParams,
    ) -> Result<()> {
        let points: Vec<(Point, LayerId)> = labeled_points(trajs, labels, t)
            .into_iter()
            .filter(|(_, l)| active.contains(l))
            .collect();
        if points.is_empty() {
            return Ok(());
        }
        let thin: Vec<LayerId> = active.iter().copied().filter(|&l| self.bootstrap_active(l)).collect();
        let nearest = nearest_labels(data.dims(), &points, seg.bootstrap_radius);
        let boot = bootstrap_data_cost(data.dims(), &points, seg.bootstrap_c, seg.bootstrap_radius, active)?;
        for (i, near) in nearest.into_iter().enumerate() {
            let Some(l) = near else {
                continue;
            };
            let empty = appearances.iter().all(|m| m.count(i) == 0);
            if empty || thin.contains(&l) {
                data.pixel_mut(i).copy_from_slice(boot.pixel(i));
            }
        }
        Ok(())
    }
}

/// Runs [`initialize`] and then [`PipelineState::step`] on every remaining frame.
pub fn run_sequence(
    frames: &[Frame],
    trajectories: &TrajectorySet,
    config: &PipelineConfig,
) -> Result<(Initialization, Vec<StepReport>)> {
    let init = initialize(frames, trajectories, config)?;
    let mut state = init.state.clone();
    let mut reports = Vec::with_capacity(frames.len().saturating_sub(config.init_frames));
    for frame in &frames[config.init_frames..] {
        reports.push(state.step(frame, trajectories)?);
    }
    Ok((init, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{binary_fscore, generate_synthetic, iou, Sprite, Surface, SyntheticScene};

    fn sprite_scene() -> SyntheticScene {
        SyntheticScene {
            sprites: vec![Sprite {
                width: 14,
                height: 14,
                start: [10.0, 20.0],
                velocity: [1.0, 0.5],
                surface: Surface {
                    color_a: [0.85, 0.2, 0.15],
                    color_b: [0.95, 0.5, 0.3],
                    texture_cell: 4.0,
                },
            }],
            frames: 16,
            ..SyntheticScene::default()
        }
    }

    /// Synthetic scenes track every surface equally densely, so the
    /// background is told apart by its spread.
    fn config() -> PipelineConfig {
        PipelineConfig {
            background: BackgroundSelection::LargestSpread,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn static_scene_has_only_background() {
        let scene = SyntheticScene {
            background_velocity: [0.0, 0.0],
            frames: 8,
            ..SyntheticScene::default()
        };
        let seq = generate_synthetic(&scene).unwrap();
        let (init, reports) = run_sequence(&seq.frames, &seq.trajectories, &config()).unwrap();
        assert_eq!(init.state.live_layers(), vec![BACKGROUND]);
        for m in init.masks.iter().chain(reports.iter().map(|r| &r.mask)) {
            assert!(m.labels().iter().all(|&l| l == BACKGROUND));
        }
    }

    #[test]
    fn sprite_becomes_its_own_layer() {
        let seq = generate_synthetic(&sprite_scene()).unwrap();
        let cfg = config();
        let init = initialize(&seq.frames, &seq.trajectories, &cfg).unwrap();
        assert_eq!(init.state.live_layers(), vec![0, 1]);
        let last = cfg.init_frames - 1;
        assert!(iou(&init.masks[last], 1, &seq.ground_truth[last], 1) >= 0.8);
    }

    #[test]
    fn steps_track_the_sprite() {
        let seq = generate_synthetic(&sprite_scene()).unwrap();
        let (_, reports) = run_sequence(&seq.frames, &seq.trajectories, &config()).unwrap();
        for r in &reports {
            assert!(r.posterior_deviation <= 1e-9);
            let f = binary_fscore(&r.mask, &seq.ground_truth[r.frame]).unwrap();
            assert!(f.fscore >= 0.85, "frame {}: {:?}", r.frame, f);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let seq = generate_synthetic(&sprite_scene()).unwrap();
        let cfg = config();
        let a = run_sequence(&seq.frames, &seq.trajectories, &cfg).unwrap();
        let b = run_sequence(&seq.frames, &seq.trajectories, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn future_points_do_not_change_the_mask() {
        let seq = generate_synthetic(&sprite_scene()).unwrap();
        let cfg = config();
        let init = initialize(&seq.frames, &seq.trajectories, &cfg).unwrap();
        let t = cfg.init_frames;
        let mut full = init.state.clone();
        let mut cut = init.state.clone();
        let a = full.step(&seq.frames[t], &seq.trajectories).unwrap();
        let b = cut.step(&seq.frames[t], &seq.trajectories.truncated(t)).unwrap();
        assert_eq!(a.mask, b.mask);
    }

    #[test]
    fn too_few_frames_is_an_error() {
        let seq = generate_synthetic(&sprite_scene()).unwrap();
        let err = initialize(&seq.frames[..4], &seq.trajectories, &config()).unwrap_err();
        assert_eq!(err, Error::TooFewFrames { needed: 5, found: 4 });
    }

    #[test]
    fn too_few_trajectories_is_an_error() {
        let seq = generate_synthetic(&sprite_scene()).unwrap();
        let few = TrajectorySet::new(seq.trajectories.iter().take(3).cloned().collect());
        let err = initialize(&seq.frames, &few, &config()).unwrap_err();
        assert!(matches!(err, Error::TooFewTrajectories { needed: 5, .. }));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = PipelineConfig {
            lambda: 1.5,
            ..PipelineConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter { name: "lambda", .. })));
    }
}
