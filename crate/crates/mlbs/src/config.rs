//! `key = value` settings files. Every key is also a command-line flag.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mlbs_core::motion_field::Solver;
use mlbs_core::pipeline::{BackgroundSelection, PipelineConfig};

use crate::error::{Error, Result};

/// Settings of a `run` invocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub frames: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub debug_maps: bool,
}

/// `(line, key, value)` entries of a settings file, in file order.
///
/// `#` starts a comment; blank lines are skipped.
pub fn parse_entries(text: &str) -> std::result::Result<Vec<(usize, String, String)>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("line {}: missing key", n + 1));
        }
        out.push((n + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}`: cannot parse `{value}`"))
}

fn real(key: &str, value: &str) -> std::result::Result<f64, String> {
    let v: f64 = num(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{key}`: must be finite"))
    }
}

fn flag(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{key}`: expected true or false, got `{value}`")),
    }
}

/// Names accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "frames",
    "trajectories",
    "out",
    "gt",
    "debug_maps",
    "seed",
    "lambda",
    "window",
    "no_overlap_distance",
    "ncut_threshold",
    "min_cluster_size",
    "new_layer_threshold",
    "min_support",
    "sigma_m",
    "sigma_p",
    "solver",
    "tol",
    "max_iterations",
    "stride",
    "kde_sigma",
    "kde_floor",
    "pool_size",
    "lambda1",
    "lambda2",
    "sigma_a",
    "label_cost",
    "bootstrap_c",
    "bootstrap_radius",
    "init_frames",
    "bootstrap_min_pool",
    "prior_floor",
    "prior_smoothing",
    "background",
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let p = &mut self.pipeline;
        match key {
            "frames" => self.frames = Some(PathBuf::from(value)),
            "trajectories" => self.trajectories = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "gt" => self.gt = Some(PathBuf::from(value)),
            "debug_maps" => self.debug_maps = flag(key, value)?,
            "seed" => p.seed = num(key, value)?,
            "lambda" => p.lambda = real(key, value)?,
            "window" => p.distance.window = num(key, value)?,
            "no_overlap_distance" => p.distance.no_overlap_distance = real(key, value)?,
            "ncut_threshold" => p.ncut.stop_threshold = real(key, value)?,
            "min_cluster_size" => p.ncut.min_cluster_size = num(key, value)?,
            "new_layer_threshold" => p.new_layer_threshold = real(key, value)?,
            "min_support" => p.min_support = num(key, value)?,
            "sigma_m" => p.motion.sigma_m = real(key, value)?,
            "sigma_p" => p.motion.sigma_p = real(key, value)?,
            "solver" => {
                p.motion.solve.solver = match value {
                    "cg" => Solver::ConjugateGradient,
                    "gabp" => Solver::GaussianBp,
                    "direct" => Solver::Direct,
                    _ => return Err(format!("`solver`: expected cg, gabp or direct, got `{value}`")),
                }
            }
            "tol" => p.motion.solve.tol = real(key, value)?,
            "max_iterations" => p.motion.solve.max_iterations = num(key, value)?,
            "stride" => p.motion.stride = num(key, value)?,
            "kde_sigma" => {
                let vals = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| real(key, s))
                    .collect::<std::result::Result<Vec<f64>, String>>()?;
                p.kde.bandwidth = match vals[..] {
                    [s] => [s; 3],
                    [r, g, b] => [r, g, b],
                    _ => return Err("`kde_sigma`: expected one or three values".into()),
                };
            }
            "kde_floor" => p.kde.floor = real(key, value)?,
            "pool_size" => p.pool_size = num(key, value)?,
            "lambda1" => p.segmentation.lambda1 = real(key, value)?,
            "lambda2" => p.segmentation.lambda2 = real(key, value)?,
            "sigma_a" => p.segmentation.sigma_a = real(key, value)?,
            "label_cost" => {
                p.label_cost = if value == "auto" {
                    None
                } else {
                    Some(real(key, value)?)
                }
            }
            "bootstrap_c" => p.segmentation.bootstrap_c = real(key, value)?,
            "bootstrap_radius" => p.segmentation.bootstrap_radius = real(key, value)?,
            "init_frames" => p.init_frames = num(key, value)?,
            "bootstrap_min_pool" => p.bootstrap_min_pool = num(key, value)?,
            "prior_floor" => p.prior_floor = real(key, value)?,
            "prior_smoothing" => p.prior_smoothing = real(key, value)?,
            "background" => {
                p.background = match value {
                    "largest" => BackgroundSelection::MostTrajectories,
                    "spread" => BackgroundSelection::LargestSpread,
                    _ => return Err(format!("`background`: expected largest or spread, got `{value}`")),
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> std::result::Result<(), String> {
        for (line, key, value) in parse_entries(text)? {
            self.set(&key, &value).map_err(|e| format!("line {line}: {e}"))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks parameter domains and the presence of required paths.
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate().map_err(|e| Error::Config(e.to_string()))?;
        for (name, path) in [
            ("frames", &self.frames),
            ("trajectories", &self.trajectories),
            ("out", &self.out),
        ] {
            if path.is_none() {
                return Err(Error::Config(format!("`{name}` is required")));
            }
        }
        Ok(())
    }

    /// The settings as a file that [`RunConfig::load`] reads back.
    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let mut lines = Vec::new();
        for (key, path) in [
            ("frames", &self.frames),
            ("trajectories", &self.trajectories),
            ("out", &self.out),
            ("gt", &self.gt),
        ] {
            if let Some(path) = path {
                lines.push(format!("{key} = {}", path.display()));
            }
        }
        let solver = match p.motion.solve.solver {
            Solver::ConjugateGradient => "cg",
            Solver::GaussianBp => "gabp",
            Solver::Direct => "direct",
        };
        let background = match p.background {
            BackgroundSelection::MostTrajectories => "largest",
            BackgroundSelection::LargestSpread => "spread",
        };
        let [br, bg, bb] = p.kde.bandwidth;
        let label_cost = p.label_cost.map_or("auto".to_string(), |h| format!("{h:?}"));
        lines.extend([
            format!("debug_maps = {}", self.debug_maps),
            format!("seed = {}", p.seed),
            format!("lambda = {:?}", p.lambda),
            format!("window = {}", p.distance.window),
            format!("no_overlap_distance = {:?}", p.distance.no_overlap_distance),
            format!("ncut_threshold = {:?}", p.ncut.stop_threshold),
            format!("min_cluster_size = {}", p.ncut.min_cluster_size),
            format!("new_layer_threshold = {:?}", p.new_layer_threshold),
            format!("min_support = {}", p.min_support),
            format!("sigma_m = {:?}", p.motion.sigma_m),
            format!("sigma_p = {:?}", p.motion.sigma_p),
            format!("solver = {solver}"),
            format!("tol = {:?}", p.motion.solve.tol),
            format!("max_iterations = {}", p.motion.solve.max_iterations),
            format!("stride = {}", p.motion.stride),
            format!("kde_sigma = {br:?}, {bg:?}, {bb:?}"),
            format!("kde_floor = {:?}", p.kde.floor),
            format!("pool_size = {}", p.pool_size),
            format!("lambda1 = {:?}", p.segmentation.lambda1),
            format!("lambda2 = {:?}", p.segmentation.lambda2),
            format!("sigma_a = {:?}", p.segmentation.sigma_a),
            format!("label_cost = {label_cost}"),
            format!("bootstrap_c = {:?}", p.segmentation.bootstrap_c),
            format!("bootstrap_radius = {:?}", p.segmentation.bootstrap_radius),
            format!("init_frames = {}", p.init_frames),
            format!("bootstrap_min_pool = {}", p.bootstrap_min_pool),
            format!("prior_floor = {:?}", p.prior_floor),
            format!("prior_smoothing = {:?}", p.prior_smoothing),
            format!("background = {background}"),
        ]);
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}
