//! The `mlbs` command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mlbs_core::eval::generate_synthetic;
use mlbs_core::pipeline::{initialize, StepReport};
use mlbs_core::LabelMap;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, FrameMetrics};
use crate::netpbm;
use crate::scene;
use crate::sequence::{self, create_dir, frame_file, frame_index, mask_file, numbered_images};
use crate::tracks;

#[derive(Debug, Parser)]
#[command(name = "mlbs", version, about = "Multilayer background subtraction for moving cameras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a frame sequence.
    Run(RunArgs),
    /// Render a synthetic sequence with ground truth and trajectories.
    Synth(SynthArgs),
    /// Score masks against ground truth.
    Eval(EvalArgs),
}

macro_rules! setting_flags {
    ($($field:ident),* $(,)?) => {
        /// Flags overriding settings-file keys of the same name.
        #[derive(Debug, Default, Clone, Args)]
        pub struct SettingFlags {
            $(
                #[arg(long, value_name = "VALUE", hide_short_help = true)]
                pub $field: Option<String>,
            )*
        }

        impl SettingFlags {
            pub fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field), v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

setting_flags!(
    lambda,
    window,
    no_overlap_distance,
    ncut_threshold,
    min_cluster_size,
    new_layer_threshold,
    min_support,
    sigma_m,
    sigma_p,
    solver,
    tol,
    max_iterations,
    stride,
    kde_sigma,
    kde_floor,
    pool_size,
    lambda1,
    lambda2,
    sigma_a,
    label_cost,
    bootstrap_c,
    bootstrap_radius,
    init_frames,
    bootstrap_min_pool,
    prior_floor,
    prior_smoothing,
    background,
);

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directory of numbered PPM/PGM frames.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Trajectory text file.
    #[arg(long)]
    pub trajectories: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory of ground-truth masks; enables metrics.csv.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write per-layer posteriors and motion fields.
    #[arg(long)]
    pub debug_maps: bool,
    #[command(flatten)]
    pub settings: SettingFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scene's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

impl RunArgs {
    /// Settings file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let set = |cfg: &mut RunConfig, k: &str, v: &str| cfg.set(k, v).map_err(|e| Error::Config(format!("--{}: {e}", k.replace('_', "-"))));
        for (k, v) in self.settings.pairs() {
            set(&mut cfg, k, v)?;
        }
        for (k, p) in [
            ("frames", &self.frames),
            ("trajectories", &self.trajectories),
            ("out", &self.out),
            ("gt", &self.gt),
        ] {
            if let Some(p) = p {
                set(&mut cfg, k, &p.to_string_lossy())?;
            }
        }
        if let Some(seed) = self.seed {
            cfg.pipeline.seed = seed;
        }
        if self.debug_maps {
            cfg.debug_maps = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    /// Mean binary and multilabel F over frames after initialization.
    pub mean_fscores: Option<(f64, f64)>,
    pub metrics: Vec<FrameMetrics>,
}

fn write_debug(dir: &Path, report: &StepReport) -> Result<()> {
    let Some(debug) = &report.debug else {
        return Ok(());
    };
    let t = report.frame;
    for (layer, post) in &debug.posteriors {
        netpbm::write_scalar_map(&dir.join(format!("posterior_{t:04}_layer{layer}.pgm")), post)?;
    }
    for (layer, field) in &debug.fields {
        let mut text = String::from("# x y u v\n");
        let w = field.dims().width;
        for i in 0..field.dims().len() {
            let [u, v] = field.at(i);
            writeln!(text, "{} {} {u:?} {v:?}", i % w, i / w).unwrap();
        }
        let path = dir.join(format!("motion_{t:04}_layer{layer}.txt"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Runs the pipeline and writes masks, the settings snapshot and, with ground
/// truth, `metrics.csv`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let frames_dir = cfg.frames.as_deref().expect("validated");
    let out = cfg.out.as_deref().expect("validated");
    let frame_files = numbered_images(frames_dir)?;
    let frames = sequence::load_frame_sequence(frames_dir)?;
    let trajectories = tracks::parse_trajectories(cfg.trajectories.as_deref().expect("validated"))?;
    let gt: BTreeMap<u64, LabelMap> = match &cfg.gt {
        Some(dir) => sequence::load_label_sequence(dir)?.into_iter().collect(),
        None => BTreeMap::new(),
    };

    let mut pipeline = cfg.pipeline.clone();
    pipeline.keep_debug = cfg.debug_maps;
    let masks_dir = out.join("masks");
    create_dir(&masks_dir)?;
    let debug_dir = out.join("debug");
    if cfg.debug_maps {
        create_dir(&debug_dir)?;
    }
    let snapshot = out.join("config.txt");
    fs::write(&snapshot, cfg.to_text()).map_err(|e| Error::io(&snapshot, e))?;

    let mut rows = Vec::new();
    let mut emit = |t: usize, mask: &LabelMap| -> Result<()> {
        netpbm::write_label_map(&mask_file(&masks_dir, t), mask)?;
        let idx = frame_index(&frame_files[t]).expect("numbered");
        if let Some(g) = gt.get(&idx) {
            rows.push(metrics::score_frame(t as u64, mask, g)?);
        }
        Ok(())
    };

    let init = initialize(&frames, &trajectories, &pipeline)?;
    for (t, m) in init.masks.iter().enumerate() {
        emit(t, m)?;
    }
    let mut state = init.state;
    for frame in &frames[pipeline.init_frames..] {
        let report = state.step(frame, &trajectories)?;
        for w in &report.warnings {
            log::warn!("frame {}: {w}", report.frame);
        }
        for l in &report.created {
            log::info!("frame {}: new layer {l}", report.frame);
        }
        for l in &report.retired {
            log::info!("frame {}: retired layer {l}", report.frame);
        }
        if cfg.debug_maps {
            write_debug(&debug_dir, &report)?;
        }
        emit(report.frame, &report.mask)?;
    }

    let mean = metrics::mean_fscores(&rows, pipeline.init_frames as u64);
    if cfg.gt.is_some() {
        metrics::write_csv(&out.join("metrics.csv"), &rows)?;
    }
    Ok(RunSummary {
        frames: frames.len(),
        mean_fscores: mean,
        metrics: rows,
    })
}

/// Writes `frames/`, `gt/`, `trajectories.txt` and `scene.txt` under `out`.
pub fn synth(scene_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut scene = scene::load_scene(scene_path)?;
    if let Some(s) = seed {
        scene.seed = s;
    }
    let seq = generate_synthetic(&scene).map_err(|e| Error::Config(e.to_string()))?;
    let frames_dir = out.join("frames");
    let gt_dir = out.join("gt");
    create_dir(&frames_dir)?;
    create_dir(&gt_dir)?;
    for (t, (frame, gt)) in seq.frames.iter().zip(&seq.ground_truth).enumerate() {
        netpbm::write_frame(&frame_file(&frames_dir, t), frame)?;
        netpbm::write_label_map(&gt_dir.join(format!("gt_{t:04}.pgm")), gt)?;
    }
    tracks::write_trajectories(&out.join("trajectories.txt"), &seq.trajectories)?;
    let path = out.join("scene.txt");
    fs::write(&path, scene::scene_to_text(&scene)).map_err(|e| Error::io(&path, e))
}

/// Scores every mask that has a ground-truth file with the same index.
pub fn eval(masks: &Path, gt: &Path, out: &Path) -> Result<Vec<FrameMetrics>> {
    let gt: BTreeMap<u64, LabelMap> = sequence::load_label_sequence(gt)?.into_iter().collect();
    let mut rows = Vec::new();
    for (idx, mask) in sequence::load_label_sequence(masks)? {
        if let Some(g) = gt.get(&idx) {
            rows.push(metrics::score_frame(idx, &mask, g)?);
        }
    }
    metrics::write_csv(out, &rows)?;
    Ok(rows)
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Run(args) => args.resolve().and_then(|cfg| run(&cfg)).map(|s| {
            println!("processed {} frames", s.frames);
            if let Some((b, m)) = s.mean_fscores {
                println!("mean binary F {b:.4}, mean multilabel F {m:.4}");
            }
        }),
        Command::Synth(args) => synth(&args.scene, &args.out, args.seed),
        Command::Eval(args) => eval(&args.masks, &args.gt, &args.out).map(|rows| {
            if let Some((b, m)) = metrics::mean_fscores(&rows, 0) {
                println!("{} frames, mean binary F {b:.4}, mean multilabel F {m:.4}", rows.len());
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
