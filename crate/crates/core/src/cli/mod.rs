//! Command-line entry point: `simulate`, `run`, `eval ate|depth` and
//! `ablate drift|consistency|clip-sweep`.
//!
//! Exit codes: 0 ok, 1 usage, 2 data or config error, 3 tracking failure.

pub mod experiments;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::backend::{track_sequence, TrackError, TrackerConfig};
use crate::evaluation::{
    apply_scaling_strategy, ate_csv, ate_rmse, consistency_csv, consistency_report, depth_frame_metrics,
    drift_csv, drift_variance_mc, AlignMode, DepthMap, DriftConfig, DriftModel, ScalingStrategy,
};
use crate::frontend::DepthRange;
use crate::io::kv::KeyValues;
use crate::io::{frame_path, read_depth, read_trajectory, write_trajectory, SequenceDir};
use crate::sensors::{DepthNoiseModel, FileBackedSensors, NoisySensors, SensorNoise};
use crate::simulator::{build_scene, export_sequence, SceneConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Tracking(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Tracking(_) => 3,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Keys accepted in run config files and `--set` overrides.
pub const RUN_KEYS: &[&str] = &[
    // front end
    "budget",
    "dilation_radius_px",
    "d_min",
    "d_max",
    "grid_x",
    "grid_y",
    "masking",
    "dynamic_classes",
    // back end
    "sigma_d_rel",
    "sigma_d_abs",
    "huber_delta_px",
    "ransac_max_iterations",
    "ransac_reproj_threshold_px",
    "ransac_min_inliers",
    "ransac_confidence",
    "ba_window",
    "ba_max_iters",
    "keyframe_min_ratio",
    "keyframe_max_gap",
    "depth_prior",
    "seed",
    // sensor noise
    "scale_cv",
    "ar1_phi",
    "additive_sigma",
    "rel_sigma",
    "dropout_rate",
    "distance_bias_gain",
    "descriptor_flip_prob",
    "mask_boundary_jitter_px",
    "mask_miss_rate",
    "init_depth_scale",
];

/// Merged SLAM settings: defaults, then a config file, then flag overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub noise: SensorNoise,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            noise: SensorNoise::default(),
            seed: 0,
        }
    }
}

fn on_off(key: &str, raw: &str) -> Result<bool, String> {
    match raw {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("key `{key}`: expected on or off, got `{raw}`")),
    }
}

fn check(ok: bool, msg: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

impl RunConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self, String> {
        if let Some((k, _)) = kv.iter().find(|(k, _)| !RUN_KEYS.contains(k)) {
            return Err(format!("unknown key `{k}`"));
        }
        let mut cfg = Self::default();
        let t = &mut cfg.tracker;

        let fe = &mut t.frontend;
        fe.budget = kv.get_or("budget", fe.budget)?;
        check(fe.budget >= 1, "budget must be >= 1")?;
        if let Some(raw) = kv.get("dilation_radius_px") {
            fe.dilation_radius_px = Some(raw.parse().map_err(|_| format!("key `dilation_radius_px`: cannot parse `{raw}`"))?);
        }
        fe.depth_range = DepthRange::new(
            kv.get_or("d_min", fe.depth_range.d_min)?,
            kv.get_or("d_max", fe.depth_range.d_max)?,
        )?;
        fe.grid_x = kv.get_or("grid_x", fe.grid_x)?;
        fe.grid_y = kv.get_or("grid_y", fe.grid_y)?;
        check(fe.grid_x >= 1 && fe.grid_y >= 1, "grid_x and grid_y must be >= 1")?;
        if let Some(raw) = kv.get("masking") {
            fe.masking = on_off("masking", raw)?;
        }
        if let Some(raw) = kv.get("dynamic_classes") {
            fe.dynamic_classes = raw
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<u16>())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("key `dynamic_classes`: cannot parse `{raw}`"))?;
        }

        let mut prior = t.ba.depth_prior.unwrap_or_default();
        prior.sigma_rel = kv.get_or("sigma_d_rel", prior.sigma_rel)?;
        check(prior.sigma_rel > 0.0, "sigma_d_rel must be positive")?;
        if let Some(raw) = kv.get("sigma_d_abs") {
            let v: f64 = raw.parse().map_err(|_| format!("key `sigma_d_abs`: cannot parse `{raw}`"))?;
            check(v > 0.0, "sigma_d_abs must be positive")?;
            prior.sigma_abs = Some(v);
        }
        let use_prior = kv.get("depth_prior").map_or(Ok(true), |raw| on_off("depth_prior", raw))?;
        t.ba.depth_prior = use_prior.then_some(prior);
        t.ba.huber_delta_px = kv.get_or("huber_delta_px", t.ba.huber_delta_px)?;
        check(t.ba.huber_delta_px > 0.0, "huber_delta_px must be positive")?;
        t.ba.window = kv.get_or("ba_window", t.ba.window)?;
        check(t.ba.window >= 1, "ba_window must be >= 1")?;
        t.ba.max_iterations = kv.get_or("ba_max_iters", t.ba.max_iterations)?;

        let r = &mut t.ransac;
        r.max_iterations = kv.get_or("ransac_max_iterations", r.max_iterations)?;
        r.reproj_threshold_px = kv.get_or("ransac_reproj_threshold_px", r.reproj_threshold_px)?;
        r.min_inliers = kv.get_or("ransac_min_inliers", r.min_inliers)?;
        r.confidence = kv.get_or("ransac_confidence", r.confidence)?;
        r.validate().map_err(|e| e.to_string())?;

        t.keyframe.min_ratio = kv.get_or("keyframe_min_ratio", t.keyframe.min_ratio)?;
        check(
            t.keyframe.min_ratio > 0.0 && t.keyframe.min_ratio <= 1.0,
            "keyframe_min_ratio must lie in (0, 1]",
        )?;
        t.keyframe.max_gap = kv.get_or("keyframe_max_gap", t.keyframe.max_gap)?;
        check(t.keyframe.max_gap >= 1, "keyframe_max_gap must be >= 1")?;

        cfg.seed = kv.get_or("seed", 0u64)?;
        t.seed = cfg.seed;

        let n = &mut cfg.noise;
        let d = &mut n.depth;
        d.scale_cv = kv.get_or("scale_cv", d.scale_cv)?;
        d.ar1_phi = kv.get_or("ar1_phi", d.ar1_phi)?;
        d.additive_sigma = kv.get_or("additive_sigma", d.additive_sigma)?;
        d.rel_sigma = kv.get_or("rel_sigma", d.rel_sigma)?;
        d.dropout_rate = kv.get_or("dropout_rate", d.dropout_rate)?;
        d.distance_bias_gain = kv.get_or("distance_bias_gain", d.distance_bias_gain)?;
        n.descriptor.flip_prob = kv.get_or("descriptor_flip_prob", n.descriptor.flip_prob)?;
        n.mask.boundary_jitter_px = kv.get_or("mask_boundary_jitter_px", n.mask.boundary_jitter_px)?;
        n.mask.miss_rate = kv.get_or("mask_miss_rate", n.mask.miss_rate)?;
        n.init_depth_scale = kv.get_or("init_depth_scale", n.init_depth_scale)?;
        n.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Reads `file` if given, then applies `overrides` on top.
    pub fn load(file: Option<&Path>, overrides: &KeyValues) -> Result<Self, CliError> {
        let mut kv = match file {
            Some(p) => KeyValues::read(p).map_err(data)?,
            None => KeyValues::new(),
        };
        kv.merge(overrides);
        Self::from_kv(&kv).map_err(CliError::Data)
    }
}

#[derive(Debug, Parser)]
#[command(name = "mdslam", version, about = "Metric-scale monocular SLAM on virtual sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic sequence directory.
    Simulate(SimulateArgs),
    /// Track a sequence and write the estimated trajectory in TUM format.
    Run(RunArgs),
    /// Evaluate trajectories or depth rasters.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Ablation experiments.
    #[command(subcommand)]
    Ablate(AblateCommand),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scene config (`key = value`); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output sequence directory.
    #[arg(long)]
    out: PathBuf,
    /// Scene generation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Sequence directory.
    sequence: PathBuf,
    /// SLAM config (`key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output trajectory path.
    #[arg(long)]
    out: PathBuf,
    /// Disable dynamic-object masking.
    #[arg(long)]
    no_masks: bool,
    /// Disable depth residuals in bundle adjustment.
    #[arg(long)]
    no_depth_prior: bool,
    /// Keypoint budget per frame.
    #[arg(long)]
    budget: Option<usize>,
    /// Accepted depth range as MIN,MAX in metres.
    #[arg(long, value_name = "MIN,MAX")]
    clip: Option<String>,
    /// Seed for RANSAC and sensor noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Absolute trajectory error after alignment.
    Ate(AteArgs),
    /// Per-frame depth metrics and their temporal consistency.
    Depth(DepthArgs),
}

#[derive(Debug, Args)]
struct AteArgs {
    /// Estimated trajectory (TUM format).
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth trajectory (TUM format).
    #[arg(long)]
    gt: PathBuf,
    /// Alignment: se3 or sim3.
    #[arg(long, default_value = "se3")]
    mode: AlignMode,
    /// Association tolerance in seconds.
    #[arg(long, default_value_t = crate::evaluation::DEFAULT_MAX_DT)]
    max_dt: f64,
    /// Write the result row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DepthArgs {
    /// Directory with predicted `frames/NNNNNN.depth` rasters.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth sequence directory.
    #[arg(long)]
    gt: PathBuf,
    /// raw, per-frame, global or clip:<d_max>.
    #[arg(long, default_value = "raw")]
    strategy: ScalingStrategy,
    /// Write the consistency table to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AblateCommand {
    /// Growth of accumulated error under i.i.d. or correlated per-step errors.
    Drift(DriftArgs),
    /// SLAM accuracy under depth noise of equal RMSE but different scale CV.
    Consistency(ConsistencyArgs),
    /// SLAM accuracy against the maximum accepted depth.
    ClipSweep(ClipSweepArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the table to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Do not print the table; requires --csv.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct DriftArgs {
    /// iid or ar1.
    #[arg(long, default_value = "iid")]
    model: String,
    /// AR(1) correlation, used with `--model ar1`.
    #[arg(long, default_value_t = 0.9)]
    phi: f64,
    /// Number of accumulated steps.
    #[arg(long, default_value_t = 1024)]
    frames: usize,
    /// Monte-Carlo trials.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Per-step error standard deviation.
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Monte-Carlo seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    /// Number of scene seeds, starting at 0.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Scale CV of the low-CV configuration.
    #[arg(long, default_value_t = 0.05)]
    cv_low: f64,
    /// Scale CV of the high-CV configuration.
    #[arg(long, default_value_t = 0.15)]
    cv_high: f64,
    /// Temporal correlation of the scale error.
    #[arg(long, default_value_t = experiments::CONSISTENCY_PHI)]
    phi: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ClipSweepArgs {
    /// Comma-separated d_max grid in metres.
    #[arg(long, default_value = "3,5,7.5,10,15")]
    dmax: String,
    /// Number of scene seeds, starting at 0.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Depth-proportional noise.
    #[arg(long, default_value_t = experiments::CLIP_SWEEP_REL_SIGMA)]
    rel_sigma: f64,
    /// Per-metre multiplicative depth bias.
    #[arg(long, default_value_t = experiments::CLIP_SWEEP_BIAS_GAIN)]
    bias_gain: f64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Eval(EvalCommand::Ate(a)) => cmd_eval_ate(&a),
        Command::Eval(EvalCommand::Depth(a)) => cmd_eval_depth(&a),
        Command::Ablate(AblateCommand::Drift(a)) => cmd_drift(&a),
        Command::Ablate(AblateCommand::Consistency(a)) => cmd_consistency(&a),
        Command::Ablate(AblateCommand::ClipSweep(a)) => cmd_clip_sweep(&a),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = match &a.config {
        Some(p) => SceneConfig::from_kv(&KeyValues::read(p).map_err(data)?).map_err(data)?,
        None => SceneConfig::default(),
    };
    let scene = build_scene(&cfg, a.seed).map_err(data)?;
    let seq = export_sequence(&scene, &cfg.trajectory, &cfg.intrinsics, &a.out).map_err(data)?;
    println!("frames {}", seq.frame_count);
    Ok(())
}

fn run_overrides(a: &RunArgs) -> Result<KeyValues, CliError> {
    let mut kv = KeyValues::new();
    for item in &a.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        kv.set(k.trim(), v.trim());
    }
    if a.no_masks {
        kv.set("masking", "off");
    }
    if a.no_depth_prior {
        kv.set("depth_prior", "off");
    }
    if let Some(b) = a.budget {
        kv.set("budget", b);
    }
    if let Some(c) = &a.clip {
        let (lo, hi) = c
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("--clip expects MIN,MAX, got `{c}`")))?;
        kv.set("d_min", lo.trim());
        kv.set("d_max", hi.trim());
    }
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    Ok(kv)
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(a.config.as_deref(), &run_overrides(a)?)?;
    let inner = FileBackedSensors::open(&a.sequence).map_err(data)?;
    let mut stream = NoisySensors::new(inner, cfg.noise, cfg.seed).map_err(data)?;
    let res = match track_sequence(&mut stream, &cfg.tracker) {
        Ok(r) => r,
        Err(TrackError::Backend(e)) => return Err(CliError::Tracking(e.to_string())),
        Err(e) => return Err(data(e)),
    };
    write_trajectory(&a.out, &res.trajectory).map_err(data)?;
    let d = &res.diagnostics;
    println!("frames {} tracked {}", d.frames, d.tracked);
    println!("keyframes {}", d.keyframes);
    println!("mean front-end latency {:.3} ms", d.mean_frontend_ms);
    if d.aborted {
        return Err(CliError::Tracking(format!(
            "tracking lost for {} consecutive frames; partial trajectory written",
            cfg.tracker.max_lost_frames
        )));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_eval_ate(a: &AteArgs) -> Result<(), CliError> {
    let est = read_trajectory(&a.est).map_err(data)?;
    let gt = read_trajectory(&a.gt).map_err(data)?;
    let r = ate_rmse(&est, &gt, a.mode, a.max_dt).map_err(data)?;
    println!("rmse {:.6}", r.rmse);
    println!("median {:.6}", r.median);
    println!("max {:.6}", r.max);
    println!("pairs {}", r.pairs);
    if let Some(p) = &a.csv {
        let name = a.est.file_stem().and_then(|s| s.to_str()).unwrap_or("estimate");
        write_file(p, &ate_csv([(name, &r)]))?;
    }
    Ok(())
}

fn cmd_eval_depth(a: &DepthArgs) -> Result<(), CliError> {
    let seq = SequenceDir::open(&a.gt).map_err(data)?;
    let n = seq.frame_count();
    let mut preds = Vec::with_capacity(n);
    let mut gts = Vec::with_capacity(n);
    for i in 0..n {
        gts.push(DepthMap::from(&read_depth(&frame_path(&seq.root, i, "depth")).map_err(data)?));
        preds.push(DepthMap::from(&read_depth(&frame_path(&a.pred, i, "depth")).map_err(data)?));
    }
    let scaled = apply_scaling_strategy(&preds, &gts, a.strategy).map_err(data)?;
    let frames = scaled
        .iter()
        .zip(&gts)
        .map(|(p, g)| depth_frame_metrics(p, g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    let table = consistency_csv(&consistency_report(&frames).map_err(data)?);
    print!("{table}");
    if let Some(p) = &a.csv {
        write_file(p, &table)?;
    }
    Ok(())
}

fn emit(out: &OutputArgs, table: &str) -> Result<(), CliError> {
    if !out.quiet {
        print!("{table}");
    }
    if let Some(p) = &out.csv {
        write_file(p, table)?;
    }
    Ok(())
}

fn check_output(out: &OutputArgs) -> Result<(), CliError> {
    if out.quiet && out.csv.is_none() {
        return Err(CliError::Usage("--quiet requires --csv".into()));
    }
    Ok(())
}

fn cmd_drift(a: &DriftArgs) -> Result<(), CliError> {
    check_output(&a.output)?;
    let model = match a.model.as_str() {
        "iid" => DriftModel::Iid,
        "ar1" => DriftModel::Ar1 { phi: a.phi },
        m => return Err(CliError::Data(format!("unknown drift model `{m}`"))),
    };
    let cfg = DriftConfig {
        frames: a.frames,
        trials: a.trials,
        model,
        step_sigma: a.sigma,
    };
    let curve = drift_variance_mc(&cfg, &mut ChaCha8Rng::seed_from_u64(a.seed)).map_err(data)?;
    emit(&a.output, &drift_csv(&curve))
}

fn cmd_consistency(a: &ConsistencyArgs) -> Result<(), CliError> {
    use experiments::{matched_noise_pair, render, run_metered};
    check_output(&a.output)?;
    if !(a.cv_low >= 0.0 && a.cv_high >= 0.0 && (0.0..=1.0).contains(&a.phi)) || a.seeds == 0 {
        return Err(CliError::Data("need seeds >= 1, CVs >= 0 and phi in [0, 1]".into()));
    }
    let mut table = String::from("seed,config,scale_cv,mean_depth_rmse,ate\n");
    for seed in 0..a.seeds {
        let r = render(&SceneConfig::default(), seed).map_err(data)?;
        let (low, high) = matched_noise_pair(&r, a.cv_low, a.cv_high, a.phi, 1000 + seed);
        let tc = TrackerConfig {
            seed,
            ..Default::default()
        };
        for (name, depth) in [("low", low), ("high", high)] {
            let noise = SensorNoise {
                depth,
                ..Default::default()
            };
            let m = run_metered(&r, &noise, seed, &tc, AlignMode::Se3).map_err(|e| CliError::Tracking(e.to_string()))?;
            let _ = writeln!(table, "{seed},{name},{},{},{}", m.scale_cv, m.mean_depth_rmse, m.ate);
        }
    }
    emit(&a.output, &table)
}

fn parse_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let grid: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Data(format!("cannot parse d_max grid `{raw}`")))?;
    if grid.is_empty() || grid.iter().any(|d| !(*d > crate::evaluation::CLIP_D_MIN)) {
        return Err(CliError::Data(format!("every d_max must exceed {}", crate::evaluation::CLIP_D_MIN)));
    }
    Ok(grid)
}

fn cmd_clip_sweep(a: &ClipSweepArgs) -> Result<(), CliError> {
    use experiments::{clipped, large_room_scene, median, render, run_ate};
    check_output(&a.output)?;
    let grid = parse_grid(&a.dmax)?;
    if a.seeds == 0 {
        return Err(CliError::Data("seeds must be >= 1".into()));
    }
    let noise = SensorNoise {
        depth: DepthNoiseModel {
            rel_sigma: a.rel_sigma,
            distance_bias_gain: a.bias_gain,
            ..Default::default()
        },
        ..Default::default()
    };
    noise.validate().map_err(data)?;
    let mut per_d = vec![Vec::new(); grid.len()];
    let mut raw = Vec::new();
    for seed in 0..a.seeds {
        let r = render(&large_room_scene(), seed).map_err(data)?;
        let tc = TrackerConfig {
            seed,
            ..Default::default()
        };
        for (i, &d) in grid.iter().enumerate() {
            per_d[i].push(run_ate(&r, &noise, seed, &clipped(&tc, d), AlignMode::Se3));
        }
        raw.push(run_ate(&r, &noise, seed, &clipped(&tc, f64::INFINITY), AlignMode::Se3));
    }
    let raw_ate = median(&raw);
    let mut table = String::from("d_max,ate,raw_ate,seeds\n");
    for (d, ates) in grid.iter().zip(&per_d) {
        let _ = writeln!(table, "{d},{},{raw_ate},{}", median(ates), a.seeds);
    }
    emit(&a.output, &table)
}
