use clap::{Args, Parser, Subcommand, ValueEnum};
use hopose::eval::AlignMode;
use hopose::io;
use hopose::pipeline::{self, EvalOptions, PipelineConfig, PipelineError};
use hopose::pose_graph::{CandidatePolicy, WeightMode};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const FORMATS: &str = include_str!("../../../FORMATS.md");

/// Sets the output directory when neither a flag nor the config file does.
const OUTPUT_DIR_ENV: &str = "HOPOSE_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "hopose-out";

#[derive(Parser)]
#[command(name = "hopose", version, about = "Global camera poses for a frame sequence from pairwise pointmaps")]
struct Cli {
    /// Log filter, e.g. `warn`, `info` or `hopose=debug`.
    #[arg(long, global = true, env = "HOPOSE_LOG", default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene bundle.
    Synth(SynthArgs),
    /// Solve pairwise poses, build the pose graph and average it.
    Solve(SolveArgs),
    /// Align estimated poses to ground truth and score them.
    Eval(EvalArgs),
    /// Print the file format reference.
    Formats,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec (TOML). Defaults apply to anything it leaves out.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Bundle directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_views: Option<usize>,
    #[arg(long)]
    n_points: Option<usize>,
    /// Noise standard deviation as a fraction of the scene scale.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    outliers: Option<f64>,
    #[arg(long)]
    occlusion: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignArg {
    Rigid,
    Similarity,
}

impl From<AlignArg> for AlignMode {
    fn from(a: AlignArg) -> Self {
        match a {
            AlignArg::Rigid => AlignMode::Rigid,
            AlignArg::Similarity => AlignMode::Similarity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    InlierCount,
    Constant,
}

#[derive(Args)]
struct SolveArgs {
    /// Solve configuration (TOML). Flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Input manifest (bundle or pairs).
    #[arg(long, short)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Subsample evenly to this many frames.
    #[arg(long)]
    n_keep: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for pair solves; 0 uses every logical core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    pair_validity: Option<PathBuf>,
    #[arg(long)]
    ransac_iterations: Option<usize>,
    #[arg(long)]
    inlier_threshold_px: Option<f64>,
    #[arg(long)]
    ransac_confidence: Option<f64>,
    #[arg(long)]
    quality_threshold: Option<f64>,
    #[arg(long)]
    max_weight: Option<f64>,
    #[arg(long, value_enum)]
    weight_mode: Option<WeightArg>,
    /// Only pair frames at most this far apart.
    #[arg(long, conflicts_with = "all_pairs")]
    window: Option<usize>,
    #[arg(long)]
    all_pairs: bool,
    /// Skip the lifted refinement of rotation averaging.
    #[arg(long)]
    no_staircase: bool,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long, value_enum)]
    align: Option<AlignArg>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated poses.
    est: PathBuf,
    /// Ground-truth poses.
    gt: PathBuf,
    /// Directory for `report.txt`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rigid")]
    align: AlignArg,
    #[arg(long)]
    strict_trans: Option<f64>,
    #[arg(long)]
    strict_rot_deg: Option<f64>,
    #[arg(long)]
    loose_trans: Option<f64>,
    #[arg(long)]
    loose_rot_deg: Option<f64>,
}

fn env_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), PathBuf::from)
}

fn synth(a: SynthArgs) -> Result<(), PipelineError> {
    let mut spec = match &a.spec {
        Some(p) => pipeline::load_spec(p)?,
        None => Default::default(),
    };
    if let Some(v) = a.seed {
        spec.rng_seed = v;
    }
    if let Some(v) = a.n_views {
        spec.n_views = v;
    }
    if let Some(v) = a.n_points {
        spec.n_points = v;
    }
    if let Some(v) = a.noise {
        spec.depth_noise_sigma = v;
    }
    if let Some(v) = a.outliers {
        spec.outlier_fraction = v;
    }
    if let Some(v) = a.occlusion {
        spec.occlusion_fraction = v;
    }
    let out = a.out.unwrap_or_else(env_output_dir);
    let manifest = pipeline::synth(&spec, &out)?;
    println!("wrote {} views to {}", spec.n_views, manifest.display());
    Ok(())
}

/// Whether the config file sets `output_dir` itself.
fn config_sets_output_dir(path: &Path) -> Result<bool, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    Ok(table.contains_key("output_dir"))
}

fn solve_config(a: &SolveArgs) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match (&a.out, &a.config) {
        (Some(o), _) => cfg.output_dir = o.clone(),
        (None, Some(p)) if config_sets_output_dir(p)? => {}
        _ => cfg.output_dir = env_output_dir(),
    }
    if let Some(m) = &a.manifest {
        cfg.manifest = m.clone();
    }
    if a.n_keep.is_some() {
        cfg.n_keep = a.n_keep;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    if a.pair_validity.is_some() {
        cfg.pair_validity = a.pair_validity.clone();
    }
    if let Some(v) = a.ransac_iterations {
        cfg.ransac.max_iterations = v;
    }
    if let Some(v) = a.inlier_threshold_px {
        cfg.ransac.inlier_threshold_px = v;
    }
    if let Some(v) = a.ransac_confidence {
        cfg.ransac.confidence = v;
    }
    if let Some(v) = a.quality_threshold {
        cfg.edges.quality_threshold = v;
    }
    if let Some(v) = a.max_weight {
        cfg.edges.max_weight = v;
    }
    if let Some(w) = a.weight_mode {
        cfg.edges.weight_mode = match w {
            WeightArg::InlierCount => WeightMode::InlierCount,
            WeightArg::Constant => WeightMode::Constant,
        };
    }
    if let Some(w) = a.window {
        cfg.edges.candidate_pairs = CandidatePolicy::Window(w);
    }
    if a.all_pairs {
        cfg.edges.candidate_pairs = CandidatePolicy::AllPairs;
    }
    if a.no_staircase {
        cfg.averaging.staircase = false;
    }
    if let Some(v) = a.max_sweeps {
        cfg.averaging.max_sweeps = v;
    }
    if let Some(m) = a.align {
        cfg.eval.align = m.into();
    }
    Ok(cfg)
}

fn solve(a: SolveArgs) -> Result<(), PipelineError> {
    let cfg = solve_config(&a)?;
    if a.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let out = pipeline::solve(&cfg)?;
    println!(
        "recovered {}/{} frames from {} edges ({} of {} pairs failed)",
        out.poses.recovered_count(),
        out.kept_frames.len(),
        out.graph.edges().len(),
        out.pair_failures.len(),
        out.pairs_attempted
    );
    println!("rotation objective {:.3e}", out.rotation.objective);
    if let Some(r) = &out.report {
        print!("{}", pipeline::format_summary(r));
    }
    log::info!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), PipelineError> {
    let mut opts = EvalOptions {
        align: a.align.into(),
        ..Default::default()
    };
    let t = &mut opts.thresholds;
    for (flag, slot) in [
        (a.strict_trans, &mut t.strict_trans),
        (a.strict_rot_deg, &mut t.strict_rot_deg),
        (a.loose_trans, &mut t.loose_trans),
        (a.loose_rot_deg, &mut t.loose_rot_deg),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    let report = pipeline::eval_files(&a.est, &a.gt, &opts)?;
    let dir = a.out.unwrap_or_else(env_output_dir);
    std::fs::create_dir_all(&dir).map_err(|source| io::FormatError::Io {
        path: dir.clone(),
        source,
    })?;
    io::write_report(&dir.join("report.txt"), &report)?;
    print!("{}", pipeline::format_summary(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Formats => {
            print!("{FORMATS}");
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hopose: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
