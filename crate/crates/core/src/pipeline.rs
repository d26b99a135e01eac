//! End-to-end orchestration over files: scene synthesis, sequence solve and
//! evaluation.
//!
//! Two manifest kinds feed `solve`. A bundle manifest (written by
//! [`write_bundle`]) lists rendered views with ground-truth poses; pair
//! pointmaps are simulated from it on the fly. A pairs manifest lists
//! externally produced `(X^{1,1}, X^{2,1})` pointmap files per frame pair.

use crate::eval::{
    evaluate_with_alignment, subsample_frames, AlignMode, EvalError, SequenceReport, Thresholds,
};
use crate::geometry::{CameraIntrinsics, FrameId, Pointmap};
use crate::io::{self, DepthFile, FormatError, PointmapFile};
use crate::pose_graph::{
    assemble_global, build_graph, rotation_averaging, translation_averaging, AveragingOptions,
    EdgeFilterConfig, GlobalPoses, GraphError, PairValidity, PoseGraph, RotationAveraging,
    TranslationAveraging,
};
use crate::relative_pose::{relative_pose, RansacConfig, RelativePoseResult};
use crate::synth::{derive_seed, make_pair_pointmaps, PairNoise, SceneBundle, SceneSpec, SceneView};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("pose graph is disconnected; components (frame ids): {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// Process exit code: 2 config, 3 insufficient data, 4 disconnected
    /// graph, 5 io or parse failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::InsufficientData(_) => 3,
            PipelineError::Disconnected { .. } => 4,
            PipelineError::Format(_) | PipelineError::Eval(_) => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub align: AlignMode,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Evenly subsample to this many frames; all frames when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_keep: Option<usize>,
    /// Per-pair RANSAC seeds are derived from this; `ransac.rng_seed` is
    /// not used by `solve`.
    pub seed: u64,
    /// Worker threads for pair solves; 0 uses every logical core.
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_validity: Option<PathBuf>,
    pub ransac: RansacConfig,
    pub edges: EdgeFilterConfig,
    pub averaging: AveragingOptions,
    pub eval: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.toml"),
            output_dir: PathBuf::from("hopose-out"),
            n_keep: None,
            seed: 0,
            threads: 0,
            pair_validity: None,
            ransac: RansacConfig::default(),
            edges: EdgeFilterConfig::default(),
            averaging: AveragingOptions::default(),
            eval: EvalOptions::default(),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, PipelineError> {
        toml::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = io::read_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = resolve(base, &cfg.manifest);
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.pair_validity = cfg.pair_validity.map(|p| resolve(base, &p));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.ransac
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.edges.quality_threshold) {
            return Err(PipelineError::Config("edges.quality_threshold must lie in [0, 1]".into()));
        }
        if !(self.edges.max_weight.is_finite() && self.edges.max_weight > 0.0) {
            return Err(PipelineError::Config("edges.max_weight must be positive".into()));
        }
        if self.n_keep == Some(0) {
            return Err(PipelineError::Config("n_keep must be at least 1".into()));
        }
        if !self.manifest.is_file() {
            return Err(PipelineError::Config(format!(
                "manifest {} does not exist",
                self.manifest.display()
            )));
        }
        if let Some(p) = &self.pair_validity {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("pair validity file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub depth: PathBuf,
    pub observed_depth: PathBuf,
    pub pointmap: PathBuf,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub n_frames: usize,
    pub gt_poses: PathBuf,
    /// Ground-truth points as a `width = n, height = 1` pointmap file.
    pub points: PathBuf,
    pub pair_noise: PairNoise,
    pub spec: SceneSpec,
    pub views: Vec<ViewEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub i: usize,
    pub j: usize,
    pub reference: PathBuf,
    pub source: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsManifest {
    pub n_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_poses: Option<PathBuf>,
    #[serde(default)]
    pub pairs: Vec<PairEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Manifest {
    Bundle(BundleManifest),
    Pairs(PairsManifest),
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        toml::from_str(&io::read_string(path)?)
            .map_err(|e| PipelineError::Config(format!("manifest {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = toml::to_string(self).expect("manifest serializes");
        Ok(io::write_bytes(path, text.as_bytes())?)
    }
}

fn io_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        PipelineError::Format(FormatError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

/// Writes every view's depth, noisy depth and pointmap, the ground-truth
/// poses and points, and a bundle manifest. Returns the manifest path.
pub fn write_bundle(bundle: &SceneBundle, dir: &Path) -> Result<PathBuf, PipelineError> {
    io_dir(dir)?;
    let mut views = Vec::new();
    for (v, view) in bundle.views.iter().enumerate() {
        let entry = ViewEntry {
            depth: format!("view_{v:04}.dmap").into(),
            observed_depth: format!("view_{v:04}_observed.dmap").into(),
            pointmap: format!("view_{v:04}.pmap").into(),
            focal: view.intrinsics.focal(),
            cx: view.intrinsics.cx(),
            cy: view.intrinsics.cy(),
        };
        DepthFile::from_depth(&view.depth).write(&dir.join(&entry.depth))?;
        DepthFile::from_depth(&view.observed_depth).write(&dir.join(&entry.observed_depth))?;
        PointmapFile::from_pointmap(&view.pointmap(FrameId(v))).write(&dir.join(&entry.pointmap))?;
        views.push(entry);
    }
    let gt = GlobalPoses::new(bundle.poses(), vec![true; bundle.views.len()]);
    io::write_poses(&dir.join("gt_poses.txt"), &gt)?;
    let n = bundle.points.len();
    let cloud = Pointmap::with_unit_confidence(n, 1, bundle.points.clone(), vec![true; n], FrameId(0))
        .expect("point cloud shape");
    PointmapFile::from_pointmap(&cloud).write(&dir.join("points.pmap"))?;
    let manifest = Manifest::Bundle(BundleManifest {
        n_frames: bundle.views.len(),
        gt_poses: "gt_poses.txt".into(),
        points: "points.pmap".into(),
        pair_noise: PairNoise::from_spec(&bundle.spec),
        spec: bundle.spec.clone(),
        views,
    });
    let path = dir.join("manifest.toml");
    manifest.save(&path)?;
    Ok(path)
}

/// Rebuilds a scene bundle from its files. Per-pixel point ids are not
/// stored, so they come back empty.
pub fn load_bundle(m: &BundleManifest, base: &Path) -> Result<(SceneBundle, PairNoise), PipelineError> {
    if m.views.len() != m.n_frames {
        return Err(PipelineError::Config(format!(
            "manifest lists {} views for {} frames",
            m.views.len(),
            m.n_frames
        )));
    }
    let gt = io::read_poses(&resolve(base, &m.gt_poses))?;
    if gt.len() != m.n_frames {
        return Err(PipelineError::Config(format!(
            "ground truth has {} poses for {} frames",
            gt.len(),
            m.n_frames
        )));
    }
    let cloud = PointmapFile::read(&resolve(base, &m.points))?;
    let points = cloud
        .points
        .iter()
        .map(|p| Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64))
        .collect();
    let mut views = Vec::new();
    for (v, e) in m.views.iter().enumerate() {
        let bad = |what: String| PipelineError::Config(format!("view {v}: {what}"));
        let intrinsics = CameraIntrinsics::new(e.focal, e.cx, e.cy).map_err(|err| bad(err.to_string()))?;
        let depth = DepthFile::read(&resolve(base, &e.depth))?
            .to_depth()
            .map_err(|err| bad(err.to_string()))?;
        let observed_depth = DepthFile::read(&resolve(base, &e.observed_depth))?
            .to_depth()
            .map_err(|err| bad(err.to_string()))?;
        let n = depth.width() * depth.height();
        views.push(SceneView {
            intrinsics,
            pose: gt.poses()[v].clone(),
            depth,
            observed_depth,
            point_ids: vec![None; n],
        });
    }
    Ok((
        SceneBundle {
            spec: m.spec.clone(),
            points,
            views,
        },
        m.pair_noise,
    ))
}

/// Everything `solve` computed, on the subsampled frame indices.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Original frame id of each solved frame.
    pub kept_frames: Vec<usize>,
    pub poses: GlobalPoses,
    pub graph: PoseGraph,
    pub rotation: RotationAveraging,
    pub translation: TranslationAveraging,
    pub pairs_attempted: usize,
    /// `(frame i, frame j, reason)` in original frame ids.
    pub pair_failures: Vec<(usize, usize, String)>,
    pub gt: Option<GlobalPoses>,
    pub report: Option<SequenceReport>,
    /// Stage name and wall time in seconds.
    pub timings: Vec<(&'static str, f64)>,
}

enum Source {
    Bundle(SceneBundle, PairNoise),
    Pairs(Vec<PairEntry>, PathBuf),
}

/// Pose averaging on solved pairs: graph construction, rotation and
/// translation averaging, and assembly into world-to-camera poses. Frames
/// outside the graph are flagged unrecovered.
pub fn average_pairs(
    pair_results: &[(usize, usize, RelativePoseResult)],
    n_frames: usize,
    filter: &EdgeFilterConfig,
    validity: Option<&PairValidity>,
    opts: &AveragingOptions,
) -> Result<(PoseGraph, RotationAveraging, TranslationAveraging, GlobalPoses), GraphError> {
    let graph = build_graph(pair_results, n_frames, filter, validity)?;
    let rot = rotation_averaging(&graph, opts)?;
    let trans = translation_averaging(&graph, &rot.rotations)?;
    let poses = assemble_global(&rot.rotations, &trans.positions, &graph.incident_frames());
    Ok((graph, rot, trans, poses))
}

fn subset(poses: &GlobalPoses, frames: &[usize]) -> GlobalPoses {
    GlobalPoses::new(
        frames.iter().map(|&f| poses.poses()[f].clone()).collect(),
        frames.iter().map(|&f| poses.recovered()[f]).collect(),
    )
}

/// Runs the full solve described by `cfg` and writes `poses.txt`,
/// `graph.txt`, `frames.txt` and `run.log` to the output directory, plus
/// `gt_poses.txt` and `report.txt` when ground truth is available.
pub fn solve(cfg: &PipelineConfig) -> Result<SolveOutput, PipelineError> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let t0 = Instant::now();
    let base = cfg.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let (source, n_total, gt_all) = match Manifest::load(&cfg.manifest)? {
        Manifest::Bundle(m) => {
            let (bundle, noise) = load_bundle(&m, &base)?;
            let gt = GlobalPoses::new(bundle.poses(), vec![true; bundle.views.len()]);
            (Source::Bundle(bundle, noise), m.n_frames, Some(gt))
        }
        Manifest::Pairs(m) => {
            let gt = match &m.gt_poses {
                Some(p) => Some(io::read_poses(&resolve(&base, p))?),
                None => None,
            };
            if let Some(g) = &gt {
                if g.len() != m.n_frames {
                    return Err(PipelineError::Config(format!(
                        "ground truth has {} poses for {} frames",
                        g.len(),
                        m.n_frames
                    )));
                }
            }
            (Source::Pairs(m.pairs, base.clone()), m.n_frames, gt)
        }
    };
    let validity = match &cfg.pair_validity {
        Some(p) => Some(io::read_pair_validity(p)?),
        None => None,
    };
    if n_total < 2 {
        return Err(PipelineError::InsufficientData(format!("manifest has {n_total} frames; need at least 2")));
    }
    let kept = subsample_frames(n_total, cfg.n_keep.unwrap_or(n_total))?;
    if kept.len() < 2 {
        return Err(PipelineError::InsufficientData(format!(
            "{} frame(s) left after subsampling; need at least 2",
            kept.len()
        )));
    }
    let mut compact = vec![None; n_total];
    for (c, &f) in kept.iter().enumerate() {
        compact[f] = Some(c);
    }
    // validity verdicts are keyed by original frame ids
    let validity = validity.map(|v| {
        let mut out = PairValidity::new();
        for (i, j, ok) in v.entries() {
            if let (Some(Some(a)), Some(Some(b))) = (compact.get(i), compact.get(j)) {
                out.insert(*a, *b, ok);
            }
        }
        out
    });
    timings.push(("load", t0.elapsed().as_secs_f64()));

    // candidate pairs in compact indices, solved in a fixed order
    let t = Instant::now();
    let allowed = cfg.edges.candidate_pairs.pairs(kept.len());
    let jobs: Vec<(usize, usize, Option<&PairEntry>)> = match &source {
        Source::Bundle(..) => allowed.iter().map(|&(a, b)| (a, b, None)).collect(),
        Source::Pairs(entries, _) => {
            let allowed: std::collections::HashSet<(usize, usize)> = allowed.into_iter().collect();
            entries
                .iter()
                .filter_map(|e| {
                    let (a, b) = (compact.get(e.i).copied().flatten()?, compact.get(e.j).copied().flatten()?);
                    (a != b && allowed.contains(&(a.min(b), a.max(b)))).then_some((a, b, Some(e)))
                })
                .collect()
        }
    };
    let solve_one = |&(a, b, entry): &(usize, usize, Option<&PairEntry>)| -> Result<RelativePoseResult, String> {
        let (fi, fj) = (kept[a], kept[b]);
        let (reference, source_pm) = match (&source, entry) {
            (Source::Bundle(bundle, noise), _) => {
                let pair = make_pair_pointmaps(bundle, fi, fj, noise).map_err(|e| e.to_string())?;
                (pair.reference, pair.source)
            }
            (Source::Pairs(_, base), Some(e)) => {
                let load = |p: &Path| -> Result<Pointmap, String> {
                    PointmapFile::read(&resolve(base, p))
                        .map_err(|e| e.to_string())?
                        .to_pointmap(FrameId(fi))
                        .map_err(|e| format!("{}: {e}", p.display()))
                };
                (load(&e.reference)?, load(&e.source)?)
            }
            (Source::Pairs(..), None) => unreachable!("pair jobs carry their entry"),
        };
        if reference.width() != source_pm.width() || reference.height() != source_pm.height() {
            return Err("reference and source pointmaps differ in size".into());
        }
        let rc = RansacConfig {
            rng_seed: derive_seed(cfg.seed, fi as u64, fj as u64),
            ..cfg.ransac.clone()
        };
        relative_pose(&reference, &source_pm, &rc).map_err(|e| e.to_string())
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RelativePoseResult, String>> = pool.install(|| jobs.par_iter().map(solve_one).collect());
    let mut pair_results = Vec::new();
    let mut pair_failures = Vec::new();
    for (&(a, b, _), out) in jobs.iter().zip(outcomes) {
        match out {
            Ok(r) => pair_results.push((a, b, r)),
            Err(reason) => {
                log::warn!("pair ({}, {}) skipped: {reason}", kept[a], kept[b]);
                pair_failures.push((kept[a], kept[b], reason));
            }
        }
    }
    timings.push(("pairs", t.elapsed().as_secs_f64()));
    if pair_results.is_empty() {
        return Err(PipelineError::InsufficientData(format!(
            "none of {} candidate pairs produced a relative pose",
            jobs.len()
        )));
    }

    let t = Instant::now();
    let graph = build_graph(&pair_results, kept.len(), &cfg.edges, validity.as_ref()).map_err(|e| graph_error(e, &kept))?;
    timings.push(("graph", t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let rotation = rotation_averaging(&graph, &cfg.averaging).map_err(|e| graph_error(e, &kept))?;
    timings.push(("rotation", t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let translation = translation_averaging(&graph, &rotation.rotations).map_err(|e| graph_error(e, &kept))?;
    timings.push(("translation", t.elapsed().as_secs_f64()));
    let poses = assemble_global(&rotation.rotations, &translation.positions, &graph.incident_frames());

    let gt = gt_all.as_ref().map(|g| subset(g, &kept));
    let t = Instant::now();
    let report = match &gt {
        Some(g) => Some(evaluate_with_alignment(&poses, g, cfg.eval.align, &cfg.eval.thresholds)?.0),
        None => None,
    };
    timings.push(("eval", t.elapsed().as_secs_f64()));

    let out = SolveOutput {
        kept_frames: kept,
        poses,
        graph,
        rotation,
        translation,
        pairs_attempted: jobs.len(),
        pair_failures,
        gt,
        report,
        timings,
    };
    write_outputs(&out, &cfg.output_dir)?;
    Ok(out)
}

fn graph_error(e: GraphError, kept: &[usize]) -> PipelineError {
    match e {
        GraphError::Disconnected { components } => PipelineError::Disconnected {
            components: components
                .into_iter()
                .map(|c| c.into_iter().map(|v| kept[v]).collect())
                .collect(),
        },
        GraphError::NoEdges => PipelineError::InsufficientData("no pair passed into the graph".into()),
        other => PipelineError::InsufficientData(other.to_string()),
    }
}

fn write_outputs(out: &SolveOutput, dir: &Path) -> Result<(), PipelineError> {
    io_dir(dir)?;
    io::write_poses(&dir.join("poses.txt"), &out.poses)?;
    io::write_graph(&dir.join("graph.txt"), &out.graph)?;
    let mut frames = String::from("# index frame\n");
    for (c, f) in out.kept_frames.iter().enumerate() {
        writeln!(frames, "{c} {f}").unwrap();
    }
    io::write_bytes(&dir.join("frames.txt"), frames.as_bytes())?;
    if let Some(gt) = &out.gt {
        io::write_poses(&dir.join("gt_poses.txt"), gt)?;
    }
    if let Some(r) = &out.report {
        io::write_report(&dir.join("report.txt"), r)?;
    }
    io::write_bytes(&dir.join("run.log"), format_run_log(out).as_bytes())?;
    Ok(())
}

/// Key-value run summary. Only the `time_*` lines vary between identical runs.
pub fn format_run_log(out: &SolveOutput) -> String {
    let mut s = String::from("# hopose run log\n");
    let rot = &out.rotation;
    let kv: Vec<(&str, String)> = vec![
        ("frames_kept", out.kept_frames.len().to_string()),
        ("frames_recovered", out.poses.recovered_count().to_string()),
        ("pairs_attempted", out.pairs_attempted.to_string()),
        ("pairs_failed", out.pair_failures.len().to_string()),
        ("edges", out.graph.edges().len().to_string()),
        ("edges_rescued", out.graph.edges().iter().filter(|e| e.rescued).count().to_string()),
        ("rotation_objective", rot.objective.to_string()),
        ("rotation_chordal_objective", rot.chordal_objective.to_string()),
        ("rotation_sweeps", rot.sweeps.to_string()),
        ("rotation_converged", rot.converged.to_string()),
        ("rotation_lifted_to", rot.lifted_to.to_string()),
        ("rotation_monotone_violations", rot.monotone_violations.to_string()),
        ("translation_objective", out.translation.objective.to_string()),
        ("translation_normal_residual", out.translation.normal_residual.to_string()),
        ("translation_rank_deficient", out.translation.rank_deficient.to_string()),
    ];
    for (k, v) in kv {
        writeln!(s, "{k} = {v}").unwrap();
    }
    for (i, j, reason) in &out.pair_failures {
        writeln!(s, "pair_failure = {i} {j} {reason}").unwrap();
    }
    for (stage, secs) in &out.timings {
        writeln!(s, "time_{stage}_s = {secs:.6}").unwrap();
    }
    s
}

/// Looks up a `key = value` entry of a run log.
pub fn run_log_value<'a>(log: &'a str, key: &str) -> Option<&'a str> {
    log.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
}

/// Reads a scene spec (TOML). Missing fields take their defaults.
pub fn load_spec(path: &Path) -> Result<SceneSpec, PipelineError> {
    toml::from_str(&io::read_string(path)?).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

/// Renders a scene and writes it as a bundle. Returns the manifest path.
pub fn synth(spec: &SceneSpec, out_dir: &Path) -> Result<PathBuf, PipelineError> {
    let bundle = crate::synth::generate(spec).map_err(|e| PipelineError::Config(e.to_string()))?;
    write_bundle(&bundle, out_dir)
}

/// Aligns an estimate to ground truth and scores it.
pub fn eval_files(est: &Path, gt: &Path, opts: &EvalOptions) -> Result<SequenceReport, PipelineError> {
    let (est, gt) = (io::read_poses(est)?, io::read_poses(gt)?);
    Ok(evaluate_with_alignment(&est, &gt, opts.align, &opts.thresholds)?.0)
}

/// The five headline columns in fixed order.
pub fn format_summary(r: &SequenceReport) -> String {
    let f = |x: Option<f64>, digits: usize| x.map_or("n/a".to_string(), |v| format!("{v:.digits$}"));
    let mut s = format!(
        "rot_error_deg  trans_error  det_rate_pct  acc_15_15_pct  acc_30_30_pct\n{:>13}  {:>11}  {:>12.1}  {:>13}  {:>13}\n",
        f(r.rot_error_deg, 4),
        f(r.trans_error, 6),
        r.det_rate_pct,
        f(r.acc_15_15_pct, 1),
        f(r.acc_30_30_pct, 1),
    );
    if r.partial() {
        s.push_str("† error means cover recovered frames only\n");
    }
    s
}
