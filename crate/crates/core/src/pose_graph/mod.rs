//! Connectivity graph over frames and pose averaging on it.
//!
//! Absolute variables inside the averaging are camera-to-reference: `R_k`
//! is the orientation of camera `k` and `t_k` its position, expressed in the
//! frame of the anchor camera. An edge `(i, j)` carries the pose of camera
//! `j` seen from camera `i`, so that consistent data satisfy
//! `R_j = R_i R̂_ij` and `t_j − t_i = R_i t̂_ij`. [`assemble_global`] turns
//! the result into world-to-camera transforms.

mod linsolve;
mod rotation;
mod translation;

pub use rotation::{rotation_averaging, rotation_objective, AveragingOptions, RotationAveraging};
pub use translation::{translation_averaging, translation_objective, TranslationAveraging};

use crate::geometry::RigidTransform;
use crate::relative_pose::RelativePoseResult;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("pose graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },
    #[error("pose graph has no edges")]
    NoEdges,
    #[error("invalid edge ({from}, {to}): {reason}")]
    InvalidEdge {
        from: usize,
        to: usize,
        reason: String,
    },
    #[error("expected {expected} rotations, got {actual}")]
    RotationCount { expected: usize, actual: usize },
}

/// A measured relative transform between two frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// `R̂_ij`: orientation of camera `to` in the frame of camera `from`.
    pub rotation: Matrix3<f64>,
    /// `t̂_ij`: position of camera `to` in the frame of camera `from`.
    pub translation: Vector3<f64>,
    pub weight: f64,
    pub quality: f64,
    /// Kept below the quality threshold to restore connectivity.
    pub rescued: bool,
}

impl Edge {
    /// Edge from a pair result; `result.transform` maps frame `from` into
    /// camera `to`, which is the inverse of the edge measurement.
    pub fn from_relative_pose(from: usize, to: usize, result: &RelativePoseResult) -> Self {
        let inv = result.transform.inverse();
        Self {
            from,
            to,
            rotation: *inv.rotation(),
            translation: *inv.translation(),
            weight: 1.0,
            quality: pair_quality(result),
            rescued: false,
        }
    }

    /// The same measurement stored on the reversed edge.
    pub fn reversed(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            from: self.to,
            to: self.from,
            rotation: rt,
            translation: -(rt * self.translation),
            ..self.clone()
        }
    }
}

/// Inlier count over valid pixel count.
pub fn pair_quality(result: &RelativePoseResult) -> f64 {
    if result.valid_count == 0 {
        0.0
    } else {
        result.inlier_count as f64 / result.valid_count as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseGraph {
    n_frames: usize,
    edges: Vec<Edge>,
}

impl PoseGraph {
    pub fn new(n_frames: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let mut seen = std::collections::HashSet::new();
        for e in &edges {
            let bad = |reason: &str| GraphError::InvalidEdge {
                from: e.from,
                to: e.to,
                reason: reason.to_string(),
            };
            if e.from == e.to {
                return Err(bad("self-loop"));
            }
            if e.from >= n_frames || e.to >= n_frames {
                return Err(bad("vertex out of range"));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(bad("duplicate ordered pair"));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(bad("weight must be finite and non-negative"));
            }
            let orth = (e.rotation.transpose() * e.rotation - Matrix3::identity()).norm();
            if orth > 1e-9 || (e.rotation.determinant() - 1.0).abs() > 1e-9 {
                return Err(bad("rotation is not in SO(3)"));
            }
            if e.translation.iter().any(|x| !x.is_finite()) {
                return Err(bad("non-finite translation"));
            }
        }
        Ok(Self { n_frames, edges })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Frames touched by at least one edge.
    pub fn incident_frames(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_frames];
        for e in &self.edges {
            out[e.from] = true;
            out[e.to] = true;
        }
        out
    }

    /// Connected components over incident frames, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let active = self.incident_frames();
        let mut uf = UnionFind::new(self.n_frames);
        for e in &self.edges {
            uf.union(e.from, e.to);
        }
        components_of(&mut uf, &active)
    }

    pub fn check_connected(&self) -> Result<(), GraphError> {
        if self.edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        let comps = self.components();
        if comps.len() > 1 {
            return Err(GraphError::Disconnected { components: comps });
        }
        Ok(())
    }

    /// Multiplies every edge weight by `s`.
    pub fn with_scaled_weights(&self, s: f64) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.weight *= s;
        }
        g
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so representatives are deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn components_of(uf: &mut UnionFind, active: &[bool]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, _) in active.iter().enumerate().filter(|(_, a)| **a) {
        groups.entry(uf.find(v)).or_default().push(v);
    }
    groups.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Weight proportional to RANSAC inlier count, max edge weight = `max_weight`.
    #[default]
    InlierCount,
    /// Every edge gets `max_weight`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePolicy {
    /// Window of 10 for sequences longer than 60 frames, all pairs otherwise.
    #[default]
    Auto,
    AllPairs,
    Window(usize),
}

impl CandidatePolicy {
    /// Candidate pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self, n_frames: usize) -> Vec<(usize, usize)> {
        let window = match *self {
            CandidatePolicy::AllPairs => n_frames,
            CandidatePolicy::Window(w) => w,
            CandidatePolicy::Auto if n_frames > 60 => 10,
            CandidatePolicy::Auto => n_frames,
        };
        let mut out = Vec::new();
        for i in 0..n_frames {
            for j in (i + 1)..n_frames.min(i + window + 1) {
                out.push((i, j));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeFilterConfig {
    pub quality_threshold: f64,
    pub max_weight: f64,
    pub weight_mode: WeightMode,
    pub candidate_pairs: CandidatePolicy,
}

impl Default for EdgeFilterConfig {
    fn default() -> Self {
        Self {
            quality_threshold: 0.5,
            max_weight: 1.0,
            weight_mode: WeightMode::InlierCount,
            candidate_pairs: CandidatePolicy::Auto,
        }
    }
}

/// Externally supplied pair verdicts (e.g. from a pair classifier). Keys are
/// unordered frame pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairValidity {
    verdicts: HashMap<(usize, usize), bool>,
}

impl PairValidity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, i: usize, j: usize, valid: bool) {
        self.verdicts.insert((i.min(j), i.max(j)), valid);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<bool> {
        self.verdicts.get(&(i.min(j), i.max(j))).copied()
    }

    /// Entries sorted by pair.
    pub fn entries(&self) -> Vec<(usize, usize, bool)> {
        let mut v: Vec<_> = self.verdicts.iter().map(|(&(i, j), &b)| (i, j, b)).collect();
        v.sort();
        v
    }
}

/// Filters pair results into a connected pose graph.
///
/// Pairs vetoed by `validity` are dropped outright. The rest are kept when
/// their quality reaches the threshold or `validity` accepts them. Then every
/// temporal-neighbor pair `(i, i+1)` whose endpoints fall in different
/// components of the filtered graph is added back, flagged as rescued. Frames
/// with no pair result at all stay out of the graph.
pub fn build_graph(
    pair_results: &[(usize, usize, RelativePoseResult)],
    n_frames: usize,
    filter: &EdgeFilterConfig,
    validity: Option<&PairValidity>,
) -> Result<PoseGraph, GraphError> {
    let mut candidates: Vec<(usize, Edge, bool)> = Vec::new();
    for (i, j, res) in pair_results {
        let (i, j) = (*i, *j);
        if i == j || i >= n_frames || j >= n_frames {
            return Err(GraphError::InvalidEdge {
                from: i,
                to: j,
                reason: "self-loop or vertex out of range".into(),
            });
        }
        let verdict = validity.and_then(|v| v.get(i, j));
        if verdict == Some(false) {
            continue;
        }
        let edge = Edge::from_relative_pose(i, j, res);
        let pass = verdict == Some(true) || edge.quality >= filter.quality_threshold;
        candidates.push((res.inlier_count, edge, pass));
    }

    let max_inliers = candidates.iter().map(|c| c.0).max().unwrap_or(0);
    for (inliers, edge, _) in &mut candidates {
        edge.weight = match filter.weight_mode {
            WeightMode::Constant => filter.max_weight,
            WeightMode::InlierCount if max_inliers > 0 => {
                *inliers as f64 / max_inliers as f64 * filter.max_weight
            }
            WeightMode::InlierCount => filter.max_weight,
        };
    }

    // one measurement per ordered pair: the higher quality wins, first on ties
    let mut by_pair: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (n, (_, e, _)) in candidates.iter().enumerate() {
        match by_pair.get(&(e.from, e.to)) {
            Some(&m) if candidates[m].1.quality >= e.quality => {}
            _ => {
                by_pair.insert((e.from, e.to), n);
            }
        }
    }
    let kept_candidates: Vec<usize> = by_pair.values().copied().collect();

    let mut active = vec![false; n_frames];
    for &n in &kept_candidates {
        let e = &candidates[n].1;
        active[e.from] = true;
        active[e.to] = true;
    }

    let mut uf = UnionFind::new(n_frames);
    let mut keep = vec![false; candidates.len()];
    for &n in &kept_candidates {
        if candidates[n].2 {
            keep[n] = true;
            let e = &candidates[n].1;
            uf.union(e.from, e.to);
        }
    }

    let roots: Vec<usize> = (0..n_frames).map(|v| uf.find(v)).collect();
    for i in 0..n_frames.saturating_sub(1) {
        if !(active[i] && active[i + 1]) || roots[i] == roots[i + 1] {
            continue;
        }
        let neighbor = kept_candidates.iter().copied().find(|&n| {
            let e = &candidates[n].1;
            (e.from == i && e.to == i + 1) || (e.from == i + 1 && e.to == i)
        });
        if let Some(n) = neighbor {
            keep[n] = true;
            candidates[n].1.rescued = true;
            uf.union(i, i + 1);
        }
    }

    let edges: Vec<Edge> = kept_candidates
        .iter()
        .filter(|&&n| keep[n])
        .map(|&n| candidates[n].1.clone())
        .collect();
    let comps = components_of(&mut uf, &active);
    if comps.len() > 1 {
        return Err(GraphError::Disconnected { components: comps });
    }
    PoseGraph::new(n_frames, edges)
}

/// Absolute world-to-camera poses of a sequence, with recovery flags.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPoses {
    poses: Vec<RigidTransform>,
    recovered: Vec<bool>,
}

impl GlobalPoses {
    pub fn new(poses: Vec<RigidTransform>, recovered: Vec<bool>) -> Self {
        assert_eq!(poses.len(), recovered.len(), "pose and flag counts differ");
        Self { poses, recovered }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn poses(&self) -> &[RigidTransform] {
        &self.poses
    }

    pub fn recovered(&self) -> &[bool] {
        &self.recovered
    }

    pub fn rotations(&self) -> Vec<Matrix3<f64>> {
        self.poses.iter().map(|p| *p.rotation()).collect()
    }

    pub fn translations(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| *p.translation()).collect()
    }

    pub fn recovered_count(&self) -> usize {
        self.recovered.iter().filter(|&&r| r).count()
    }

    pub fn set_recovered(&mut self, frame: usize, value: bool) {
        self.recovered[frame] = value;
    }
}

/// Bundles averaging output into world-to-camera poses. Inputs are
/// camera-to-reference orientations and positions; unrecovered frames get
/// the identity.
pub fn assemble_global(
    rotations: &[Matrix3<f64>],
    positions: &[Vector3<f64>],
    recovered: &[bool],
) -> GlobalPoses {
    assert!(rotations.len() == positions.len() && positions.len() == recovered.len());
    let poses = rotations
        .iter()
        .zip(positions)
        .zip(recovered)
        .map(|((r, p), &ok)| {
            if ok {
                let rt = r.transpose();
                RigidTransform::from_parts_unchecked(rt, -(rt * p))
            } else {
                RigidTransform::identity()
            }
        })
        .collect();
    GlobalPoses::new(poses, recovered.to_vec())
}
