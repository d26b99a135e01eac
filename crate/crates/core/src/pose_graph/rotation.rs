//! Rotation averaging: chordal initialization, block-coordinate descent on
//! `Σ k_ij ‖R_j − R_i R̂_ij‖_F²`, and an optional lift to SO(p) for p = 4, 5.

use super::linsolve::BlockSystem;
use super::{GraphError, PoseGraph};
use crate::geometry::project_to_so3;
use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AveragingOptions {
    pub staircase: bool,
    pub max_sweeps: usize,
    /// A sweep that lowers the objective by less than this fraction counts
    /// as stalled.
    pub relative_tolerance: f64,
    /// Converged once a stalled sweep moves no block by more than this
    /// (Frobenius norm). The objective is flat near its minimum, so a small
    /// decrease alone leaves the iterate far from it.
    pub step_tolerance: f64,
}

impl Default for AveragingOptions {
    fn default() -> Self {
        Self {
            staircase: true,
            max_sweeps: 500,
            relative_tolerance: 1e-10,
            step_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationAveraging {
    /// Camera-to-reference orientations; identity for frames outside the graph.
    pub rotations: Vec<Matrix3<f64>>,
    pub objective: f64,
    /// One entry per accepted SO(3) descent run: the objective before the
    /// first sweep and after every sweep.
    pub history: Vec<Vec<f64>>,
    /// Sweeps that raised the objective beyond round-off.
    pub monotone_violations: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest `p` whose lift was accepted; 3 when none was.
    pub lifted_to: usize,
    /// Objective of the chordal initialization.
    pub chordal_objective: f64,
}

/// `Σ k_ij ‖R_j − R_i R̂_ij‖_F²` for camera-to-reference rotations.
pub fn rotation_objective(g: &PoseGraph, rotations: &[Matrix3<f64>]) -> f64 {
    g.edges()
        .iter()
        .map(|e| e.weight * (rotations[e.to] - rotations[e.from] * e.rotation).norm_squared())
        .sum()
}

struct Compact {
    /// frame id of each compact vertex, ascending
    frames: Vec<usize>,
    /// compact index per frame
    index: Vec<Option<usize>>,
}

impl Compact {
    fn new(g: &PoseGraph) -> Self {
        let active = g.incident_frames();
        let frames: Vec<usize> = (0..g.n_frames()).filter(|&v| active[v]).collect();
        let mut index = vec![None; g.n_frames()];
        for (c, &f) in frames.iter().enumerate() {
            index[f] = Some(c);
        }
        Self { frames, index }
    }
}

fn chordal_init(g: &PoseGraph, cmp: &Compact) -> Vec<Matrix3<f64>> {
    let m = cmp.frames.len();
    // unknowns Y_c = R_cᵀ for compact c ≥ 1; compact 0 is the anchor with Y = I
    let mut sys = BlockSystem::new(m - 1, 3);
    let eye = Matrix3::identity();
    for e in g.edges() {
        let (ci, cj) = (cmp.index[e.from].unwrap(), cmp.index[e.to].unwrap());
        let k = e.weight;
        if k == 0.0 {
            continue;
        }
        let rh = e.rotation;
        match (ci, cj) {
            (0, 0) => {}
            (0, j) => {
                sys.add_block(j - 1, j - 1, &(eye * k));
                sys.add_rhs(j - 1, &DMatrix::from_iterator(3, 3, (rh.transpose() * k).iter().copied()));
            }
            (i, 0) => {
                sys.add_block(i - 1, i - 1, &(eye * k));
                sys.add_rhs(i - 1, &DMatrix::from_iterator(3, 3, (rh * k).iter().copied()));
            }
            (i, j) => {
                sys.add_block(i - 1, i - 1, &(eye * k));
                sys.add_block(j - 1, j - 1, &(eye * k));
                sys.add_block(i - 1, j - 1, &(-rh * k));
                sys.add_block(j - 1, i - 1, &(-rh.transpose() * k));
            }
        }
    }
    let sol = sys.solve();
    if sol.rank_deficient {
        log::warn!("chordal initialization system is rank deficient; using least-norm solution");
    }
    let mut out = vec![Matrix3::identity(); m];
    for (c, r) in out.iter_mut().enumerate().skip(1) {
        let y: Matrix3<f64> = sol.x.fixed_view::<3, 3>(3 * (c - 1), 0).into_owned();
        *r = project_to_so3(&y.transpose());
    }
    out
}

/// Per-vertex list of `(other, R̂-term, weight)` with the term oriented so
/// that the block update is `proj(Σ k Y_other T)`.
fn neighbor_terms(g: &PoseGraph, cmp: &Compact) -> Vec<Vec<(usize, Matrix3<f64>, f64)>> {
    let mut terms = vec![Vec::new(); cmp.frames.len()];
    for e in g.edges() {
        let (ci, cj) = (cmp.index[e.from].unwrap(), cmp.index[e.to].unwrap());
        terms[ci].push((cj, e.rotation.transpose(), e.weight));
        terms[cj].push((ci, e.rotation, e.weight));
    }
    terms
}

fn objective_dyn(edges: &[(usize, usize, Matrix3<f64>, f64)], ys: &[DMatrix<f64>]) -> f64 {
    edges
        .iter()
        .map(|(i, j, rh, k)| {
            let rhd = DMatrix::from_iterator(3, 3, rh.iter().copied());
            k * (&ys[*j] - &ys[*i] * rhd).norm_squared()
        })
        .sum()
}

/// Polar factor of a p×3 matrix (nearest matrix with orthonormal columns).
/// For p = 3 the determinant is fixed to +1.
fn polar(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 3 {
        let m3: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let r = project_to_so3(&m3);
        return DMatrix::from_iterator(3, 3, r.iter().copied());
    }
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Floating-point noise in an objective value `obj`. Each term is a squared
/// difference of unit-scale entries, so its error grows like the root of the
/// term rather than the term itself.
fn round_off(obj: f64, weight_sum: f64) -> f64 {
    1e-12 * obj + 16.0 * f64::EPSILON * (weight_sum * obj).sqrt() + 1e-24 * weight_sum
}

struct DescentOutcome {
    sweeps: usize,
    converged: bool,
    violations: usize,
}

/// Block-coordinate descent in St(p, 3) (SO(3) when p = 3), in vertex order.
fn block_descent(
    ys: &mut [DMatrix<f64>],
    terms: &[Vec<(usize, Matrix3<f64>, f64)>],
    edges: &[(usize, usize, Matrix3<f64>, f64)],
    opts: &AveragingOptions,
    history: Option<&mut Vec<f64>>,
) -> DescentOutcome {
    let mut local_history = Vec::new();
    let hist = match history {
        Some(h) => h,
        None => &mut local_history,
    };
    let p = ys[0].nrows();
    let weight_sum: f64 = edges.iter().map(|e| e.3).sum();
    let mut prev = objective_dyn(edges, ys);
    hist.push(prev);
    let mut best = (prev, ys.to_vec());
    let mut out = DescentOutcome {
        sweeps: 0,
        converged: false,
        violations: 0,
    };
    for _ in 0..opts.max_sweeps {
        let mut step = 0f64;
        for v in 0..ys.len() {
            let mut m = DMatrix::zeros(p, 3);
            for (other, term, k) in &terms[v] {
                let td = DMatrix::from_iterator(3, 3, term.iter().copied());
                m += &ys[*other] * td * *k;
            }
            if m.norm() > 0.0 {
                let next = polar(&m);
                step = step.max((&next - &ys[v]).norm());
                ys[v] = next;
            }
        }
        out.sweeps += 1;
        let cur = objective_dyn(edges, ys);
        hist.push(cur);
        let rose = cur > prev + round_off(prev, weight_sum);
        if rose {
            out.violations += 1;
        }
        if cur < best.0 {
            best = (cur, ys.to_vec());
        }
        let decrease = prev - cur;
        prev = cur;
        if step <= opts.step_tolerance || cur <= 1e-28 {
            out.converged = true;
            break;
        }
        if decrease < opts.relative_tolerance * prev.max(f64::MIN_POSITIVE) && rose {
            break;
        }
    }
    if out.violations > 0 {
        log::warn!(
            "rotation objective increased in {} sweep(s); keeping best iterate",
            out.violations
        );
    }
    // near the minimum, objective differences are round-off and say nothing
    // about which iterate is closer
    if best.0 < prev - round_off(prev, weight_sum) {
        ys.clone_from_slice(&best.1);
    }
    out
}

fn to_dyn(r: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(3, 3, r.iter().copied())
}

fn to_fixed(y: &DMatrix<f64>) -> Matrix3<f64> {
    y.fixed_view::<3, 3>(0, 0).into_owned()
}

/// Rounds lifted Stiefel blocks back to SO(3) through the dominant
/// three-dimensional row space.
fn round_lifted(ys: &[DMatrix<f64>]) -> Vec<Matrix3<f64>> {
    let p = ys[0].nrows();
    let mut s = DMatrix::zeros(p, p);
    for y in ys {
        s += y * y.transpose();
    }
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = DMatrix::zeros(p, 3);
    for (c, &k) in order.iter().take(3).enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(k));
    }
    let mut blocks: Vec<Matrix3<f64>> = ys.iter().map(|y| to_fixed(&(basis.transpose() * y))).collect();
    let negative = blocks.iter().filter(|b| b.determinant() < 0.0).count();
    if 2 * negative > blocks.len() {
        for b in &mut blocks {
            b.row_mut(2).neg_mut();
        }
    }
    blocks.iter().map(project_to_so3).collect()
}

fn gauge_fix(rs: &mut [Matrix3<f64>]) {
    let g = rs[0].transpose();
    rs[0] = Matrix3::identity();
    for r in rs.iter_mut().skip(1) {
        *r = project_to_so3(&(g * *r));
    }
}

/// Absolute rotations minimizing the weighted chordal objective, gauge-fixed
/// so the lowest-indexed frame in the graph has the identity.
pub fn rotation_averaging(
    g: &PoseGraph,
    opts: &AveragingOptions,
) -> Result<RotationAveraging, GraphError> {
    g.check_connected()?;
    let cmp = Compact::new(g);
    let edges: Vec<(usize, usize, Matrix3<f64>, f64)> = g
        .edges()
        .iter()
        .map(|e| {
            (
                cmp.index[e.from].unwrap(),
                cmp.index[e.to].unwrap(),
                e.rotation,
                e.weight,
            )
        })
        .collect();
    let terms = neighbor_terms(g, &cmp);

    let init = chordal_init(g, &cmp);
    let mut ys: Vec<DMatrix<f64>> = init.iter().map(to_dyn).collect();
    let chordal_objective = objective_dyn(&edges, &ys);
    let mut first_hist = Vec::new();
    let first = block_descent(&mut ys, &terms, &edges, opts, Some(&mut first_hist));
    let mut history = vec![first_hist];
    let mut sweeps = first.sweeps;
    let mut violations = first.violations;
    let mut converged = first.converged;
    let mut current: Vec<Matrix3<f64>> = ys.iter().map(to_fixed).collect();
    let mut current_obj = objective_dyn(&edges, &ys);
    let mut lifted_to = 3;

    // an objective at round-off level has nothing left to escape from
    let weight_sum: f64 = edges.iter().map(|e| e.3).sum();
    if opts.staircase && current_obj > 1e-20 * weight_sum {
        for p in 4..=5 {
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
            let mut lifted: Vec<DMatrix<f64>> = current
                .iter()
                .map(|r| {
                    let mut y = DMatrix::zeros(p, 3);
                    y.view_mut((0, 0), (3, 3)).copy_from(r);
                    for row in 3..p {
                        for c in 0..3 {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            y[(row, c)] = 0.1 * z;
                        }
                    }
                    polar(&y)
                })
                .collect();
            block_descent(&mut lifted, &terms, &edges, opts, None);
            let rounded = round_lifted(&lifted);
            let mut cand: Vec<DMatrix<f64>> = rounded.iter().map(to_dyn).collect();
            let mut cand_hist = Vec::new();
            let out = block_descent(&mut cand, &terms, &edges, opts, Some(&mut cand_hist));
            let cand_obj = objective_dyn(&edges, &cand);
            if cand_obj < current_obj * (1.0 - 1e-9) {
                current = cand.iter().map(to_fixed).collect();
                current_obj = cand_obj;
                history.push(cand_hist);
                sweeps += out.sweeps;
                violations += out.violations;
                converged = out.converged;
                lifted_to = p;
            } else {
                break;
            }
        }
    }

    gauge_fix(&mut current);
    let mut rotations = vec![Matrix3::identity(); g.n_frames()];
    for (c, &f) in cmp.frames.iter().enumerate() {
        rotations[f] = current[c];
    }
    let objective = rotation_objective(g, &rotations);
    if !converged {
        log::warn!("rotation averaging stopped after {sweeps} sweeps without converging");
    }
    Ok(RotationAveraging {
        rotations,
        objective,
        history,
        monotone_violations: violations,
        sweeps,
        converged,
        lifted_to,
        chordal_objective,
    })
}
