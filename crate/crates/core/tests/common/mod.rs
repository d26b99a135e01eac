//! Fixtures and independent reference computations shared by the
//! integration tests. Nothing here calls the solver code it checks.
#![allow(dead_code)]

use hopose::geometry::{FrameId, Pointmap, RigidTransform};
use hopose::pose_graph::{Edge, GlobalPoses, PoseGraph};
use nalgebra::{DMatrix, DVector, Matrix3, Unit, UnitQuaternion, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::VecDeque;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian3(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Uniform on SO(3), from a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let q = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q))
        .to_rotation_matrix()
        .into_inner()
}

pub fn axis_angle(axis: &Vector3<f64>, deg: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(*axis), deg.to_radians()).into_inner()
}

/// `r` turned by exactly `deg` about a random axis.
pub fn perturb(r: &Matrix3<f64>, deg: f64, rng: &mut impl Rng) -> Matrix3<f64> {
    axis_angle(&gaussian3(rng), deg) * r
}

pub fn random_pose(rng: &mut impl Rng, scale: f64) -> RigidTransform {
    RigidTransform::new(random_rotation(rng), gaussian3(rng) * scale).unwrap()
}

/// Angle between two rotations from their chordal distance,
/// `‖A − B‖_F = 2√2 sin(θ/2)`.
pub fn angle_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let s = ((a - b).norm() / (2.0 * 2f64.sqrt())).min(1.0);
    2.0 * s.asin().to_degrees()
}

/// Nearest rotation by SVD.
pub fn project_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt
}

/// Measurement on edge `(i, j)` generated from world-to-camera poses:
/// camera `j`'s orientation and position expressed in camera `i`.
pub fn true_edge(poses: &[RigidTransform], i: usize, j: usize, weight: f64) -> Edge {
    let (qi, qj) = (poses[i].rotation(), poses[j].rotation());
    Edge {
        from: i,
        to: j,
        rotation: qi * qj.transpose(),
        translation: qi * (poses[j].center() - poses[i].center()),
        weight,
        quality: 1.0,
        rescued: false,
    }
}

/// A random spanning tree over `n` frames plus up to `extra` chords, each
/// with a random orientation. No pair appears twice.
pub fn random_pairs(n: usize, extra: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut push = |a: usize, b: usize, rng: &mut dyn rand::RngCore| {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            out.push(if rng.random::<bool>() { (a, b) } else { (b, a) });
        }
    };
    for v in 1..n {
        let parent = rng.random_range(0..v);
        push(parent, v, rng);
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        push(a, b, rng);
    }
    out
}

pub fn consistent_graph(poses: &[RigidTransform], pairs: &[(usize, usize)], rng: &mut impl Rng) -> PoseGraph {
    let edges = pairs
        .iter()
        .map(|&(i, j)| true_edge(poses, i, j, rng.random_range(0.2..1.0)))
        .collect();
    PoseGraph::new(poses.len(), edges).unwrap()
}

/// Camera-to-reference rotations of the poses, with frame 0 as reference.
pub fn gauge_rotations(poses: &[RigidTransform]) -> Vec<Matrix3<f64>> {
    poses.iter().map(|p| poses[0].rotation() * p.rotation().transpose()).collect()
}

/// Camera centers in frame 0's camera coordinates.
pub fn gauge_positions(poses: &[RigidTransform]) -> Vec<Vector3<f64>> {
    let c0 = poses[0].center();
    poses.iter().map(|p| poses[0].rotation() * (p.center() - c0)).collect()
}

/// Composes edge measurements along a breadth-first spanning tree rooted at
/// frame 0. Returns camera-to-reference rotations and positions.
pub fn chain_spanning_tree(g: &PoseGraph) -> (Vec<Matrix3<f64>>, Vec<Vector3<f64>>) {
    let n = g.n_frames();
    let mut rot = vec![None; n];
    let mut pos = vec![Vector3::zeros(); n];
    rot[0] = Some(Matrix3::identity());
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let rv: Matrix3<f64> = rot[v].unwrap();
        for e in g.edges() {
            let (other, r, t) = if e.from == v {
                (e.to, rv * e.rotation, pos[v] + rv * e.translation)
            } else if e.to == v {
                // reversed measurement: camera `from` seen from camera `to`
                let back = e.rotation.transpose();
                (e.from, rv * back, pos[v] - rv * back * e.translation)
            } else {
                continue;
            };
            if rot[other].is_none() {
                rot[other] = Some(r);
                pos[other] = t;
                queue.push_back(other);
            }
        }
    }
    (rot.into_iter().map(|r| r.expect("connected graph")).collect(), pos)
}

/// Errors after the best common rotation `Q` maps `est` onto `gt`.
pub fn aligned_rotation_errors(est: &[Matrix3<f64>], gt: &[Matrix3<f64>]) -> Vec<f64> {
    let m: Matrix3<f64> = gt.iter().zip(est).map(|(g, e)| g * e.transpose()).sum();
    let q = project_so3(&m);
    est.iter().zip(gt).map(|(e, g)| angle_deg(&(q * e), g)).collect()
}

/// Largest rise of the averaging objective attributable to floating point.
/// A term `w‖D‖²` built from unit-scale entries carries an error of order
/// `ε·w‖D‖`, which summed over edges is at most `ε·√(Σw · obj)`.
pub fn objective_round_off(obj: f64, weight_sum: f64) -> f64 {
    1e-12 * obj + 16.0 * f64::EPSILON * (weight_sum * obj).sqrt() + 1e-24 * weight_sum
}

pub fn weight_sum(g: &PoseGraph) -> f64 {
    g.edges().iter().map(|e| e.weight).sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Weighted least-squares positions with frame 0 pinned, from dense normal
/// equations.
pub fn dense_translations(g: &PoseGraph, rotations: &[Matrix3<f64>]) -> Vec<Vector3<f64>> {
    let n = g.n_frames();
    let m = g.edges().len();
    let cols = 3 * (n - 1);
    let mut a = DMatrix::<f64>::zeros(3 * m, cols);
    let mut b = DVector::<f64>::zeros(3 * m);
    for (r, e) in g.edges().iter().enumerate() {
        let w = e.weight.sqrt();
        let rhs = rotations[e.from] * e.translation;
        for d in 0..3 {
            let row = 3 * r + d;
            if e.to > 0 {
                a[(row, 3 * (e.to - 1) + d)] += w;
            }
            if e.from > 0 {
                a[(row, 3 * (e.from - 1) + d)] -= w;
            }
            b[row] = w * rhs[d];
        }
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let x = ata.cholesky().expect("full rank").solve(&atb);
    std::iter::once(Vector3::zeros())
        .chain((0..n - 1).map(|k| Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2])))
        .collect()
}

/// World-to-camera poses from camera-to-reference rotations and positions.
pub fn poses_from_parts(rotations: &[Matrix3<f64>], positions: &[Vector3<f64>]) -> GlobalPoses {
    let poses = rotations
        .iter()
        .zip(positions)
        .map(|(r, t)| RigidTransform::new(r.transpose(), -(r.transpose() * t)).unwrap())
        .collect::<Vec<_>>();
    let n = poses.len();
    GlobalPoses::new(poses, vec![true; n])
}

/// Random camera-frame pointmap with depths in `[1, 5]` and a random mask.
pub fn random_pointmap(w: usize, h: usize, keep: f64, rng: &mut impl Rng) -> Pointmap {
    let n = w * h;
    let points = (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(1.0..5.0),
            )
        })
        .collect();
    let conf = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
    let mask = (0..n).map(|_| rng.random_bool(keep)).collect();
    Pointmap::new(w, h, points, conf, mask, FrameId(0)).unwrap()
}
