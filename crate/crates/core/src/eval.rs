//! Sequence-level pose evaluation: gauge alignment, rotation and
//! camera-center errors, detection rate and threshold accuracies.

use crate::geometry::{geodesic_deg, project_to_so3, RigidTransform};
use crate::pose_graph::GlobalPoses;
use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("estimate has {est} frames but ground truth has {gt}")]
    Shape { est: usize, gt: usize },
    #[error("alignment needs {needed} recovered frames, got {available}")]
    TooFewFrames { needed: usize, available: usize },
    #[error("cannot keep {n_keep} of {n_total} frames")]
    Subsample { n_total: usize, n_keep: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    #[default]
    Rigid,
    Similarity,
}

/// World-space similarity `x ↦ scale · rotation · x + translation` taking
/// the estimate's world frame onto the ground truth's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Alignment {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    /// Re-expresses a world-to-camera pose in the aligned world frame.
    pub fn apply(&self, pose: &RigidTransform) -> RigidTransform {
        let c = self.scale * (self.rotation * pose.center()) + self.translation;
        let r = project_to_so3(&(pose.rotation() * self.rotation.transpose()));
        RigidTransform::new(r, -(r * c)).expect("finite aligned pose")
    }
}

fn both_recovered(est: &GlobalPoses, gt: &GlobalPoses) -> Vec<usize> {
    (0..est.len())
        .filter(|&k| est.recovered()[k] && gt.recovered()[k])
        .collect()
}

/// Rotation best matching camera orientations: `argmax_Q Σ tr(Q R_estᵀ R_gt ...)`.
fn orientation_rotation(est: &GlobalPoses, gt: &GlobalPoses, frames: &[usize]) -> Matrix3<f64> {
    // camera-to-world orientations satisfy O_gt ≈ Q O_est
    let mut m = Matrix3::zeros();
    for &k in frames {
        m += gt.poses()[k].rotation().transpose() * est.poses()[k].rotation();
    }
    project_to_so3(&m)
}

/// Closed-form least-squares alignment of camera centers from `est` onto
/// `gt` over frames recovered in both. When the centers are collinear the
/// rotation comes from the camera orientations instead.
pub fn compute_alignment(
    est: &GlobalPoses,
    gt: &GlobalPoses,
    mode: AlignMode,
) -> Result<Alignment, EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::Shape {
            est: est.len(),
            gt: gt.len(),
        });
    }
    let frames = both_recovered(est, gt);
    let needed = match mode {
        AlignMode::Rigid => 2,
        AlignMode::Similarity => 3,
    };
    if frames.len() < needed {
        return Err(EvalError::TooFewFrames {
            needed,
            available: frames.len(),
        });
    }
    let n = frames.len() as f64;
    let xs: Vec<Vector3<f64>> = frames.iter().map(|&k| est.poses()[k].center()).collect();
    let ys: Vec<Vector3<f64>> = frames.iter().map(|&k| gt.poses()[k].center()).collect();
    let mx = xs.iter().sum::<Vector3<f64>>() / n;
    let my = ys.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_x = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (y - my) * (x - mx).transpose();
        var_x += (x - mx).norm_squared();
    }
    cov /= n;
    var_x /= n;
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let degenerate = !(sv[order[1]] > 1e-12 * sv[order[0]].max(f64::MIN_POSITIVE)) || var_x == 0.0;
    let (rotation, scale) = if degenerate {
        let q = orientation_rotation(est, gt, &frames);
        let scale = match mode {
            AlignMode::Rigid => 1.0,
            AlignMode::Similarity => {
                let var_y = ys.iter().map(|y| (y - my).norm_squared()).sum::<f64>() / n;
                if var_x > 0.0 {
                    (var_y / var_x).sqrt()
                } else {
                    1.0
                }
            }
        };
        (q, scale)
    } else {
        let mut s = Matrix3::identity();
        if (u.determinant() * vt.determinant()) < 0.0 {
            s[(order[2], order[2])] = -1.0;
        }
        let q = polish_rotation(u * s * vt, &cov);
        let scale = match mode {
            AlignMode::Rigid => 1.0,
            AlignMode::Similarity => (q.transpose() * cov).trace() / var_x,
        };
        (q, scale)
    };
    Ok(Alignment {
        rotation,
        translation: my - scale * (rotation * mx),
        scale,
    })
}

/// Newton steps on `tr(Rᵀ C)` over SO(3). The SVD alone loses digits when
/// the centers are nearly collinear.
fn polish_rotation(mut r: Matrix3<f64>, c: &Matrix3<f64>) -> Matrix3<f64> {
    for _ in 0..4 {
        let m = r.transpose() * c;
        let g = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        let sym = (m + m.transpose()) * 0.5;
        let h = Matrix3::identity() * sym.trace() - sym;
        let Some(chol) = h.cholesky() else { break };
        let w = chol.solve(&g);
        r = project_to_so3(&(r * Rotation3::new(w).into_inner()));
        if w.norm() <= 1e-15 {
            break;
        }
    }
    r
}

/// `est` moved into the ground-truth gauge.
pub fn align_gauge(
    est: &GlobalPoses,
    gt: &GlobalPoses,
    mode: AlignMode,
) -> Result<(GlobalPoses, Alignment), EvalError> {
    let a = compute_alignment(est, gt, mode)?;
    Ok((apply_alignment(est, &a), a))
}

fn apply_alignment(est: &GlobalPoses, a: &Alignment) -> GlobalPoses {
    GlobalPoses::new(
        est.poses().iter().map(|p| a.apply(p)).collect(),
        est.recovered().to_vec(),
    )
}

/// Accuracy thresholds on camera-center distance (scene units) and
/// rotation error (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub strict_trans: f64,
    pub strict_rot_deg: f64,
    pub loose_trans: f64,
    pub loose_rot_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            strict_trans: 0.15,
            strict_rot_deg: 15.0,
            loose_trans: 0.30,
            loose_rot_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceReport {
    /// Mean geodesic rotation error over recovered frames, degrees.
    pub rot_error_deg: Option<f64>,
    /// Mean squared camera-center distance over recovered frames.
    pub trans_error: Option<f64>,
    pub trans_rmse: Option<f64>,
    pub det_rate_pct: f64,
    /// Over all frames; unrecovered frames count as failures.
    pub acc_15_15_pct: Option<f64>,
    pub acc_30_30_pct: Option<f64>,
    pub n_frames: usize,
    pub n_recovered: usize,
}

impl SequenceReport {
    /// Means were taken over a strict subset of the frames.
    pub fn partial(&self) -> bool {
        self.n_recovered < self.n_frames
    }
}

/// Per-frame `(rotation error in degrees, camera-center distance)` for
/// frames recovered in both sequences.
pub fn frame_errors(est: &GlobalPoses, gt: &GlobalPoses) -> Result<Vec<Option<(f64, f64)>>, EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::Shape {
            est: est.len(),
            gt: gt.len(),
        });
    }
    Ok((0..est.len())
        .map(|k| {
            (est.recovered()[k] && gt.recovered()[k]).then(|| {
                let (e, g) = (&est.poses()[k], &gt.poses()[k]);
                (
                    geodesic_deg(e.rotation(), g.rotation()),
                    (e.center() - g.center()).norm(),
                )
            })
        })
        .collect())
}

/// Metrics of an already aligned estimate.
pub fn evaluate(est: &GlobalPoses, gt: &GlobalPoses, th: &Thresholds) -> Result<SequenceReport, EvalError> {
    report_from(&frame_errors(est, gt)?, true, th)
}

fn report_from(errors: &[Option<(f64, f64)>], with_trans: bool, th: &Thresholds) -> Result<SequenceReport, EvalError> {
    let n_frames = errors.len();
    let rec: Vec<(f64, f64)> = errors.iter().flatten().copied().collect();
    let n_recovered = rec.len();
    let pct = |count: usize| {
        if n_frames == 0 {
            0.0
        } else {
            100.0 * count as f64 / n_frames as f64
        }
    };
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| {
        (n_recovered > 0).then(|| rec.iter().map(f).sum::<f64>() / n_recovered as f64)
    };
    let trans_error = if with_trans { mean(&|e| e.1 * e.1) } else { None };
    let acc = |t: f64, r: f64| {
        with_trans.then(|| pct(rec.iter().filter(|e| e.1 < t && e.0 < r).count()))
    };
    Ok(SequenceReport {
        rot_error_deg: mean(&|e| e.0),
        trans_error,
        trans_rmse: trans_error.map(f64::sqrt),
        det_rate_pct: pct(n_recovered),
        acc_15_15_pct: acc(th.strict_trans, th.strict_rot_deg),
        acc_30_30_pct: acc(th.loose_trans, th.loose_rot_deg),
        n_frames,
        n_recovered,
    })
}

/// Aligns then evaluates. Without enough frames to align the camera
/// centers, only orientations are aligned and translation metrics are
/// left empty.
pub fn evaluate_with_alignment(
    est: &GlobalPoses,
    gt: &GlobalPoses,
    mode: AlignMode,
    th: &Thresholds,
) -> Result<(SequenceReport, Option<Alignment>), EvalError> {
    match align_gauge(est, gt, mode) {
        Ok((aligned, a)) => Ok((evaluate(&aligned, gt, th)?, Some(a))),
        Err(EvalError::TooFewFrames { needed, available }) => {
            log::warn!("alignment needs {needed} frames, have {available}; reporting rotation metrics only");
            let frames = both_recovered(est, gt);
            let a = Alignment {
                rotation: orientation_rotation(est, gt, &frames),
                ..Alignment::identity()
            };
            let aligned = apply_alignment(est, &a);
            Ok((report_from(&frame_errors(&aligned, gt)?, false, th)?, None))
        }
        Err(e) => Err(e),
    }
}

/// Evenly spaced frame indices starting at 0 with stride
/// `floor(n_total / n_keep)`.
pub fn subsample_frames(n_total: usize, n_keep: usize) -> Result<Vec<usize>, EvalError> {
    if n_keep == 0 || n_total == 0 {
        return Err(EvalError::Subsample { n_total, n_keep });
    }
    if n_keep > n_total {
        log::warn!("asked to keep {n_keep} of {n_total} frames; keeping all");
        return Ok((0..n_total).collect());
    }
    let stride = n_total / n_keep;
    Ok((0..n_keep).map(|k| k * stride).collect())
}
