use super::{p3p, RansacConfig, RelativePoseError, RelativePoseResult};
use crate::geometry::{CameraIntrinsics, Pointmap, RigidTransform};
use nalgebra::{Matrix3, Matrix6, Rotation3, Vector2, Vector3, Vector6};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Correspondence {
    index: usize,
    point: Vector3<f64>,
    pixel: Vector2<f64>,
    bearing: Vector3<f64>,
}

#[derive(Clone, Copy)]
struct Score {
    inliers: usize,
    err_sum: f64,
}

impl Score {
    fn mean(&self) -> f64 {
        if self.inliers == 0 {
            f64::INFINITY
        } else {
            self.err_sum / self.inliers as f64
        }
    }

    fn better_than(&self, other: &Score) -> bool {
        self.inliers > other.inliers
            || (self.inliers == other.inliers && self.mean() < other.mean())
    }
}

fn reproj_error(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
    c: &Correspondence,
) -> Option<f64> {
    let pc = r * c.point + t;
    if !(pc.z > 0.0) {
        return None;
    }
    let u = k.focal() * pc.x / pc.z + k.cx();
    let v = k.focal() * pc.y / pc.z + k.cy();
    Some((u - c.pixel.x).hypot(v - c.pixel.y))
}

fn score(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
    corr: &[Correspondence],
    threshold: f64,
) -> Score {
    let mut s = Score {
        inliers: 0,
        err_sum: 0.0,
    };
    for c in corr {
        if let Some(e) = reproj_error(r, t, k, c) {
            if e < threshold {
                s.inliers += 1;
                s.err_sum += e;
            }
        }
    }
    s
}

fn inlier_set(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
    corr: &[Correspondence],
    threshold: f64,
) -> Vec<usize> {
    corr.iter()
        .enumerate()
        .filter(|(_, c)| reproj_error(r, t, k, c).is_some_and(|e| e < threshold))
        .map(|(n, _)| n)
        .collect()
}

fn required_iterations(inlier_ratio: f64, confidence: f64, sample: usize) -> usize {
    let w = inlier_ratio.powi(sample as i32);
    if w >= 1.0 {
        return 1;
    }
    if w <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - w).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// Damped Gauss–Newton on the reprojection error of `subset`.
fn refine(
    mut r: Matrix3<f64>,
    mut t: Vector3<f64>,
    k: &CameraIntrinsics,
    corr: &[Correspondence],
    subset: &[usize],
) -> (Matrix3<f64>, Vector3<f64>) {
    let f = k.focal();
    let cost = |r: &Matrix3<f64>, t: &Vector3<f64>| -> f64 {
        subset
            .iter()
            .map(|&n| {
                let c = &corr[n];
                let pc = r * c.point + t;
                if pc.z <= 0.0 {
                    return 1e12;
                }
                let du = f * pc.x / pc.z + k.cx() - c.pixel.x;
                let dv = f * pc.y / pc.z + k.cy() - c.pixel.y;
                du * du + dv * dv
            })
            .sum()
    };
    let mut current = cost(&r, &t);
    let mut lambda = 1e-4;
    for _ in 0..50 {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for &n in subset {
            let c = &corr[n];
            let rx = r * c.point;
            let pc = rx + t;
            if pc.z <= 0.0 {
                continue;
            }
            let iz = 1.0 / pc.z;
            let res = Vector2::new(
                f * pc.x * iz + k.cx() - c.pixel.x,
                f * pc.y * iz + k.cy() - c.pixel.y,
            );
            let jp = nalgebra::Matrix2x3::new(
                f * iz,
                0.0,
                -f * pc.x * iz * iz,
                0.0,
                f * iz,
                -f * pc.y * iz * iz,
            );
            let mut jx = nalgebra::Matrix3x6::<f64>::zeros();
            jx.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-rx.cross_matrix()));
            jx.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
            let j = jp * jx;
            h += j.transpose() * j;
            g += j.transpose() * res;
        }
        let mut accepted = false;
        for _ in 0..10 {
            let mut damped = h;
            for d in 0..6 {
                damped[(d, d)] += lambda * h[(d, d)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let dr = Rotation3::new(step.fixed_rows::<3>(0).into_owned());
            let r_new = dr * r;
            let t_new = t + step.fixed_rows::<3>(3);
            let c_new = cost(&r_new, &t_new);
            if c_new <= current {
                let gain = current - c_new;
                r = r_new;
                t = t_new;
                current = c_new;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if step.norm() < 1e-15 || gain <= 1e-30 {
                    return (crate::geometry::project_to_so3(&r), t);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (crate::geometry::project_to_so3(&r), t)
}

/// Per-pixel reprojection error of `pm` under `transform` and `k`. `None`
/// for masked pixels and points behind the camera.
pub fn reprojection_errors(
    pm: &Pointmap,
    k: &CameraIntrinsics,
    transform: &RigidTransform,
) -> Vec<Option<f64>> {
    pm.points()
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            if !pm.mask()[idx] {
                return None;
            }
            let (i, j) = pm.pixel(idx);
            let c = Correspondence {
                index: idx,
                point: *p,
                pixel: Vector2::new(i as f64, j as f64),
                bearing: Vector3::zeros(),
            };
            reproj_error(transform.rotation(), transform.translation(), k, &c)
        })
        .collect()
}

/// Pose of the camera observing `pm2_in_1` at its own pixel grid, with the
/// 3D points expressed in the reference frame.
pub fn pnp_ransac(
    pm2_in_1: &Pointmap,
    k: &CameraIntrinsics,
    cfg: &RansacConfig,
) -> Result<RelativePoseResult, RelativePoseError> {
    cfg.validate()?;
    let k_inv = k.inverse_matrix();
    let corr: Vec<Correspondence> = pm2_in_1
        .valid_points()
        .filter(|(_, p)| p.iter().all(|x| x.is_finite()))
        .map(|(index, p)| {
            let (i, j) = pm2_in_1.pixel(index);
            let pixel = Vector2::new(i as f64, j as f64);
            Correspondence {
                index,
                point: *p,
                pixel,
                bearing: (k_inv * pixel.push(1.0)).normalize(),
            }
        })
        .collect();
    let valid_count = pm2_in_1.valid_count();
    if corr.len() < cfg.min_sample {
        return Err(RelativePoseError::InsufficientData {
            needed: cfg.min_sample,
            available: corr.len(),
        });
    }

    let thr = cfg.inlier_threshold_px;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut best: Option<(Matrix3<f64>, Vector3<f64>, Score)> = None;
    let mut needed = cfg.max_iterations;
    let mut iterations = 0;
    while iterations < needed.min(cfg.max_iterations) {
        iterations += 1;
        let sample = index::sample(&mut rng, corr.len(), 4);
        let s: [&Correspondence; 4] = std::array::from_fn(|m| &corr[sample.index(m)]);
        let world = [s[0].point, s[1].point, s[2].point];
        let bearings = [s[0].bearing, s[1].bearing, s[2].bearing];
        let mut chosen: Option<(Matrix3<f64>, Vector3<f64>, f64)> = None;
        for (r, t) in p3p::solve(&world, &bearings) {
            let behind = s.iter().filter(|c| (r * c.point + t).z <= 0.0).count();
            if behind * 2 > s.len() {
                continue;
            }
            let e4 = reproj_error(&r, &t, k, s[3]).unwrap_or(f64::INFINITY);
            if chosen.as_ref().is_none_or(|(_, _, e)| e4 < *e) {
                chosen = Some((r, t, e4));
            }
        }
        let Some((r, t, _)) = chosen else { continue };
        let sc = score(&r, &t, k, &corr, thr);
        if best.as_ref().is_none_or(|(_, _, b)| sc.better_than(b)) {
            best = Some((r, t, sc));
            let ratio = sc.inliers as f64 / corr.len() as f64;
            needed = required_iterations(ratio, cfg.confidence, 4);
        }
    }

    let Some((r0, t0, hyp_score)) = best.filter(|(_, _, s)| s.inliers >= cfg.min_sample) else {
        return Err(RelativePoseError::NoPoseFound {
            best_inliers: best.map_or(0, |(_, _, s)| s.inliers),
            min_sample: cfg.min_sample,
            iterations,
        });
    };

    let (mut r, mut t) = (r0, t0);
    let mut inliers = inlier_set(&r, &t, k, &corr, thr);
    for _ in 0..5 {
        let (r_new, t_new) = refine(r, t, k, &corr, &inliers);
        let new_inliers = inlier_set(&r_new, &t_new, k, &corr, thr);
        if new_inliers.len() < inliers.len() {
            break;
        }
        let same = new_inliers == inliers;
        r = r_new;
        t = t_new;
        inliers = new_inliers;
        if same {
            break;
        }
    }
    // one more polish on the final set; keep it only if consensus holds
    let (r_pol, t_pol) = refine(r, t, k, &corr, &inliers);
    let pol_inliers = inlier_set(&r_pol, &t_pol, k, &corr, thr);
    if pol_inliers.len() >= inliers.len() {
        r = r_pol;
        t = t_pol;
        inliers = pol_inliers;
    }

    let transform = RigidTransform::from_parts_unchecked(r, t);
    let mut inlier_mask = vec![false; pm2_in_1.len()];
    let mut err_sum = 0.0;
    for &n in &inliers {
        inlier_mask[corr[n].index] = true;
        err_sum += reproj_error(&r, &t, k, &corr[n]).unwrap_or(0.0);
    }
    Ok(RelativePoseResult {
        transform,
        inlier_count: inliers.len(),
        inlier_mask,
        valid_count,
        focal: k.focal(),
        mean_inlier_reproj_err: err_sum / inliers.len() as f64,
        iterations,
        hypothesis_inlier_count: hyp_score.inliers,
    })
}
