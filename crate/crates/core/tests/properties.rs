mod common;

use common::*;
use hopose::eval::{evaluate, evaluate_with_alignment, AlignMode, SequenceReport, Thresholds};
use hopose::geometry::{
    change_frame, geodesic_deg, pointmap_from_depth, project, CameraIntrinsics, DepthMap, FrameId, Pointmap,
    RigidTransform,
};
use hopose::io::{self, DepthFile, FormatError, PointmapFile};
use hopose::loss::{conf_loss, regr_loss, PointmapPairBatch, DEFAULT_ALPHA};
use hopose::pose_graph::{
    rotation_averaging, translation_averaging, AveragingOptions, Edge, GlobalPoses, PairValidity, PoseGraph,
};
use hopose::relative_pose::{estimate_focal, pnp_ransac, relative_pose, reprojection_errors, RansacConfig};
use hopose::synth::{generate, make_pair_pointmaps, PairNoise, SceneSpec};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::Rng;

fn random_depth(w: usize, h: usize, rng: &mut impl Rng) -> DepthMap {
    let d = (0..w * h)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.1..20.0) })
        .collect();
    DepthMap::new(w, h, d).unwrap()
}

fn random_intrinsics(rng: &mut impl Rng) -> CameraIntrinsics {
    CameraIntrinsics::new(
        rng.random_range(20.0..800.0),
        rng.random_range(-10.0..50.0),
        rng.random_range(-10.0..50.0),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn backprojection_reprojects_to_own_pixel(seed in any::<u64>(), w in 1usize..14, h in 1usize..14) {
        let mut r = rng(seed);
        let (d, k) = (random_depth(w, h, &mut r), random_intrinsics(&mut r));
        let pm = pointmap_from_depth(&d, &k, FrameId(0));
        for (idx, p) in pm.valid_points() {
            let (i, j) = pm.pixel(idx);
            let uv = project(p, &k).unwrap();
            prop_assert!((uv.x - i as f64).abs() <= 1e-9 && (uv.y - j as f64).abs() <= 1e-9);
            prop_assert_eq!(p.z, d.depth()[idx]);
        }
        prop_assert_eq!(pm.mask(), d.mask());
    }

    #[test]
    fn change_frame_composes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pm = random_pointmap(6, 5, 0.7, &mut r);
        let (p1, p2, p3) = (random_pose(&mut r, 1.0), random_pose(&mut r, 1.0), random_pose(&mut r, 1.0));
        let two_step = change_frame(&change_frame(&pm, &p1, &p2, FrameId(2)), &p2, &p3, FrameId(3));
        let direct = change_frame(&pm, &p1, &p3, FrameId(3));
        for (a, b) in two_step.points().iter().zip(direct.points()) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
    }

    #[test]
    fn geodesic_is_a_bi_invariant_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, q) = (random_rotation(&mut r), random_rotation(&mut r), random_rotation(&mut r));
        let d = geodesic_deg(&a, &b);
        prop_assert!((d - geodesic_deg(&b, &a)).abs() <= 1e-9);
        prop_assert!((d - geodesic_deg(&(q * a), &(q * b))).abs() <= 1e-9);
        prop_assert!((d - geodesic_deg(&(a * q), &(b * q))).abs() <= 1e-9);
        prop_assert!((d - angle_deg(&a, &b)).abs() <= 1e-9);
        prop_assert!(geodesic_deg(&a, &a) <= 1e-9);
        prop_assert!(d > 0.0);
    }

    #[test]
    fn small_geodesic_angles_are_resolved(seed in any::<u64>(), deg in 1e-9f64..1e-3) {
        let mut r = rng(seed);
        let a = random_rotation(&mut r);
        let b = perturb(&a, deg, &mut r);
        prop_assert!((geodesic_deg(&a, &b) - deg).abs() <= 1e-9);
    }

    #[test]
    fn renormalization_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_pose(&mut r, 10.0);
        let q = p.renormalized();
        prop_assert!((q.to_homogeneous() - p.to_homogeneous()).abs().max() <= 1e-12);
        let id = p.compose(&p.inverse());
        prop_assert!((id.to_homogeneous() - RigidTransform::identity().to_homogeneous()).abs().max() <= 1e-12);
    }
}

fn pair_batch(seed: u64) -> PointmapPairBatch {
    let mut r = rng(seed);
    let pred = [random_pointmap(7, 5, 0.8, &mut r), random_pointmap(7, 5, 0.8, &mut r)];
    let gt = [random_pointmap(7, 5, 0.8, &mut r), random_pointmap(7, 5, 0.8, &mut r)];
    PointmapPairBatch::new(pred, gt, DEFAULT_ALPHA).unwrap()
}

fn with_point(pm: &Pointmap, idx: usize, p: Vector3<f64>) -> Pointmap {
    let mut pts = pm.points().to_vec();
    pts[idx] = p;
    Pointmap::new(pm.width(), pm.height(), pts, pm.confidence().to_vec(), pm.mask().to_vec(), pm.frame_id()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn regression_loss_is_scale_invariant(seed in any::<u64>(), log_s in -3.0f64..3.0) {
        let b = pair_batch(seed);
        let s = 10f64.powf(log_s);
        let base = regr_loss(&b).unwrap();
        let [p0, p1] = b.predicted().clone();
        let [g0, g1] = b.ground_truth().clone();
        let scaled_pred = PointmapPairBatch::new([p0.scaled(s), p1.scaled(s)], [g0.clone(), g1.clone()], DEFAULT_ALPHA).unwrap();
        let scaled_gt = PointmapPairBatch::new([p0, p1], [g0.scaled(s), g1.scaled(s)], DEFAULT_ALPHA).unwrap();
        for other in [regr_loss(&scaled_pred).unwrap(), regr_loss(&scaled_gt).unwrap()] {
            for v in 0..2 {
                for (a, c) in base[v].values.iter().zip(&other[v].values) {
                    prop_assert!((a - c).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn adding_a_mask_pixel_grows_the_domain_by_one(seed in any::<u64>()) {
        let b = pair_batch(seed);
        let count = |b: &PointmapPairBatch| b.domain(0).iter().chain(b.domain(1)).filter(|&&m| m).count();
        let [p0, p1] = b.predicted().clone();
        let [g0, g1] = b.ground_truth().clone();
        // a pixel that the ground truth covers but the prediction does not
        let Some(idx) = (0..p0.len()).find(|&k| g0.mask()[k] && !p0.mask()[k]) else { return Ok(()) };
        let mut mask = p0.mask().to_vec();
        mask[idx] = true;
        let grown = PointmapPairBatch::new([p0.with_mask(mask).unwrap(), p1], [g0, g1], DEFAULT_ALPHA).unwrap();
        prop_assert_eq!(count(&grown), count(&b) + 1);
        prop_assert!(grown.domain(0)[idx]);
        let l = regr_loss(&grown).unwrap();
        prop_assert!(l[0].included[idx]);
    }

    #[test]
    fn mask_pixel_at_mean_norm_only_changes_itself(seed in any::<u64>()) {
        let b = pair_batch(seed);
        let [p0, p1] = b.predicted().clone();
        let [g0, g1] = b.ground_truth().clone();
        let Some(idx) = (0..p0.len()).find(|&k| g0.mask()[k] && !p0.mask()[k]) else { return Ok(()) };
        // points at exactly the current mean norms leave both normalizers unchanged
        let (z, z_bar) = b.scale_factors().unwrap();
        let dir = Vector3::new(0.3, -0.2, 1.0).normalize();
        let p0 = with_point(&p0, idx, dir * z);
        let g0 = with_point(&g0, idx, Vector3::new(-0.1, 0.4, 1.0).normalize() * z_bar);
        let before = regr_loss(&PointmapPairBatch::new([p0.clone(), p1.clone()], [g0.clone(), g1.clone()], DEFAULT_ALPHA).unwrap()).unwrap();
        let mut mask = p0.mask().to_vec();
        mask[idx] = true;
        let grown = PointmapPairBatch::new([p0.with_mask(mask).unwrap(), p1], [g0, g1], DEFAULT_ALPHA).unwrap();
        let after = regr_loss(&grown).unwrap();
        for v in 0..2 {
            for k in 0..after[v].values.len() {
                if v == 0 && k == idx {
                    prop_assert!(after[v].values[k] > 0.0);
                } else {
                    prop_assert!((after[v].values[k] - before[v].values[k]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn confidence_loss_rises_with_pixel_loss(seed in any::<u64>(), a1 in 0.0f64..1.5, da in 0.01f64..1.5) {
        let b = pair_batch(seed);
        let [p0, p1] = b.predicted().clone();
        let [g0, g1] = b.ground_truth().clone();
        let Some(idx) = (0..p0.len()).find(|&k| b.domain(0)[k]) else { return Ok(()) };
        // swing the predicted point away from its target on a sphere, so the
        // normalizer stays put and only this pixel's loss grows
        let radius = p0.points()[idx].norm();
        let g_dir = g0.points()[idx].normalize();
        let perp = g_dir.cross(&Vector3::new(0.37, -0.81, 0.45)).normalize();
        let at = |a: f64| with_point(&p0, idx, (g_dir * a.cos() + perp * a.sin()) * radius);
        let mut r = rng(seed ^ 1);
        let raw: [Vec<f64>; 2] = [0, 1].map(|_| (0..p0.len()).map(|_| r.random_range(-4.0..4.0)).collect());
        let eval = |pm: Pointmap| {
            let b = PointmapPairBatch::new([pm, p1.clone()], [g0.clone(), g1.clone()], DEFAULT_ALPHA).unwrap();
            (regr_loss(&b).unwrap()[0].values[idx], conf_loss(&b, [&raw[0], &raw[1]]).unwrap())
        };
        let (l1, c1) = eval(at(a1));
        let (l2, c2) = eval(at(a1 + da));
        prop_assert!(l2 > l1);
        prop_assert!(c2 > c1);
    }
}

fn small_pair(seed: u64, outliers: f64, noise: f64) -> (Pointmap, Pointmap, Vec<bool>) {
    let spec = SceneSpec {
        n_points: 900,
        n_views: 3,
        image_size: [64, 48],
        focal_range: [50.0, 70.0],
        rng_seed: seed,
        ..Default::default()
    };
    let bundle = generate(&spec).unwrap();
    let noise = PairNoise {
        noise_sigma: noise,
        outlier_fraction: outliers,
        seed,
    };
    let p = make_pair_pointmaps(&bundle, 0, 1, &noise).unwrap();
    (p.reference, p.source, p.corrupted[1].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pair_solve_is_deterministic_and_self_consistent(seed in 0u64..10_000, outliers in 0.0f64..0.3) {
        let (reference, source, _) = small_pair(seed, outliers, 0.005);
        let cfg = RansacConfig { rng_seed: seed, ..Default::default() };
        let a = relative_pose(&reference, &source, &cfg).unwrap();
        let b = relative_pose(&reference, &source, &cfg).unwrap();
        prop_assert_eq!(&a, &b);

        let k = hopose::relative_pose::make_intrinsics(source.width(), source.height(), a.focal);
        let errs = reprojection_errors(&source, &k, &a.transform);
        for (idx, e) in errs.iter().enumerate() {
            if a.inlier_mask[idx] {
                prop_assert!(e.unwrap() <= cfg.inlier_threshold_px);
            } else if source.mask()[idx] {
                prop_assert!(e.is_none_or(|e| e > cfg.inlier_threshold_px));
            }
        }
        prop_assert_eq!(a.inlier_count, a.inlier_mask.iter().filter(|&&m| m).count());
        prop_assert!(a.inlier_count >= a.hypothesis_inlier_count);
        let again = pnp_ransac(&source, &k, &cfg).unwrap();
        prop_assert_eq!(again.transform, a.transform);
    }

    #[test]
    fn focal_estimate_ignores_global_scale(seed in 0u64..10_000, log_s in -3.0f64..3.0) {
        let (reference, _, _) = small_pair(seed, 0.0, 0.01);
        let s = 10f64.powf(log_s);
        let f = estimate_focal(&reference).unwrap().focal;
        let fs = estimate_focal(&reference.scaled(s)).unwrap().focal;
        prop_assert!((f - fs).abs() <= 1e-9 * f);
    }
}

fn noisy_graph(seed: u64, n: usize, extra: usize, rot_deg: f64, trans_sigma: f64) -> (Vec<RigidTransform>, PoseGraph) {
    let mut r = rng(seed);
    let poses: Vec<_> = (0..n).map(|_| random_pose(&mut r, 2.0)).collect();
    let pairs = random_pairs(n, extra, &mut r);
    let edges = pairs
        .iter()
        .map(|&(i, j)| {
            let mut e = true_edge(&poses, i, j, r.random_range(0.2..1.0));
            e.rotation = perturb(&e.rotation, rot_deg * r.random_range(0.0..1.0), &mut r);
            e.translation += gaussian3(&mut r) * trans_sigma;
            e
        })
        .collect();
    (poses, PoseGraph::new(n, edges).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn averaging_recovers_consistent_graphs(seed in any::<u64>(), n in 2usize..16, extra in 0usize..30) {
        let (poses, g) = noisy_graph(seed, n, extra, 0.0, 0.0);
        let rot = rotation_averaging(&g, &AveragingOptions::default()).unwrap();
        prop_assert_eq!(rot.rotations[0], Matrix3::identity());
        prop_assert_eq!(rot.monotone_violations, 0);
        prop_assert!(rot.objective <= 1e-12, "{}", rot.objective);
        for (e, t) in rot.rotations.iter().zip(gauge_rotations(&poses)) {
            prop_assert!(angle_deg(e, &t) <= 1e-8);
        }
        let tr = translation_averaging(&g, &rot.rotations).unwrap();
        prop_assert_eq!(tr.positions[0], Vector3::zeros());
        for (e, t) in tr.positions.iter().zip(gauge_positions(&poses)) {
            prop_assert!((e - t).norm() <= 1e-10 * 2.0, "{}", (e - t).norm());
        }
    }

    #[test]
    fn averaging_objective_never_rises(seed in any::<u64>(), n in 3usize..20, extra in 0usize..40, deg in 0.0f64..40.0) {
        let (_, g) = noisy_graph(seed, n, extra, deg, 0.0);
        let rot = rotation_averaging(&g, &AveragingOptions::default()).unwrap();
        prop_assert_eq!(rot.monotone_violations, 0);
        for run in &rot.history {
            for w in run.windows(2) {
                prop_assert!(w[1] <= w[0] + objective_round_off(w[0], weight_sum(&g)), "{:?}", w);
            }
        }
        prop_assert!(rot.objective <= rot.chordal_objective + 1e-12);
    }

    #[test]
    fn common_weight_scale_leaves_the_solution(seed in any::<u64>(), n in 3usize..14, extra in 0usize..20, log_c in -2.0f64..2.0) {
        let (_, g) = noisy_graph(seed, n, extra, 5.0, 0.05);
        let c = 10f64.powf(log_c);
        let opts = AveragingOptions::default();
        let (a, b) = (rotation_averaging(&g, &opts).unwrap(), rotation_averaging(&g.with_scaled_weights(c), &opts).unwrap());
        for (x, y) in a.rotations.iter().zip(&b.rotations) {
            prop_assert!((x - y).abs().max() <= 1e-10);
        }
        let ta = translation_averaging(&g, &a.rotations).unwrap();
        let tb = translation_averaging(&g.with_scaled_weights(c), &a.rotations).unwrap();
        for (x, y) in ta.positions.iter().zip(&tb.positions) {
            prop_assert!((x - y).norm() <= 1e-10);
        }
    }

    #[test]
    fn edge_direction_does_not_matter(seed in any::<u64>(), n in 3usize..14, extra in 0usize..20) {
        let mut r = rng(seed ^ 0xabc);
        // rotation stage with noisy rotations
        let (_, g) = noisy_graph(seed, n, extra, 5.0, 0.0);
        let flip = |g: &PoseGraph, r: &mut rand_chacha::ChaCha8Rng| {
            let edges: Vec<Edge> = g.edges().iter().map(|e| if r.random_bool(0.5) { e.reversed() } else { e.clone() }).collect();
            PoseGraph::new(g.n_frames(), edges).unwrap()
        };
        let opts = AveragingOptions::default();
        let a = rotation_averaging(&g, &opts).unwrap();
        let b = rotation_averaging(&flip(&g, &mut r), &opts).unwrap();
        for (x, y) in a.rotations.iter().zip(&b.rotations) {
            prop_assert!(angle_deg(x, y) <= 1e-9);
        }
        // translation stage with noisy translations on exact rotations
        let (_, g) = noisy_graph(seed, n, extra, 0.0, 0.1);
        let rots = rotation_averaging(&g, &opts).unwrap().rotations;
        let ta = translation_averaging(&g, &rots).unwrap();
        let tb = translation_averaging(&flip(&g, &mut r), &rots).unwrap();
        for (x, y) in ta.positions.iter().zip(&tb.positions) {
            prop_assert!((x - y).norm() <= 1e-9);
        }
    }
}

fn random_sequence(seed: u64, n: usize, noise_deg: f64, noise_t: f64) -> (GlobalPoses, GlobalPoses) {
    let mut r = rng(seed);
    let gt: Vec<_> = (0..n).map(|_| random_pose(&mut r, 1.0)).collect();
    let est = gt
        .iter()
        .map(|p| {
            let rot = perturb(p.rotation(), noise_deg * r.random_range(0.0..1.0), &mut r);
            let c = p.center() + gaussian3(&mut r) * noise_t;
            RigidTransform::new(rot, -(rot * c)).unwrap()
        })
        .collect::<Vec<_>>();
    let rec = (0..n).map(|_| r.random_bool(0.85)).collect();
    (GlobalPoses::new(est, rec), GlobalPoses::new(gt, vec![true; n]))
}

fn close(a: &SequenceReport, b: &SequenceReport, tol: f64) -> bool {
    let o = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    };
    o(a.rot_error_deg, b.rot_error_deg)
        && o(a.trans_error, b.trans_error)
        && o(a.trans_rmse, b.trans_rmse)
        && a.det_rate_pct == b.det_rate_pct
        && a.acc_15_15_pct == b.acc_15_15_pct
        && a.acc_30_30_pct == b.acc_30_30_pct
        && (a.n_frames, a.n_recovered) == (b.n_frames, b.n_recovered)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn self_evaluation_is_perfect(seed in any::<u64>(), n in 1usize..30) {
        let (_, gt) = random_sequence(seed, n, 0.0, 0.0);
        let r = evaluate(&gt, &gt, &Thresholds::default()).unwrap();
        prop_assert_eq!(r.rot_error_deg, Some(0.0));
        prop_assert_eq!(r.trans_error, Some(0.0));
        prop_assert_eq!((r.det_rate_pct, r.acc_15_15_pct, r.acc_30_30_pct), (100.0, Some(100.0), Some(100.0)));
    }

    #[test]
    fn metrics_ignore_a_common_rigid_motion(seed in any::<u64>(), n in 4usize..30, deg in 0.0f64..40.0, t in 0.0f64..0.4) {
        let (est, gt) = random_sequence(seed, n, deg, t);
        let g = random_pose(&mut rng(seed ^ 7), 3.0);
        let moved = |p: &GlobalPoses| GlobalPoses::new(p.poses().iter().map(|x| x.compose(&g)).collect(), p.recovered().to_vec());
        let th = Thresholds::default();
        let a = evaluate(&est, &gt, &th).unwrap();
        let b = evaluate(&moved(&est), &moved(&gt), &th).unwrap();
        prop_assert!(close(&a, &b, 1e-9), "{a:?} {b:?}");
        let (a, _) = evaluate_with_alignment(&est, &gt, AlignMode::Rigid, &th).unwrap();
        let (b, _) = evaluate_with_alignment(&moved(&est), &moved(&gt), AlignMode::Rigid, &th).unwrap();
        prop_assert!(close(&a, &b, 1e-9), "{a:?} {b:?}");
    }

    #[test]
    fn loose_accuracy_dominates_strict(seed in any::<u64>(), n in 1usize..40, deg in 0.0f64..60.0, t in 0.0f64..0.6) {
        let (est, gt) = random_sequence(seed, n, deg, t);
        let r = evaluate(&est, &gt, &Thresholds::default()).unwrap();
        if let (Some(loose), Some(strict)) = (r.acc_30_30_pct, r.acc_15_15_pct) {
            prop_assert!(loose >= strict);
            prop_assert!((0.0..=100.0).contains(&strict) && loose <= 100.0);
        }
    }

    #[test]
    fn clearing_flags_lowers_detection_rate(seed in any::<u64>(), n in 1usize..30) {
        let (est, gt) = random_sequence(seed, n, 5.0, 0.05);
        let mut rec = vec![true; n];
        let mut last = 101.0;
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = rng(seed);
        for k in (1..n).rev() {
            order.swap(k, r.random_range(0..=k));
        }
        for &k in std::iter::once(&usize::MAX).chain(&order) {
            if k != usize::MAX {
                rec[k] = false;
            }
            let e = GlobalPoses::new(est.poses().to_vec(), rec.clone());
            let rate = evaluate(&e, &gt, &Thresholds::default()).unwrap().det_rate_pct;
            prop_assert!(rate < last);
            last = rate;
        }
        prop_assert_eq!(last, 0.0);
    }
}

fn random_pmap_file(seed: u64) -> PointmapFile {
    let mut r = rng(seed);
    let (w, h) = (r.random_range(0..9u32), r.random_range(0..9u32));
    let n = (w * h) as usize;
    let mask: Option<Vec<bool>> = r.random_bool(0.5).then(|| (0..n).map(|_| r.random_bool(0.7)).collect());
    let points = (0..n)
        .map(|k| {
            let masked_out = mask.as_ref().is_some_and(|m| !m[k]);
            if masked_out && r.random_bool(0.3) {
                [f32::NAN, f32::INFINITY, -0.0]
            } else {
                [r.random::<f32>() * 10.0 - 5.0, f32::from_bits(r.random::<u32>() & 0x3fff_ffff), r.random()]
            }
        })
        .collect();
    let confidence = r.random_bool(0.5).then(|| (0..n).map(|_| r.random_range(1e-6f32..1e6)).collect());
    PointmapFile { width: w, height: h, points, confidence, mask }
}

fn random_global_poses(seed: u64) -> GlobalPoses {
    let mut r = rng(seed);
    let n = r.random_range(0..12);
    let poses = (0..n).map(|_| random_pose(&mut r, 100.0)).collect();
    GlobalPoses::new(poses, (0..n).map(|_| r.random_bool(0.8)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pointmap_file_round_trip(seed in any::<u64>()) {
        let f = random_pmap_file(seed);
        let bytes = f.encode();
        let back = PointmapFile::decode(&bytes).unwrap();
        prop_assert_eq!(back.encode(), bytes.clone());
        prop_assert_eq!((back.width, back.height, back.flags()), (f.width, f.height, f.flags()));
        // cut anywhere short of the end and the reader says so
        let cut = (seed as usize) % bytes.len();
        let truncated = matches!(PointmapFile::decode(&bytes[..cut]), Err(FormatError::Truncated { .. }));
        prop_assert!(truncated);
        let mut bad = bytes.clone();
        bad[(seed as usize) % 5] ^= 0x20;
        let bad_magic = matches!(PointmapFile::decode(&bad), Err(FormatError::BadMagic { .. }));
        prop_assert!(bad_magic);
    }

    #[test]
    fn depth_file_round_trip(seed in any::<u64>(), w in 0u32..10, h in 0u32..10) {
        let mut r = rng(seed);
        let f = DepthFile { width: w, height: h, depth: (0..w * h).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random::<f32>() * 50.0 }).collect() };
        let bytes = f.encode();
        prop_assert_eq!(DepthFile::decode(&bytes).unwrap().encode(), bytes.clone());
        let cut = (seed as usize) % bytes.len();
        let truncated = matches!(DepthFile::decode(&bytes[..cut]), Err(FormatError::Truncated { .. }));
        prop_assert!(truncated);
    }

    #[test]
    fn pose_text_round_trip(seed in any::<u64>()) {
        let p = random_global_poses(seed);
        let text = io::format_poses(&p);
        let back = io::parse_poses(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(io::format_poses(&back), text);
    }

    #[test]
    fn graph_text_round_trip(seed in any::<u64>(), n in 2usize..12, extra in 0usize..20) {
        let mut r = rng(seed);
        let (_, g) = noisy_graph(seed, n, extra, 10.0, 0.3);
        let edges = g.edges().iter().map(|e| Edge { quality: r.random(), rescued: r.random_bool(0.2), ..e.clone() }).collect();
        let g = PoseGraph::new(n, edges).unwrap();
        let back = io::parse_graph(&io::format_graph(&g)).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn report_and_validity_text_round_trip(seed in any::<u64>(), n in 1usize..20) {
        let (est, gt) = random_sequence(seed, n, 30.0, 0.3);
        let rep = evaluate(&est, &gt, &Thresholds::default()).unwrap();
        prop_assert_eq!(io::parse_report(&io::format_report(&rep)).unwrap(), rep);
        let mut r = rng(seed);
        let mut v = PairValidity::new();
        for _ in 0..n {
            let (i, j) = (r.random_range(0..n + 1), r.random_range(0..n + 1));
            if i != j {
                v.insert(i, j, r.random());
            }
        }
        prop_assert_eq!(io::parse_pair_validity(&io::format_pair_validity(&v)).unwrap(), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn composition_is_associative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_pose(&mut r, 5.0), random_pose(&mut r, 5.0), random_pose(&mut r, 5.0));
        let left = a.compose(&b).compose(&c).to_homogeneous();
        let right = a.compose(&b.compose(&c)).to_homogeneous();
        let direct = a.to_homogeneous() * b.to_homogeneous() * c.to_homogeneous();
        prop_assert!((left - right).abs().max() <= 1e-12);
        prop_assert!((left - direct).abs().max() <= 1e-12);
        let id = RigidTransform::identity().compose(&b).to_homogeneous();
        prop_assert!((id - b.to_homogeneous()).abs().max() <= 1e-12);
    }
}
