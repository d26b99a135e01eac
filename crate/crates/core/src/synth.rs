//! Procedural multi-view scenes with exact ground truth.
//!
//! A scene is a cloud of proxy surface points. Each view renders it by
//! z-buffer splatting with a one-pixel footprint: a point lands on the pixel
//! nearest to its projection and the smallest depth wins. Pointmaps derived
//! from the rendered depth are the back-projections of those pixel centers,
//! so a view's pointmap reprojects exactly onto its own pixel grid.

use crate::geometry::{
    change_frame, pointmap_from_depth, project, CameraIntrinsics, DepthMap, FrameId, Pointmap,
    RigidTransform,
};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec field `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },
    #[error("scene is infeasible: {0}")]
    Infeasible(String),
    #[error("view {index} does not exist (bundle has {n_views} views)")]
    ViewIndex { index: usize, n_views: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectShape {
    /// A few overlapping spheres of different sizes.
    SphereCluster,
    /// Boxes including a thin elongated slab and a small cube.
    BoxCluster,
    /// A sphere with a smooth random radial perturbation.
    #[default]
    Blob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Trajectory {
    /// Evenly spaced azimuths at a fixed 20° elevation.
    #[default]
    Orbit,
    /// Azimuth uniform in [0, 360°), elevation uniform in [10°, 70°].
    RandomHemisphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_points: usize,
    pub object_shape: ObjectShape,
    /// Object radius in scene units.
    pub scene_scale: f64,
    pub n_views: usize,
    pub trajectory: Trajectory,
    /// Per-view focal drawn uniformly from `[lo, hi]` pixels.
    pub focal_range: [f64; 2],
    /// `[width, height]` in pixels.
    pub image_size: [usize; 2],
    /// Standard deviation as a fraction of `scene_scale`.
    pub depth_noise_sigma: f64,
    pub outlier_fraction: f64,
    /// Fraction of each view's covered pixels hidden by an occluding disk.
    pub occlusion_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_points: 3000,
            object_shape: ObjectShape::Blob,
            scene_scale: 1.0,
            n_views: 20,
            trajectory: Trajectory::Orbit,
            focal_range: [100.0, 100.0],
            image_size: [128, 96],
            depth_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            occlusion_fraction: 0.0,
            rng_seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |field: &'static str, reason: &str| {
            Err(SynthError::Validation {
                field,
                reason: reason.to_string(),
            })
        };
        if self.n_points < 8 {
            return bad("n_points", "need at least 8 points");
        }
        if self.n_views < 2 {
            return bad("n_views", "need at least 2 views");
        }
        if !(self.scene_scale.is_finite() && self.scene_scale > 0.0) {
            return bad("scene_scale", "must be positive and finite");
        }
        let [lo, hi] = self.focal_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad("focal_range", "need 0 < lo <= hi");
        }
        if self.image_size[0] < 8 || self.image_size[1] < 8 {
            return bad("image_size", "each side must be at least 8 pixels");
        }
        if !(self.depth_noise_sigma.is_finite() && self.depth_noise_sigma >= 0.0) {
            return bad("depth_noise_sigma", "must be non-negative and finite");
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction", "must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return bad("occlusion_fraction", "must lie in [0, 1); a full occlusion leaves nothing visible");
        }
        Ok(())
    }
}

/// One rendered camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneView {
    pub intrinsics: CameraIntrinsics,
    /// World-to-camera.
    pub pose: RigidTransform,
    /// Noiseless rendered depth; its mask marks covered pixels.
    pub depth: DepthMap,
    /// `depth` plus Gaussian noise on covered pixels.
    pub observed_depth: DepthMap,
    /// Index into the bundle's point cloud of the point that won each pixel.
    pub point_ids: Vec<Option<u32>>,
}

impl SceneView {
    pub fn pointmap(&self, frame: FrameId) -> Pointmap {
        pointmap_from_depth(&self.depth, &self.intrinsics, frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub spec: SceneSpec,
    /// Ground-truth points in world coordinates, after visibility culling.
    pub points: Vec<Vector3<f64>>,
    pub views: Vec<SceneView>,
}

impl SceneBundle {
    pub fn poses(&self) -> Vec<RigidTransform> {
        self.views.iter().map(|v| v.pose.clone()).collect()
    }

    /// Exact camera-frame positions of the winning points of view `v`.
    /// Unlike [`SceneView::pointmap`] these are not snapped to pixel rays.
    pub fn surface_pointmap(&self, v: usize) -> Pointmap {
        let view = &self.views[v];
        let (w, h) = (view.depth.width(), view.depth.height());
        let points = view
            .point_ids
            .iter()
            .map(|id| match id {
                Some(id) => view.pose.apply(&self.points[*id as usize]),
                None => Vector3::zeros(),
            })
            .collect();
        let mask = view.point_ids.iter().map(|id| id.is_some()).collect();
        Pointmap::with_unit_confidence(w, h, points, mask, FrameId(v)).expect("consistent shape")
    }

    /// Number of views in which each point wins at least one pixel.
    pub fn visibility_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.points.len()];
        for view in &self.views {
            let mut seen = vec![false; self.points.len()];
            for id in view.point_ids.iter().flatten() {
                seen[*id as usize] = true;
            }
            for (c, s) in counts.iter_mut().zip(seen) {
                *c += s as usize;
            }
        }
        counts
    }

    /// Largest distance between the point cloud centroid and any point, doubled.
    pub fn diameter(&self) -> f64 {
        let c = centroid(&self.points);
        2.0 * self.points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }
}

/// Deterministic child seed for stream `(a, b)` of a parent seed.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_POINTS: u64 = 0;
const STREAM_VIEW: u64 = 1;
const STREAM_PAIR: u64 = 2;

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len().max(1) as f64
}

fn unit_sphere(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn sample_shape(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let n = spec.n_points;
    let mut pts = Vec::with_capacity(n);
    match spec.object_shape {
        ObjectShape::Blob => {
            let lobes: Vec<(Vector3<f64>, f64)> = (0..4)
                .map(|_| (unit_sphere(rng), rng.random_range(0.1..0.3)))
                .collect();
            for _ in 0..n {
                let d = unit_sphere(rng);
                let r = 1.0 + lobes.iter().map(|(a, amp)| amp * d.dot(a).powi(3)).sum::<f64>();
                pts.push(d * r);
            }
        }
        ObjectShape::SphereCluster => {
            let spheres: Vec<(Vector3<f64>, f64)> = (0..5)
                .map(|k| {
                    let c = if k == 0 { Vector3::zeros() } else { unit_sphere(rng) * rng.random_range(0.3..0.6) };
                    (c, rng.random_range(0.15..0.5))
                })
                .collect();
            let total: f64 = spheres.iter().map(|(_, r)| r * r).sum();
            for _ in 0..n {
                // area-proportional sphere choice
                let mut x = rng.random_range(0.0..total);
                let mut pick = spheres.len() - 1;
                for (k, (_, r)) in spheres.iter().enumerate() {
                    if x < r * r {
                        pick = k;
                        break;
                    }
                    x -= r * r;
                }
                let (c, r) = spheres[pick];
                pts.push(c + unit_sphere(rng) * r);
            }
        }
        ObjectShape::BoxCluster => {
            // main box, thin elongated slab, small cube
            let boxes = [
                (Vector3::zeros(), Vector3::new(0.5, 0.35, 0.3)),
                (Vector3::new(0.2, 0.1, 0.45), Vector3::new(0.7, 0.06, 0.04)),
                (Vector3::new(-0.4, 0.3, -0.1), Vector3::new(0.12, 0.12, 0.12)),
            ];
            let area = |h: &Vector3<f64>| 8.0 * (h.x * h.y + h.y * h.z + h.z * h.x);
            let total: f64 = boxes.iter().map(|(_, h)| area(h)).sum();
            for _ in 0..n {
                let mut x = rng.random_range(0.0..total);
                let mut pick = boxes.len() - 1;
                for (k, (_, h)) in boxes.iter().enumerate() {
                    if x < area(h) {
                        pick = k;
                        break;
                    }
                    x -= area(h);
                }
                let (c, h) = boxes[pick];
                let faces = [h.y * h.z, h.x * h.z, h.x * h.y];
                let mut y = rng.random_range(0.0..faces.iter().sum::<f64>());
                let mut axis = 2;
                for (a, &fa) in faces.iter().enumerate() {
                    if y < fa {
                        axis = a;
                        break;
                    }
                    y -= fa;
                }
                let mut p = Vector3::new(
                    rng.random_range(-h.x..h.x),
                    rng.random_range(-h.y..h.y),
                    rng.random_range(-h.z..h.z),
                );
                p[axis] = if rng.random_bool(0.5) { h[axis] } else { -h[axis] };
                pts.push(c + p);
            }
        }
    }
    // center on the centroid and rescale to the requested radius
    let c = centroid(&pts);
    let r = pts.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    pts.iter().map(|p| (p - c) * (spec.scene_scale / r)).collect()
}

/// World-to-camera pose of a camera at `c` looking at `target` with +z up.
pub fn look_at(c: &Vector3<f64>, target: &Vector3<f64>) -> RigidTransform {
    let z = (target - c).normalize();
    let up = Vector3::z();
    let x = (-up).cross(&z).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    RigidTransform::new(r, -(r * c)).expect("orthonormal look-at frame")
}

struct Camera {
    k: CameraIntrinsics,
    pose: RigidTransform,
    /// `(center, radius²)` in pixels; `None` when unoccluded.
    occluder: Option<(f64, f64, f64)>,
    rng: ChaCha8Rng,
}

fn render(
    points: &[Vector3<f64>],
    alive: &[bool],
    cam: &Camera,
    w: usize,
    h: usize,
) -> (Vec<f64>, Vec<Option<u32>>) {
    let mut depth = vec![f64::INFINITY; w * h];
    let mut ids = vec![None; w * h];
    for (id, p) in points.iter().enumerate() {
        if !alive[id] {
            continue;
        }
        let q = cam.pose.apply(p);
        let Ok(uv) = project(&q, &cam.k) else { continue };
        let (i, j) = (uv.x.round(), uv.y.round());
        if i < 0.0 || j < 0.0 || i >= w as f64 || j >= h as f64 {
            continue;
        }
        if let Some((ox, oy, r2)) = cam.occluder {
            if (i - ox).powi(2) + (j - oy).powi(2) <= r2 {
                continue;
            }
        }
        let idx = j as usize * w + i as usize;
        // nearest depth wins; ties go to the lower point id
        if q.z < depth[idx] {
            depth[idx] = q.z;
            ids[idx] = Some(id as u32);
        }
    }
    for d in &mut depth {
        if d.is_infinite() {
            *d = 0.0;
        }
    }
    (depth, ids)
}

/// Renders a scene. Points seen by fewer than two views are dropped and the
/// views re-rendered until every remaining point is seen at least twice.
pub fn generate(spec: &SceneSpec) -> Result<SceneBundle, SynthError> {
    spec.validate()?;
    let [w, h] = spec.image_size;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, STREAM_POINTS, 0));
    let points = sample_shape(spec, &mut rng);
    let target = Vector3::zeros();

    let mut cams: Vec<Camera> = (0..spec.n_views)
        .map(|v| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, STREAM_VIEW, v as u64));
            let [lo, hi] = spec.focal_range;
            let f = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let k = CameraIntrinsics::new(f, w as f64 / 2.0, h as f64 / 2.0).expect("validated focal");
            let (az, el) = match spec.trajectory {
                Trajectory::Orbit => (
                    std::f64::consts::TAU * v as f64 / spec.n_views as f64,
                    20f64.to_radians(),
                ),
                Trajectory::RandomHemisphere => (
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(10f64.to_radians()..70f64.to_radians()),
                ),
            };
            // object radius spans about 35% of the shorter image side
            let dist = (f * spec.scene_scale / (0.35 * w.min(h) as f64)).max(2.0 * spec.scene_scale);
            let c = target + Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * dist;
            Camera {
                k,
                pose: look_at(&c, &target),
                occluder: None,
                rng,
            }
        })
        .collect();

    let mut alive = vec![true; points.len()];
    if spec.occlusion_fraction > 0.0 {
        for cam in &mut cams {
            let (depth, _) = render(&points, &alive, cam, w, h);
            let covered: Vec<usize> = (0..w * h).filter(|&k| depth[k] > 0.0).collect();
            if covered.is_empty() {
                continue;
            }
            let centre = covered[cam.rng.random_range(0..covered.len())];
            let r2 = spec.occlusion_fraction * covered.len() as f64 / std::f64::consts::PI;
            cam.occluder = Some(((centre % w) as f64, (centre / w) as f64, r2));
        }
    }

    let mut renders;
    loop {
        renders = cams
            .iter()
            .map(|c| render(&points, &alive, c, w, h))
            .collect::<Vec<_>>();
        let mut counts = vec![0usize; points.len()];
        for (_, ids) in &renders {
            let mut seen = vec![false; points.len()];
            for id in ids.iter().flatten() {
                seen[*id as usize] = true;
            }
            for (c, s) in counts.iter_mut().zip(seen) {
                *c += s as usize;
            }
        }
        let mut changed = false;
        for (a, c) in alive.iter_mut().zip(&counts) {
            if *a && *c < 2 {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let n_alive = alive.iter().filter(|&&a| a).count();
    if n_alive < 8 {
        return Err(SynthError::Infeasible(format!(
            "only {n_alive} points are visible in two or more views"
        )));
    }

    // compact ids to surviving points
    let mut remap = vec![u32::MAX; points.len()];
    let mut kept = Vec::with_capacity(n_alive);
    for (id, p) in points.iter().enumerate() {
        if alive[id] {
            remap[id] = kept.len() as u32;
            kept.push(*p);
        }
    }

    let noise_std = spec.depth_noise_sigma * spec.scene_scale;
    let views = cams
        .into_iter()
        .zip(renders)
        .map(|(mut cam, (depth, ids))| {
            let observed: Vec<f64> = depth
                .iter()
                .map(|&d| {
                    if d > 0.0 && noise_std > 0.0 {
                        let n: f64 = cam.rng.sample(StandardNormal);
                        // keep the pixel valid under extreme draws
                        (d + n * noise_std).max(0.05 * d)
                    } else {
                        d
                    }
                })
                .collect();
            SceneView {
                intrinsics: cam.k,
                pose: cam.pose,
                depth: DepthMap::new(w, h, depth).expect("rendered depth is valid"),
                observed_depth: DepthMap::new(w, h, observed).expect("noisy depth stays positive"),
                point_ids: ids.into_iter().map(|id| id.map(|i| remap[i as usize])).collect(),
            }
        })
        .collect();
    Ok(SceneBundle {
        spec: spec.clone(),
        points: kept,
        views,
    })
}

/// Corruption knobs for simulated network pointmaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairNoise {
    /// Isotropic per-coordinate standard deviation as a fraction of `scene_scale`.
    pub noise_sigma: f64,
    /// Fraction of valid pixels per map replaced by gross outliers.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for PairNoise {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl PairNoise {
    /// The scene description's noise knobs applied to pair pointmaps.
    pub fn from_spec(spec: &SceneSpec) -> Self {
        Self {
            noise_sigma: spec.depth_noise_sigma,
            outlier_fraction: spec.outlier_fraction,
            seed: spec.rng_seed,
        }
    }
}

/// Simulated network output for an ordered view pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PointmapPair {
    /// `X^{1,1}`: view `i` in its own frame.
    pub reference: Pointmap,
    /// `X^{2,1}`: view `j` expressed in the frame of view `i`.
    pub source: Pointmap,
    /// Pixels replaced by outliers, per map.
    pub corrupted: [Vec<bool>; 2],
    /// Raw confidence logits; the pointmaps carry `1 + exp(raw)`.
    pub raw_confidence: [Vec<f64>; 2],
}

/// Minimum ground-truth reprojection distance of an injected outlier.
pub const OUTLIER_MIN_OFFSET_PX: f64 = 20.0;

fn bbox(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Perturbs a pointmap in the frame of view `i`. `to_cam` maps that frame
/// into the camera whose pixel grid the map lives on.
fn corrupt(
    pm: &Pointmap,
    k: &CameraIntrinsics,
    to_cam: &RigidTransform,
    bounds: (Vector3<f64>, Vector3<f64>),
    noise_std: f64,
    outlier_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Pointmap, Vec<bool>, Vec<f64>) {
    let mut points = pm.points().to_vec();
    let valid: Vec<usize> = (0..pm.len()).filter(|&k| pm.mask()[k]).collect();
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite std");
        for &idx in &valid {
            let n = Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
            points[idx] += n;
        }
    }
    let n_out = (outlier_fraction * valid.len() as f64).floor() as usize;
    let mut order = valid.clone();
    // partial Fisher-Yates picks the outlier pixels
    for a in 0..n_out {
        let b = rng.random_range(a..order.len());
        order.swap(a, b);
    }
    let mut corrupted = vec![false; pm.len()];
    let (lo, hi) = bounds;
    let (mid, half) = ((lo + hi) / 2.0, (hi - lo) * 0.75);
    for &idx in &order[..n_out] {
        corrupted[idx] = true;
        let (i, j) = pm.pixel(idx);
        let mut chosen = None;
        for _ in 0..1000 {
            let p = Vector3::new(
                mid.x + half.x * rng.random_range(-1.0..1.0),
                mid.y + half.y * rng.random_range(-1.0..1.0),
                mid.z + half.z * rng.random_range(-1.0..1.0),
            );
            match project(&to_cam.apply(&p), k) {
                Err(_) => {
                    chosen = Some(p);
                    break;
                }
                Ok(uv) if (uv.x - i as f64).hypot(uv.y - j as f64) > OUTLIER_MIN_OFFSET_PX => {
                    chosen = Some(p);
                    break;
                }
                Ok(_) => {}
            }
        }
        // a point behind the camera never reprojects
        points[idx] = chosen.unwrap_or_else(|| {
            let behind = -(k.unproject(i as f64, j as f64) * (hi - lo).norm());
            to_cam.inverse().apply(&behind)
        });
    }
    let raw: Vec<f64> = (0..pm.len())
        .map(|idx| {
            if corrupted[idx] {
                rng.random_range(-3.0..-1.0)
            } else {
                rng.random_range(2.0..4.0)
            }
        })
        .collect();
    let conf = raw.iter().map(|&c| crate::loss::effective_confidence(c)).collect();
    let out = Pointmap::new(pm.width(), pm.height(), points, conf, pm.mask().to_vec(), pm.frame_id())
        .expect("shape and confidence preserved");
    (out, corrupted, raw)
}

/// Pointmaps `(X^{1,1}, X^{2,1})` for views `i` and `j`, both in the frame
/// of view `i`, rendered from the noiseless depth and then corrupted per
/// `noise`. For `i == j` the source is a copy of the reference.
pub fn make_pair_pointmaps(
    bundle: &SceneBundle,
    i: usize,
    j: usize,
    noise: &PairNoise,
) -> Result<PointmapPair, SynthError> {
    let n_views = bundle.views.len();
    for index in [i, j] {
        if index >= n_views {
            return Err(SynthError::ViewIndex { index, n_views });
        }
    }
    let (vi, vj) = (&bundle.views[i], &bundle.views[j]);
    let frame = FrameId(i);
    let scale = bundle.spec.scene_scale;
    let noise_std = noise.noise_sigma * scale;
    let world_bounds = bbox(&bundle.points);
    let corners_i: Vec<Vector3<f64>> = (0..8)
        .map(|c| {
            let (lo, hi) = world_bounds;
            vi.pose.apply(&Vector3::new(
                if c & 1 == 0 { lo.x } else { hi.x },
                if c & 2 == 0 { lo.y } else { hi.y },
                if c & 4 == 0 { lo.z } else { hi.z },
            ))
        })
        .collect();
    let bounds_i = bbox(&corners_i);

    let mut rng_ref = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, STREAM_PAIR, (i * n_views + i) as u64));
    let clean_ref = vi.pointmap(frame);
    let (reference, c_ref, raw_ref) = corrupt(
        &clean_ref,
        &vi.intrinsics,
        &RigidTransform::identity(),
        bounds_i,
        noise_std,
        noise.outlier_fraction,
        &mut rng_ref,
    );
    if i == j {
        return Ok(PointmapPair {
            source: reference.clone(),
            reference,
            corrupted: [c_ref.clone(), c_ref],
            raw_confidence: [raw_ref.clone(), raw_ref],
        });
    }
    let mut rng_src = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, STREAM_PAIR, (i * n_views + j) as u64));
    let clean_src = change_frame(&vj.pointmap(FrameId(j)), &vj.pose, &vi.pose, frame);
    let i_to_j = vj.pose.compose(&vi.pose.inverse());
    let (source, c_src, raw_src) = corrupt(
        &clean_src,
        &vj.intrinsics,
        &i_to_j,
        bounds_i,
        noise_std,
        noise.outlier_fraction,
        &mut rng_src,
    );
    Ok(PointmapPair {
        reference,
        source,
        corrupted: [c_ref, c_src],
        raw_confidence: [raw_ref, raw_src],
    })
}
