//! Pointmaps, depth maps, pinhole intrinsics and rigid transforms.
//!
//! Pixel coordinates are `(i, j) = (column, row)`, zero-indexed, and every
//! grid is stored row-major: the entry for pixel `(i, j)` lives at
//! `j * width + i`. Rigid transforms are world-to-camera: a world point `X`
//! maps to camera coordinates `R X + t`.

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("grid shape mismatch: expected {expected} entries, got {actual} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("confidence at pixel index {index} is {value}, must be positive and finite")]
    Confidence { index: usize, value: f64 },
    #[error("depth at pixel index {index} is {value}, must be zero (invalid) or positive and finite")]
    Depth { index: usize, value: f64 },
    #[error("invalid intrinsics: f={f}, cx={cx}, cy={cy}")]
    Intrinsics { f: f64, cx: f64, cy: f64 },
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("non-finite transform entries")]
    NonFiniteTransform,
}

/// Identifier of the coordinate frame a pointmap is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FrameId(pub usize);

/// A dense per-pixel grid of 3D points with confidence and validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointmap {
    width: usize,
    height: usize,
    points: Vec<Vector3<f64>>,
    confidence: Vec<f64>,
    mask: Vec<bool>,
    frame_id: FrameId,
}

impl Pointmap {
    pub fn new(
        width: usize,
        height: usize,
        points: Vec<Vector3<f64>>,
        confidence: Vec<f64>,
        mask: Vec<bool>,
        frame_id: FrameId,
    ) -> Result<Self, GeometryError> {
        let n = width * height;
        check_len("points", n, points.len())?;
        check_len("confidence", n, confidence.len())?;
        check_len("mask", n, mask.len())?;
        if let Some((index, &value)) = confidence
            .iter()
            .enumerate()
            .find(|(_, c)| !(c.is_finite() && **c > 0.0))
        {
            return Err(GeometryError::Confidence { index, value });
        }
        Ok(Self {
            width,
            height,
            points,
            confidence,
            mask,
            frame_id,
        })
    }

    /// Pointmap with unit confidence everywhere.
    pub fn with_unit_confidence(
        width: usize,
        height: usize,
        points: Vec<Vector3<f64>>,
        mask: Vec<bool>,
        frame_id: FrameId,
    ) -> Result<Self, GeometryError> {
        Self::new(width, height, points, vec![1.0; width * height], mask, frame_id)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn frame_id(&self) -> FrameId {
        self.frame_id
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    /// Pixel coordinates `(i, j)` of a row-major index.
    pub fn pixel(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iterator over `(index, point)` for masked-in pixels.
    pub fn valid_points(&self) -> impl Iterator<Item = (usize, &Vector3<f64>)> {
        self.points
            .iter()
            .enumerate()
            .filter(move |(k, _)| self.mask[*k])
    }

    /// Returns a copy with every point multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.points {
            *p *= s;
        }
        out
    }

    /// Returns a copy with a different mask. Shape is checked.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self, GeometryError> {
        check_len("mask", self.len(), mask.len())?;
        Ok(Self {
            mask,
            ..self.clone()
        })
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), GeometryError> {
    if expected == actual {
        Ok(())
    } else {
        Err(GeometryError::Shape {
            what,
            expected,
            actual,
        })
    }
}

/// A depth map with validity mask. Invalid pixels carry depth 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    mask: Vec<bool>,
}

impl DepthMap {
    /// Builds a depth map whose validity is `depth > 0`.
    pub fn new(width: usize, height: usize, depth: Vec<f64>) -> Result<Self, GeometryError> {
        check_len("depth", width * height, depth.len())?;
        for (index, &value) in depth.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(GeometryError::Depth { index, value });
            }
        }
        let mask = depth.iter().map(|&d| d > 0.0).collect();
        Ok(Self {
            width,
            height,
            depth,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Pinhole intrinsics with a single focal length and no skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    f: f64,
    cx: f64,
    cy: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if !(f.is_finite() && f > 0.0 && cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::Intrinsics { f, cx, cy });
        }
        Ok(Self { f, cx, cy })
    }

    pub fn focal(&self) -> f64 {
        self.f
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.f, 0.0, self.cx, 0.0, self.f, self.cy, 0.0, 0.0, 1.0)
    }

    /// Closed-form `K⁻¹`.
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let inv_f = 1.0 / self.f;
        Matrix3::new(
            inv_f,
            0.0,
            -self.cx * inv_f,
            0.0,
            inv_f,
            -self.cy * inv_f,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Unit-depth ray `K⁻¹ (u, v, 1)ᵀ` through pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.f, (v - self.cy) / self.f, 1.0)
    }
}

/// Nearest rotation in Frobenius norm (polar factor with determinant fix).
pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let d = (u * v_t).determinant();
    let mut s = Matrix3::identity();
    if d < 0.0 {
        s[(2, 2)] = -1.0;
    }
    u * s * v_t
}

/// A rigid transform `X ↦ R X + t` (world-to-camera).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    /// Builds a transform, projecting `rotation` onto SO(3).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().chain(translation.iter()).any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFiniteTransform);
        }
        Ok(Self {
            rotation: project_to_so3(&rotation),
            translation,
        })
    }

    /// Builds a transform from a rotation already known to be orthonormal.
    /// Used where renormalizing would perturb exact values (transposes, file reads).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: project_to_so3(&(self.rotation * other.rotation)),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    pub fn renormalized(&self) -> Self {
        Self {
            rotation: project_to_so3(&self.rotation),
            translation: self.translation,
        }
    }
}

/// Back-projects a depth map into a camera-frame pointmap:
/// `X_ij = K⁻¹ (i·D_ij, j·D_ij, D_ij)ᵀ`. Confidence is 1 everywhere.
pub fn pointmap_from_depth(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    frame_id: FrameId,
) -> Pointmap {
    let k_inv = k.inverse_matrix();
    let (w, h) = (depth.width(), depth.height());
    let mut points = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let d = depth.depth()[j * w + i];
            points.push(k_inv * Vector3::new(i as f64 * d, j as f64 * d, d));
        }
    }
    Pointmap {
        width: w,
        height: h,
        points,
        confidence: vec![1.0; w * h],
        mask: depth.mask().to_vec(),
        frame_id,
    }
}

/// Re-expresses a pointmap from the frame of camera `src` into the frame of
/// camera `dst`: each valid point is mapped by `dst ∘ src⁻¹`. Masked-out
/// entries are copied untouched.
pub fn change_frame(
    pm: &Pointmap,
    src: &RigidTransform,
    dst: &RigidTransform,
    dst_frame: FrameId,
) -> Pointmap {
    let rel = dst.compose(&src.inverse());
    let points = pm
        .points
        .iter()
        .zip(&pm.mask)
        .map(|(p, &valid)| if valid { rel.apply(p) } else { *p })
        .collect();
    Pointmap {
        points,
        frame_id: dst_frame,
        ..pm.clone()
    }
}

/// Geodesic distance between two rotations in degrees.
pub fn geodesic_deg(ra: &Matrix3<f64>, rb: &Matrix3<f64>) -> f64 {
    // atan2 of sine and cosine parts equals acos((tr − 1)/2) on SO(3) but
    // keeps full precision for tiny angles, where acos bottoms out near 1e-6°
    let r = ra.transpose() * rb;
    let c = (r.trace() - 1.0) / 2.0;
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() / 2.0;
    s.atan2(c).to_degrees()
}

/// Pinhole projection of a camera-frame point to pixel coordinates.
pub fn project(point: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Vector2<f64>, GeometryError> {
    if !(point.z > 0.0) {
        return Err(GeometryError::BehindCamera { z: point.z });
    }
    Ok(Vector2::new(
        k.f * point.x / point.z + k.cx,
        k.f * point.y / point.z + k.cy,
    ))
}

/// Rotation about the z-axis by `deg` degrees.
pub fn rot_z_deg(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        *Rotation3::new(axis.normalize() * angle).matrix()
    }

    fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let t = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        RigidTransform::new(random_rotation(rng), t).unwrap()
    }

    fn random_depth(rng: &mut ChaCha8Rng, w: usize, h: usize) -> DepthMap {
        let d = (0..w * h)
            .map(|_| {
                if rng.random_bool(0.8) {
                    rng.random_range(0.5..5.0)
                } else {
                    0.0
                }
            })
            .collect();
        DepthMap::new(w, h, d).unwrap()
    }

    #[test]
    fn identity_intrinsics_give_pixel_coordinates() {
        let k = CameraIntrinsics::new(1.0, 0.0, 0.0).unwrap();
        let depth = DepthMap::new(4, 3, vec![1.0; 12]).unwrap();
        let pm = pointmap_from_depth(&depth, &k, FrameId(0));
        for j in 0..3 {
            for i in 0..4 {
                assert_eq!(pm.points()[pm.index(i, j)], Vector3::new(i as f64, j as f64, 1.0));
            }
        }
        assert!(pm.confidence().iter().all(|&c| c == 1.0));
    }

    #[test]
    fn principal_pixel_maps_to_optical_axis() {
        let k = CameraIntrinsics::new(300.0, 4.0, 2.0).unwrap();
        let mut d = vec![0.0; 8 * 6];
        d[2 * 8 + 4] = 3.5;
        let depth = DepthMap::new(8, 6, d).unwrap();
        let pm = pointmap_from_depth(&depth, &k, FrameId(0));
        let p = pm.points()[pm.index(4, 2)];
        assert_eq!(p, Vector3::new(0.0, 0.0, 3.5));
        assert_eq!(pm.valid_count(), 1);
    }

    #[test]
    fn backprojection_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = CameraIntrinsics::new(
            rng.random_range(200.0..800.0),
            rng.random_range(0.0..8.0),
            rng.random_range(0.0..6.0),
        )
        .unwrap();
        let depth = random_depth(&mut rng, 8, 6);
        let pm = pointmap_from_depth(&depth, &k, FrameId(0));
        for j in 0..6 {
            for i in 0..8 {
                let d = depth.depth()[j * 8 + i];
                let x = (i as f64 * d - k.cx() * d) / k.focal();
                let y = (j as f64 * d - k.cy() * d) / k.focal();
                let p = pm.points()[j * 8 + i];
                assert!((p.x - x).abs() <= 1e-12);
                assert!((p.y - y).abs() <= 1e-12);
                assert_eq!(p.z, d);
            }
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        assert!(matches!(
            DepthMap::new(3, 3, vec![1.0; 8]),
            Err(GeometryError::Shape { .. })
        ));
        assert!(matches!(
            Pointmap::new(2, 1, vec![Vector3::zeros(); 2], vec![1.0, 0.0], vec![true; 2], FrameId(0)),
            Err(GeometryError::Confidence { index: 1, .. })
        ));
        assert!(DepthMap::new(1, 1, vec![-1.0]).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn change_frame_identity_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pm = pointmap_from_depth(
            &random_depth(&mut rng, 5, 2),
            &CameraIntrinsics::new(100.0, 2.5, 1.0).unwrap(),
            FrameId(1),
        );
        let p = random_transform(&mut rng);
        let same = change_frame(&pm, &p, &p, FrameId(1));
        for (a, b) in same.points().iter().zip(pm.points()) {
            assert!((a - b).norm() < 1e-12);
        }
        let t0 = Vector3::new(0.5, -1.0, 2.0);
        let shifted = change_frame(
            &pm,
            &RigidTransform::identity(),
            &RigidTransform::from_translation(t0),
            FrameId(2),
        );
        assert_eq!(shifted.frame_id(), FrameId(2));
        for (k, (a, b)) in shifted.points().iter().zip(pm.points()).enumerate() {
            if pm.mask()[k] {
                assert_eq!(*a, b + t0);
            }
        }
    }

    #[test]
    fn change_frame_matches_homogeneous_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = random_transform(&mut rng);
        let dst = random_transform(&mut rng);
        let points: Vec<_> = (0..10)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let pm = Pointmap::with_unit_confidence(10, 1, points.clone(), vec![true; 10], FrameId(0))
            .unwrap();
        let out = change_frame(&pm, &src, &dst, FrameId(1));
        let m = dst.to_homogeneous() * src.to_homogeneous().try_inverse().unwrap();
        for (p, q) in points.iter().zip(out.points()) {
            let h = m * p.push(1.0);
            assert!((h.xyz() - q).norm() < 1e-12);
        }
    }

    #[test]
    fn group_operations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_transform(&mut rng);
        let b = random_transform(&mut rng);
        let c = random_transform(&mut rng);
        let e = a.compose(&a.inverse());
        assert!((e.rotation() - Matrix3::identity()).norm() < 1e-12);
        assert!(e.translation().norm() < 1e-12);
        let ib = RigidTransform::identity().compose(&b);
        assert!((ib.rotation() - b.rotation()).norm() < 1e-12);
        assert_eq!(ib.translation(), b.translation());
        let l = a.compose(&b).compose(&c).to_homogeneous();
        let r = a.compose(&b.compose(&c)).to_homogeneous();
        let direct = a.to_homogeneous() * b.to_homogeneous() * c.to_homogeneous();
        assert!((l - r).norm() < 1e-12);
        assert!((l - direct).norm() < 1e-12);
    }

    #[test]
    fn renormalization_is_idempotent_and_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = random_transform(&mut rng);
            assert!(a.orthogonality_error() <= 1e-9);
            assert!((a.rotation().determinant() - 1.0).abs() <= 1e-9);
            let b = a.renormalized();
            assert!((a.rotation() - b.rotation()).amax() <= 1e-12);
        }
        // a reflection is mapped to a proper rotation
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let r = project_to_so3(&refl);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geodesic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ra = random_rotation(&mut rng);
        assert_eq!(geodesic_deg(&ra, &ra), 0.0);
        let rb = ra * rot_z_deg(30.0);
        assert!((geodesic_deg(&ra, &rb) - 30.0).abs() < 1e-9);
        for _ in 0..50 {
            let ra = random_rotation(&mut rng);
            let rb = random_rotation(&mut rng);
            let q = UnitQuaternion::from_matrix(&(ra.transpose() * rb));
            let angle = 2.0 * q.imag().norm().atan2(q.scalar().abs());
            assert!((geodesic_deg(&ra, &rb) - angle.to_degrees()).abs() < 1e-6);
            assert!((geodesic_deg(&ra, &rb) - geodesic_deg(&rb, &ra)).abs() < 1e-12);
            let g = random_rotation(&mut rng);
            assert!((geodesic_deg(&(g * ra), &(g * rb)) - geodesic_deg(&ra, &rb)).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_cases() {
        let k = CameraIntrinsics::new(250.0, 31.5, 17.0).unwrap();
        let c = project(&Vector3::new(0.0, 0.0, 4.0), &k).unwrap();
        assert_eq!(c, Vector2::new(31.5, 17.0));
        assert!(matches!(
            project(&Vector3::new(1.0, 0.0, 0.0), &k),
            Err(GeometryError::BehindCamera { .. })
        ));
        let p = Vector3::new(0.3, -0.7, 2.2);
        let h = k.matrix() * p;
        let uv = project(&p, &k).unwrap();
        assert!((uv.x - h.x / h.z).abs() < 1e-12 && (uv.y - h.y / h.z).abs() < 1e-12);
    }

    #[test]
    fn projection_round_trips_backprojection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = CameraIntrinsics::new(420.0, 8.0, 6.0).unwrap();
        let depth = random_depth(&mut rng, 16, 12);
        let pm = pointmap_from_depth(&depth, &k, FrameId(0));
        for (idx, p) in pm.valid_points() {
            let (i, j) = pm.pixel(idx);
            let uv = project(p, &k).unwrap();
            assert!((uv.x - i as f64).abs() < 1e-9 && (uv.y - j as f64).abs() < 1e-9);
            assert_eq!(p.z, depth.depth()[idx]);
        }
    }
}
