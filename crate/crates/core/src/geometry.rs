//! Pinhole cameras, rigid transforms and plane-sweep correspondence.
//!
//! Poses are stored world-from-camera (the dataset convention); the inverse
//! camera-from-world transform is computed once when a [`CameraFrame`] is
//! built and reused by every projection.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{MvsError, Result};
use crate::features::ImageGrid;

/// Tolerance for orthonormality checks on freshly constructed poses.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Translations shorter than this are treated as a zero baseline.
pub const ZERO_BASELINE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(MvsError::Argument(format!(
                "focal lengths must be positive and finite, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(MvsError::Argument("image size must be at least 1x1".into()));
        }
        Ok(())
    }

    /// Intrinsics of a grid sampled at every `stride`-th pixel, so that grid
    /// cell `(u, v)` sits on image pixel `(stride*u, stride*v)`.
    pub fn downscaled(&self, stride: usize) -> Intrinsics {
        let s = stride.max(1) as f64;
        Intrinsics {
            fx: self.fx / s,
            fy: self.fy / s,
            cx: self.cx / s,
            cy: self.cy / s,
            width: self.width.div_ceil(stride.max(1)),
            height: self.height.div_ceil(stride.max(1)),
        }
    }

    pub fn mean_focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    /// True when `(u, v)` lies inside `[0, width-1] x [0, height-1]`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }
}

/// Result of projecting a camera-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub valid: bool,
}

pub fn project_point(k: &Intrinsics, p_cam: &Vector3<f64>) -> Projection {
    let z = p_cam.z;
    if z <= 0.0 {
        return Projection {
            u: f64::NAN,
            v: f64::NAN,
            z,
            valid: false,
        };
    }
    Projection {
        u: k.fx * p_cam.x / z + k.cx,
        v: k.fy * p_cam.y / z + k.cy,
        z,
        valid: true,
    }
}

pub fn backproject_pixel(k: &Intrinsics, u: f64, v: f64, depth: f64) -> Result<Vector3<f64>> {
    if !(depth > 0.0) {
        return Err(MvsError::Domain(format!(
            "backprojection needs positive depth, got {depth}"
        )));
    }
    Ok(Vector3::new(
        (u - k.cx) * depth / k.fx,
        (v - k.cy) * depth / k.fy,
        depth,
    ))
}

/// A proper rigid transform `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, rejecting rotations that are not orthonormal with
    /// determinant +1 within `tol`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, tol: f64) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|x| !x.is_finite()) {
            return Err(MvsError::Argument("pose contains non-finite values".into()));
        }
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho_err > tol {
            return Err(MvsError::Argument(format!(
                "rotation is not orthonormal (max |R^T R - I| = {ortho_err:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > tol {
            return Err(MvsError::Argument(format!(
                "rotation determinant is {det:.6}, expected +1"
            )));
        }
        Ok(RigidPose {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Parses a row-major 4x4 homogeneous matrix.
    pub fn from_row_major(m: &[f64], tol: f64) -> Result<Self> {
        if m.len() != 16 {
            return Err(MvsError::Argument(format!(
                "expected 16 pose entries, got {}",
                m.len()
            )));
        }
        let mat = Matrix4::from_row_slice(m);
        let bottom = [mat[(3, 0)], mat[(3, 1)], mat[(3, 2)], mat[(3, 3)]];
        if bottom
            .iter()
            .zip([0.0, 0.0, 0.0, 1.0])
            .any(|(a, b)| (a - b).abs() > tol)
        {
            return Err(MvsError::Argument(format!(
                "last pose row must be [0 0 0 1], got {bottom:?}"
            )));
        }
        let r = mat.fixed_view::<3, 3>(0, 0).into_owned();
        let t = mat.fixed_view::<3, 1>(0, 3).into_owned();
        RigidPose::new(r, t, tol)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..3 {
            for c in 0..3 {
                out[4 * r + c] = self.rotation[(r, c)];
            }
            out[4 * r + 3] = self.translation[r];
        }
        out[15] = 1.0;
        out
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.transpose();
        RigidPose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Uniformly rescales the translation (global change of scene units).
    pub fn scaled(&self, lambda: f64) -> RigidPose {
        RigidPose {
            rotation: self.rotation,
            translation: self.translation * lambda,
        }
    }

    /// World-from-camera pose at `eye` looking at `target`, with image `y`
    /// pointing along `-up`.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        let fnorm = forward.norm();
        if fnorm <= 0.0 {
            return Err(MvsError::Argument("look_at: eye equals target".into()));
        }
        let z = forward / fnorm;
        let x = z.cross(&up);
        let xn = x.norm();
        if xn < 1e-12 {
            return Err(MvsError::Argument(
                "look_at: up is parallel to view direction".into(),
            ));
        }
        let x = x / xn;
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Ok(RigidPose {
            rotation,
            translation: eye,
        })
    }
}

/// Transform taking reference-camera coordinates to source-camera
/// coordinates, given both cameras' world-from-camera poses.
pub fn relative_pose(ref_wfc: &RigidPose, src_wfc: &RigidPose) -> RigidPose {
    src_wfc.inverse().compose(ref_wfc)
}

/// Pose distance `sqrt(|t| + 2/3 tr(I - R))` between two views.
pub fn pose_distance(rel: &RigidPose) -> f64 {
    let rot_term = (3.0 - rel.rotation.trace()).max(0.0);
    (rel.translation.norm() + 2.0 / 3.0 * rot_term).sqrt()
}

/// Lightweight projective view: intrinsics plus both pose directions.
#[derive(Debug, Clone, Copy)]
pub struct PinholeView {
    pub k: Intrinsics,
    pub world_from_camera: RigidPose,
    pub camera_from_world: RigidPose,
}

impl PinholeView {
    pub fn new(k: Intrinsics, world_from_camera: RigidPose) -> Self {
        PinholeView {
            k,
            world_from_camera,
            camera_from_world: world_from_camera.inverse(),
        }
    }

    pub fn downscaled(&self, stride: usize) -> PinholeView {
        PinholeView {
            k: self.k.downscaled(stride),
            ..*self
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        self.world_from_camera.translation
    }
}

/// Where a reference pixel hypothesised at some depth lands in a source view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepHit {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub valid: bool,
}

/// Backprojects `(u, v)` at depth `d` from `reference` and reprojects the
/// world point into `source`.
pub fn sweep_views(
    reference: &PinholeView,
    source: &PinholeView,
    u: f64,
    v: f64,
    d: f64,
) -> Result<SweepHit> {
    let p_ref = backproject_pixel(&reference.k, u, v, d)?;
    let p_world = reference.world_from_camera.transform_point(&p_ref);
    Ok(sweep_world_point(source, &p_world))
}

pub(crate) fn sweep_world_point(source: &PinholeView, p_world: &Vector3<f64>) -> SweepHit {
    let p_src = source.camera_from_world.transform_point(p_world);
    let proj = project_point(&source.k, &p_src);
    let valid = proj.valid && source.k.contains(proj.u, proj.v);
    SweepHit {
        u: proj.u,
        v: proj.v,
        z: p_src.z,
        valid,
    }
}

/// Intrinsics, pose and pixels of one view.
#[derive(Debug, Clone)]
pub struct CameraFrame {
    pub id: String,
    pub intrinsics: Intrinsics,
    world_from_camera: RigidPose,
    camera_from_world: RigidPose,
    pub image: ImageGrid,
    pub gt_depth: Option<DepthMap>,
}

impl CameraFrame {
    pub fn new(
        id: impl Into<String>,
        intrinsics: Intrinsics,
        world_from_camera: RigidPose,
        image: ImageGrid,
        gt_depth: Option<DepthMap>,
    ) -> Result<Self> {
        let id = id.into();
        intrinsics.validate()?;
        if image.width != intrinsics.width || image.height != intrinsics.height {
            return Err(MvsError::Argument(format!(
                "frame {id}: image is {}x{} but intrinsics say {}x{}",
                image.width, image.height, intrinsics.width, intrinsics.height
            )));
        }
        if let Some(gt) = &gt_depth {
            if gt.width != intrinsics.width || gt.height != intrinsics.height {
                return Err(MvsError::Argument(format!(
                    "frame {id}: gt depth is {}x{} but image is {}x{}",
                    gt.width, gt.height, intrinsics.width, intrinsics.height
                )));
            }
        }
        Ok(CameraFrame {
            id,
            intrinsics,
            world_from_camera,
            camera_from_world: world_from_camera.inverse(),
            image,
            gt_depth,
        })
    }

    pub fn world_from_camera(&self) -> &RigidPose {
        &self.world_from_camera
    }

    pub fn camera_from_world(&self) -> &RigidPose {
        &self.camera_from_world
    }

    pub fn set_world_from_camera(&mut self, pose: RigidPose) {
        self.world_from_camera = pose;
        self.camera_from_world = pose.inverse();
    }

    pub fn view(&self) -> PinholeView {
        PinholeView {
            k: self.intrinsics,
            world_from_camera: self.world_from_camera,
            camera_from_world: self.camera_from_world,
        }
    }
}

/// Source-pixel coordinates and source depth of reference pixel `(u, v)`
/// hypothesised at depth `d`.
pub fn sweep_correspondence(
    reference: &CameraFrame,
    source: &CameraFrame,
    u: f64,
    v: f64,
    d: f64,
) -> Result<SweepHit> {
    sweep_views(&reference.view(), &source.view(), u, v, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub d_min: f64,
    pub d_max: f64,
}

impl RangeEstimate {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_min < d_max && d_max.is_finite()) {
            return Err(MvsError::Argument(format!(
                "depth range must satisfy 0 < d_min < d_max, got [{d_min}, {d_max}]"
            )));
        }
        Ok(RangeEstimate { d_min, d_max })
    }

    pub fn geometric_mid(&self) -> f64 {
        (self.d_min * self.d_max).sqrt()
    }

    pub fn contains(&self, other: &RangeEstimate) -> bool {
        self.d_min <= other.d_min && self.d_max >= other.d_max
    }
}

/// Constants of the disparity-band depth-range heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangeHeuristicConfig {
    /// Largest matchable disparity as a fraction of the image width.
    pub max_disparity_frac: f64,
    /// Smallest resolvable disparity in pixels.
    pub min_disparity_px: f64,
    pub absolute_min: f64,
    pub absolute_max: f64,
    pub fallback_min: f64,
    pub fallback_max: f64,
}

impl Default for RangeHeuristicConfig {
    fn default() -> Self {
        RangeHeuristicConfig {
            max_disparity_frac: 0.3,
            min_disparity_px: 2.0,
            absolute_min: 1e-3,
            absolute_max: 1e6,
            fallback_min: 0.25,
            fallback_max: 100.0,
        }
    }
}

/// Depth interval that the reference can plausibly match against the
/// sources, from a fronto-parallel disparity band per baseline.
pub fn estimate_matchable_range(
    reference: &CameraFrame,
    sources: &[&CameraFrame],
    cfg: &RangeHeuristicConfig,
) -> Result<RangeEstimate> {
    let src_views: Vec<PinholeView> = sources.iter().map(|s| s.view()).collect();
    estimate_range_views(&reference.view(), &src_views, cfg)
}

pub(crate) fn estimate_range_views(
    reference: &PinholeView,
    sources: &[PinholeView],
    cfg: &RangeHeuristicConfig,
) -> Result<RangeEstimate> {
    if sources.is_empty() {
        return Err(MvsError::Argument(
            "range estimation needs at least one source frame".into(),
        ));
    }
    let focal = reference.k.mean_focal();
    let max_disp = cfg.max_disparity_frac * reference.k.width as f64;
    let min_disp = cfg.min_disparity_px;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for src in sources {
        let baseline = (src.center() - reference.center()).norm();
        if baseline <= ZERO_BASELINE_EPS {
            continue;
        }
        lo = lo.min(focal * baseline / max_disp);
        hi = hi.max(focal * baseline / min_disp);
    }
    if !lo.is_finite() {
        return RangeEstimate::new(cfg.fallback_min, cfg.fallback_max);
    }
    let d_min = lo.clamp(cfg.absolute_min, cfg.absolute_max);
    let d_max = hi.clamp(cfg.absolute_min, cfg.absolute_max);
    if d_min >= d_max {
        return RangeEstimate::new(cfg.fallback_min, cfg.fallback_max);
    }
    RangeEstimate::new(d_min, d_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn unit_k() -> Intrinsics {
        Intrinsics::new(1.0, 1.0, 0.0, 0.0, 100, 100).unwrap()
    }

    fn frame_at(t: Vector3<f64>, k: Intrinsics) -> CameraFrame {
        let img = ImageGrid::new(k.width, k.height, 1, vec![0.0; k.width * k.height]).unwrap();
        CameraFrame::new("f", k, RigidPose::from_translation(t), img, None).unwrap()
    }

    fn arb_pose() -> impl Strategy<Value = RigidPose> {
        (
            -3.0..3.0f64,
            -3.0..3.0f64,
            -3.0..3.0f64,
            prop::array::uniform3(-5.0..5.0f64),
        )
            .prop_map(|(a, b, c, t)| RigidPose {
                rotation: *Rotation3::from_euler_angles(a, b, c).matrix(),
                translation: Vector3::from(t),
            })
    }

    #[test]
    fn projection_examples() {
        let p = project_point(&unit_k(), &Vector3::new(0.0, 0.0, 1.0));
        assert!(p.valid);
        assert_eq!((p.u, p.v, p.z), (0.0, 0.0, 1.0));
        assert!(!project_point(&unit_k(), &Vector3::new(0.0, 0.0, -1.0)).valid);

        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let p = project_point(&k, &Vector3::new(0.2, 0.0, 2.0));
        assert!((p.u - 370.0).abs() < 1e-12 && (p.v - 240.0).abs() < 1e-12);
        assert_eq!(p.z, 2.0);
    }

    #[test]
    fn backprojection_examples() {
        let k = unit_k();
        assert_eq!(
            backproject_pixel(&k, 0.0, 0.0, 1.0).unwrap(),
            Vector3::new(0.0, 0.0, 1.0)
        );
        assert_eq!(
            backproject_pixel(&k, 2.0, 0.0, 3.0).unwrap(),
            Vector3::new(6.0, 0.0, 3.0)
        );
        assert!(matches!(
            backproject_pixel(&k, 0.0, 0.0, 0.0),
            Err(MvsError::Domain(_))
        ));
        assert!(backproject_pixel(&k, 0.0, 0.0, -2.0).is_err());
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 0.0, 0.0, 0, 10).is_err());
    }

    #[test]
    fn relative_pose_examples() {
        let a = RigidPose {
            rotation: *Rotation3::from_euler_angles(0.1, 0.2, 0.3).matrix(),
            translation: Vector3::new(1.0, 2.0, 3.0),
        };
        let rel = relative_pose(&a, &a);
        assert!((rel.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!(rel.translation.norm() < 1e-12);

        let rel = relative_pose(
            &RigidPose::identity(),
            &RigidPose::from_translation(Vector3::new(1.0, 0.0, 0.0)),
        );
        assert!((rel.translation.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relative_pose_transports_points() {
        let a = RigidPose {
            rotation: *Rotation3::from_euler_angles(0.4, -0.7, 1.1).matrix(),
            translation: Vector3::new(0.3, -1.0, 2.0),
        };
        let b = RigidPose {
            rotation: *Rotation3::from_euler_angles(-1.2, 0.5, 0.2).matrix(),
            translation: Vector3::new(-2.0, 0.5, 0.1),
        };
        let rel = relative_pose(&a, &b);
        for i in 0..10 {
            let f = i as f64;
            let p_ref = Vector3::new(0.3 * f - 1.0, 0.7 - 0.2 * f, 1.0 + 0.5 * f);
            // independent route: ref camera -> world -> src camera
            let world = a.rotation * p_ref + a.translation;
            let expected = b.rotation.transpose() * (world - b.translation);
            assert!((rel.transform_point(&p_ref) - expected).norm() < 1e-12);
        }
        let rtr = rel.rotation.transpose() * rel.rotation;
        assert!((rtr - Matrix3::identity()).amax() < 1e-12);
        assert!((rel.rotation.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pose_distance_examples() {
        assert_eq!(pose_distance(&RigidPose::identity()), 0.0);
        let t = RigidPose::from_translation(Vector3::new(0.0, 1.0, 0.0));
        assert!((pose_distance(&t) - 1.0).abs() < 1e-12);
        let half_turn = RigidPose {
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI).matrix(),
            translation: Vector3::zeros(),
        };
        assert!((pose_distance(&half_turn) - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pose_rejects_reflection() {
        let mut r = Matrix3::identity();
        r[(2, 2)] = -1.0;
        let err = RigidPose::new(r, Vector3::zeros(), 1e-6).unwrap_err();
        assert!(err.to_string().contains("determinant"));
        let mut r = Matrix3::identity();
        r[(0, 1)] = 0.1;
        assert!(RigidPose::new(r, Vector3::zeros(), 1e-6).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let p = RigidPose {
            rotation: *Rotation3::from_euler_angles(0.3, 0.2, 0.1).matrix(),
            translation: Vector3::new(1.0, -2.0, 0.5),
        };
        let back = RigidPose::from_row_major(&p.to_row_major(), 1e-6).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn sweep_identity_and_disparity() {
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let a = frame_at(Vector3::zeros(), k);
        let hit = sweep_correspondence(&a, &a, 100.0, 50.0, 3.0).unwrap();
        assert!(hit.valid);
        assert!((hit.u - 100.0).abs() < 1e-9 && (hit.v - 50.0).abs() < 1e-9);
        assert!((hit.z - 3.0).abs() < 1e-12);

        let b = frame_at(Vector3::new(-0.1, 0.0, 0.0), k);
        let hit = sweep_correspondence(&a, &b, 320.0, 240.0, 1.0).unwrap();
        assert!(hit.valid);
        assert!((hit.u - 370.0).abs() < 1e-9);

        // source one unit ahead of a point at depth 0.5: behind the camera
        let c = frame_at(Vector3::new(0.0, 0.0, 1.0), k);
        assert!(!sweep_correspondence(&a, &c, 320.0, 240.0, 0.5).unwrap().valid);
        assert!(sweep_correspondence(&a, &c, 320.0, 240.0, 0.0).is_err());
    }

    #[test]
    fn matchable_range_examples() {
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let cfg = RangeHeuristicConfig::default();
        let r = frame_at(Vector3::zeros(), k);
        let s1 = frame_at(Vector3::new(0.1, 0.0, 0.0), k);
        let s2 = frame_at(Vector3::new(0.0, 0.2, 0.0), k);

        let range = estimate_matchable_range(&r, &[&s1], &cfg).unwrap();
        assert!((range.d_min - 500.0 * 0.1 / 192.0).abs() < 1e-12);
        assert!((range.d_max - 25.0).abs() < 1e-12);

        let range = estimate_matchable_range(&r, &[&s1, &s2], &cfg).unwrap();
        assert!((range.d_min - 0.260_416_666_666_666_7).abs() < 1e-12);
        assert!((range.d_max - 50.0).abs() < 1e-12);

        let same = frame_at(Vector3::zeros(), k);
        let range = estimate_matchable_range(&r, &[&same], &cfg).unwrap();
        assert_eq!((range.d_min, range.d_max), (0.25, 100.0));

        assert!(matches!(
            estimate_matchable_range(&r, &[], &cfg),
            Err(MvsError::Argument(_))
        ));
    }

    proptest! {
        #[test]
        fn backproject_project_round_trip(u in -100.0..800.0f64, v in -100.0..600.0f64, d in 1e-3..1e3f64) {
            let k = Intrinsics::new(517.3, 516.5, 318.6, 255.3, 640, 480).unwrap();
            let p = backproject_pixel(&k, u, v, d).unwrap();
            let proj = project_point(&k, &p);
            prop_assert!(proj.valid);
            prop_assert!((proj.u - u).abs() <= 1e-9 * u.abs().max(1.0));
            prop_assert!((proj.v - v).abs() <= 1e-9 * v.abs().max(1.0));
            prop_assert!((proj.z - d).abs() <= 1e-9 * d);
        }

        #[test]
        fn pose_distance_invariant_to_world_rotation(a in arb_pose(), b in arb_pose(), w in arb_pose()) {
            let base = pose_distance(&relative_pose(&a, &b));
            let moved = pose_distance(&relative_pose(&w.compose(&a), &w.compose(&b)));
            prop_assert!(base >= 0.0);
            prop_assert!((base - moved).abs() < 1e-9);
        }

        #[test]
        fn pose_distance_sqrt_scaling(t in prop::array::uniform3(-5.0..5.0f64), s in 0.1..10.0f64) {
            let p = RigidPose::from_translation(Vector3::from(t));
            let q = p.scaled(s);
            prop_assert!((pose_distance(&q) - s.sqrt() * pose_distance(&p)).abs() < 1e-9);
        }

        #[test]
        fn range_scales_linearly(b in 0.01..0.5f64, lambda in 0.1..50.0f64) {
            let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
            let cfg = RangeHeuristicConfig::default();
            let r = frame_at(Vector3::zeros(), k);
            let s = frame_at(Vector3::new(b, 0.0, 0.0), k);
            let sl = frame_at(Vector3::new(b * lambda, 0.0, 0.0), k);
            let base = estimate_matchable_range(&r, &[&s], &cfg).unwrap();
            let scaled = estimate_matchable_range(&r, &[&sl], &cfg).unwrap();
            prop_assert!((scaled.d_min - lambda * base.d_min).abs() < 1e-9 * scaled.d_min);
            prop_assert!((scaled.d_max - lambda * base.d_max).abs() < 1e-9 * scaled.d_max);
        }
    }
}
