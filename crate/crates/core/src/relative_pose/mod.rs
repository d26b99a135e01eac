//! Relative pose between two views from their aligned pointmaps.
//!
//! Three steps: estimate the focal from the reference view's own pointmap,
//! put the principal point at the image center, then solve PnP with RANSAC
//! using the second view's pixel grid against its points expressed in the
//! reference frame.

mod focal;
pub mod p3p;
mod ransac;

pub use focal::{estimate_focal, FocalEstimate};
pub use ransac::{pnp_ransac, reprojection_errors};

use crate::geometry::{CameraIntrinsics, Pointmap, RigidTransform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelativePoseError {
    #[error("insufficient data: need {needed} usable pixels, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("no pose found: best consensus {best_inliers} < {min_sample} after {iterations} iterations")]
    NoPoseFound {
        best_inliers: usize,
        min_sample: usize,
        iterations: usize,
    },
    #[error("invalid RANSAC config: {0}")]
    Config(String),
}

impl RelativePoseError {
    /// True for failures that should mark the pair as unusable rather than
    /// abort a sequence.
    pub fn is_data_failure(&self) -> bool {
        !matches!(self, RelativePoseError::Config(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub inlier_threshold_px: f64,
    pub confidence: f64,
    pub min_sample: usize,
    pub rng_seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1024,
            inlier_threshold_px: 5.0,
            confidence: 0.999,
            min_sample: 4,
            rng_seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), RelativePoseError> {
        if self.max_iterations < 1 {
            return Err(RelativePoseError::Config("max_iterations must be >= 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RelativePoseError::Config(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if !(self.inlier_threshold_px > 0.0 && self.inlier_threshold_px.is_finite()) {
            return Err(RelativePoseError::Config(format!(
                "inlier_threshold_px must be positive, got {}",
                self.inlier_threshold_px
            )));
        }
        if self.min_sample != 4 {
            return Err(RelativePoseError::Config(format!(
                "min_sample must be 4 (three-point solve plus one check), got {}",
                self.min_sample
            )));
        }
        Ok(())
    }
}

/// Pose of view 2 relative to view 1: maps view-1 coordinates into view-2
/// camera coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePoseResult {
    pub transform: RigidTransform,
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
    /// Masked-in pixels offered to the solver.
    pub valid_count: usize,
    pub focal: f64,
    pub mean_inlier_reproj_err: f64,
    /// Iterations spent in hypothesis sampling.
    pub iterations: usize,
    /// Inlier count of the minimal-sample hypothesis that won.
    pub hypothesis_inlier_count: usize,
}

/// Intrinsics with the principal point at the image center.
pub fn make_intrinsics(width: usize, height: usize, focal: f64) -> CameraIntrinsics {
    CameraIntrinsics::new(focal, width as f64 / 2.0, height as f64 / 2.0)
        .expect("positive focal and finite center")
}

/// Full pair solve: focal from `reference` (X^{1,1}), then PnP-RANSAC on
/// `source_in_ref` (X^{2,1}).
pub fn relative_pose(
    reference: &Pointmap,
    source_in_ref: &Pointmap,
    cfg: &RansacConfig,
) -> Result<RelativePoseResult, RelativePoseError> {
    let focal = estimate_focal(reference)?;
    let k = make_intrinsics(source_in_ref.width(), source_in_ref.height(), focal.focal);
    pnp_ransac(source_in_ref, &k, cfg)
}
