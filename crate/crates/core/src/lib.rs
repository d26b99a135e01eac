//! Recovery of globally consistent rigid hand-object transformations from
//! pairwise pointmaps.
//!
//! The pipeline runs in two stages. Each image pair's aligned pointmaps
//! yield a relative pose (focal estimate, centered principal point,
//! PnP-RANSAC). The relative poses then form a connectivity graph on which
//! rotation averaging and linear translation averaging produce absolute
//! poses for every frame.

pub mod eval;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod pipeline;
pub mod pose_graph;
pub mod relative_pose;
pub mod synth;
