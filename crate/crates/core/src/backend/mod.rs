//! Geometric back end: descriptor matching, P3P-RANSAC tracking, keyframing,
//! map-point creation and windowed bundle adjustment with depth priors.

mod ba;
mod map;
mod matching;
mod p3p;
mod ransac;
mod tracker;

use thiserror::Error;

pub use ba::{
    depth_jacobians, depth_residual, huber, local_bundle_adjustment, pose_point_jacobian,
    projection_jacobian, reprojection_jacobians, reprojection_residual, BaConfig, BaProblem, BaReport,
    DepthPrior,
};
pub use map::{
    insert_keyframe, keyframe_decision, FrameMeta, KeyFrame, KeyframePolicy, MapPoint, Observation,
    TrackingStats, WorldMap,
};
pub use matching::{match_exhaustive, match_projected, Correspondence, MatchCandidate, MatchParams, QueryFeature};
pub use p3p::p3p_solve;
pub use ransac::{pnp_ransac, refine_pose, required_iterations, PnpResult, RansacParams};
pub use tracker::{track_sequence, triangulate_new_points, Diagnostics, TrackError, TrackerConfig, TrackingResult};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend config: {0}")]
    Config(String),
    #[error("tracking failure: {0}")]
    TrackingFailure(String),
}
