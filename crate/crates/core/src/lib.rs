//! Metric-scale monocular SLAM built on virtual sensors.
//!
//! Keypoints, metric depth and instance masks come from pluggable providers
//! ([`sensors`]), either read from disk or rendered by the analytic
//! [`simulator`]. The [`frontend`] removes features on dynamic objects and
//! lifts the rest to 3D; the [`backend`] tracks with PnP-RANSAC and refines a
//! sliding window with depth-prior bundle adjustment; [`evaluation`] provides
//! trajectory and depth metrics.

pub mod backend;
pub mod cli;
pub mod descriptor;
pub mod evaluation;
pub mod frontend;
pub mod geometry;
pub mod io;
pub mod sensors;
pub mod simulator;
