//! Fitting an articulated 24-joint body to 2D keypoints under a
//! full-perspective pinhole camera.
//!
//! - [`geometry`]: rotations, SO(3) distances, Procrustes alignment
//! - [`camera`]: pinhole model and weak-to-full perspective conversion
//! - [`body`]: kinematic tree, forward kinematics, BODY_25 joint map
//! - [`fitting`]: two-stage reprojection-loss optimizer
//! - [`smoothing`]: OneEuro temporal filtering of joints and orientations
//! - [`metrics`]: MPJPE, MPJPE_PA, PCK, AUC, MPJAE, MPJAE_PA

pub mod body;
pub mod camera;
pub mod geometry;
pub mod fitting;
pub mod smoothing;
pub mod metrics;
