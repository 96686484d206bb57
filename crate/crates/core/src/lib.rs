//! Decomposition of articulated objects represented as multi-state 3D
//! Gaussian fields: rigid-part segmentation, joint typing and parameter
//! estimation, a latent-conditioned deformation field for interpolating to
//! unseen states, and evaluation metrics — all verifiable against a
//! built-in synthetic kinematic oracle.

pub mod config;
pub mod deform;
pub mod error;
pub mod field;
pub mod http;
pub mod image;
pub mod kinematics;
pub mod metrics;
pub mod pipeline;
pub mod quat;
pub mod refine;
pub mod segment;
pub mod splat;
pub mod synth;

pub use error::Error;
pub use field::{
    load_scene, save_field, CameraModel, GaussianPrimitive, JointKind, JointModel, SceneBundle,
    StateSnapshot,
};
