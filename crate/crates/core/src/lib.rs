//! Kinematics, residual error models, and tracking control for a desk-scale
//! manipulation stack, plus the workspace analysis and grasp retargeting
//! utilities that sit on top of it.

pub mod assets;
pub mod chain;
pub mod dataset;
pub mod exec;
pub mod ik;
pub mod metrics;
pub mod mlp;
pub mod plant;
pub mod residual;
pub mod se3;
pub mod workspace;
