//! Quality-Diversity 6-DoF grasp pose generation on triangle meshes.

pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod gripper;
pub mod mesh;
pub mod metrics;
pub mod projection;
pub mod qd;
pub mod runner;

pub use error::{Error, Result};
