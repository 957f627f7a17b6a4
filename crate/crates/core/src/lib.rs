//! Kinematic topology recovery from simulated IMU and joint data.

pub mod chain_sim;
pub mod completion;
pub mod correction;
pub mod dependency_extract;
pub mod error;
pub mod hetero_tree;
pub mod pipeline;
pub mod pose_net;
pub mod rigid_motion;

pub use error::{Error, Result};
