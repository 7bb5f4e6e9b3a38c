//! Resource allocation and multi-target tracking for heterogeneous
//! radar-communication networks.

pub mod allocator;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod kinematics;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod sensing;
pub mod tracker;

pub use error::{Error, Result};
