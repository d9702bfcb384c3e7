pub mod agent;
pub mod clothsim;
pub mod demos;
pub mod envs;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod replay;

pub use error::{Error, Result};
