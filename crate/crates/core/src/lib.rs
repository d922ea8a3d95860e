//! Networked control-loop simulation with a physics-based intrusion
//! detection and localization engine.

pub mod attacks;
pub mod control;
pub mod error;
pub mod estimation;
pub mod ids;
pub mod linalg;
pub mod netsim;
pub mod plants;
pub mod runner;
pub mod statespace;

pub use error::{Error, Result};
