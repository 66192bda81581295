//! Balanced-truncation model reduction for interconnections of passive LTI
//! subsystems.

pub mod balancing;
pub mod beam;
pub mod bench;
pub mod error;
pub mod interconnection;
pub mod linalg;
pub mod lti;
pub mod lyapunov;
pub mod metrics;
pub mod passivity;
pub mod plot;
pub mod report;
pub mod riccati;
pub mod sdp;

pub use error::{Error, Result};
pub use lti::StateSpace;
