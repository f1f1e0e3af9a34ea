//! Dwell-time switching for switched affine systems: certificate design,
//! closed-loop simulation with exact mode propagation, and cost-bound audits.

pub mod certdesign;
pub mod error;
pub mod matops;
pub mod switchengine;
pub mod sysmodel;

pub use error::{Error, Result};
