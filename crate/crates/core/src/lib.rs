//! Near-field MIMO link-level simulator comparing beamspace modulation (BM) with
//! best-beamspace selection (BBS).

pub mod beamspace;
pub mod channel;
pub mod constellation;
pub mod dof;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod schemes;

pub use error::{Error, Result};
