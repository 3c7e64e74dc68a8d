//! Desk-scale solver for a stochastically forced compressible fluid coupled
//! to an elastic plate through a penalized kinematic condition on a moving
//! interface, together with a diagnostics layer that turns the scheme's
//! quantitative estimates into runtime checks.

pub mod error;
pub mod fluid;
pub mod geometry;
pub mod noise;
pub mod params;
pub mod spectral;
pub mod structure;

pub use error::{Error, Result};
