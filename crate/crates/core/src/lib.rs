//! Real interference alignment over MIMO interference channels with joint
//! processing of the receive antennas: direction construction, lattice
//! encoding, hard decoding, minimum-distance probes and the DoF region.

pub mod channel;
pub mod cli;
pub mod codec;
pub mod diophantine;
pub mod directions;
pub mod dofregion;
pub mod error;
pub mod harness;
pub mod stats;

pub use error::{Error, Result};
