//! Continuous weak measurement of qubit registers with locally optimal
//! feedback rotations.

pub mod error;
pub mod feedback;
pub mod linalg;
pub mod noise;
pub mod ops;
pub mod parallel;
pub mod protocols;
pub mod random;
pub mod sme;
pub mod state;
pub mod symmetry;
pub mod tangle;

pub use error::{Error, Result};
