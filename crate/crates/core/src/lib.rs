//! Poly-Poisson structures on coordinate charts and their integration to
//! poly-symplectic groupoids through a discretized poly-Poisson sigma model.

pub mod error;
pub mod field;
pub mod folired;
pub mod lie;
pub mod linalg;
pub mod polyspace;
pub mod ppsm;
pub mod relational;
pub mod structures;

pub use error::{Error, Result};
