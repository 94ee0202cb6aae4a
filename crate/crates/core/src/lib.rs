//! Magnetic Lagrangian systems, Routh reduction on `S × G`, compatible
//! transformations between magnetic systems and semi-direct reduction by
//! stages, with numerical checks of the structural identities involved.

pub mod cli;
pub mod compat;
pub mod error;
pub mod lie;
pub mod maglag;
pub mod models;
pub mod numerics;
pub mod routh;
pub mod semidirect;

pub use error::{Error, Result};
pub use lie::{AlgebraVector, CoVector, GroupElement, LieGroup};
