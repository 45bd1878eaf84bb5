pub mod dbm;
pub mod ensembles;
pub mod harness;
pub mod error;
pub mod limit_laws;
pub mod linalg;
pub mod minor_chain;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use ensembles::{EnsembleSpec, EntryLaw, HermitianMatrix, Symmetry};
pub use error::{Error, Result};
