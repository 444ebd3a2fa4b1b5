pub mod analysis;
pub mod approx;
pub mod cli;
pub mod eigensolve;
pub mod error;
pub mod exec;
pub mod hamiltonian;
pub mod special_fn;
pub mod spin;

pub use error::{Error, Result};
