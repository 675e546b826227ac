//! Statevector laboratory for CVaR-VQE on QUBO problems with the
//! structure-inspired ansatz and imaginary-time warm starts.

pub mod ansatz;
pub mod cli;
pub mod cvar;
pub mod diagnostics;
pub mod error;
pub mod optimizer;
pub mod qubo;
pub mod rng;
pub mod statevector;
pub mod vqe;
pub mod warmstart;

pub use error::{Error, Result};
