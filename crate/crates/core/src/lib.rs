//! Quantum optimal control of state transfer with GRAPE and Krylov
//! propagation, with a dense baseline and XXZ spin-chain models.

pub mod bench;
pub mod check;
pub mod error;
pub mod grape;
pub mod krylov;
pub mod linalg;
pub mod optim;
pub mod spinchain;

pub use error::{Error, Result};
