//! A numerical laboratory for tridiagonal models of Dyson beta ensembles with
//! polynomial potential and their soft-edge limit, the stochastic Airy
//! operator.

pub mod band;
pub mod ensemble;
pub mod error;
pub mod hamiltonian;
pub mod lab;
pub mod local_equilibrium;
pub mod minimizer;
pub mod potential;
pub mod rng;
pub mod sao;
pub mod stats;
pub mod tridiag;

pub use error::{Error, Result};
pub use potential::{Potential, WDerivatives};
pub use tridiag::{EigenPair, SpectralMeasure, TridiagonalSym};
