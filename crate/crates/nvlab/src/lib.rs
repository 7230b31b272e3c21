//! Numerical laboratory for the Novikov-Veselov equation at fixed energy.

pub mod acceptance;
pub mod cubature;
pub mod error;
pub mod grid;
pub mod kplimit;
pub mod oscint;
pub mod snapshot;
pub mod solver;
pub mod stationary;
pub mod symbol;
pub mod xsb;

pub use error::{NvError, Result};
