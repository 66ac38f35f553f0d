//! Hardy spaces for Fourier integral operators on a discretized torus.
//!
//! The crate models `R^n` by a periodic box and provides wave packet
//! analysis and synthesis over the cosphere bundle, tent-space quasi-norms,
//! the `H^{s,p}_FIO` quasi-norms and their equivalent characterizations,
//! molecules, maximal functions and Fourier integral operators.

pub mod error;
pub mod experiment;
pub mod families;
pub mod fft;
pub mod fio;
pub mod geometry;
pub mod grid;
pub mod maximal_verify;
pub mod molecules;
pub mod packets;
pub mod quad;
pub mod spaces;
pub mod tent;
pub mod transform;

pub use error::{Error, Result};
