//! Forward and inverse spectral problems for skew-self-adjoint Dirac systems,
//! discrete and continuous.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod extended;
pub mod inverse;
pub mod linalg;
pub mod random;
pub mod weyl;

pub use error::{Error, Result};
pub use linalg::CMat;
