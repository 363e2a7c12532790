//! Numerical toolkit for torsion forms of finite-dimensional metrized complexes
//! and their gluing behaviour on one-dimensional fibres.

pub mod banded;
pub mod error;
pub mod family;
pub mod fit;
pub mod glued;
pub mod grassmann;
pub mod hodge;
pub mod json;
pub mod linalg;
pub mod mv_model;
pub mod profile;
pub mod quadrature;
pub mod random;
pub mod superconnection;
pub mod torsion;
pub mod witten;

pub use error::{Error, Result};
