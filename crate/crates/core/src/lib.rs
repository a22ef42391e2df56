//! Adini finite elements for the biharmonic equation on rectangular meshes
//! with hanging nodes.

pub mod assembly;
pub mod dofs;
pub mod element;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod jet;
pub mod lemmas;
pub mod mesh;
pub mod norms;
pub mod poly;
pub mod problems;
pub mod quadrature;
pub mod transfer;

pub use error::{Error, Result};
