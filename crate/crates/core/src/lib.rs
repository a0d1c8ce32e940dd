//! Two-subdomain toolkit for discovering optimized transmission conditions
//! numerically: probe the interface Steklov–Poincaré operators with a few
//! vectors, fit a transmission family to the responses, then validate the fit
//! by running the interface iteration and estimating its spectral radius.

pub mod assembly;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mesh;
pub mod osm;
pub mod probing;
pub mod schur;
pub mod transmission;

pub use error::{Error, Result};
