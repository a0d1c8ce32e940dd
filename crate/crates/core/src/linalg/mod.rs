//! Self-contained linear-algebra kernels: CSR storage, banded direct
//! factorization, spectral-radius estimation, simplex minimization and a
//! restarted GMRES used only as the large-interface fallback.

mod factor;
mod gmres;
mod neldermead;
mod power;
mod sparse;

pub use factor::Factorization;
pub use gmres::gmres;
pub use neldermead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use power::{dense_spectral_radius, spectral_radius, SpectralRadiusEstimate};
pub use sparse::SparseMatrix;
