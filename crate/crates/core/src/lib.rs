//! Dynamic spectral skewed-t copula: density, scores, eigenvalue filtering,
//! spectrum shrinkage, estimation, simulation designs and a cluster factor
//! copula used as a benchmark.

pub mod copula;
pub mod dgp;
pub mod error;
pub mod estimation;
pub mod factor_ref;
pub mod optim;
pub mod score;
pub mod shrinkage;
pub mod special;
pub mod spectral;

pub use copula::{CopulaFamily, CopulaShape};
pub use error::{CopulaError, Result};
pub use spectral::{SpectralBasis, SpectralState};
