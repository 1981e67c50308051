//! Special functions: log-space Bessel K, adaptive quadrature and the
//! univariate skewed t used for the copula marginals.

pub mod bessel;
pub mod quadrature;
pub mod skewt;

pub use bessel::{k_prime, log_bessel_k, log_bessel_k_with_ratio};
pub use quadrature::{integrate, integrate_lower_tail, integrate_upper_tail};
pub use skewt::{sample_inverse_gamma, SkewTMarginal};
