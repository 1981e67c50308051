//! Two-step estimation: AR-GARCH marginals, rank PITs, copula maximum
//! likelihood, selection of the dynamic eigenvalues and bootstrap intervals.

mod bootstrap;
mod copula_fit;
mod marginal;

pub use bootstrap::{block_bootstrap_ci, circular_block_indices, empirical_quantile, BootstrapOptions, BootstrapResult};
pub use copula_fit::{
    evaluate_oos, fit_copula, fit_with_objective, select_d0, CopulaFit, CopulaObjective, CopulaParams, D0Selection,
    FitOptions, OosResult,
};
pub use marginal::{
    ar_garch_loglik, fit_marginal, fit_marginals, rank_pit, residual_panel, ArGarchParams, MarginalFit,
};
