//! Circular block bootstrap of the PIT panel.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::copula_fit::{fit_copula, CopulaFit, CopulaParams, FitOptions};
use crate::error::{CopulaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub block_len: usize,
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions { block_len: 20, n_boot: 200, level: 0.90, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// One row of estimates per successful replicate.
    pub draws: Vec<Vec<f64>>,
    pub failures: usize,
}

/// Row indices of one circular block resample.
pub fn circular_block_indices<R: Rng + ?Sized>(rng: &mut R, t: usize, block_len: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(t);
    while idx.len() < t {
        let start = rng.random_range(0..t);
        for k in 0..block_len.min(t - idx.len()) {
            idx.push((start + k) % t);
        }
    }
    idx
}

/// Linear interpolation between order statistics.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Refits the copula on resampled panels and reports equal-tailed
/// percentile intervals. Replicates run in parallel, each with its own
/// generator seeded by `seed + replicate`.
pub fn block_bootstrap_ci(pits: &DMatrix<f64>, fit: &CopulaFit, opts: &BootstrapOptions) -> Result<BootstrapResult> {
    if opts.block_len == 0 || opts.n_boot == 0 {
        return Err(CopulaError::InvalidInput("block length and replicate count must be positive".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(CopulaError::InvalidInput(format!("level must lie in (0,1), got {}", opts.level)));
    }
    let t = pits.nrows();
    let fit_opts = FitOptions { shrink: fit.shrink, warm_start: Some(fit.params.clone()), ..FitOptions::default() };
    let results: Vec<Option<Vec<f64>>> = (0..opts.n_boot)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(rep as u64));
            let idx = circular_block_indices(&mut rng, t, opts.block_len);
            let sample = pits.select_rows(idx.iter());
            fit_copula(&sample, fit.family, fit.d0, &fit_opts).ok().map(|f| f.params.estimated(fit.family))
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    if failures * 5 > opts.n_boot {
        return Err(CopulaError::Convergence {
            message: format!("{failures} of {} bootstrap refits failed", opts.n_boot),
            best: fit.params.estimated(fit.family),
            value: fit.loglik_in,
        });
    }
    let draws: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let names = CopulaParams::names(fit.family, fit.d0);
    let alpha = 0.5 * (1.0 - opts.level);
    let mut lower = Vec::with_capacity(names.len());
    let mut upper = Vec::with_capacity(names.len());
    for k in 0..names.len() {
        let mut col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        col.sort_by(f64::total_cmp);
        lower.push(empirical_quantile(&col, alpha));
        upper.push(empirical_quantile(&col, 1.0 - alpha));
    }
    Ok(BootstrapResult { names, lower, upper, draws, failures })
}
