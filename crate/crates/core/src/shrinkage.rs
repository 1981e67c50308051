//! Quadratic non-linear shrinkage of a sample spectrum and eigenvalue targeting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::copula::{implied_r_from_cov, sample_covariance, CopulaShape};
use crate::error::{CopulaError, Result};
use crate::spectral::{to_correlation, SpectralBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrunkenSpectrum {
    pub lambda_hat: Vec<f64>,
    pub q: f64,
    pub h: f64,
    pub lambda_check: Vec<f64>,
}

/// `h = min(q², q⁻²)^0.35 · d^-0.35` with `q = d/T`.
pub fn bandwidth(d: usize, t: usize) -> f64 {
    let df = d as f64;
    let q = df / t as f64;
    (q * q).min(1.0 / (q * q)).powf(0.35) * df.powf(-0.35)
}

/// Quadratic shrinkage on inverse eigenvalues:
///
/// `λ̌_i⁻¹ = (1-q)² λ̂_i⁻¹ + 2q(1-q) λ̂_i⁻¹ s_i + q² λ̂_i⁻¹ (s_i² + r_i²)`, where
/// `s_i = d⁻¹ Σ_j λ̂_j⁻¹ (λ̂_j⁻¹ - λ̂_i⁻¹) / ((λ̂_j⁻¹ - λ̂_i⁻¹)² + h² λ̂_j⁻²)` and
/// `r_i = d⁻¹ Σ_j λ̂_j⁻¹ h λ̂_j⁻¹ / ((λ̂_j⁻¹ - λ̂_i⁻¹)² + h² λ̂_j⁻²)`.
pub fn quadratic_shrink(lambda_hat: &[f64], q: f64, h: f64) -> Result<Vec<f64>> {
    if let Some(l) = lambda_hat.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(CopulaError::domain(format!("eigenvalues must be positive and finite, got {l}")));
    }
    if !(q.is_finite() && q >= 0.0) {
        return Err(CopulaError::domain(format!("concentration must be >= 0, got {q}")));
    }
    if q == 0.0 {
        return Ok(lambda_hat.to_vec());
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(CopulaError::domain(format!("bandwidth must be > 0, got {h}")));
    }
    let d = lambda_hat.len() as f64;
    let inv: Vec<f64> = lambda_hat.iter().map(|l| 1.0 / l).collect();
    let out = inv
        .iter()
        .map(|&li| {
            let (mut s, mut r) = (0.0, 0.0);
            for &lj in &inv {
                let diff = lj - li;
                let den = diff * diff + h * h * lj * lj;
                s += lj * diff / den;
                r += lj * h * lj / den;
            }
            s /= d;
            r /= d;
            let shrunk_inv = (1.0 - q).powi(2) * li + 2.0 * q * (1.0 - q) * li * s + q * q * li * (s * s + r * r);
            1.0 / shrunk_inv
        })
        .collect();
    Ok(out)
}

/// Shrinks with `q = d/T` and the default bandwidth.
pub fn shrink_spectrum(lambda_hat: &[f64], t: usize) -> Result<ShrunkenSpectrum> {
    let d = lambda_hat.len();
    let q = d as f64 / t as f64;
    let h = bandwidth(d, t);
    let lambda_check = quadratic_shrink(lambda_hat, q, h)?;
    Ok(ShrunkenSpectrum { lambda_hat: lambda_hat.to_vec(), q, h, lambda_check })
}

/// Result of moment targeting.
#[derive(Debug, Clone)]
pub struct Targets {
    pub basis: SpectralBasis,
    /// `log λ̌` (or `log λ̂` without shrinkage), descending.
    pub anchor: Vec<f64>,
    /// Normalized dependence matrix `Ř` (or `R̂`).
    pub r: DMatrix<f64>,
    pub spectrum: ShrunkenSpectrum,
}

/// Sample covariance of `y*` → `Σ̂` → eigendecomposition → optional shrinkage.
pub fn target_anchors(ystar: &DMatrix<f64>, shape: &CopulaShape, shrink: bool) -> Result<Targets> {
    let (t, d) = ystar.shape();
    if t <= d {
        return Err(CopulaError::Unsupported(format!("targeting needs T > d (T = {t}, d = {d})")));
    }
    target_from_cov(&sample_covariance(ystar), t, shape, shrink)
}

/// Targeting from a covariance matrix estimated over `t` observations.
pub fn target_from_cov(cov: &DMatrix<f64>, t: usize, shape: &CopulaShape, shrink: bool) -> Result<Targets> {
    let implied = implied_r_from_cov(cov, shape)?;
    let lambda_hat: Vec<f64> = implied.eigenvalues.iter().copied().collect();
    let spectrum = if shrink {
        shrink_spectrum(&lambda_hat, t)?
    } else {
        ShrunkenSpectrum {
            lambda_hat: lambda_hat.clone(),
            q: cov.nrows() as f64 / t as f64,
            h: bandwidth(cov.nrows(), t),
            lambda_check: lambda_hat.clone(),
        }
    };
    let lam = DVector::from_vec(spectrum.lambda_check.clone());
    let w = implied.basis.w();
    let mut scaled = w.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= lam[k];
    }
    let r = to_correlation(&(scaled * w.transpose()))?;
    let anchor = spectrum.lambda_check.iter().map(|l| l.ln()).collect();
    Ok(Targets { basis: implied.basis, anchor, r, spectrum })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_concentration_is_identity() {
        let l = [3.0, 1.0, 0.25];
        assert_eq!(quadratic_shrink(&l, 0.0, 0.3).unwrap(), l.to_vec());
    }

    #[test]
    fn rejects_non_positive() {
        assert!(quadratic_shrink(&[1.0, 0.0], 0.1, 0.1).is_err());
        assert!(quadratic_shrink(&[1.0, -2.0], 0.1, 0.1).is_err());
    }

    #[test]
    fn bandwidth_at_unit_concentration() {
        assert!((bandwidth(50, 50) - 50f64.powf(-0.35)).abs() < 1e-15);
    }
}
