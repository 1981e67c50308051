//! Normalized spectral parameterization `R = D^{-1/2} W Λ Wᵀ D^{-1/2}`, `D = diag(W Λ Wᵀ)`.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CopulaError, Result};

const ORTHO_TOL: f64 = 1e-10;
const DIAG_FLOOR: f64 = 1e-14;

/// Orthogonal eigenvector matrix with a fixed orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    w: DMatrix<f64>,
}

impl SpectralBasis {
    /// Wraps an orthogonal matrix, flipping columns so that the entry of largest
    /// magnitude in each column is positive.
    pub fn new(mut w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(CopulaError::DimensionMismatch { expected: w.nrows(), got: w.ncols() });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(CopulaError::InvalidInput("basis contains non-finite entries".into()));
        }
        let d = w.nrows();
        let gram = w.transpose() * &w;
        let err = (gram - DMatrix::<f64>::identity(d, d)).norm();
        if err > ORTHO_TOL {
            return Err(CopulaError::InvalidInput(format!("basis is not orthogonal (|WᵀW - I| = {err:e})")));
        }
        orient_columns(&mut w);
        Ok(SpectralBasis { w })
    }

    pub fn identity(d: usize) -> Self {
        SpectralBasis { w: DMatrix::identity(d, d) }
    }

    /// Eigendecomposition of a symmetric matrix: basis plus eigenvalues, both
    /// in descending eigenvalue order.
    pub fn from_symmetric(m: &DMatrix<f64>) -> Result<(Self, DVector<f64>)> {
        if !m.is_square() {
            return Err(CopulaError::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CopulaError::InvalidInput("matrix contains non-finite entries".into()));
        }
        let sym = 0.5 * (m + m.transpose());
        let eig = SymmetricEigen::new(sym);
        let d = m.nrows();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut w = DMatrix::zeros(d, d);
        let mut vals = DVector::zeros(d);
        for (k, &j) in order.iter().enumerate() {
            w.set_column(k, &eig.eigenvectors.column(j));
            vals[k] = eig.eigenvalues[j];
        }
        orient_columns(&mut w);
        Ok((SpectralBasis { w }, vals))
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
}

fn orient_columns(w: &mut DMatrix<f64>) {
    for mut col in w.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Dependence state at one point in time.
///
/// Holds `λ = exp(f)` and `diag(Σ)`; `R` and `R⁻¹` are only materialized on request.
#[derive(Debug, Clone)]
pub struct SpectralState {
    basis: Arc<SpectralBasis>,
    f: DVector<f64>,
    lambda: DVector<f64>,
    sigma_diag: DVector<f64>,
    sqrt_sigma: DVector<f64>,
    r: OnceLock<DMatrix<f64>>,
    r_inv: OnceLock<DMatrix<f64>>,
}

impl SpectralState {
    pub fn new(basis: Arc<SpectralBasis>, f: DVector<f64>) -> Result<Self> {
        let d = basis.dim();
        if f.len() != d {
            return Err(CopulaError::DimensionMismatch { expected: d, got: f.len() });
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(CopulaError::InvalidInput(format!("log-eigenvalue {i} is not finite")));
        }
        let lambda = f.map(f64::exp);
        let mut sigma_diag: DVector<f64> = DVector::zeros(d);
        accumulate_sigma_diag(basis.w(), &lambda, 0..d, &mut sigma_diag);
        Self::with_sigma_diag(basis, f, lambda, sigma_diag)
    }

    /// Builds the state from a precomputed `diag(Σ)`.
    pub(crate) fn with_sigma_diag(
        basis: Arc<SpectralBasis>,
        f: DVector<f64>,
        lambda: DVector<f64>,
        sigma_diag: DVector<f64>,
    ) -> Result<Self> {
        if let Some(j) = sigma_diag.iter().position(|&s| !(s > DIAG_FLOOR) || !s.is_finite()) {
            return Err(CopulaError::Degenerate { index: j, value: sigma_diag[j] });
        }
        let sqrt_sigma = sigma_diag.map(f64::sqrt);
        Ok(SpectralState {
            basis,
            f,
            lambda,
            sigma_diag,
            sqrt_sigma,
            r: OnceLock::new(),
            r_inv: OnceLock::new(),
        })
    }

    pub fn from_eigenvalues(basis: Arc<SpectralBasis>, lambda: &DVector<f64>) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|&l| !(l > 0.0)) {
            return Err(CopulaError::domain(format!("eigenvalue {i} must be positive, got {}", lambda[i])));
        }
        Self::new(basis, lambda.map(f64::ln))
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn sigma_diag(&self) -> &DVector<f64> {
        &self.sigma_diag
    }

    pub fn sqrt_sigma_diag(&self) -> &DVector<f64> {
        &self.sqrt_sigma
    }

    /// Implied correlation matrix; the diagonal is set to exactly 1.
    pub fn r(&self) -> &DMatrix<f64> {
        self.r.get_or_init(|| {
            let d = self.dim();
            let w = self.basis.w();
            let mut scaled = w.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col *= self.lambda[k];
            }
            let mut r = scaled * w.transpose();
            for i in 0..d {
                for j in 0..d {
                    r[(i, j)] /= self.sqrt_sigma[i] * self.sqrt_sigma[j];
                }
            }
            for i in 0..d {
                r[(i, i)] = 1.0;
                for j in 0..i {
                    let v = 0.5 * (r[(i, j)] + r[(j, i)]);
                    r[(i, j)] = v;
                    r[(j, i)] = v;
                }
            }
            r
        })
    }

    /// `R⁻¹ = D^{1/2} W Λ⁻¹ Wᵀ D^{1/2}`.
    pub fn r_inv(&self) -> &DMatrix<f64> {
        self.r_inv.get_or_init(|| {
            let d = self.dim();
            let w = self.basis.w();
            let mut scaled = w.clone();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col /= self.lambda[k];
            }
            let mut m = scaled * w.transpose();
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] *= self.sqrt_sigma[i] * self.sqrt_sigma[j];
                }
            }
            for i in 0..d {
                for j in 0..i {
                    let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        })
    }

    /// `log|R| = Σ f_i - Σ log Σ_jj`.
    pub fn log_det_r(&self) -> f64 {
        self.f.sum() - self.sigma_diag.iter().map(|s| s.ln()).sum::<f64>()
    }

    /// `ỹ = Wᵀ D^{1/2} x`.
    pub fn rotate(&self, x: &DVector<f64>) -> DVector<f64> {
        let scaled = x.component_mul(&self.sqrt_sigma);
        self.basis.w().tr_mul(&scaled)
    }

    /// Diagonal of `Σ̇_i = ½ λ_i diag(w_{j,i}² / Σ_jj)`.
    pub fn sigma_dot(&self, i: usize) -> DVector<f64> {
        let li = self.lambda[i];
        let col = self.basis.w().column(i);
        DVector::from_fn(self.dim(), |j, _| 0.5 * li * col[j] * col[j] / self.sigma_diag[j])
    }

    /// `x̄_i = Wᵀ D^{1/2} Σ̇_i x`.
    pub fn rotate_bar(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        let scaled = x.component_mul(&self.sigma_dot(i)).component_mul(&self.sqrt_sigma);
        self.basis.w().tr_mul(&scaled)
    }

    /// `xᵀ R⁻¹ x = ỹᵀ Λ⁻¹ ỹ`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        let t = self.rotate(x);
        t.iter().zip(self.lambda.iter()).map(|(a, l)| a * a / l).sum()
    }

    /// `xᵀ R⁻¹ z`.
    pub fn bilinear(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let a = self.rotate(x);
        let b = self.rotate(z);
        a.iter().zip(b.iter()).zip(self.lambda.iter()).map(|((p, q), l)| p * q / l).sum()
    }

    /// `∂ log|R| / ∂ f_i = 1 - λ_i Σ_j w_{j,i}² / Σ_jj`.
    pub fn dlogdet_r_df(&self, i: usize) -> f64 {
        let col = self.basis.w().column(i);
        let s: f64 = col.iter().zip(self.sigma_diag.iter()).map(|(w, s)| w * w / s).sum();
        1.0 - self.lambda[i] * s
    }

    /// `∂R⁻¹/∂f_i = -D^{1/2} w_i w_iᵀ D^{1/2} / λ_i + Σ̇_i R⁻¹ + R⁻¹ Σ̇_i`.
    pub fn drinv_df(&self, i: usize) -> DMatrix<f64> {
        let d = self.dim();
        let li = self.lambda[i];
        let v = self.basis.w().column(i).component_mul(&self.sqrt_sigma);
        let sd = self.sigma_dot(i);
        let ri = self.r_inv();
        let mut out = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..=a {
                let val = -v[a] * v[b] / li + (sd[a] + sd[b]) * ri[(a, b)];
                out[(a, b)] = val;
                out[(b, a)] = val;
            }
        }
        out
    }
}

impl PartialEq for SpectralState {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.f == other.f
    }
}

/// Adds `Σ_k λ_k w_{j,k}²` over the columns `ks` to `out`.
pub(crate) fn accumulate_sigma_diag(
    w: &DMatrix<f64>,
    lambda: &DVector<f64>,
    ks: std::ops::Range<usize>,
    out: &mut DVector<f64>,
) {
    let out = out.as_mut_slice();
    for k in ks {
        let lk = lambda[k];
        for (o, wjk) in out.iter_mut().zip(w.column(k).iter()) {
            *o += lk * wjk * wjk;
        }
    }
}

/// Symmetric positive root of a symmetric positive semi-definite matrix.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(0.5 * (m + m.transpose()));
    let min = eig.eigenvalues.min();
    let scale = eig.eigenvalues.amax().max(1.0);
    if min < -1e-10 * scale {
        return Err(CopulaError::Infeasible { min_eigenvalue: min });
    }
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let mut v = eig.eigenvectors.clone();
    for (k, mut col) in v.column_iter_mut().enumerate() {
        col *= root[k];
    }
    Ok(v * eig.eigenvectors.transpose())
}

/// Normalizes a positive-diagonal symmetric matrix to unit diagonal.
pub fn to_correlation(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let mut out = m.clone();
    for i in 0..d {
        if !(m[(i, i)] > 0.0) {
            return Err(CopulaError::Degenerate { index: i, value: m[(i, i)] });
        }
    }
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = if i == j { 1.0 } else { m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt() };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> SpectralState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        let basis = Arc::new(SpectralBasis::new(w).unwrap());
        SpectralState::new(basis, DVector::from_vec(vec![3.0f64.ln(), 0.0])).unwrap()
    }

    #[test]
    fn two_dimensional_closed_form() {
        let st = two_by_two();
        assert!((st.r()[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(st.r()[(0, 0)], 1.0);
    }

    #[test]
    fn identity_basis_gives_identity() {
        let basis = Arc::new(SpectralBasis::identity(4));
        let st = SpectralState::new(basis, DVector::from_vec(vec![0.3, -1.0, 2.0, 0.1])).unwrap();
        assert_eq!(st.r(), &DMatrix::<f64>::identity(4, 4));
        for i in 0..4 {
            assert_eq!(st.dlogdet_r_df(i), 0.0);
            assert!(st.drinv_df(i).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_orthogonal() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(SpectralBasis::new(w).is_err());
    }

    #[test]
    fn orientation_is_positive_max_entry() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        let b = SpectralBasis::new(w).unwrap();
        assert_eq!(b.w()[(1, 0)], 1.0);
        assert_eq!(b.w()[(0, 1)], 1.0);
    }

    #[test]
    fn degenerate_diagonal_is_reported() {
        let basis = Arc::new(SpectralBasis::identity(2));
        let err = SpectralState::new(basis, DVector::from_vec(vec![0.0, -40.0])).unwrap_err();
        assert!(matches!(err, CopulaError::Degenerate { index: 1, .. }));
    }
}
