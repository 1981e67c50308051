//! AR(1)-GARCH(1,1) marginal filtering by Gaussian quasi maximum likelihood.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CopulaError, Result};
use crate::optim::Bfgs;

/// `r_t = δ + φ r_{t-1} + ε_t`, `σ²_t = ω + α ε²_{t-1} + β σ²_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArGarchParams {
    pub delta: f64,
    pub phi: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ArGarchParams {
    pub fn is_admissible(&self) -> bool {
        self.omega > 0.0
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta < 1.0
            && self.phi.abs() < 1.0
            && self.delta.is_finite()
    }

    /// `ω / (1 - α - β)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFit {
    pub params: ArGarchParams,
    /// Conditional standard deviations for `t = 2..T`.
    pub sigma: Vec<f64>,
    /// Standardized residuals `ε_t / σ_t` for `t = 2..T`.
    pub residuals: Vec<f64>,
    pub loglik: f64,
    /// Gradient norm of the mean log-likelihood in the unconstrained coordinates.
    pub grad_norm: f64,
}

const MIN_T: usize = 100;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn recursion(p: &ArGarchParams, r: &[f64], sigma2_init: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let n = r.len() - 1;
    let mut s2 = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n);
    let mut ll = 0.0;
    let mut prev_s2 = sigma2_init;
    let mut prev_e = 0.0;
    for t in 1..r.len() {
        let e = r[t] - p.delta - p.phi * r[t - 1];
        let v = if t == 1 { sigma2_init } else { p.omega + p.alpha * prev_e * prev_e + p.beta * prev_s2 };
        ll -= 0.5 * (LN_2PI + v.ln() + e * e / v);
        s2.push(v);
        eps.push(e);
        prev_s2 = v;
        prev_e = e;
    }
    (s2, eps, ll)
}

fn sample_variance(r: &[f64]) -> f64 {
    let n = r.len() as f64;
    let m = r.iter().sum::<f64>() / n;
    r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Gaussian quasi log-likelihood conditional on the first return, with the
/// first variance set to the sample variance of the returns.
pub fn ar_garch_loglik(p: &ArGarchParams, returns: &[f64]) -> f64 {
    if !p.is_admissible() || returns.len() < 2 {
        return f64::NEG_INFINITY;
    }
    recursion(p, returns, sample_variance(returns)).2
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn from_theta(th: &[f64]) -> ArGarchParams {
    let pers = sigmoid(th[3]);
    let alpha = pers * sigmoid(th[4]);
    ArGarchParams { delta: th[0], phi: th[1].tanh(), omega: th[2].exp(), alpha, beta: pers - alpha }
}

fn to_theta(p: &ArGarchParams) -> Vec<f64> {
    let pers = p.alpha + p.beta;
    vec![p.delta, p.phi.atanh(), p.omega.ln(), logit(pers), logit(p.alpha / pers)]
}

/// Fits one return series. The optimization runs on returns standardized by
/// their sample mean and standard deviation and is mapped back afterwards.
pub fn fit_marginal(returns: &[f64]) -> Result<MarginalFit> {
    let t = returns.len();
    if t < MIN_T {
        return Err(CopulaError::InvalidInput(format!("marginal fit needs at least {MIN_T} returns, got {t}")));
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(CopulaError::InvalidInput(format!("return {i} is not finite")));
    }
    let mean = returns.iter().sum::<f64>() / t as f64;
    let sd = sample_variance(returns).sqrt();
    if !(sd > 0.0) {
        return Err(CopulaError::InvalidInput("constant return series".into()));
    }
    let x: Vec<f64> = returns.iter().map(|r| (r - mean) / sd).collect();
    let scale = (t - 1) as f64;
    let objective = |th: &[f64]| {
        let p = from_theta(th);
        if !p.is_admissible() {
            return f64::NAN;
        }
        -recursion(&p, &x, 1.0).2 / scale
    };
    let starts = [
        ArGarchParams { delta: 0.0, phi: 0.0, omega: 0.05, alpha: 0.05, beta: 0.9 },
        ArGarchParams { delta: 0.0, phi: 0.0, omega: 0.1, alpha: 0.1, beta: 0.8 },
        ArGarchParams { delta: 0.0, phi: 0.0, omega: 0.5, alpha: 0.05, beta: 0.45 },
    ];
    let solver = Bfgs { grad_tol: 1e-6, max_iter: 1000, ..Bfgs::default() };
    let mut best: Option<crate::optim::Minimum> = None;
    for s in &starts {
        let m = solver.minimize(objective, &to_theta(s));
        let done = m.converged;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
        if done {
            break;
        }
    }
    let best = best.expect("at least one start");
    let ps = from_theta(&best.x);
    let params = ArGarchParams {
        delta: mean * (1.0 - ps.phi) + sd * ps.delta,
        phi: ps.phi,
        omega: ps.omega * sd * sd,
        alpha: ps.alpha,
        beta: ps.beta,
    };
    if !best.converged {
        return Err(CopulaError::Convergence {
            message: format!("AR-GARCH QMLE stopped with gradient norm {:e}", best.grad_norm),
            best: vec![params.delta, params.phi, params.omega, params.alpha, params.beta],
            value: -best.value * scale,
        });
    }
    let (s2, eps, ll) = recursion(&params, returns, sd * sd);
    let sigma: Vec<f64> = s2.iter().map(|v| v.sqrt()).collect();
    let residuals = eps.iter().zip(&sigma).map(|(e, s)| e / s).collect();
    Ok(MarginalFit { params, sigma, residuals, loglik: ll, grad_norm: best.grad_norm })
}

/// Fits every column of a `T × d` return panel.
pub fn fit_marginals(returns: &DMatrix<f64>) -> Result<Vec<MarginalFit>> {
    (0..returns.ncols())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = returns.column(j).iter().copied().collect();
            fit_marginal(&col)
        })
        .collect()
}

/// `(T-1) × d` panel of standardized residuals.
pub fn residual_panel(fits: &[MarginalFit]) -> Result<DMatrix<f64>> {
    let Some(first) = fits.first() else {
        return Err(CopulaError::InvalidInput("no marginal fits".into()));
    };
    let n = first.residuals.len();
    if let Some(f) = fits.iter().find(|f| f.residuals.len() != n) {
        return Err(CopulaError::DimensionMismatch { expected: n, got: f.residuals.len() });
    }
    Ok(DMatrix::from_fn(n, fits.len(), |t, j| fits[j].residuals[t]))
}

/// Columnwise `u = rank / (T + 1/2)`; ties keep their order of appearance.
pub fn rank_pit(panel: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, d) = panel.shape();
    let denom = t as f64 + 0.5;
    let mut out = DMatrix::zeros(t, d);
    let mut idx: Vec<usize> = Vec::with_capacity(t);
    for j in 0..d {
        let col = panel.column(j);
        idx.clear();
        idx.extend(0..t);
        idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        for (rank, &row) in idx.iter().enumerate() {
            out[(row, j)] = (rank + 1) as f64 / denom;
        }
    }
    out
}
