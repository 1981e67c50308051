//! Scores of the copula log density with respect to the log-eigenvalues, and
//! the score-driven filter for the leading eigenvalues.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::copula::{obs_terms, CopulaShape, ObsTerms, TransformedPanel};
use crate::error::{CopulaError, Result};
use crate::spectral::{accumulate_sigma_diag, SpectralBasis, SpectralState};

/// Score of the copula log density in `f_i`, evaluated with the dense
/// derivative `∂R⁻¹/∂f_i`.
pub fn score_f(shape: &CopulaShape, state: &SpectralState, ystar: &DVector<f64>, i: usize) -> Result<f64> {
    check_index(state, i)?;
    let t = obs_terms(shape, state, ystar)?;
    let dr = state.drinv_df(i);
    let dly = &dr * ystar;
    let y_dr_y = ystar.dot(&dly);
    let mut s = -0.5 * state.dlogdet_r_df(i);
    if shape.is_gaussian() {
        return Ok(s - 0.5 * y_dr_y);
    }
    let nu = shape.nu();
    let d = state.dim() as f64;
    let w = (d + nu) / (nu + t.q);
    if shape.is_symmetric() {
        return Ok(s - 0.5 * w * y_dr_y);
    }
    let g = shape.gamma();
    let y_dr_g = dly.dot(g);
    let g_dr_g = g.dot(&(&dr * g));
    s += -0.5 * (w * y_dr_y - 2.0 * y_dr_g);
    s += 0.5 * t.alpha_t * t.kp * (g_dr_g / t.alpha2 + y_dr_y / (nu + t.q));
    Ok(s)
}

/// The same score assembled from rotated vectors `ỹ`, `γ̃` and their
/// barred counterparts `ȳ_i = Wᵀ D^{1/2} Σ̇_i y*`, `γ̄_i`.
pub fn score_f_rotated(shape: &CopulaShape, state: &SpectralState, ystar: &DVector<f64>, i: usize) -> Result<f64> {
    check_index(state, i)?;
    let t = obs_terms(shape, state, ystar)?;
    let lam = state.lambda();
    let li = lam[i];
    let inv_quad = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        a.iter().zip(b.iter()).zip(lam.iter()).map(|((x, y), l)| x * y / l).sum()
    };
    let trace_sd: f64 = state.sigma_dot(i).sum();
    let yt = &t.yt;
    let ybar = state.rotate_bar(ystar, i);
    let y_ybar = inv_quad(yt, &ybar);
    // terms 1 and 4: -½ ∂log|R| - ½ w y'∂R⁻¹y
    let weight = if shape.is_gaussian() {
        1.0
    } else {
        (state.dim() as f64 + shape.nu()) / (shape.nu() + t.q)
    };
    let mut s = (-0.5 + trace_sd) + (0.5 * weight * yt[i] * yt[i] / li - weight * y_ybar);
    if shape.is_symmetric() {
        return Ok(s);
    }
    let gt = t.gt.as_ref().expect("skewed terms");
    let gbar = state.rotate_bar(shape.gamma(), i);
    s += -gt[i] * yt[i] / li + inv_quad(&gbar, yt) + inv_quad(gt, &ybar);
    let nu = shape.nu();
    let g_term = (-gt[i] * gt[i] / li + 2.0 * inv_quad(gt, &gbar)) / t.alpha2;
    let y_term = (-yt[i] * yt[i] / li + 2.0 * y_ybar) / (nu + t.q);
    s += 0.5 * t.alpha_t * t.kp * (g_term + y_term);
    Ok(s)
}

fn check_index(state: &SpectralState, i: usize) -> Result<()> {
    if i >= state.dim() {
        return Err(CopulaError::InvalidInput(format!("eigen index {i} out of range for d = {}", state.dim())));
    }
    Ok(())
}

/// Scores for indices `0..d0` sharing the per-observation intermediates.
pub fn score_vector(shape: &CopulaShape, state: &SpectralState, ystar: &DVector<f64>, d0: usize) -> Result<DVector<f64>> {
    if d0 > state.dim() {
        return Err(CopulaError::InvalidInput(format!("d0 = {d0} exceeds d = {}", state.dim())));
    }
    let t = obs_terms(shape, state, ystar)?;
    Ok(scores_from_terms(shape, state, ystar, &t, d0))
}

/// `X'(∂R⁻¹/∂f_i)Z = -x̃_i z̃_i/λ_i + Σ_j s_ij (X_j (R⁻¹Z)_j + Z_j (R⁻¹X)_j)`
/// with `s_ij = ½ λ_i w_{j,i}²/Σ_jj`, so each index costs O(d) once
/// `R⁻¹X = D^{1/2} W Λ⁻¹ x̃` is known.
fn scores_from_terms(
    shape: &CopulaShape,
    state: &SpectralState,
    ystar: &DVector<f64>,
    t: &ObsTerms,
    d0: usize,
) -> DVector<f64> {
    let d = state.dim();
    let mut out = DVector::zeros(d0);
    if d0 == 0 {
        return out;
    }
    let lam = state.lambda();
    let w = state.basis().w();
    let sd = state.sigma_diag();
    let sq = state.sqrt_sigma_diag();
    let r_inv_times = |xt: &DVector<f64>| -> DVector<f64> {
        let scaled = DVector::from_fn(d, |k, _| xt[k] / lam[k]);
        (w * scaled).component_mul(sq)
    };
    let py = r_inv_times(&t.yt);
    let skew = t.gt.as_ref().map(|gt| (gt, r_inv_times(gt)));
    let gamma = shape.gamma();
    let nu = shape.nu();
    let weight = if shape.is_gaussian() { 1.0 } else { (d as f64 + nu) / (nu + t.q) };
    for i in 0..d0 {
        let li = lam[i];
        let col = w.column(i);
        let mut sum_w = 0.0;
        let mut yy = 0.0;
        let mut yg = 0.0;
        let mut gg = 0.0;
        for j in 0..d {
            let c = col[j] * col[j] / sd[j];
            sum_w += c;
            let sij = 0.5 * li * c;
            yy += sij * 2.0 * ystar[j] * py[j];
            if let Some((_, pg)) = &skew {
                yg += sij * (ystar[j] * pg[j] + gamma[j] * py[j]);
                gg += sij * 2.0 * gamma[j] * pg[j];
            }
        }
        let yti = t.yt[i];
        yy -= yti * yti / li;
        let dlogdet = 1.0 - li * sum_w;
        let mut s = -0.5 * dlogdet - 0.5 * weight * yy;
        if let Some((gt, _)) = &skew {
            let gti = gt[i];
            yg -= gti * yti / li;
            gg -= gti * gti / li;
            s += yg + 0.5 * t.alpha_t * t.kp * (gg / t.alpha2 + yy / (nu + t.q));
        }
        out[i] = s;
    }
    out
}

/// Parameters of the log-eigenvalue recursion
/// `f_{i,t+1} = (1 - b_i) log λ̌_i + b_i f_{i,t} + a_i ∇_{i,t}` for `i < d0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDynamics {
    pub d0: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Log unconditional eigenvalues, length `d`.
    pub anchor: Vec<f64>,
}

impl ScoreDynamics {
    pub fn new(a: Vec<f64>, b: Vec<f64>, anchor: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(CopulaError::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        let d0 = a.len();
        if d0 > anchor.len() {
            return Err(CopulaError::InvalidInput(format!("d0 = {d0} exceeds d = {}", anchor.len())));
        }
        if let Some(v) = a.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(CopulaError::domain(format!("step sizes must be finite and >= 0, got {v}")));
        }
        if let Some(v) = b.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
            return Err(CopulaError::domain(format!("persistence must lie in [0, 1), got {v}")));
        }
        if anchor.iter().any(|v| !v.is_finite()) {
            return Err(CopulaError::domain("anchors must be finite log-eigenvalues"));
        }
        Ok(ScoreDynamics { d0, a, b, anchor })
    }

    /// Dynamics with every eigenvalue held at its anchor.
    pub fn static_at(anchor: Vec<f64>) -> Self {
        ScoreDynamics { d0: 0, a: Vec::new(), b: Vec::new(), anchor }
    }

    /// Implied intercepts `ω_i = (1 - b_i) log λ̌_i`.
    pub fn omega(&self) -> Vec<f64> {
        (0..self.d0).map(|i| (1.0 - self.b[i]) * self.anchor[i]).collect()
    }

    /// One step of the recursion for the dynamic indices.
    pub fn update(&self, f: &mut DVector<f64>, score: &DVector<f64>) {
        for i in 0..self.d0 {
            f[i] = (1.0 - self.b[i]) * self.anchor[i] + self.b[i] * f[i] + self.a[i] * score[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub loglik: f64,
    /// `T × d0` filtered log-eigenvalues.
    pub f_path: DMatrix<f64>,
    /// `T × d0` scores.
    pub score_path: DMatrix<f64>,
    pub per_obs_loglik: DVector<f64>,
    /// Predicted state for the observation after the panel.
    pub f_next: DVector<f64>,
}

const F_LIMIT: f64 = 200.0;

/// Runs the filter from `f_1 = anchor`.
pub fn run_filter(
    shape: &CopulaShape,
    dynamics: &ScoreDynamics,
    basis: &Arc<SpectralBasis>,
    panel: &TransformedPanel,
) -> Result<FilterOutput> {
    let f0 = DVector::from_vec(dynamics.anchor.clone());
    run_filter_from(shape, dynamics, basis, panel, f0)
}

/// Runs the filter from a given initial state.
pub fn run_filter_from(
    shape: &CopulaShape,
    dynamics: &ScoreDynamics,
    basis: &Arc<SpectralBasis>,
    panel: &TransformedPanel,
    f_init: DVector<f64>,
) -> Result<FilterOutput> {
    let (t_len, d) = panel.ystar.shape();
    if basis.dim() != d || dynamics.anchor.len() != d || f_init.len() != d {
        return Err(CopulaError::DimensionMismatch { expected: basis.dim(), got: d });
    }
    let d0 = dynamics.d0;
    let mut f = f_init;
    let mut f_path = DMatrix::zeros(t_len, d0);
    let mut score_path = DMatrix::zeros(t_len, d0);
    let mut per_obs = DVector::zeros(t_len);
    let diverged = |t: usize, reason: String, f: &DVector<f64>| CopulaError::FilterDivergence {
        t,
        reason,
        f: f.iter().copied().collect(),
    };
    let mut ystar = DVector::zeros(d);
    if f.iter().any(|v| !v.is_finite() || v.abs() > F_LIMIT) {
        return Err(diverged(0, "log-eigenvalue out of range".into(), &f));
    }
    // only the first d0 log-eigenvalues move, so the rest of diag(Σ) is fixed
    let mut lambda = f.map(f64::exp);
    let mut static_diag = DVector::zeros(d);
    accumulate_sigma_diag(basis.w(), &lambda, d0..d, &mut static_diag);
    for t in 0..t_len {
        if f.iter().take(d0).any(|v| !v.is_finite() || v.abs() > F_LIMIT) {
            return Err(diverged(t, "log-eigenvalue out of range".into(), &f));
        }
        for i in 0..d0 {
            lambda[i] = f[i].exp();
        }
        let mut sigma_diag = static_diag.clone();
        accumulate_sigma_diag(basis.w(), &lambda, 0..d0, &mut sigma_diag);
        let state = SpectralState::with_sigma_diag(Arc::clone(basis), f.clone(), lambda.clone(), sigma_diag)
            .map_err(|e| diverged(t, e.to_string(), &f))?;
        for j in 0..d {
            ystar[j] = panel.ystar[(t, j)];
        }
        let terms = obs_terms(shape, &state, &ystar)?;
        let ll = terms.logpdf - panel.marginal_logpdf[t];
        if !ll.is_finite() {
            return Err(diverged(t, format!("log-likelihood {ll}"), &f));
        }
        per_obs[t] = ll;
        for i in 0..d0 {
            f_path[(t, i)] = f[i];
        }
        if d0 > 0 {
            let s = scores_from_terms(shape, &state, &ystar, &terms, d0);
            if s.iter().any(|v| !v.is_finite()) {
                return Err(diverged(t, "non-finite score".into(), &f));
            }
            for i in 0..d0 {
                score_path[(t, i)] = s[i];
            }
            dynamics.update(&mut f, &s);
        }
    }
    let loglik = per_obs.iter().sum();
    Ok(FilterOutput { loglik, f_path, score_path, per_obs_loglik: per_obs, f_next: f })
}
