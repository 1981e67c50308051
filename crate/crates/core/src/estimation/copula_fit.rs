//! Maximum likelihood for the static copula parameters with eigenvalue
//! targeting, BIC selection of the number of dynamic eigenvalues and
//! out-of-sample evaluation.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::copula::{transform_pits, CopulaFamily, CopulaShape, TransformedPanel};
use crate::error::{CopulaError, Result};
use crate::optim::{Bfgs, Minimum, NelderMead};
use crate::score::{run_filter, run_filter_from, FilterOutput, ScoreDynamics};
use crate::shrinkage::{target_anchors, ShrunkenSpectrum, Targets};
use crate::spectral::SpectralBasis;

/// Static copula parameters. `nu = inf` for the Gaussian family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaParams {
    pub nu: f64,
    pub gamma: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CopulaParams {
    pub fn d0(&self) -> usize {
        self.a.len()
    }

    pub fn shape(&self, family: CopulaFamily, d: usize) -> Result<CopulaShape> {
        match family {
            CopulaFamily::Gaussian => Ok(CopulaShape::gaussian(d)),
            CopulaFamily::StudentT => CopulaShape::student_t(self.nu, d),
            CopulaFamily::SkewT => CopulaShape::skew_t(self.nu, self.gamma, d),
        }
    }

    /// Names of the estimated parameters, in the order of [`CopulaParams::estimated`].
    pub fn names(family: CopulaFamily, d0: usize) -> Vec<String> {
        let mut out = Vec::new();
        if family != CopulaFamily::Gaussian {
            out.push("nu".to_string());
        }
        if family == CopulaFamily::SkewT {
            out.push("gamma".to_string());
        }
        for i in 1..=d0 {
            out.push(format!("a{i}"));
        }
        for i in 1..=d0 {
            out.push(format!("b{i}"));
        }
        out
    }

    pub fn estimated(&self, family: CopulaFamily) -> Vec<f64> {
        let mut out = Vec::new();
        if family != CopulaFamily::Gaussian {
            out.push(self.nu);
        }
        if family == CopulaFamily::SkewT {
            out.push(self.gamma);
        }
        out.extend(&self.a);
        out.extend(&self.b);
        out
    }

    fn to_theta(&self, family: CopulaFamily) -> Vec<f64> {
        let mut th = Vec::new();
        if family != CopulaFamily::Gaussian {
            th.push((self.nu - NU_FLOOR).ln());
        }
        if family == CopulaFamily::SkewT {
            th.push(self.gamma);
        }
        for i in 0..self.d0() {
            th.push(self.a[i].ln());
            th.push((self.b[i] / (1.0 - self.b[i])).ln());
        }
        th
    }

    fn from_theta(family: CopulaFamily, d0: usize, th: &[f64]) -> Self {
        let mut k = 0;
        let mut next = || {
            k += 1;
            th[k - 1]
        };
        let nu = if family == CopulaFamily::Gaussian { f64::INFINITY } else { NU_FLOOR + next().exp() };
        let gamma = if family == CopulaFamily::SkewT { next() } else { 0.0 };
        let mut a = Vec::with_capacity(d0);
        let mut b = Vec::with_capacity(d0);
        for _ in 0..d0 {
            a.push(next().exp());
            b.push(1.0 / (1.0 + (-next()).exp()));
        }
        CopulaParams { nu, gamma, a, b }
    }
}

/// `ν = 4 + exp(θ)` keeps the fourth moment used by targeting finite.
const NU_FLOOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub shrink: bool,
    /// Number of deterministic starting points (ignored with a warm start).
    pub starts: usize,
    /// Gradient-norm tolerance on the mean per-observation log-likelihood.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub warm_start: Option<CopulaParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { shrink: true, starts: 3, grad_tol: 1e-5, max_iter: 300, warm_start: None }
    }
}

impl FitOptions {
    pub fn with_shrink(shrink: bool) -> Self {
        FitOptions { shrink, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct CopulaFit {
    pub family: CopulaFamily,
    pub d0: usize,
    pub shrink: bool,
    pub params: CopulaParams,
    pub basis: Arc<SpectralBasis>,
    /// Log target eigenvalues (after shrinkage when enabled).
    pub anchor: Vec<f64>,
    pub spectrum: ShrunkenSpectrum,
    pub loglik_in: f64,
    pub filter: FilterOutput,
    pub n_obs: usize,
    pub grad_norm: f64,
    pub evals: usize,
}

impl CopulaFit {
    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn shape(&self) -> Result<CopulaShape> {
        self.params.shape(self.family, self.dim())
    }

    pub fn dynamics(&self) -> Result<ScoreDynamics> {
        ScoreDynamics::new(self.params.a.clone(), self.params.b.clone(), self.anchor.clone())
    }

    /// Estimated static parameters: shape parameters plus `2·d0`.
    pub fn n_params(&self) -> usize {
        self.family.n_shape_params() + 2 * self.d0
    }

    /// `-2ℓ + k log T`.
    pub fn bic(&self) -> f64 {
        -2.0 * self.loglik_in + self.n_params() as f64 * (self.n_obs as f64).ln()
    }

    /// Filtered eigenvalues `λ_t` (`T × d`), static ones at their targets.
    pub fn eigen_path(&self) -> DMatrix<f64> {
        eigen_path_from(&self.anchor, &self.filter.f_path)
    }
}

pub(crate) fn eigen_path_from(anchor: &[f64], f_path: &DMatrix<f64>) -> DMatrix<f64> {
    let d0 = f_path.ncols();
    DMatrix::from_fn(f_path.nrows(), anchor.len(), |t, i| if i < d0 { f_path[(t, i)].exp() } else { anchor[i].exp() })
}

type CacheEntry = (u64, u64, Arc<TransformedPanel>, Arc<Targets>);

/// Likelihood of a PIT panel as a function of the static parameters, with
/// the quantile transform and the targets cached per shape.
pub struct CopulaObjective {
    pits: DMatrix<f64>,
    family: CopulaFamily,
    d0: usize,
    shrink: bool,
    cache: Mutex<VecDeque<CacheEntry>>,
}

const CACHE_SIZE: usize = 12;

impl CopulaObjective {
    pub fn new(pits: &DMatrix<f64>, family: CopulaFamily, d0: usize, shrink: bool) -> Result<Self> {
        let (t, d) = pits.shape();
        if t <= d {
            return Err(CopulaError::Unsupported(format!("copula fit needs T > d (T = {t}, d = {d})")));
        }
        if d0 > d {
            return Err(CopulaError::InvalidInput(format!("d0 = {d0} exceeds d = {d}")));
        }
        if let Some(u) = pits.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(CopulaError::InvalidInput(format!("PIT value {u} outside (0,1)")));
        }
        Ok(CopulaObjective { pits: pits.clone(), family, d0, shrink, cache: Mutex::new(VecDeque::new()) })
    }

    pub fn dim(&self) -> usize {
        self.pits.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.pits.nrows()
    }

    /// Transformed panel and targets for a shape.
    pub fn prepare(&self, shape: &CopulaShape) -> Result<(Arc<TransformedPanel>, Arc<Targets>)> {
        let key = (shape.nu().to_bits(), shape.common_gamma().unwrap_or(0.0).to_bits());
        {
            let cache = self.cache.lock().expect("cache lock");
            if let Some((_, _, p, tg)) = cache.iter().find(|e| (e.0, e.1) == key) {
                return Ok((Arc::clone(p), Arc::clone(tg)));
            }
        }
        let panel = Arc::new(transform_pits(shape, &self.pits)?);
        let targets = Arc::new(target_anchors(&panel.ystar, shape, self.shrink)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_SIZE {
            cache.pop_front();
        }
        cache.push_back((key.0, key.1, Arc::clone(&panel), Arc::clone(&targets)));
        Ok((panel, targets))
    }

    /// Filter output at the given parameters.
    pub fn evaluate(&self, params: &CopulaParams) -> Result<(FilterOutput, Arc<Targets>)> {
        if params.d0() != self.d0 {
            return Err(CopulaError::DimensionMismatch { expected: self.d0, got: params.d0() });
        }
        let shape = params.shape(self.family, self.dim())?;
        let (panel, targets) = self.prepare(&shape)?;
        let dynamics = ScoreDynamics::new(params.a.clone(), params.b.clone(), targets.anchor.clone())?;
        let basis = Arc::new(targets.basis.clone());
        let out = run_filter(&shape, &dynamics, &basis, &panel)?;
        Ok((out, targets))
    }

    /// Negative mean log-likelihood in the unconstrained coordinates;
    /// rejected points map to NaN.
    fn value(&self, theta: &[f64]) -> f64 {
        let p = CopulaParams::from_theta(self.family, self.d0, theta);
        if !p.nu.is_finite() && self.family != CopulaFamily::Gaussian {
            return f64::NAN;
        }
        match self.evaluate(&p) {
            Ok((out, _)) => -out.loglik / self.n_obs() as f64,
            Err(_) => f64::NAN,
        }
    }
}

fn default_starts(family: CopulaFamily, d0: usize, n: usize) -> Vec<CopulaParams> {
    const NU: [f64; 3] = [25.0, 10.0, 60.0];
    const GAMMA: [f64; 3] = [-0.1, 0.0, 0.1];
    const A: [f64; 3] = [0.05, 0.1, 0.02];
    const B: [f64; 3] = [0.9, 0.95, 0.8];
    (0..n.clamp(1, 3))
        .map(|k| CopulaParams {
            nu: if family == CopulaFamily::Gaussian { f64::INFINITY } else { NU[k] },
            gamma: if family == CopulaFamily::SkewT { GAMMA[k] } else { 0.0 },
            a: vec![A[k]; d0],
            b: vec![B[k]; d0],
        })
        .collect()
}

const SCREEN_ITER: usize = 4;

/// Maximum likelihood over `(ν, γ, a, b)`; every candidate `(ν, γ)`
/// re-computes `y*` and re-targets the intercepts.
pub fn fit_copula(pits: &DMatrix<f64>, family: CopulaFamily, d0: usize, opts: &FitOptions) -> Result<CopulaFit> {
    let obj = CopulaObjective::new(pits, family, d0, opts.shrink)?;
    fit_with_objective(&obj, opts)
}

pub fn fit_with_objective(obj: &CopulaObjective, opts: &FitOptions) -> Result<CopulaFit> {
    let (family, d0) = (obj.family, obj.d0);
    let f = |th: &[f64]| obj.value(th);
    let solver = Bfgs { grad_tol: opts.grad_tol, max_iter: opts.max_iter, fd_step: 1e-5, max_step: 2.0 };
    let starts = match &opts.warm_start {
        Some(w) => {
            if w.d0() != d0 {
                return Err(CopulaError::DimensionMismatch { expected: d0, got: w.d0() });
            }
            vec![w.clone()]
        }
        None => default_starts(family, d0, opts.starts),
    };
    let mut evals = 0;
    let mut best: Option<Minimum> = None;
    if starts.len() == 1 {
        let m = solver.minimize(f, &starts[0].to_theta(family));
        evals += m.evals;
        best = Some(m);
    } else {
        let screen = Bfgs { max_iter: SCREEN_ITER, ..solver.clone() };
        for s in &starts {
            let m = screen.minimize(f, &s.to_theta(family));
            evals += m.evals;
            if m.value.is_finite() && best.as_ref().is_none_or(|b| m.value < b.value) {
                best = Some(m);
            }
        }
        if let Some(b) = best.take() {
            let m = if b.converged { b } else { solver.minimize(f, &b.x) };
            evals += m.evals;
            best = Some(m);
        }
    }
    let mut best = match best {
        Some(m) if m.value.is_finite() => m,
        _ => {
            return Err(CopulaError::Convergence {
                message: "no admissible starting point".into(),
                best: Vec::new(),
                value: f64::NAN,
            })
        }
    };
    if !best.converged {
        // simplex polish, then another quasi-Newton pass
        let step = vec![0.1; best.x.len()];
        let nm = NelderMead { max_evals: 150 * best.x.len().max(1), f_tol: 1e-12, x_tol: 1e-7 }.minimize(f, &best.x, &step);
        evals += nm.evals;
        let start = if nm.value < best.value { nm.x } else { best.x.clone() };
        let m = solver.minimize(f, &start);
        evals += m.evals;
        if m.value <= best.value || m.converged {
            best = m;
        }
    }
    let params = CopulaParams::from_theta(family, d0, &best.x);
    if !best.converged {
        return Err(CopulaError::Convergence {
            message: format!("copula ML stopped with gradient norm {:e} after {evals} evaluations", best.grad_norm),
            best: params.estimated(family),
            value: -best.value * obj.n_obs() as f64,
        });
    }
    let (filter, targets) = obj.evaluate(&params)?;
    Ok(CopulaFit {
        family,
        d0,
        shrink: obj.shrink,
        params,
        basis: Arc::new(targets.basis.clone()),
        anchor: targets.anchor.clone(),
        spectrum: targets.spectrum.clone(),
        loglik_in: filter.loglik,
        filter,
        n_obs: obj.n_obs(),
        grad_norm: best.grad_norm,
        evals,
    })
}

#[derive(Debug, Clone)]
pub struct D0Selection {
    pub selected: usize,
    pub bic: Vec<f64>,
    /// `BIC(d0) - BIC(0)`.
    pub delta_bic: Vec<f64>,
    pub fits: Vec<CopulaFit>,
}

/// Fits `d0 = 0..=d0_max` in turn, each warm-started from the previous fit,
/// and picks the lowest BIC. The selection is usually run without shrinkage.
pub fn select_d0(pits: &DMatrix<f64>, family: CopulaFamily, d0_max: usize, opts: &FitOptions) -> Result<D0Selection> {
    if d0_max > pits.ncols() {
        return Err(CopulaError::InvalidInput(format!("d0_max = {d0_max} exceeds d = {}", pits.ncols())));
    }
    let mut fits: Vec<CopulaFit> = Vec::with_capacity(d0_max + 1);
    for d0 in 0..=d0_max {
        let mut o = opts.clone();
        if let Some(prev) = fits.last() {
            let mut w = prev.params.clone();
            w.a.push(0.05);
            w.b.push(0.9);
            o.warm_start = Some(w);
        }
        fits.push(fit_copula(pits, family, d0, &o)?);
    }
    let bic: Vec<f64> = fits.iter().map(CopulaFit::bic).collect();
    let delta_bic = bic.iter().map(|b| b - bic[0]).collect();
    let selected = (0..bic.len()).fold(0, |best, k| if bic[k] < bic[best] { k } else { best });
    Ok(D0Selection { selected, bic, delta_bic, fits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OosResult {
    pub loglik: f64,
    pub per_obs_loglik: DVector<f64>,
    pub f_path: DMatrix<f64>,
    pub f_next: DVector<f64>,
}

/// Out-of-sample log-likelihood with frozen parameters and targets, the
/// filter continuing from the state after the in-sample panel.
pub fn evaluate_oos(fit: &CopulaFit, pits_oos: &DMatrix<f64>) -> Result<OosResult> {
    if pits_oos.ncols() != fit.dim() {
        return Err(CopulaError::DimensionMismatch { expected: fit.dim(), got: pits_oos.ncols() });
    }
    let shape = fit.shape()?;
    let panel = transform_pits(&shape, pits_oos)?;
    let out = run_filter_from(&shape, &fit.dynamics()?, &fit.basis, &panel, fit.filter.f_next.clone())?;
    Ok(OosResult { loglik: out.loglik, per_obs_loglik: out.per_obs_loglik, f_path: out.f_path, f_next: out.f_next })
}
