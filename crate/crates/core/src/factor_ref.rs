//! Cluster factor copula used as a benchmark: one market factor plus one
//! factor per cluster, loadings normalized to give a unit diagonal.
//!
//! `R = L̃L̃ᵀ + D` is diagonal plus rank `G + 1`, so the density is evaluated
//! through the Woodbury identity in `O(d + G²)` per observation.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::copula::{mvskewt_logpdf_from_forms, CopulaFamily, CopulaShape, QuantileCache, TransformedPanel};
use crate::error::{CopulaError, Result};
use crate::optim::Bfgs;
use crate::spectral::SpectralBasis;

/// Group membership per asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    group: Vec<usize>,
    n_groups: usize,
}

impl ClusterAssignment {
    /// From 1-based labels covering `1..=n_groups`, each used at least once.
    pub fn new(labels: &[usize]) -> Result<Self> {
        let n_groups = labels.iter().copied().max().unwrap_or(0);
        if labels.is_empty() || labels.contains(&0) {
            return Err(CopulaError::InvalidInput("group labels must be 1-based and non-empty".into()));
        }
        let mut used = vec![false; n_groups];
        labels.iter().for_each(|&g| used[g - 1] = true);
        if let Some(g) = used.iter().position(|u| !u) {
            return Err(CopulaError::InvalidInput(format!("group {} has no members", g + 1)));
        }
        Ok(ClusterAssignment { group: labels.iter().map(|g| g - 1).collect(), n_groups })
    }

    /// Parses `asset_id,group_id` lines. With `assets` given, the result
    /// follows that order; otherwise the file order. A non-numeric first
    /// line is taken as a header.
    pub fn from_csv(text: &str, assets: Option<&[String]>) -> Result<Self> {
        let mut rows: Vec<(String, usize)> = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(id), Some(g)) = (parts.next(), parts.next()) else {
                return Err(CopulaError::InvalidInput(format!("cluster file line {}: expected asset_id,group_id", k + 1)));
            };
            match g.parse::<usize>() {
                Ok(g) => rows.push((id.to_string(), g)),
                Err(_) if rows.is_empty() && k == 0 => continue,
                Err(_) => {
                    return Err(CopulaError::InvalidInput(format!("cluster file line {}: group '{g}' is not an integer", k + 1)))
                }
            }
        }
        let labels: Vec<usize> = match assets {
            None => rows.iter().map(|r| r.1).collect(),
            Some(names) => names
                .iter()
                .map(|n| {
                    rows.iter()
                        .find(|r| &r.0 == n)
                        .map(|r| r.1)
                        .ok_or_else(|| CopulaError::InvalidInput(format!("asset '{n}' missing from cluster file")))
                })
                .collect::<Result<_>>()?,
        };
        Self::new(&labels)
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn dim(&self) -> usize {
        self.group.len()
    }

    /// 0-based group of asset `i`.
    pub fn group(&self, i: usize) -> usize {
        self.group[i]
    }

    pub fn labels(&self) -> Vec<usize> {
        self.group.iter().map(|g| g + 1).collect()
    }
}

/// Raw (unnormalized) loadings per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorLoadings {
    pub market: Vec<f64>,
    pub cluster: Vec<f64>,
}

impl FactorLoadings {
    pub fn zeros(n_groups: usize) -> Self {
        FactorLoadings { market: vec![0.0; n_groups], cluster: vec![0.0; n_groups] }
    }

    fn check(&self, assign: &ClusterAssignment) -> Result<()> {
        let g = assign.n_groups();
        if self.market.len() != g || self.cluster.len() != g {
            return Err(CopulaError::DimensionMismatch { expected: g, got: self.market.len().min(self.cluster.len()) });
        }
        if self.market.iter().chain(&self.cluster).any(|v| !v.is_finite()) {
            return Err(CopulaError::domain("loadings must be finite"));
        }
        Ok(())
    }

    /// `λ̃ = λ / √(1 + λᵀλ)` for group `g`, as `(market, cluster)`.
    pub fn normalized(&self, g: usize) -> (f64, f64) {
        let s = (1.0 + self.market[g].powi(2) + self.cluster[g].powi(2)).sqrt();
        (self.market[g] / s, self.cluster[g] / s)
    }

    fn get(&self, k: usize) -> f64 {
        let g = self.market.len();
        if k < g {
            self.market[k]
        } else {
            self.cluster[k - g]
        }
    }

    fn set(&mut self, k: usize, v: f64) {
        let g = self.market.len();
        if k < g {
            self.market[k] = v;
        } else {
            self.cluster[k - g] = v;
        }
    }
}

/// `R = L̃L̃ᵀ + D` with rows `(λ̃^M_{g(i)}, e_{g(i)} λ̃^C_{g(i)})` and `D`
/// completing the unit diagonal.
pub fn factor_r(loadings: &FactorLoadings, assign: &ClusterAssignment) -> Result<DMatrix<f64>> {
    loadings.check(assign)?;
    let d = assign.dim();
    let norm: Vec<(f64, f64)> = (0..assign.n_groups()).map(|g| loadings.normalized(g)).collect();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            return 1.0;
        }
        let (gi, gj) = (assign.group(i), assign.group(j));
        let mut v = norm[gi].0 * norm[gj].0;
        if gi == gj {
            v += norm[gi].1 * norm[gi].1;
        }
        v
    }))
}

/// Woodbury factorization of `R = D + U Uᵀ` with `U = L̃`.
struct Woodbury {
    dinv: Vec<f64>,
    /// `(λ̃^M, λ̃^C)` per group.
    norm: Vec<(f64, f64)>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Woodbury {
    fn new(loadings: &FactorLoadings, assign: &ClusterAssignment) -> Result<Self> {
        let n_groups = assign.n_groups();
        let norm: Vec<(f64, f64)> = (0..n_groups).map(|g| loadings.normalized(g)).collect();
        let k = n_groups + 1;
        let mut m = DMatrix::identity(k, k);
        let mut dinv = Vec::with_capacity(assign.dim());
        let mut log_det = 0.0;
        for i in 0..assign.dim() {
            let g = assign.group(i);
            let (mt, ct) = norm[g];
            let di = 1.0 - mt * mt - ct * ct;
            log_det += di.ln();
            let w = 1.0 / di;
            dinv.push(w);
            m[(0, 0)] += mt * mt * w;
            m[(0, g + 1)] += mt * ct * w;
            m[(g + 1, g + 1)] += ct * ct * w;
        }
        for g in 1..k {
            m[(g, 0)] = m[(0, g)];
        }
        let chol = Cholesky::new(m).ok_or(CopulaError::Infeasible { min_eigenvalue: 0.0 })?;
        log_det += 2.0 * chol.l_dirty().diagonal().iter().map(|v: &f64| v.ln()).sum::<f64>();
        Ok(Woodbury { dinv, norm, chol, log_det })
    }

    /// `Uᵀ D⁻¹ x`.
    fn project(&self, assign: &ClusterAssignment, x: &[f64]) -> DVector<f64> {
        let mut b = DVector::zeros(self.norm.len() + 1);
        for (i, xi) in x.iter().enumerate() {
            let g = assign.group(i);
            let v = xi * self.dinv[i];
            b[0] += self.norm[g].0 * v;
            b[g + 1] += self.norm[g].1 * v;
        }
        b
    }

    /// `xᵀ R⁻¹ z` given the projections of `x` and `z`.
    fn inner(&self, x: &[f64], bx: &DVector<f64>, z: &[f64], bz: &DVector<f64>) -> f64 {
        let diag: f64 = x.iter().zip(z).zip(&self.dinv).map(|((a, b), w)| a * b * w).sum();
        diag - bx.dot(&self.chol.solve(bz))
    }

    fn logpdf(&self, assign: &ClusterAssignment, shape: &CopulaShape, y: &[f64], gamma: &(Vec<f64>, DVector<f64>, f64)) -> Result<f64> {
        let by = self.project(assign, y);
        let q = self.inner(y, &by, y, &by);
        let (g, bg, ggq) = gamma;
        let yg = if shape.is_symmetric() { 0.0 } else { self.inner(y, &by, g, bg) };
        mvskewt_logpdf_from_forms(shape, self.log_det, q, yg, *ggq)
    }

    fn gamma_forms(&self, assign: &ClusterAssignment, shape: &CopulaShape) -> (Vec<f64>, DVector<f64>, f64) {
        let g: Vec<f64> = shape.gamma().iter().copied().collect();
        let bg = self.project(assign, &g);
        let gg = self.inner(&g, &bg, &g, &bg);
        (g, bg, gg)
    }
}

/// Static parameters. In static mode the loadings equal `ω`; in dynamic
/// mode `λ_{t+1} = ω + α ∇_t + β λ_t` starting from `ω / (1 - β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub omega_market: Vec<f64>,
    pub omega_cluster: Vec<f64>,
    pub alpha_market: f64,
    pub beta_market: f64,
    pub alpha_cluster: f64,
    pub beta_cluster: f64,
    pub nu: f64,
    pub gamma: f64,
}

impl FactorParams {
    pub fn shape(&self, family: CopulaFamily, d: usize) -> Result<CopulaShape> {
        match family {
            CopulaFamily::Gaussian => Ok(CopulaShape::gaussian(d)),
            CopulaFamily::StudentT => CopulaShape::student_t(self.nu, d),
            CopulaFamily::SkewT => CopulaShape::skew_t(self.nu, self.gamma, d),
        }
    }

    /// Long-run loadings `ω / (1 - β)`.
    pub fn unconditional(&self) -> FactorLoadings {
        FactorLoadings {
            market: self.omega_market.iter().map(|w| w / (1.0 - self.beta_market)).collect(),
            cluster: self.omega_cluster.iter().map(|w| w / (1.0 - self.beta_cluster)).collect(),
        }
    }

    fn to_theta(&self, family: CopulaFamily, dynamic: bool) -> Vec<f64> {
        let mut th: Vec<f64> = self.omega_market.iter().chain(&self.omega_cluster).copied().collect();
        if family != CopulaFamily::Gaussian {
            th.push((self.nu - 4.0).ln());
        }
        if family == CopulaFamily::SkewT {
            th.push(self.gamma);
        }
        if dynamic {
            let logit = |p: f64| (p / (1.0 - p)).ln();
            th.extend([self.alpha_market.ln(), logit(self.beta_market), self.alpha_cluster.ln(), logit(self.beta_cluster)]);
        }
        th
    }

    fn from_theta(family: CopulaFamily, dynamic: bool, n_groups: usize, th: &[f64]) -> Self {
        let mut it = th.iter().copied();
        let mut next = || it.next().expect("parameter vector length");
        let omega_market: Vec<f64> = (0..n_groups).map(|_| next()).collect();
        let omega_cluster: Vec<f64> = (0..n_groups).map(|_| next()).collect();
        let nu = if family == CopulaFamily::Gaussian { f64::INFINITY } else { 4.0 + next().exp() };
        let gamma = if family == CopulaFamily::SkewT { next() } else { 0.0 };
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let (alpha_market, beta_market, alpha_cluster, beta_cluster) =
            if dynamic { (next().exp(), sig(next()), next().exp(), sig(next())) } else { (0.0, 0.0, 0.0, 0.0) };
        FactorParams { omega_market, omega_cluster, alpha_market, beta_market, alpha_cluster, beta_cluster, nu, gamma }
    }
}

#[derive(Debug, Clone)]
pub struct FactorFit {
    pub family: CopulaFamily,
    pub dynamic: bool,
    pub assign: ClusterAssignment,
    pub params: FactorParams,
    pub loglik_in: f64,
    pub per_obs_loglik: DVector<f64>,
    /// Loadings predicted for the observation after the in-sample panel.
    pub state_next: FactorLoadings,
    pub n_obs: usize,
    pub grad_norm: f64,
}

impl FactorFit {
    pub fn n_params(&self) -> usize {
        2 * self.assign.n_groups() + self.family.n_shape_params() + if self.dynamic { 4 } else { 0 }
    }

    pub fn shape(&self) -> Result<CopulaShape> {
        self.params.shape(self.family, self.assign.dim())
    }

    /// Unconditional dependence matrix.
    pub fn correlation(&self) -> Result<DMatrix<f64>> {
        factor_r(&self.params.unconditional(), &self.assign)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorFilterOutput {
    pub loglik: f64,
    pub per_obs_loglik: DVector<f64>,
    pub state_next: FactorLoadings,
}

const LOADING_LIMIT: f64 = 1e3;

/// Log-likelihood of a transformed panel, running the loading recursion in
/// dynamic mode from `init`. Scores are central differences with step
/// `1e-5 (1 + |λ|)`.
pub fn factor_filter(
    params: &FactorParams,
    assign: &ClusterAssignment,
    shape: &CopulaShape,
    panel: &TransformedPanel,
    dynamic: bool,
    init: FactorLoadings,
) -> Result<FactorFilterOutput> {
    let (t_len, d) = panel.ystar.shape();
    if d != assign.dim() {
        return Err(CopulaError::DimensionMismatch { expected: assign.dim(), got: d });
    }
    init.check(assign)?;
    let n_load = 2 * assign.n_groups();
    let mut lam = init;
    let mut per_obs = DVector::zeros(t_len);
    let mut fixed = None;
    if !dynamic {
        let wb = Woodbury::new(&lam, assign)?;
        let gf = wb.gamma_forms(assign, shape);
        fixed = Some((wb, gf));
    }
    let mut y = vec![0.0; d];
    for t in 0..t_len {
        for (j, v) in y.iter_mut().enumerate() {
            *v = panel.ystar[(t, j)];
        }
        let ll = match &fixed {
            Some((wb, gf)) => wb.logpdf(assign, shape, &y, gf)?,
            None => {
                let wb = Woodbury::new(&lam, assign)?;
                let gf = wb.gamma_forms(assign, shape);
                let ll = wb.logpdf(assign, shape, &y, &gf)?;
                let mut score = vec![0.0; n_load];
                for (k, s) in score.iter_mut().enumerate() {
                    let base = lam.get(k);
                    let h = 1e-5 * (1.0 + base.abs());
                    let eval = |v: f64| -> Result<f64> {
                        let mut l = lam.clone();
                        l.set(k, v);
                        let w = Woodbury::new(&l, assign)?;
                        let g = w.gamma_forms(assign, shape);
                        w.logpdf(assign, shape, &y, &g)
                    };
                    *s = (eval(base + h)? - eval(base - h)?) / (2.0 * h);
                }
                let g = assign.n_groups();
                for k in 0..g {
                    lam.market[k] = params.omega_market[k] + params.alpha_market * score[k] + params.beta_market * lam.market[k];
                    lam.cluster[k] =
                        params.omega_cluster[k] + params.alpha_cluster * score[g + k] + params.beta_cluster * lam.cluster[k];
                }
                if lam.market.iter().chain(&lam.cluster).any(|v| !v.is_finite() || v.abs() > LOADING_LIMIT) {
                    return Err(CopulaError::FilterDivergence { t, reason: "loading out of range".into(), f: Vec::new() });
                }
                ll
            }
        };
        let ll = ll - panel.marginal_logpdf[t];
        if !ll.is_finite() {
            return Err(CopulaError::FilterDivergence { t, reason: format!("log-likelihood {ll}"), f: Vec::new() });
        }
        per_obs[t] = ll;
    }
    Ok(FactorFilterOutput { loglik: per_obs.sum(), per_obs_loglik: per_obs, state_next: lam })
}

fn initial_state(params: &FactorParams, dynamic: bool) -> FactorLoadings {
    if dynamic {
        params.unconditional()
    } else {
        FactorLoadings { market: params.omega_market.clone(), cluster: params.omega_cluster.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct FactorFitOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub warm_start: Option<FactorParams>,
}

impl Default for FactorFitOptions {
    fn default() -> Self {
        FactorFitOptions { grad_tol: 1e-5, max_iter: 400, warm_start: None }
    }
}

/// Moment-based starting loadings from normal scores of the PITs.
fn moment_start(pits: &DMatrix<f64>, assign: &ClusterAssignment) -> FactorLoadings {
    let (t, d) = pits.shape();
    let n = Normal::standard();
    let z = DMatrix::from_fn(t, d, |r, c| n.inverse_cdf(pits[(r, c)]));
    let mean = z.row_mean();
    let centered = DMatrix::from_fn(t, d, |r, c| z[(r, c)] - mean[c]);
    let cov = centered.transpose() * &centered;
    let sd: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    let g = assign.n_groups();
    let mut within = vec![(0.0, 0usize); g];
    let mut between = vec![vec![(0.0, 0usize); g]; g];
    for i in 0..d {
        for j in 0..i {
            let c = cov[(i, j)] / (sd[i] * sd[j]);
            let (gi, gj) = (assign.group(i), assign.group(j));
            if gi == gj {
                within[gi].0 += c;
                within[gi].1 += 1;
            } else {
                between[gi][gj].0 += c;
                between[gi][gj].1 += 1;
                between[gj][gi].0 += c;
                between[gj][gi].1 += 1;
            }
        }
    }
    let avg = |(s, n): (f64, usize)| if n == 0 { None } else { Some(s / n as f64) };
    let all_between: Vec<f64> = (0..g).flat_map(|a| (0..g).filter_map(move |b| if a != b { Some((a, b)) } else { None })).filter_map(|(a, b)| avg(between[a][b])).collect();
    let mbar = if all_between.is_empty() {
        None
    } else {
        Some((all_between.iter().sum::<f64>() / all_between.len() as f64).max(1e-4).sqrt())
    };
    let mut out = FactorLoadings::zeros(g);
    for k in 0..g {
        let rw = avg(within[k]).unwrap_or(0.3).clamp(0.0, 0.95);
        let mt = match mbar {
            Some(mb) => {
                let row: Vec<f64> = (0..g).filter(|&h| h != k).filter_map(|h| avg(between[k][h])).collect();
                (row.iter().sum::<f64>() / row.len().max(1) as f64 / mb).clamp(0.05, 0.95)
            }
            None => (0.5 * rw).sqrt(),
        };
        let ct2 = (rw - mt * mt).clamp(0.01, (0.97 - mt * mt).max(0.01));
        let rest = (1.0 - mt * mt - ct2).max(0.02);
        out.market[k] = mt / rest.sqrt();
        out.cluster[k] = ct2.sqrt() / rest.sqrt();
    }
    out
}

/// Maximum likelihood for the factor copula with given clusters.
pub fn fit_factor_copula(
    pits: &DMatrix<f64>,
    assign: &ClusterAssignment,
    family: CopulaFamily,
    dynamic: bool,
    opts: &FactorFitOptions,
) -> Result<FactorFit> {
    let (t, d) = pits.shape();
    if d != assign.dim() {
        return Err(CopulaError::DimensionMismatch { expected: assign.dim(), got: d });
    }
    let g = assign.n_groups();
    let n_par = 2 * g + family.n_shape_params() + if dynamic { 4 } else { 0 };
    if t <= n_par {
        return Err(CopulaError::Unsupported(format!("factor fit needs T > {n_par} observations, got {t}")));
    }
    let cache = QuantileCache::with_capacity(Arc::new(pits.clone()), 8);
    let start = match &opts.warm_start {
        Some(w) => w.clone(),
        None => {
            let l = moment_start(pits, assign);
            let beta = if dynamic { 0.95 } else { 0.0 };
            FactorParams {
                omega_market: l.market.iter().map(|v| v * (1.0 - beta)).collect(),
                omega_cluster: l.cluster.iter().map(|v| v * (1.0 - beta)).collect(),
                alpha_market: 0.02,
                beta_market: beta,
                alpha_cluster: 0.02,
                beta_cluster: beta,
                nu: 25.0,
                gamma: if family == CopulaFamily::SkewT { -0.1 } else { 0.0 },
            }
        }
    };
    let evaluate = |p: &FactorParams| -> Result<FactorFilterOutput> {
        let shape = p.shape(family, d)?;
        let panel = cache.get(&shape)?;
        factor_filter(p, assign, &shape, &panel, dynamic, initial_state(p, dynamic))
    };
    let objective = |th: &[f64]| {
        let p = FactorParams::from_theta(family, dynamic, g, th);
        match evaluate(&p) {
            Ok(out) => -out.loglik / t as f64,
            Err(_) => f64::NAN,
        }
    };
    let solver = Bfgs { grad_tol: opts.grad_tol, max_iter: opts.max_iter, fd_step: 1e-5, max_step: 2.0 };
    let m = solver.minimize(objective, &start.to_theta(family, dynamic));
    let params = FactorParams::from_theta(family, dynamic, g, &m.x);
    if !m.converged {
        return Err(CopulaError::Convergence {
            message: format!("factor copula ML stopped with gradient norm {:e}", m.grad_norm),
            best: m.x.clone(),
            value: -m.value * t as f64,
        });
    }
    let out = evaluate(&params)?;
    Ok(FactorFit {
        family,
        dynamic,
        assign: assign.clone(),
        params,
        loglik_in: out.loglik,
        per_obs_loglik: out.per_obs_loglik,
        state_next: out.state_next,
        n_obs: t,
        grad_norm: m.grad_norm,
    })
}

/// Out-of-sample log-likelihood; the dynamic recursion continues from the
/// in-sample end state.
pub fn evaluate_factor_oos(fit: &FactorFit, pits_oos: &DMatrix<f64>) -> Result<FactorFilterOutput> {
    let shape = fit.shape()?;
    let panel = crate::copula::transform_pits(&shape, pits_oos)?;
    factor_filter(&fit.params, &fit.assign, &shape, &panel, fit.dynamic, fit.state_next.clone())
}

/// `|⟨v₁, w₁⟩|` between the leading eigenvector of the factor model's
/// unconditional correlation matrix and the first spectral basis vector.
pub fn compare_first_factor(fit: &FactorFit, basis: &SpectralBasis) -> Result<f64> {
    let r = fit.correlation()?;
    if r.nrows() != basis.dim() {
        return Err(CopulaError::DimensionMismatch { expected: basis.dim(), got: r.nrows() });
    }
    let (fb, _) = SpectralBasis::from_symmetric(&r)?;
    Ok(first_vector_alignment(fb.w().column(0).as_slice(), basis.w().column(0).as_slice()))
}

/// Absolute cosine between two vectors.
pub fn first_vector_alignment(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs().min(1.0)
}
