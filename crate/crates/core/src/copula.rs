//! Multivariate skewed t density, copula density, simulation and moment inversion.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{CopulaError, Result};
use crate::special::quadrature::{integrate, integrate_lower_tail, integrate_upper_tail};
use crate::special::skewt::{inverse_gamma_law, QUAD_FLOOR};
use crate::special::{log_bessel_k_with_ratio, SkewTMarginal};
use crate::spectral::{symmetric_sqrt, to_correlation, SpectralBasis, SpectralState};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const PIT_EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CopulaFamily {
    Gaussian,
    StudentT,
    SkewT,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 3] = [CopulaFamily::Gaussian, CopulaFamily::StudentT, CopulaFamily::SkewT];

    /// Number of shape parameters estimated for this family.
    pub fn n_shape_params(self) -> usize {
        match self {
            CopulaFamily::Gaussian => 0,
            CopulaFamily::StudentT => 1,
            CopulaFamily::SkewT => 2,
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::StudentT => "student-t",
            CopulaFamily::SkewT => "skew-t",
        })
    }
}

impl FromStr for CopulaFamily {
    type Err = CopulaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(CopulaFamily::Gaussian),
            "student-t" | "studentt" | "student" | "t" => Ok(CopulaFamily::StudentT),
            "skew-t" | "skewt" | "skewed-t" => Ok(CopulaFamily::SkewT),
            other => Err(CopulaError::InvalidInput(format!("unknown copula family '{other}'"))),
        }
    }
}

/// Shape of the copula: degrees of freedom and skewness vector.
/// The Gaussian copula is represented by `nu = +inf`, `gamma = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaShape {
    nu: f64,
    gamma: DVector<f64>,
}

impl CopulaShape {
    pub fn new(nu: f64, gamma: DVector<f64>) -> Result<Self> {
        if nu.is_nan() || nu <= 2.0 {
            return Err(CopulaError::domain(format!("nu must exceed 2, got {nu}")));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(CopulaError::domain("gamma must be finite"));
        }
        if nu.is_infinite() && gamma.iter().any(|&g| g != 0.0) {
            return Err(CopulaError::domain("the Gaussian limit requires gamma = 0"));
        }
        Ok(CopulaShape { nu, gamma })
    }

    pub fn gaussian(d: usize) -> Self {
        CopulaShape { nu: f64::INFINITY, gamma: DVector::zeros(d) }
    }

    pub fn student_t(nu: f64, d: usize) -> Result<Self> {
        Self::new(nu, DVector::zeros(d))
    }

    pub fn skew_t(nu: f64, gamma: f64, d: usize) -> Result<Self> {
        Self::new(nu, DVector::from_element(d, gamma))
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_gaussian(&self) -> bool {
        self.nu.is_infinite()
    }

    pub fn is_symmetric(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }

    pub fn family(&self) -> CopulaFamily {
        if self.is_gaussian() {
            CopulaFamily::Gaussian
        } else if self.is_symmetric() {
            CopulaFamily::StudentT
        } else {
            CopulaFamily::SkewT
        }
    }

    /// The common skewness when all entries of `gamma` coincide.
    pub fn common_gamma(&self) -> Option<f64> {
        let g0 = *self.gamma.iter().next()?;
        self.gamma.iter().all(|&g| g == g0).then_some(g0)
    }

    pub fn marginal(&self, i: usize) -> Result<MarginalLaw> {
        if self.is_gaussian() {
            Ok(MarginalLaw::Normal)
        } else {
            Ok(MarginalLaw::SkewT(SkewTMarginal::new(self.nu, self.gamma[i])?))
        }
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(CopulaError::DimensionMismatch { expected: self.dim(), got: d });
        }
        Ok(())
    }
}

/// Marginal law of a single coordinate of `y*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalLaw {
    Normal,
    SkewT(SkewTMarginal),
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

impl MarginalLaw {
    pub fn logpdf(&self, y: f64) -> f64 {
        match self {
            MarginalLaw::Normal => -0.5 * LN_2PI - 0.5 * y * y,
            MarginalLaw::SkewT(m) => m.logpdf(y),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            MarginalLaw::Normal => std_normal().cdf(y),
            MarginalLaw::SkewT(m) => m.cdf(y),
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(CopulaError::domain(format!("quantile level must lie in (0,1), got {u}")));
        }
        match self {
            MarginalLaw::Normal => Ok(std_normal().inverse_cdf(u)),
            MarginalLaw::SkewT(m) => m.quantile(u),
        }
    }

    /// Quantiles of many levels, evaluated in parallel sorted chunks.
    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<f64>> {
        match self {
            MarginalLaw::Normal => levels.iter().map(|&u| self.quantile(u)).collect(),
            MarginalLaw::SkewT(m) => {
                let mut order: Vec<usize> = (0..levels.len()).collect();
                order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
                let sorted: Vec<f64> = order.iter().map(|&i| levels[i]).collect();
                let parts: Vec<Vec<f64>> = sorted
                    .par_chunks(256)
                    .map(|c| m.quantiles(c))
                    .collect::<Result<_>>()?;
                let mut out = vec![0.0; levels.len()];
                for (k, y) in parts.into_iter().flatten().enumerate() {
                    out[order[k]] = y;
                }
                Ok(out)
            }
        }
    }

    /// Cdf values at many points; integrals are accumulated between
    /// neighbouring sorted points, from each tail towards the mode.
    pub fn cdfs(&self, ys: &[f64]) -> Vec<f64> {
        let m = match self {
            MarginalLaw::Normal => return ys.iter().map(|&y| self.cdf(y)).collect(),
            MarginalLaw::SkewT(m) => m,
        };
        let mut order: Vec<usize> = (0..ys.len()).collect();
        order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
        let split = order.partition_point(|&i| ys[i] <= m.mode());
        let pdf = |t: f64| m.pdf(t);
        let mut out = vec![0.0; ys.len()];
        let mut prev: Option<(f64, f64)> = None;
        for &i in &order[..split] {
            let y = ys[i];
            let f = match prev {
                None => integrate_lower_tail(pdf, y, 1e-300, 1e-12),
                Some((py, pf)) => pf + integrate(pdf, py, y, 1e-300, 1e-12),
            };
            out[i] = f;
            prev = Some((y, f));
        }
        let mut prev: Option<(f64, f64)> = None;
        for &i in order[split..].iter().rev() {
            let y = ys[i];
            let upper = match prev {
                None => integrate_upper_tail(pdf, y, 1e-300, 1e-12),
                Some((py, pu)) => pu + integrate(pdf, y, py, 1e-300, 1e-12),
            };
            out[i] = 1.0 - upper;
            prev = Some((y, upper));
        }
        out
    }
}

/// Log-normalizing constant of the skewed t density for dimension `d`
/// excluding the `α`-dependent factor.
fn skew_log_const(nu: f64, d: usize) -> f64 {
    (1.0 - 0.5 * nu) * std::f64::consts::LN_2 + 0.5 * nu * nu.ln() - 0.5 * d as f64 * LN_2PI - ln_gamma(0.5 * nu)
}

/// `log g(y*)` from `log|R|`, `Q = y*ᵀR⁻¹y*`, `y*ᵀR⁻¹γ` and `γᵀR⁻¹γ`, for
/// dependence matrices that are not held in spectral form.
pub fn mvskewt_logpdf_from_forms(shape: &CopulaShape, log_det: f64, q: f64, y_rinv_g: f64, g_rinv_g: f64) -> Result<f64> {
    let df = shape.dim() as f64;
    if shape.is_gaussian() {
        return Ok(-0.5 * df * LN_2PI - 0.5 * log_det - 0.5 * q);
    }
    let nu = shape.nu();
    if shape.is_symmetric() {
        return Ok(ln_gamma(0.5 * (nu + df)) - ln_gamma(0.5 * nu) - 0.5 * df * (nu * std::f64::consts::PI).ln()
            - 0.5 * log_det
            - 0.5 * (nu + df) * (q / nu).ln_1p());
    }
    let n = 0.5 * (nu + df);
    let s = nu + q.max(0.0);
    let alpha_t = (g_rinv_g * s).max(QUAD_FLOOR).sqrt();
    let lk = log_bessel_k_with_ratio(n, alpha_t)?.0;
    Ok(skew_log_const(nu, shape.dim()) - 0.5 * log_det + y_rinv_g + n * alpha_t.ln() + lk - n * s.ln())
}

/// Quantities shared by the density and its score at one observation.
#[derive(Debug, Clone)]
pub(crate) struct ObsTerms {
    /// `ỹ = Wᵀ D^{1/2} y*`.
    pub yt: DVector<f64>,
    /// `γ̃ = Wᵀ D^{1/2} γ` (skewed case only).
    pub gt: Option<DVector<f64>>,
    /// `y*ᵀ R⁻¹ y*`.
    pub q: f64,
    /// `γᵀ R⁻¹ γ`.
    pub alpha2: f64,
    /// `α̃ = α (ν + Q)^{1/2}`.
    pub alpha_t: f64,
    /// `k'_n(α̃)` with `n = (ν + d)/2`.
    pub kp: f64,
    pub logpdf: f64,
}

pub(crate) fn obs_terms(shape: &CopulaShape, state: &SpectralState, ystar: &DVector<f64>) -> Result<ObsTerms> {
    let d = state.dim();
    shape.check_dim(d)?;
    if ystar.len() != d {
        return Err(CopulaError::DimensionMismatch { expected: d, got: ystar.len() });
    }
    let lam = state.lambda();
    let yt = state.rotate(ystar);
    let q: f64 = yt.iter().zip(lam.iter()).map(|(a, l)| a * a / l).sum();
    let log_det = state.log_det_r();
    let df = d as f64;
    let mut terms = ObsTerms { yt, gt: None, q, alpha2: 0.0, alpha_t: 0.0, kp: 0.0, logpdf: 0.0 };
    if shape.is_gaussian() {
        terms.logpdf = -0.5 * df * LN_2PI - 0.5 * log_det - 0.5 * q;
        return Ok(terms);
    }
    let nu = shape.nu();
    if shape.is_symmetric() {
        terms.logpdf = ln_gamma(0.5 * (nu + df)) - ln_gamma(0.5 * nu) - 0.5 * df * (nu * std::f64::consts::PI).ln()
            - 0.5 * log_det
            - 0.5 * (nu + df) * (q / nu).ln_1p();
        return Ok(terms);
    }
    let gt = state.rotate(shape.gamma());
    let mut alpha2 = 0.0;
    let mut yb = 0.0;
    for k in 0..d {
        alpha2 += gt[k] * gt[k] / lam[k];
        yb += terms.yt[k] * gt[k] / lam[k];
    }
    let n = 0.5 * (nu + df);
    let s = nu + q.max(0.0);
    let alpha_t = (alpha2 * s).max(QUAD_FLOOR).sqrt();
    let (lk, lower) = log_bessel_k_with_ratio(n, alpha_t)?;
    terms.logpdf = skew_log_const(nu, d) - 0.5 * log_det + yb + n * alpha_t.ln() + lk - n * s.ln();
    terms.gt = Some(gt);
    terms.alpha2 = alpha2;
    terms.alpha_t = alpha_t;
    terms.kp = -lower;
    Ok(terms)
}

/// `log g(y*)` for the current dependence state.
pub fn mvskewt_logpdf(shape: &CopulaShape, state: &SpectralState, ystar: &DVector<f64>) -> Result<f64> {
    obs_terms(shape, state, ystar).map(|t| t.logpdf)
}

/// Copula log density at PIT vector `u`.
pub fn copula_logdensity(shape: &CopulaShape, state: &SpectralState, u: &DVector<f64>) -> Result<f64> {
    let d = state.dim();
    shape.check_dim(d)?;
    if u.len() != d {
        return Err(CopulaError::DimensionMismatch { expected: d, got: u.len() });
    }
    let mut ystar = DVector::zeros(d);
    let mut marg = 0.0;
    for i in 0..d {
        let law = shape.marginal(i)?;
        let y = law.quantile(u[i])?;
        ystar[i] = y;
        marg += law.logpdf(y);
    }
    Ok(mvskewt_logpdf(shape, state, &ystar)? - marg)
}

/// Copula log density from precomputed `y*` and the sum of its marginal log densities.
pub fn copula_logdensity_ystar(
    shape: &CopulaShape,
    state: &SpectralState,
    ystar: &DVector<f64>,
    marginal_logpdf_sum: f64,
) -> Result<f64> {
    Ok(mvskewt_logpdf(shape, state, ystar)? - marginal_logpdf_sum)
}

/// PIT panel mapped through the marginal quantile functions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPanel {
    /// `T × d` matrix of `y*`.
    pub ystar: DMatrix<f64>,
    /// Per-row sums of the marginal log densities at `y*`.
    pub marginal_logpdf: DVector<f64>,
}

/// Quantile-transform a `T × d` PIT panel. Columns sharing a marginal law
/// are processed together over their distinct levels.
pub fn transform_pits(shape: &CopulaShape, pits: &DMatrix<f64>) -> Result<TransformedPanel> {
    let (t_len, d) = pits.shape();
    shape.check_dim(d)?;
    if let Some(bad) = pits.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
        return Err(CopulaError::domain(format!("PIT value {bad} outside (0,1)")));
    }
    let mut groups: Vec<(u64, Vec<usize>)> = Vec::new();
    for i in 0..d {
        let key = shape.gamma()[i].to_bits();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, cols)) => cols.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let mut ystar = DMatrix::zeros(t_len, d);
    let mut logpdf = DMatrix::zeros(t_len, d);
    for (_, cols) in &groups {
        let law = shape.marginal(cols[0])?;
        let mut levels: Vec<f64> = cols.iter().flat_map(|&c| pits.column(c).iter().copied().collect::<Vec<_>>()).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let qs = law.quantiles(&levels)?;
        let lps: Vec<f64> = qs.par_iter().map(|&y| law.logpdf(y)).collect();
        for &c in cols {
            for t in 0..t_len {
                let k = levels.partition_point(|&v| v < pits[(t, c)]);
                ystar[(t, c)] = qs[k];
                logpdf[(t, c)] = lps[k];
            }
        }
    }
    let marginal_logpdf = DVector::from_fn(t_len, |t, _| logpdf.row(t).sum());
    Ok(TransformedPanel { ystar, marginal_logpdf })
}

/// Small cache of quantile-transformed panels keyed by the exact shape.
#[derive(Debug)]
pub struct QuantileCache {
    pits: Arc<DMatrix<f64>>,
    capacity: usize,
    entries: Mutex<VecDeque<(ShapeKey, Arc<TransformedPanel>)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ShapeKey(u64, Vec<u64>);

impl ShapeKey {
    fn of(shape: &CopulaShape) -> Self {
        ShapeKey(shape.nu().to_bits(), shape.gamma().iter().map(|g| g.to_bits()).collect())
    }
}

impl QuantileCache {
    pub fn new(pits: Arc<DMatrix<f64>>) -> Self {
        Self::with_capacity(pits, 16)
    }

    pub fn with_capacity(pits: Arc<DMatrix<f64>>, capacity: usize) -> Self {
        QuantileCache { pits, capacity: capacity.max(1), entries: Mutex::new(VecDeque::new()) }
    }

    pub fn pits(&self) -> &Arc<DMatrix<f64>> {
        &self.pits
    }

    pub fn get(&self, shape: &CopulaShape) -> Result<Arc<TransformedPanel>> {
        let key = ShapeKey::of(shape);
        {
            let entries = self.entries.lock().expect("cache lock");
            if let Some((_, p)) = entries.iter().find(|(k, _)| *k == key) {
                return Ok(Arc::clone(p));
            }
        }
        let panel = Arc::new(transform_pits(shape, &self.pits)?);
        let mut entries = self.entries.lock().expect("cache lock");
        if !entries.iter().any(|(k, _)| *k == key) {
            if entries.len() >= self.capacity {
                entries.pop_front();
            }
            entries.push_back((key, Arc::clone(&panel)));
        }
        Ok(panel)
    }
}

/// Draws `y* = v γ + √v R^{1/2} z` for a fixed `R`.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    gamma: DVector<f64>,
    root: DMatrix<f64>,
    mixing: Option<rand_distr::Gamma<f64>>,
}

impl MixtureSampler {
    pub fn new(shape: &CopulaShape, r: &DMatrix<f64>) -> Result<Self> {
        shape.check_dim(r.nrows())?;
        let root = symmetric_sqrt(r)?;
        let mixing = if shape.is_gaussian() {
            None
        } else {
            Some(inverse_gamma_law(0.5 * shape.nu(), 0.5 * shape.nu())?)
        };
        Ok(MixtureSampler { gamma: shape.gamma().clone(), root, mixing })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.gamma.len();
        let v = match &self.mixing {
            Some(g) => 1.0 / g.sample(rng),
            None => 1.0,
        };
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let mut y = &self.root * z * v.sqrt();
        if self.mixing.is_some() {
            y.axpy(v, &self.gamma, 1.0);
        }
        y
    }
}

/// `n` draws of `y*` (rows) and their PITs under the marginal laws.
pub fn sample_mvskewt<R: Rng + ?Sized>(
    rng: &mut R,
    shape: &CopulaShape,
    state: &SpectralState,
    n: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sampler = MixtureSampler::new(shape, state.r())?;
    let d = state.dim();
    let mut ys = DMatrix::zeros(n, d);
    for t in 0..n {
        let y = sampler.draw(rng);
        ys.set_row(t, &y.transpose());
    }
    let pits = pits_of(shape, &ys)?;
    Ok((ys, pits))
}

/// Maps a `T × d` panel of `y*` to PITs, clamped inside `(0, 1)`.
pub fn pits_of(shape: &CopulaShape, ystar: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = ystar.shape();
    shape.check_dim(d)?;
    let cols: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let law = shape.marginal(i)?;
            let col: Vec<f64> = ystar.column(i).iter().copied().collect();
            Ok(law.cdfs(&col))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, d, |t, i| cols[i][t].clamp(PIT_EPS, 1.0 - PIT_EPS)))
}

/// Moment-implied dependence matrix and its spectral decomposition.
#[derive(Debug, Clone)]
pub struct ImpliedDependence {
    /// `Σ̂ = ((ν-2)/ν) Cov - 2ν/((ν-2)(ν-4)) γγᵀ`.
    pub sigma: DMatrix<f64>,
    pub basis: SpectralBasis,
    /// Descending eigenvalues of `Σ̂`.
    pub eigenvalues: DVector<f64>,
}

impl ImpliedDependence {
    /// `diag(Σ̂)^{-1/2} Σ̂ diag(Σ̂)^{-1/2}`.
    pub fn correlation(&self) -> Result<DMatrix<f64>> {
        to_correlation(&self.sigma)
    }
}

/// Inverts the covariance identity of the mixture for `R`.
pub fn implied_r_from_cov(cov: &DMatrix<f64>, shape: &CopulaShape) -> Result<ImpliedDependence> {
    let d = cov.nrows();
    if !cov.is_square() {
        return Err(CopulaError::DimensionMismatch { expected: d, got: cov.ncols() });
    }
    shape.check_dim(d)?;
    let sigma = if shape.is_gaussian() {
        cov.clone()
    } else {
        let nu = shape.nu();
        if !shape.is_symmetric() && nu <= 4.0 {
            return Err(CopulaError::domain(format!("moment targeting with skewness needs nu > 4, got {nu}")));
        }
        let mut s = cov * ((nu - 2.0) / nu);
        if !shape.is_symmetric() {
            let c = 2.0 * nu / ((nu - 2.0) * (nu - 4.0));
            let g = shape.gamma();
            s -= g * g.transpose() * c;
        }
        s
    };
    let (basis, eigenvalues) = SpectralBasis::from_symmetric(&sigma)?;
    let min = eigenvalues[d - 1];
    if !(min > 1e-12 * eigenvalues[0].abs().max(1e-300)) {
        return Err(CopulaError::Infeasible { min_eigenvalue: min });
    }
    Ok(ImpliedDependence { sigma, basis, eigenvalues })
}

/// `Cov(y*) = ν/(ν-2) R + 2ν²/((ν-2)²(ν-4)) γγᵀ`.
pub fn population_covariance(r: &DMatrix<f64>, shape: &CopulaShape) -> Result<DMatrix<f64>> {
    shape.check_dim(r.nrows())?;
    if shape.is_gaussian() {
        return Ok(r.clone());
    }
    let nu = shape.nu();
    if nu <= 4.0 {
        return Err(CopulaError::domain(format!("covariance needs nu > 4, got {nu}")));
    }
    let g = shape.gamma();
    Ok(r * (nu / (nu - 2.0)) + g * g.transpose() * (2.0 * nu * nu / ((nu - 2.0).powi(2) * (nu - 4.0))))
}

/// Sample covariance `T⁻¹ Σ_t (y_t - ȳ)(y_t - ȳ)ᵀ` of the rows of a panel.
pub fn sample_covariance(panel: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = panel.shape();
    let t = n.max(1) as f64;
    let mean = panel.row_mean();
    let mut centered = panel.clone();
    for j in 0..d {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let mut m = centered.tr_mul(&centered) / t;
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Marginal laws for each coordinate, keyed by distinct skewness values.
pub fn marginal_laws(shape: &CopulaShape) -> Result<Vec<MarginalLaw>> {
    let mut seen: HashMap<u64, MarginalLaw> = HashMap::new();
    (0..shape.dim())
        .map(|i| {
            let key = shape.gamma()[i].to_bits();
            if let Some(m) = seen.get(&key) {
                return Ok(*m);
            }
            let m = shape.marginal(i)?;
            seen.insert(key, m);
            Ok(m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_parsing_round_trips() {
        for f in CopulaFamily::ALL {
            assert_eq!(f.to_string().parse::<CopulaFamily>().unwrap(), f);
        }
        assert!("clayton".parse::<CopulaFamily>().is_err());
    }

    #[test]
    fn shape_validation() {
        assert!(CopulaShape::student_t(2.0, 3).is_err());
        assert!(CopulaShape::new(f64::INFINITY, DVector::from_element(2, 0.1)).is_err());
        assert_eq!(CopulaShape::skew_t(10.0, -0.2, 3).unwrap().family(), CopulaFamily::SkewT);
        assert_eq!(CopulaShape::skew_t(10.0, 0.0, 3).unwrap().family(), CopulaFamily::StudentT);
        assert_eq!(CopulaShape::gaussian(3).family(), CopulaFamily::Gaussian);
    }

    #[test]
    fn skew_targeting_requires_nu_above_four() {
        let s = CopulaShape::skew_t(3.5, -0.2, 2).unwrap();
        assert!(implied_r_from_cov(&DMatrix::identity(2, 2), &s).is_err());
    }

    #[test]
    fn cdfs_agree_with_pointwise() {
        let law = MarginalLaw::SkewT(SkewTMarginal::new(6.0, 0.3).unwrap());
        let ys = [-4.0, 2.5, -0.1, 0.7, 9.0, -0.1, 0.0];
        let batch = law.cdfs(&ys);
        for (y, b) in ys.iter().zip(batch) {
            assert!((law.cdf(*y) - b).abs() < 1e-11);
        }
    }
}
