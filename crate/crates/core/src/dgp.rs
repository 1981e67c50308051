//! Simulation designs: the stylized market/group/country correlation
//! matrix and static, score-driven or periodic eigenvalue paths.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::copula::{pits_of, CopulaShape};
use crate::error::{CopulaError, Result};
use crate::score::{score_vector, ScoreDynamics};
use crate::spectral::{SpectralBasis, SpectralState};

/// Loadings of the stylized design. Asset `i` (1-based) sits in group
/// `⌈i / n_countries⌉` and country `((i - 1) mod n_countries) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizedDesign {
    pub beta_market: f64,
    /// One loading per group.
    pub beta_group: Vec<f64>,
    pub beta_country: f64,
    pub beta_idio: f64,
    pub n_countries: usize,
}

impl StylizedDesign {
    /// `n_groups × n_countries` assets with market loading 0.75, idiosyncratic
    /// loading 1 and group loadings `1.75 - 0.15 g`.
    pub fn new(n_groups: usize, n_countries: usize, beta_country: f64) -> Self {
        StylizedDesign {
            beta_market: 0.75,
            beta_group: (1..=n_groups).map(|g| 1.75 - 0.15 * g as f64).collect(),
            beta_country,
            beta_idio: 1.0,
            n_countries,
        }
    }

    /// The 100-asset design on a 10 × 10 grid.
    pub fn standard(beta_country: f64) -> Self {
        Self::new(10, 10, beta_country)
    }

    pub fn n_groups(&self) -> usize {
        self.beta_group.len()
    }

    pub fn dim(&self) -> usize {
        self.n_groups() * self.n_countries
    }

    /// 1-based group of the 0-based asset index.
    pub fn group(&self, asset: usize) -> usize {
        asset / self.n_countries + 1
    }

    /// 1-based country of the 0-based asset index.
    pub fn country(&self, asset: usize) -> usize {
        asset % self.n_countries + 1
    }

    /// Group labels (1-based) for all assets.
    pub fn groups(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.group(i)).collect()
    }
}

/// The stylized correlation matrix
/// `R_ij = (β_M² + β_{G_i}² δ(G_i,G_j) + β_I² δ_ij + β_C² exp(-|C_i - C_j|/2)) / (s_i s_j)`
/// with `s_i² = β_M² + β_{G_i}² + β_C² + β_I²`.
pub fn stylized_r(design: &StylizedDesign) -> Result<DMatrix<f64>> {
    let mut loads = design.beta_group.clone();
    loads.extend([design.beta_market, design.beta_country, design.beta_idio]);
    if let Some(b) = loads.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(CopulaError::InvalidInput(format!("loadings must be finite and >= 0, got {b}")));
    }
    if loads.iter().all(|b| *b == 0.0) || design.n_countries == 0 || design.beta_group.is_empty() {
        return Err(CopulaError::InvalidInput("design has no assets or only zero loadings".into()));
    }
    let d = design.dim();
    let (bm2, bc2, bi2) = (design.beta_market.powi(2), design.beta_country.powi(2), design.beta_idio.powi(2));
    let scale: Vec<f64> =
        (0..d).map(|i| (bm2 + design.beta_group[design.group(i) - 1].powi(2) + bc2 + bi2).sqrt()).collect();
    let mut r = DMatrix::zeros(d, d);
    for i in 0..d {
        r[(i, i)] = 1.0;
        for j in 0..i {
            let (gi, gj) = (design.group(i), design.group(j));
            let mut num = bm2;
            if gi == gj {
                num += design.beta_group[gi - 1].powi(2);
            }
            let dc = design.country(i).abs_diff(design.country(j)) as f64;
            num += bc2 * (-dc / 2.0).exp();
            let v = num / (scale[i] * scale[j]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let min = r.clone().symmetric_eigenvalues().min();
    if !(min > 0.0) {
        return Err(CopulaError::Infeasible { min_eigenvalue: min });
    }
    Ok(r)
}

/// How the eigenvalues move over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EigenPathSpec {
    Static,
    /// Score-driven recursion for the first `a.len()` eigenvalues.
    ScoreDriven { a: Vec<f64>, b: Vec<f64> },
    /// `λ_1,t = λ_1 (1 + sin(4πt/horizon)/2)`, `λ_2,t = λ_2 (1 + cos(4πt/horizon)/2)`.
    Periodic { horizon: usize },
}

/// Deterministic eigenvalue paths (`T × d`) for the static and periodic specs.
pub fn eigen_paths(spec: &EigenPathSpec, lambda: &[f64], t_len: usize) -> Result<DMatrix<f64>> {
    if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(CopulaError::InvalidInput(format!("eigenvalues must be positive, got {l}")));
    }
    let d = lambda.len();
    match spec {
        EigenPathSpec::Static => Ok(DMatrix::from_fn(t_len, d, |_, i| lambda[i])),
        EigenPathSpec::Periodic { horizon } => {
            if *horizon == 0 {
                return Err(CopulaError::InvalidInput("periodic horizon must be positive".into()));
            }
            let w = 4.0 * std::f64::consts::PI / *horizon as f64;
            Ok(DMatrix::from_fn(t_len, d, |t, i| match i {
                0 => lambda[0] * (1.0 + 0.5 * (w * t as f64).sin()),
                1 => lambda[1] * (1.0 + 0.5 * (w * t as f64).cos()),
                _ => lambda[i],
            }))
        }
        EigenPathSpec::ScoreDriven { .. } => Err(CopulaError::Unsupported(
            "score-driven paths depend on the draws; use simulate_panel".into(),
        )),
    }
}

/// A data-generating process: basis, log target eigenvalues and path spec.
#[derive(Debug, Clone)]
pub struct Dgp {
    pub basis: Arc<SpectralBasis>,
    /// `log λ`, descending.
    pub anchor: Vec<f64>,
    pub path: EigenPathSpec,
}

impl Dgp {
    /// Uses the eigen-decomposition of a correlation matrix.
    pub fn from_correlation(r: &DMatrix<f64>, path: EigenPathSpec) -> Result<Self> {
        let (basis, lambda) = SpectralBasis::from_symmetric(r)?;
        if let Some(l) = lambda.iter().find(|l| !(**l > 0.0)) {
            return Err(CopulaError::Infeasible { min_eigenvalue: *l });
        }
        Ok(Dgp { basis: Arc::new(basis), anchor: lambda.iter().map(|l| l.ln()).collect(), path })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.anchor.iter().map(|f| f.exp()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub pits: DMatrix<f64>,
    pub ystar: DMatrix<f64>,
    /// True `λ_t`, `T × d`.
    pub lambda_path: DMatrix<f64>,
}

impl SimulatedPanel {
    /// Splits into the first `t` rows and the rest.
    pub fn split(&self, t: usize) -> (SimulatedPanel, SimulatedPanel) {
        let n = self.pits.nrows();
        let part = |r0: usize, len: usize| SimulatedPanel {
            pits: self.pits.rows(r0, len).into_owned(),
            ystar: self.ystar.rows(r0, len).into_owned(),
            lambda_path: self.lambda_path.rows(r0, len).into_owned(),
        };
        (part(0, t.min(n)), part(t.min(n), n - t.min(n)))
    }
}

/// One draw `y* = v γ + √v D^{-1/2} W Λ^{1/2} z`; the factor has the same
/// outer product as the symmetric root of `R`.
fn draw<R: Rng + ?Sized>(rng: &mut R, shape: &CopulaShape, mixing: Option<&Gamma<f64>>, state: &SpectralState) -> DVector<f64> {
    let d = state.dim();
    let v = mixing.map_or(1.0, |g| 1.0 / g.sample(rng));
    let lam = state.lambda();
    let z = DVector::from_fn(d, |k, _| {
        let e: f64 = StandardNormal.sample(rng);
        lam[k].sqrt() * e
    });
    let mut y = state.basis().w() * z;
    let sq = state.sqrt_sigma_diag();
    let sv = v.sqrt();
    for j in 0..d {
        y[j] = y[j] / sq[j] * sv;
    }
    if mixing.is_some() {
        y.axpy(v, shape.gamma(), 1.0);
    }
    y
}

/// Simulates `T` observations of `y*` and their PITs. Score-driven paths
/// start at the targets and are updated with the score of each realized draw.
pub fn simulate_panel<R: Rng + ?Sized>(rng: &mut R, dgp: &Dgp, shape: &CopulaShape, t_len: usize) -> Result<SimulatedPanel> {
    let d = dgp.dim();
    shape.check_dim(d)?;
    let mixing = if shape.is_gaussian() {
        None
    } else {
        Some(Gamma::new(0.5 * shape.nu(), 2.0 / shape.nu()).map_err(|e| CopulaError::domain(e.to_string()))?)
    };
    let mut ystar = DMatrix::zeros(t_len, d);
    let mut lambda_path = DMatrix::zeros(t_len, d);
    match &dgp.path {
        EigenPathSpec::ScoreDriven { a, b } => {
            let dynamics = ScoreDynamics::new(a.clone(), b.clone(), dgp.anchor.clone())?;
            let mut f = DVector::from_vec(dgp.anchor.clone());
            for t in 0..t_len {
                let state = SpectralState::new(Arc::clone(&dgp.basis), f.clone())?;
                let y = draw(rng, shape, mixing.as_ref(), &state);
                let s = score_vector(shape, &state, &y, dynamics.d0)?;
                ystar.set_row(t, &y.transpose());
                lambda_path.set_row(t, &state.lambda().transpose());
                dynamics.update(&mut f, &s);
            }
        }
        spec => {
            let paths = eigen_paths(spec, &dgp.lambda(), t_len)?;
            let mut state = None::<SpectralState>;
            for t in 0..t_len {
                let row = paths.row(t).transpose();
                if t == 0 || paths.row(t) != paths.row(t - 1) {
                    state = Some(SpectralState::from_eigenvalues(Arc::clone(&dgp.basis), &row)?);
                }
                let st = state.as_ref().expect("state set on first row");
                let y = draw(rng, shape, mixing.as_ref(), st);
                ystar.set_row(t, &y.transpose());
                lambda_path.set_row(t, &row.transpose());
            }
        }
    }
    let pits = pits_of(shape, &ystar)?;
    Ok(SimulatedPanel { pits, ystar, lambda_path })
}
