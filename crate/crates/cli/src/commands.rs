//! `simulate`, `fit` and `ratio`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spectral_copula::copula::transform_pits;
use spectral_copula::dgp::{simulate_panel, stylized_r, Dgp, EigenPathSpec, StylizedDesign};
use spectral_copula::estimation::{
    block_bootstrap_ci, evaluate_oos, fit_copula, fit_marginals, rank_pit, residual_panel, select_d0, ArGarchParams,
    BootstrapOptions, CopulaFit, CopulaParams, FitOptions, MarginalFit,
};
use spectral_copula::factor_ref::{compare_first_factor, evaluate_factor_oos, fit_factor_copula, ClusterAssignment, FactorFitOptions};
use spectral_copula::score::{run_filter, ScoreDynamics};
use spectral_copula::{CopulaFamily, CopulaShape, SpectralBasis};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{hex_digest, RawConfig};
use crate::data::{read_panel, write_file, write_panel, Panel};
use crate::error::CliError;
use crate::experiments::{concat_rows, eigenvector_table, ratio_rows, shrink_curve};
use crate::table::{ResultTable, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Static,
    ScoreDriven,
    Periodic,
}

impl std::str::FromStr for PathKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" => Ok(PathKind::Static),
            "score" | "score-driven" => Ok(PathKind::ScoreDriven),
            "periodic" => Ok(PathKind::Periodic),
            _ => Err("expected static, score-driven or periodic".into()),
        }
    }
}

/// Settings of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub n_groups: usize,
    pub n_countries: usize,
    pub beta_c: f64,
    pub t: usize,
    pub family: CopulaFamily,
    pub nu: f64,
    pub gamma: f64,
    pub path: PathKind,
    pub a: f64,
    pub b: f64,
    pub d0: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Emit AR-GARCH returns driven by the copula draws instead of PITs.
    pub returns: bool,
}

impl SimulateConfig {
    pub fn from_raw(mut raw: RawConfig) -> Result<Self, CliError> {
        let family: CopulaFamily = raw
            .take_string("family", "skew-t")
            .parse()
            .map_err(|e: spectral_copula::CopulaError| CliError::Input(format!("field 'family': {e}")))?;
        let cfg = SimulateConfig {
            n_groups: raw.take("n_groups", 10)?,
            n_countries: raw.take("n_countries", 10)?,
            beta_c: raw.take("beta_c", 1.5)?,
            t: raw.take("t", 1000)?,
            family,
            nu: raw.take("nu", 25.0)?,
            gamma: raw.take("gamma", -0.25)?,
            path: raw.take("path", PathKind::Static)?,
            a: raw.take("a", 0.1)?,
            b: raw.take("b", 0.9)?,
            d0: raw.take("d0", 2)?,
            horizon: raw.take("horizon", 0)?,
            seed: raw.take("seed", 1)?,
            returns: raw.take_bool("returns", false)?,
        };
        raw.finish()?;
        if cfg.t == 0 || cfg.n_groups == 0 || cfg.n_countries == 0 {
            return Err(CliError::Input("t, n_groups and n_countries must be positive".into()));
        }
        if cfg.family != CopulaFamily::Gaussian && !(cfg.nu > 4.0) {
            return Err(CliError::Input(format!("nu must exceed 4, got {}", cfg.nu)));
        }
        if cfg.path == PathKind::ScoreDriven {
            if cfg.d0 > cfg.n_groups * cfg.n_countries {
                return Err(CliError::Input(format!("d0 = {} exceeds d", cfg.d0)));
            }
            if !(cfg.a > 0.0 && cfg.b > 0.0 && cfg.b < 1.0) {
                return Err(CliError::Input("score-driven path needs a > 0 and 0 < b < 1".into()));
            }
        }
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    fn shape(&self) -> Result<CopulaShape, CliError> {
        let d = self.n_groups * self.n_countries;
        Ok(match self.family {
            CopulaFamily::Gaussian => CopulaShape::gaussian(d),
            CopulaFamily::StudentT => CopulaShape::student_t(self.nu, d)?,
            CopulaFamily::SkewT => CopulaShape::skew_t(self.nu, self.gamma, d)?,
        })
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    version: &'a str,
    config_hash: String,
    config: &'a SimulateConfig,
    asset_group: Vec<usize>,
    asset_country: Vec<usize>,
    correlation: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    /// `λ_t` for the first eigenvalues that move.
    lambda_path: Vec<Vec<f64>>,
    marginals: Option<Vec<ArGarchParams>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Weekday dates from 2010-01-04.
pub fn business_days(n: usize) -> Vec<String> {
    let mut day = NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day.format("%Y-%m-%d").to_string());
        }
        day = day + Days::new(1);
    }
    out
}

/// AR(1)-GARCH(1,1) parameters spread over the assets.
fn asset_margins(d: usize) -> Vec<ArGarchParams> {
    (0..d)
        .map(|j| {
            let s = j as f64 / d.max(2) as f64;
            let alpha = 0.04 + 0.06 * s;
            ArGarchParams { delta: 0.03, phi: 0.05 - 0.1 * s, omega: 0.02 + 0.03 * s, alpha, beta: 0.95 - alpha }
        })
        .collect()
}

/// Returns whose standardized innovations are the normal scores of the PITs.
fn returns_from_pits(pits: &DMatrix<f64>, margins: &[ArGarchParams]) -> DMatrix<f64> {
    let n = Normal::standard();
    let (t, d) = pits.shape();
    let mut out = DMatrix::zeros(t, d);
    for (j, p) in margins.iter().enumerate() {
        let mut s2 = p.unconditional_variance();
        let mut prev = p.delta / (1.0 - p.phi);
        let mut e_prev = 0.0;
        for r in 0..t {
            s2 = p.omega + p.alpha * e_prev * e_prev + p.beta * s2;
            let e = s2.sqrt() * n.inverse_cdf(pits[(r, j)]);
            let x = p.delta + p.phi * prev + e;
            out[(r, j)] = x;
            prev = x;
            e_prev = e;
        }
    }
    out
}

/// Writes `panel.csv` and `truth.json` into `out`.
pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let design = StylizedDesign::new(cfg.n_groups, cfg.n_countries, cfg.beta_c);
    let r = stylized_r(&design)?;
    let d = design.dim();
    let path = match cfg.path {
        PathKind::Static => EigenPathSpec::Static,
        PathKind::ScoreDriven => EigenPathSpec::ScoreDriven { a: vec![cfg.a; cfg.d0], b: vec![cfg.b; cfg.d0] },
        PathKind::Periodic => EigenPathSpec::Periodic { horizon: if cfg.horizon == 0 { cfg.t } else { cfg.horizon } },
    };
    let dgp = Dgp::from_correlation(&r, path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sim = simulate_panel(&mut rng, &dgp, &cfg.shape()?, cfg.t)?;
    let names: Vec<String> = (1..=d).map(|i| format!("A{i:03}")).collect();
    let margins = cfg.returns.then(|| asset_margins(d));
    let values = match &margins {
        Some(m) => returns_from_pits(&sim.pits, m),
        None => sim.pits.clone(),
    };
    let panel = Panel { names, dates: Some(business_days(cfg.t)), values };
    let panel_path = out.join("panel.csv");
    write_panel(&panel_path, &panel)?;
    let k = match cfg.path {
        PathKind::Static => 1,
        PathKind::ScoreDriven => cfg.d0.max(1),
        PathKind::Periodic => 2.min(d),
    };
    let sidecar = Sidecar {
        version: VERSION,
        config_hash: cfg.hash(),
        config: cfg,
        asset_group: design.groups(),
        asset_country: (0..d).map(|i| design.country(i)).collect(),
        correlation: rows_of(&r),
        lambda: dgp.lambda(),
        lambda_path: rows_of(&sim.lambda_path.columns(0, k).into_owned()),
        marginals: margins,
    };
    let truth_path = out.join("truth.json");
    write_file(&truth_path, serde_json::to_string_pretty(&sidecar)?.as_bytes())?;
    Ok((panel_path, truth_path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum D0Choice {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for D0Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(D0Choice::Auto)
        } else {
            s.parse().map(D0Choice::Fixed).map_err(|_| format!("'{s}' is neither 'auto' nor a count"))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitSettings {
    pub input: PathBuf,
    pub out: PathBuf,
    pub family: CopulaFamily,
    pub d0: D0Choice,
    pub d0_max: usize,
    pub shrink: bool,
    /// Shrinkage during the BIC search (off by default).
    pub select_shrink: bool,
    pub split: f64,
    pub bootstrap: usize,
    pub block_len: usize,
    pub seed: u64,
    pub clusters: Option<PathBuf>,
    pub heatmap_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    /// `None` for the Gaussian family.
    pub nu: Option<f64>,
    pub gamma: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ReportParams {
    fn from_params(p: &CopulaParams) -> Self {
        ReportParams { nu: p.nu.is_finite().then_some(p.nu), gamma: p.gamma, a: p.a.clone(), b: p.b.clone() }
    }

    fn shape(&self, family: CopulaFamily, d: usize) -> Result<CopulaShape, CliError> {
        let p = CopulaParams { nu: self.nu.unwrap_or(f64::INFINITY), gamma: self.gamma, a: self.a.clone(), b: self.b.clone() };
        Ok(p.shape(family, d)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D0Report {
    pub d0_max: usize,
    pub selected: usize,
    pub bic: Vec<f64>,
    pub delta_bic: Vec<f64>,
    pub shrink: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub level: f64,
    pub block_len: usize,
    pub n_boot: usize,
    pub failures: usize,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub n_groups: usize,
    pub loglik_in: f64,
    pub loglik_oos: Option<f64>,
    pub first_factor_inner_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub version: String,
    pub input: String,
    pub input_hash: String,
    pub input_kind: String,
    pub names: Vec<String>,
    pub n_in: usize,
    pub n_oos: usize,
    pub family: CopulaFamily,
    pub d0: usize,
    pub shrink: bool,
    pub params: ReportParams,
    pub loglik_in: f64,
    pub loglik_oos: Option<f64>,
    pub bic: f64,
    pub static_loglik_in: f64,
    pub static_loglik_oos: Option<f64>,
    pub d0_selection: Option<D0Report>,
    pub intervals: Option<IntervalReport>,
    pub factor: Option<FactorReport>,
    /// Log target eigenvalues.
    pub anchor: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub lambda_check: Vec<f64>,
    /// Eigenvector basis, one row per asset.
    pub basis: Vec<Vec<f64>>,
}

impl FitReport {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read fit report {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn basis(&self) -> Result<SpectralBasis, CliError> {
        let d = self.basis.len();
        if self.basis.iter().any(|r| r.len() != d) {
            return Err(CliError::Input("fit report basis is not square".into()));
        }
        Ok(SpectralBasis::new(DMatrix::from_fn(d, d, |i, j| self.basis[i][j]))?)
    }
}

fn marginal_tables(fits: &[MarginalFit], names: &[String], hash: &str) -> (ResultTable, ResultTable) {
    let cols = ["delta", "phi", "omega", "alpha", "beta", "persistence"];
    let mut per_asset = ResultTable::new("table-marginal-fits", &cols, hash);
    let rows: Vec<[f64; 6]> = fits
        .iter()
        .map(|f| {
            let p = f.params;
            [p.delta, p.phi, p.omega, p.alpha, p.beta, p.alpha + p.beta]
        })
        .collect();
    for (name, r) in names.iter().zip(&rows) {
        per_asset.push(name.clone(), r);
    }
    let mut summary = ResultTable::new("table-marginals", &["mean", "median", "min", "max"], hash);
    for (k, c) in cols.iter().enumerate() {
        let mut v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        summary.push(*c, &[v.iter().sum::<f64>() / n as f64, median, v[0], v[n - 1]]);
    }
    (summary, per_asset)
}

/// PITs, their row labels, and the marginal tables when the input was returns.
type PitStage = (DMatrix<f64>, Vec<String>, Option<(ResultTable, ResultTable)>);

/// PITs for a panel of returns or PITs, with the row labels that survive.
fn to_pits(panel: &Panel, hash: &str) -> Result<PitStage, CliError> {
    let labels: Vec<String> = (0..panel.n_obs()).map(|t| panel.row_label(t)).collect();
    if panel.looks_like_pits() {
        return Ok((panel.values.clone(), labels, None));
    }
    let fits = fit_marginals(&panel.values)?;
    let pits = rank_pit(&residual_panel(&fits)?);
    Ok((pits, labels[1..].to_vec(), Some(marginal_tables(&fits, &panel.names, hash))))
}

fn lambda_path(anchor: &[f64], f_path: &DMatrix<f64>) -> DMatrix<f64> {
    let d0 = f_path.ncols();
    DMatrix::from_fn(f_path.nrows(), anchor.len(), |t, i| if i < d0 { f_path[(t, i)].exp() } else { anchor[i].exp() })
}

fn ratio_table(lambda: &DMatrix<f64>, labels: &[String], n_in: usize, hash: &str) -> ResultTable {
    let mut t = ResultTable::new("fig-ratio", &["ratio", "share", "oos"], hash);
    for (k, (ratio, share)) in ratio_rows(lambda).into_iter().enumerate() {
        t.push(labels[k].clone(), &[ratio, share, if k >= n_in { 1.0 } else { 0.0 }]);
    }
    t
}

/// Marginal stage (for returns), BIC search, final fit, out-of-sample
/// evaluation and the emitted figure data.
pub fn cmd_fit(s: &FitSettings) -> Result<FitReport, CliError> {
    if !(s.split > 0.0 && s.split <= 1.0) {
        return Err(CliError::Input(format!("--split must lie in (0, 1], got {}", s.split)));
    }
    let raw = std::fs::read(&s.input).map_err(|e| CliError::Input(format!("cannot read {}: {e}", s.input.display())))?;
    let hash = hex_digest(&raw);
    let panel = read_panel(&s.input)?;
    let (pits, labels, marginal) = to_pits(&panel, &hash)?;
    let (t, d) = pits.shape();
    let n_in = ((t as f64) * s.split).floor() as usize;
    if n_in <= d {
        return Err(CliError::Input(format!(
            "{} in-sample observations for {d} assets; need more observations than assets",
            n_in
        )));
    }
    let pits_in = pits.rows(0, n_in).into_owned();
    let pits_oos = pits.rows(n_in, t - n_in).into_owned();
    let has_oos = t > n_in;

    let (d0, selection, warm) = match s.d0 {
        D0Choice::Fixed(k) => {
            if k > d {
                return Err(CliError::Input(format!("--d0 {k} exceeds the {d} assets")));
            }
            (k, None, None)
        }
        D0Choice::Auto => {
            let sel = select_d0(&pits_in, s.family, s.d0_max.min(d), &FitOptions::with_shrink(s.select_shrink))?;
            let warm = sel.fits[sel.selected].params.clone();
            let rep = D0Report {
                d0_max: s.d0_max.min(d),
                selected: sel.selected,
                bic: sel.bic.clone(),
                delta_bic: sel.delta_bic.clone(),
                shrink: s.select_shrink,
            };
            (sel.selected, Some(rep), Some(warm))
        }
    };
    let fit = fit_copula(&pits_in, s.family, d0, &FitOptions { warm_start: warm, ..FitOptions::with_shrink(s.shrink) })?;
    let oos = if has_oos { Some(evaluate_oos(&fit, &pits_oos)?) } else { None };
    let static_fit = if d0 == 0 {
        None
    } else {
        let w = CopulaParams { a: Vec::new(), b: Vec::new(), ..fit.params.clone() };
        Some(fit_copula(&pits_in, s.family, 0, &FitOptions { warm_start: Some(w), ..FitOptions::with_shrink(s.shrink) })?)
    };
    let st: &CopulaFit = static_fit.as_ref().unwrap_or(&fit);
    let static_oos = if has_oos { Some(evaluate_oos(st, &pits_oos)?.loglik) } else { None };

    let intervals = if s.bootstrap > 0 {
        let opts = BootstrapOptions { n_boot: s.bootstrap, block_len: s.block_len, seed: s.seed, ..BootstrapOptions::default() };
        let b = block_bootstrap_ci(&pits_in, &fit, &opts)?;
        Some(IntervalReport {
            level: opts.level,
            block_len: opts.block_len,
            n_boot: opts.n_boot,
            failures: b.failures,
            names: b.names,
            lower: b.lower,
            upper: b.upper,
        })
    } else {
        None
    };

    let factor = match &s.clusters {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read cluster file {}: {e}", path.display())))?;
            let assign = ClusterAssignment::from_csv(&text, Some(&panel.names))?;
            let ff = fit_factor_copula(&pits_in, &assign, s.family, false, &FactorFitOptions::default())?;
            let oos_ll = if has_oos { Some(evaluate_factor_oos(&ff, &pits_oos)?.loglik) } else { None };
            Some(FactorReport {
                n_groups: assign.n_groups(),
                loglik_in: ff.loglik_in,
                loglik_oos: oos_ll,
                first_factor_inner_product: compare_first_factor(&ff, &fit.basis)?,
            })
        }
    };

    std::fs::create_dir_all(&s.out)?;
    write_panel(&s.out.join("pits.csv"), &Panel { names: panel.names.clone(), dates: Some(labels.clone()), values: pits.clone() })?;
    if let Some((summary, per_asset)) = &marginal {
        summary.write(&s.out)?;
        per_asset.write(&s.out)?;
    }
    let mut f_all = fit.filter.f_path.clone();
    if let Some(o) = &oos {
        f_all = concat_rows(&f_all, &o.f_path);
    }
    let lam = lambda_path(&fit.anchor, &f_all);
    let k = d0.max(1);
    let cols: Vec<String> = (1..=k).map(|i| format!("lambda{i}")).chain(["oos".to_string()]).collect();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut path_table = ResultTable::new("fig-eigen-path", &cols, &hash);
    for r in 0..t {
        let mut row: Vec<f64> = (0..k).map(|i| lam[(r, i)]).collect();
        row.push(if r >= n_in { 1.0 } else { 0.0 });
        path_table.push(labels[r].clone(), &row);
    }
    path_table.write(&s.out)?;
    ratio_table(&lam, &labels, n_in, &hash).write(&s.out)?;
    eigenvector_table(&fit.basis, &panel.names, s.heatmap_k, &hash).write(&s.out)?;
    if has_oos {
        let gains = shrink_curve(&fit, &pits_in, &pits_oos)?;
        let mut curve = ResultTable::new("fig-shrink-curve", &["index", "oos_gain"], &hash);
        for (i, g) in gains.iter().enumerate() {
            curve.push(format!("i={i}"), &[i as f64, *g]);
        }
        curve.write(&s.out)?;
    }
    if let Some(sel) = &selection {
        let mut tb = ResultTable::new("fig-bic", &["d0", "bic", "delta_bic"], &hash);
        for (k, (b, db)) in sel.bic.iter().zip(&sel.delta_bic).enumerate() {
            tb.push(format!("d0={k}"), &[k as f64, *b, *db]);
        }
        tb.write(&s.out)?;
    }

    let report = FitReport {
        version: VERSION.to_string(),
        input: s.input.display().to_string(),
        input_hash: hash,
        input_kind: if marginal.is_some() { "returns" } else { "pits" }.to_string(),
        names: panel.names.clone(),
        n_in,
        n_oos: t - n_in,
        family: s.family,
        d0,
        shrink: s.shrink,
        params: ReportParams::from_params(&fit.params),
        loglik_in: fit.loglik_in,
        loglik_oos: oos.as_ref().map(|o| o.loglik),
        bic: fit.bic(),
        static_loglik_in: st.loglik_in,
        static_loglik_oos: static_oos,
        d0_selection: selection,
        intervals,
        factor,
        anchor: fit.anchor.clone(),
        lambda_hat: fit.spectrum.lambda_hat.clone(),
        lambda_check: fit.spectrum.lambda_check.clone(),
        basis: rows_of(fit.basis.w()),
    };
    write_file(&s.out.join("fit.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}

/// Re-runs the fitted filter over a panel and writes the eigenvalue ratio
/// series. Returns are first turned into PITs as in `fit`.
pub fn cmd_ratio(report_path: &Path, input: &Path, out: &Path) -> Result<ResultTable, CliError> {
    let report = FitReport::read(report_path)?;
    let panel = read_panel(input)?;
    if panel.dim() != report.anchor.len() {
        return Err(CliError::Input(format!(
            "panel has {} assets but the fit has {}",
            panel.dim(),
            report.anchor.len()
        )));
    }
    let (pits, labels, _) = to_pits(&panel, &report.input_hash)?;
    let shape = report.params.shape(report.family, panel.dim())?;
    let dynamics = ScoreDynamics::new(report.params.a.clone(), report.params.b.clone(), report.anchor.clone())?;
    let basis = Arc::new(report.basis()?);
    let filtered = run_filter(&shape, &dynamics, &basis, &transform_pits(&shape, &pits)?)?;
    let lam = lambda_path(&report.anchor, &filtered.f_path);
    let table = ratio_table(&lam, &labels, pits.nrows(), &report.input_hash);
    write_file(out, table.to_csv().as_bytes())?;
    Ok(table)
}
