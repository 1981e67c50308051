//! Monte Carlo experiments: the simulation tables, BIC selection curve,
//! periodic misspecification and the shrinkage curve.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spectral_copula::copula::transform_pits;
use spectral_copula::dgp::{simulate_panel, stylized_r, Dgp, EigenPathSpec, SimulatedPanel, StylizedDesign};
use spectral_copula::estimation::{evaluate_oos, fit_copula, rank_pit, select_d0, CopulaFit, FitOptions};
use spectral_copula::factor_ref::{evaluate_factor_oos, fit_factor_copula, ClusterAssignment, FactorFitOptions};
use spectral_copula::score::{run_filter, run_filter_from, ScoreDynamics};
use spectral_copula::{CopulaShape, SpectralBasis};

use crate::config::{Experiment, ExperimentConfig};
use crate::data::write_file;
use crate::error::CliError;
use crate::table::ResultTable;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Root output directory; `None` keeps everything in memory.
    pub outdir: Option<PathBuf>,
    /// Reuse per-replication files written by an earlier run with the same config.
    pub resume: bool,
    pub verbose: bool,
}

impl RunOptions {
    pub fn in_memory() -> Self {
        RunOptions { outdir: None, resume: false, verbose: false }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: Vec<ResultTable>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Serialize, Deserialize)]
struct RepFile {
    config_hash: String,
    values: Option<Vec<Option<f64>>>,
    error: Option<String>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    dir: Option<PathBuf>,
    opts: &'a RunOptions,
}

impl Ctx<'_> {
    fn rep_path(&self, tag: &str, rep: usize) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join("reps").join(format!("{tag}-{rep:04}.json")))
    }

    fn load(&self, path: &Path) -> Option<Vec<f64>> {
        let text = std::fs::read_to_string(path).ok()?;
        let f: RepFile = serde_json::from_str(&text).ok()?;
        if f.config_hash != self.hash {
            return None;
        }
        f.values.map(|v| v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }

    /// Runs `n` replications in parallel. Each writes its own file, so an
    /// interrupted run can be resumed; failed replications are recorded and
    /// left out of the summaries.
    fn replicate<F>(&self, tag: &str, n: usize, f: F) -> Result<Vec<Option<Vec<f64>>>, CliError>
    where
        F: Fn(usize) -> Result<Vec<f64>, CliError> + Sync,
    {
        (0..n)
            .into_par_iter()
            .map(|rep| {
                let path = self.rep_path(tag, rep);
                if self.opts.resume {
                    if let Some(v) = path.as_deref().and_then(|p| self.load(p)) {
                        return Ok(Some(v));
                    }
                }
                let start = Instant::now();
                let res = f(rep);
                if self.opts.verbose {
                    match &res {
                        Ok(_) => eprintln!("{tag} replication {rep}: {:.1}s", start.elapsed().as_secs_f64()),
                        Err(e) => eprintln!("{tag} replication {rep} failed: {e}"),
                    }
                }
                if let Some(p) = &path {
                    let file = match &res {
                        Ok(v) => RepFile {
                            config_hash: self.hash.clone(),
                            values: Some(v.iter().map(|x| x.is_finite().then_some(*x)).collect()),
                            error: None,
                        },
                        Err(e) => RepFile { config_hash: self.hash.clone(), values: None, error: Some(e.to_string()) },
                    };
                    write_file(p, serde_json::to_string(&file)?.as_bytes())?;
                }
                Ok(res.ok())
            })
            .collect()
    }
}

fn rng_for(cfg: &ExperimentConfig, cell: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
    rng.set_stream(cell as u64);
    rng
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { f64::NAN };
    (m, sd)
}

fn column(reps: &[Vec<f64>], k: usize) -> Vec<f64> {
    reps.iter().map(|r| r[k]).collect()
}

fn design(cfg: &ExperimentConfig, beta_c: f64) -> StylizedDesign {
    StylizedDesign::new(cfg.n_groups, cfg.n_countries, beta_c)
}

fn shape_of(cfg: &ExperimentConfig) -> Result<CopulaShape, CliError> {
    let d = cfg.dim();
    Ok(match cfg.family {
        spectral_copula::CopulaFamily::Gaussian => CopulaShape::gaussian(d),
        spectral_copula::CopulaFamily::StudentT => CopulaShape::student_t(cfg.nu, d)?,
        spectral_copula::CopulaFamily::SkewT => CopulaShape::skew_t(cfg.nu, cfg.gamma, d)?,
    })
}

fn score_driven(cfg: &ExperimentConfig) -> EigenPathSpec {
    EigenPathSpec::ScoreDriven { a: vec![cfg.a; cfg.d0], b: vec![cfg.b; cfg.d0] }
}

/// In-sample rank PITs and out-of-sample true PITs.
fn split_pits(sim: &SimulatedPanel, t: usize) -> (DMatrix<f64>, DMatrix<f64>, SimulatedPanel, SimulatedPanel) {
    let (ins, oos) = sim.split(t);
    (rank_pit(&ins.pits), oos.pits.clone(), ins, oos)
}

/// Log-likelihood of the data-generating copula with its static matrix.
fn true_static_loglik(dgp: &Dgp, shape: &CopulaShape, pits: &DMatrix<f64>) -> Result<f64, CliError> {
    let panel = transform_pits(shape, pits)?;
    let out = run_filter(shape, &ScoreDynamics::static_at(dgp.anchor.clone()), &dgp.basis, &panel)?;
    Ok(out.loglik)
}

/// Out-of-sample gain from replacing the sample target eigenvalues by the
/// shrunken ones for indices `1..=i`, `i = 0..=d`. Parameters stay at the
/// fitted values; the filter runs through the in-sample panel and continues
/// over the held-out one. Entry `i` is the gain relative to `i = 0`.
pub fn shrink_curve(fit: &CopulaFit, pits_in: &DMatrix<f64>, pits_oos: &DMatrix<f64>) -> Result<Vec<f64>, CliError> {
    let shape = fit.shape()?;
    let panel_in = transform_pits(&shape, pits_in)?;
    let panel_oos = transform_pits(&shape, pits_oos)?;
    let d = fit.dim();
    let hat: Vec<f64> = fit.spectrum.lambda_hat.iter().map(|l| l.ln()).collect();
    let check: Vec<f64> = fit.spectrum.lambda_check.iter().map(|l| l.ln()).collect();
    let oos: Vec<f64> = (0..=d)
        .into_par_iter()
        .map(|i| -> Result<f64, CliError> {
            let anchor: Vec<f64> = (0..d).map(|k| if k < i { check[k] } else { hat[k] }).collect();
            let dynamics = ScoreDynamics::new(fit.params.a.clone(), fit.params.b.clone(), anchor)?;
            let ins = run_filter(&shape, &dynamics, &fit.basis, &panel_in)?;
            Ok(run_filter_from(&shape, &dynamics, &fit.basis, &panel_oos, ins.f_next)?.loglik)
        })
        .collect::<Result<_, _>>()?;
    Ok(oos.iter().map(|v| v - oos[0]).collect())
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput, CliError> {
    let start = Instant::now();
    let ctx = Ctx {
        cfg,
        hash: cfg.hash(),
        dir: opts.outdir.as_ref().map(|d| d.join(cfg.experiment.name())),
        opts,
    };
    if let Some(dir) = &ctx.dir {
        write_file(&dir.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    }
    let mut tables = match cfg.experiment {
        Experiment::Table2 => table2(&ctx)?,
        Experiment::Table3 => table3(&ctx)?,
        Experiment::FigBic => fig_bic(&ctx)?,
        Experiment::FigMisspec => fig_misspec(&ctx)?,
        Experiment::ShrinkCurve => fig_shrink(&ctx)?,
    };
    let secs = start.elapsed().as_secs_f64();
    for t in &mut tables {
        t.meta.runtime_secs = secs;
        if let Some(dir) = &ctx.dir {
            t.write(dir)?;
        }
    }
    Ok(ExperimentOutput { tables })
}

const TABLE2_FIELDS: [&str; 8] =
    ["true_in", "true_out", "reg_in", "reg_out", "sample_in", "sample_out", "factor_in", "factor_out"];

fn table2(ctx: &Ctx) -> Result<Vec<ResultTable>, CliError> {
    let cfg = ctx.cfg;
    let shape = shape_of(cfg)?;
    let mut summary_cols: Vec<String> = Vec::new();
    for f in TABLE2_FIELDS {
        summary_cols.push(f.to_string());
        summary_cols.push(format!("{f}_sd"));
    }
    summary_cols.extend(["share_reg_gt_sample", "share_reg_gt_factor", "n_ok"].map(String::from));
    let cols: Vec<&str> = summary_cols.iter().map(String::as_str).collect();
    let mut summary = ResultTable::new("table-2", &cols, &ctx.hash);
    let mut rep_cols: Vec<&str> = vec!["beta_c", "t", "rep"];
    rep_cols.extend(TABLE2_FIELDS);
    let mut reps_table = ResultTable::new("table-2-replications", &rep_cols, &ctx.hash);
    let mut cell = 0;
    for &bc in &cfg.beta_c {
        let dsg = design(cfg, bc);
        let dgp = Dgp::from_correlation(&stylized_r(&dsg)?, EigenPathSpec::Static)?;
        let assign = ClusterAssignment::new(&dsg.groups())?;
        for &t in &cfg.t {
            let tag = format!("bc{bc}-t{t}");
            let this_cell = cell;
            let reps = ctx.replicate(&tag, cfg.reps, |rep| {
                let mut rng = rng_for(cfg, this_cell, rep);
                let sim = simulate_panel(&mut rng, &dgp, &shape, t + cfg.t_oos)?;
                let (ins, oos, raw_in, _) = split_pits(&sim, t);
                let true_in = true_static_loglik(&dgp, &shape, &raw_in.pits)?;
                let true_out = true_static_loglik(&dgp, &shape, &oos)?;
                let reg = fit_copula(&ins, cfg.family, 0, &FitOptions::with_shrink(true))?;
                let warm = FitOptions { warm_start: Some(reg.params.clone()), ..FitOptions::with_shrink(false) };
                let sample = fit_copula(&ins, cfg.family, 0, &warm)?;
                let reg_out = evaluate_oos(&reg, &oos)?.loglik;
                let sample_out = evaluate_oos(&sample, &oos)?.loglik;
                let (factor_in, factor_out) = if cfg.factor {
                    let ff = fit_factor_copula(&ins, &assign, cfg.family, false, &FactorFitOptions::default())?;
                    (ff.loglik_in, evaluate_factor_oos(&ff, &oos)?.loglik)
                } else {
                    (f64::NAN, f64::NAN)
                };
                Ok(vec![true_in, true_out, reg.loglik_in, reg_out, sample.loglik_in, sample_out, factor_in, factor_out])
            })?;
            let ok: Vec<Vec<f64>> = reps.iter().flatten().cloned().collect();
            let mut row = Vec::new();
            for k in 0..TABLE2_FIELDS.len() {
                let (m, s) = mean_sd(&column(&ok, k));
                row.extend([m, s]);
            }
            let n = ok.len() as f64;
            row.push(ok.iter().filter(|r| r[3] > r[5]).count() as f64 / n);
            row.push(if cfg.factor { ok.iter().filter(|r| r[3] > r[7]).count() as f64 / n } else { f64::NAN });
            row.push(n);
            summary.push(format!("bc={bc};T={t}"), &row);
            for (rep, r) in reps.iter().enumerate() {
                let mut vals = vec![bc, t as f64, rep as f64];
                match r {
                    Some(v) => vals.extend(v),
                    None => vals.extend([f64::NAN; 8]),
                }
                reps_table.push(format!("bc={bc};T={t};rep={rep}"), &vals);
            }
            cell += 1;
        }
    }
    Ok(vec![summary, reps_table])
}

fn table3_labels(cfg: &ExperimentConfig) -> Vec<String> {
    let d = cfg.dim();
    let mut out = vec!["lambda1".to_string(), "lambda2".to_string(), format!("lambda{}", d - 1), format!("lambda{d}")];
    out.extend((1..=cfg.d0).map(|i| format!("a{i}")));
    out.extend((1..=cfg.d0).map(|i| format!("b{i}")));
    out.extend(["nu".to_string(), "gamma".to_string()]);
    out
}

fn table3_values(fit: &CopulaFit) -> Vec<f64> {
    let d = fit.dim();
    let lam: Vec<f64> = fit.anchor.iter().map(|f| f.exp()).collect();
    let mut out = vec![lam[0], lam[1], lam[d - 2], lam[d - 1]];
    out.extend(&fit.params.a);
    out.extend(&fit.params.b);
    out.extend([fit.params.nu, fit.params.gamma]);
    out
}

fn table3(ctx: &Ctx) -> Result<Vec<ResultTable>, CliError> {
    let cfg = ctx.cfg;
    let shape = shape_of(cfg)?;
    let bc = cfg.beta_c[0];
    let t = cfg.t[0];
    let dgp = Dgp::from_correlation(&stylized_r(&design(cfg, bc))?, score_driven(cfg))?;
    let labels = table3_labels(cfg);
    let np = labels.len();
    let reps = ctx.replicate("rep", cfg.reps, |rep| {
        let mut rng = rng_for(cfg, 0, rep);
        let sim = simulate_panel(&mut rng, &dgp, &shape, t)?;
        let pits = rank_pit(&sim.pits);
        let reg = fit_copula(&pits, cfg.family, cfg.d0, &FitOptions::with_shrink(true))?;
        let warm = FitOptions { warm_start: Some(reg.params.clone()), ..FitOptions::with_shrink(false) };
        let sample = fit_copula(&pits, cfg.family, cfg.d0, &warm)?;
        let mut v = table3_values(&reg);
        v.extend(table3_values(&sample));
        Ok(v)
    })?;
    let ok: Vec<Vec<f64>> = reps.iter().flatten().cloned().collect();
    let lam = dgp.lambda();
    let d = cfg.dim();
    let mut truth = vec![lam[0], lam[1], lam[d - 2], lam[d - 1]];
    truth.extend(vec![cfg.a; cfg.d0]);
    truth.extend(vec![cfg.b; cfg.d0]);
    truth.extend([cfg.nu, cfg.gamma]);
    let mut summary = ResultTable::new("table-3", &["true", "reg_mean", "reg_sd", "sample_mean", "sample_sd", "n_ok"], &ctx.hash);
    for k in 0..np {
        let (rm, rs) = mean_sd(&column(&ok, k));
        let (sm, ss) = mean_sd(&column(&ok, np + k));
        summary.push(labels[k].clone(), &[truth[k], rm, rs, sm, ss, ok.len() as f64]);
    }
    let mut cols: Vec<String> = labels.iter().map(|l| format!("reg_{l}")).collect();
    cols.extend(labels.iter().map(|l| format!("sample_{l}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut rt = ResultTable::new("table-3-replications", &cols, &ctx.hash);
    for (rep, r) in reps.iter().enumerate() {
        match r {
            Some(v) => rt.push(format!("rep={rep}"), v),
            None => rt.push(format!("rep={rep}"), &vec![f64::NAN; 2 * np]),
        }
    }
    Ok(vec![summary, rt])
}

fn fig_bic(ctx: &Ctx) -> Result<Vec<ResultTable>, CliError> {
    let cfg = ctx.cfg;
    let shape = shape_of(cfg)?;
    let t = cfg.t[0];
    let dgp = Dgp::from_correlation(&stylized_r(&design(cfg, cfg.beta_c[0]))?, score_driven(cfg))?;
    let kmax = cfg.d0_max;
    let reps = ctx.replicate("rep", cfg.reps, |rep| {
        let mut rng = rng_for(cfg, 0, rep);
        let sim = simulate_panel(&mut rng, &dgp, &shape, t)?;
        let sel = select_d0(&rank_pit(&sim.pits), cfg.family, kmax, &FitOptions::with_shrink(cfg.shrink))?;
        let mut v = sel.delta_bic.clone();
        v.push(sel.selected as f64);
        Ok(v)
    })?;
    let ok: Vec<Vec<f64>> = reps.iter().flatten().cloned().collect();
    let mut curve = ResultTable::new("fig-bic", &["d0", "delta_bic_mean", "delta_bic_sd", "selected_share"], &ctx.hash);
    for k in 0..=kmax {
        let (m, s) = mean_sd(&column(&ok, k));
        let share = ok.iter().filter(|r| r[kmax + 1] as usize == k).count() as f64 / ok.len() as f64;
        curve.push(format!("d0={k}"), &[k as f64, m, s, share]);
    }
    let mut cols: Vec<String> = (0..=kmax).map(|k| format!("delta_bic_{k}")).collect();
    cols.push("selected".into());
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut rt = ResultTable::new("fig-bic-replications", &cols, &ctx.hash);
    for (rep, r) in reps.iter().enumerate() {
        match r {
            Some(v) => rt.push(format!("rep={rep}"), v),
            None => rt.push(format!("rep={rep}"), &vec![f64::NAN; kmax + 2]),
        }
    }
    Ok(vec![curve, rt])
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn fig_misspec(ctx: &Ctx) -> Result<Vec<ResultTable>, CliError> {
    let cfg = ctx.cfg;
    let shape = shape_of(cfg)?;
    let t = cfg.t[0];
    let horizon = if cfg.horizon == 0 { t } else { cfg.horizon };
    let dgp = Dgp::from_correlation(&stylized_r(&design(cfg, cfg.beta_c[0]))?, EigenPathSpec::Periodic { horizon })?;
    let path_rows = std::sync::Mutex::new(None::<Vec<[f64; 3]>>);
    let reps = ctx.replicate("rep", cfg.reps, |rep| {
        let mut rng = rng_for(cfg, 0, rep);
        let sim = simulate_panel(&mut rng, &dgp, &shape, t + cfg.t_oos)?;
        let (ins, oos, raw_in, raw_oos) = split_pits(&sim, t);
        let fit = fit_copula(&ins, cfg.family, cfg.d0, &FitOptions::with_shrink(cfg.shrink))?;
        let out = evaluate_oos(&fit, &oos)?;
        let true_in: Vec<f64> = raw_in.lambda_path.column(0).iter().map(|l| l.ln()).collect();
        let true_out: Vec<f64> = raw_oos.lambda_path.column(0).iter().map(|l| l.ln()).collect();
        let f_in: Vec<f64> = fit.filter.f_path.column(0).iter().copied().collect();
        let f_out: Vec<f64> = out.f_path.column(0).iter().copied().collect();
        if rep == 0 {
            let rows = true_in.iter().chain(&true_out).zip(f_in.iter().chain(&f_out)).enumerate();
            *path_rows.lock().expect("path lock") = Some(rows.map(|(k, (a, b))| [k as f64, *a, *b]).collect());
        }
        Ok(vec![pearson(&true_in, &f_in), pearson(&true_out, &f_out)])
    })?;
    let ok: Vec<Vec<f64>> = reps.iter().flatten().cloned().collect();
    let mut summary = ResultTable::new("fig-misspec", &["mean", "sd", "min", "n_ok"], &ctx.hash);
    for (k, label) in ["corr_in", "corr_out"].iter().enumerate() {
        let c = column(&ok, k);
        let (m, s) = mean_sd(&c);
        summary.push(*label, &[m, s, c.iter().copied().fold(f64::INFINITY, f64::min), ok.len() as f64]);
    }
    let mut tables = vec![summary];
    if let Some(rows) = path_rows.into_inner().expect("path lock") {
        let mut path = ResultTable::new("fig-misspec-path", &["t", "true_log_lambda1", "filtered_log_lambda1"], &ctx.hash);
        for r in rows {
            path.push(format!("{}", r[0] as usize + 1), &r);
        }
        tables.push(path);
    }
    Ok(tables)
}

fn fig_shrink(ctx: &Ctx) -> Result<Vec<ResultTable>, CliError> {
    let cfg = ctx.cfg;
    let shape = shape_of(cfg)?;
    let t = cfg.t[0];
    let dgp = Dgp::from_correlation(&stylized_r(&design(cfg, cfg.beta_c[0]))?, score_driven(cfg))?;
    let reps = ctx.replicate("rep", cfg.reps, |rep| {
        let mut rng = rng_for(cfg, 0, rep);
        let sim = simulate_panel(&mut rng, &dgp, &shape, t + cfg.t_oos)?;
        let (ins, oos, _, _) = split_pits(&sim, t);
        let fit = fit_copula(&ins, cfg.family, cfg.d0, &FitOptions::with_shrink(true))?;
        shrink_curve(&fit, &ins, &oos)
    })?;
    let ok: Vec<Vec<f64>> = reps.iter().flatten().cloned().collect();
    let mut curve = ResultTable::new("fig-shrink-curve", &["index", "oos_gain_mean", "oos_gain_sd"], &ctx.hash);
    for i in 0..=cfg.dim() {
        let (m, s) = mean_sd(&column(&ok, i));
        curve.push(format!("i={i}"), &[i as f64, m, s]);
    }
    Ok(vec![curve])
}

/// Eigenvector heatmap data: the first `k` basis columns, one row per asset.
pub fn eigenvector_table(basis: &SpectralBasis, names: &[String], k: usize, hash: &str) -> ResultTable {
    let k = k.min(basis.dim());
    let cols: Vec<String> = (1..=k).map(|i| format!("w{i}")).collect();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = ResultTable::new("fig-eigenvectors", &cols, hash);
    for (j, name) in names.iter().enumerate() {
        let row: Vec<f64> = (0..k).map(|i| basis.w()[(j, i)]).collect();
        t.push(name.clone(), &row);
    }
    t
}

/// `λ₁ / Σ_{i≥2} λ_i` and `λ₁ / Σ λ_i` per row of an eigenvalue path.
pub fn ratio_rows(lambda: &DMatrix<f64>) -> Vec<(f64, f64)> {
    lambda
        .row_iter()
        .map(|r| {
            let total: f64 = r.iter().sum();
            (r[0] / (total - r[0]), r[0] / total)
        })
        .collect()
}

pub(crate) fn concat_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_spectrum_ratio() {
        let l = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 6.0, 2.0, 2.0]);
        let r = ratio_rows(&l);
        assert!((r[0].0 - 0.5).abs() < 1e-15 && (r[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((r[1].0 - 1.5).abs() < 1e-15);
    }
}
