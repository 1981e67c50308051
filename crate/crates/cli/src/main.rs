use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use spectral_copula::CopulaFamily;
use spectral_copula_cli::commands::{cmd_fit, cmd_ratio, cmd_simulate, D0Choice, FitSettings, SimulateConfig};
use spectral_copula_cli::config::{parse_switch, Experiment, ExperimentConfig, RawConfig};
use spectral_copula_cli::error::CliError;
use spectral_copula_cli::experiments::{run_experiment, RunOptions};
use spectral_copula_cli::table::VERSION;

#[derive(Parser)]
#[command(name = "spectral-copula", version = VERSION, about = "Score-driven spectral skew-t copulas")]
struct Cli {
    /// Worker threads for replications and bootstrap draws.
    #[arg(long, global = true, env = "SPECTRAL_COPULA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a panel from the stylized sector/country design.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config field, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "simulated")]
        out: PathBuf,
    },
    /// Fit the copula to a panel of returns or PITs.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "skew-t")]
        family: CopulaFamily,
        /// Number of dynamic eigenvalues, or `auto` for BIC selection.
        #[arg(long, default_value = "auto")]
        d0: D0Choice,
        #[arg(long, default_value_t = 3)]
        d0_max: usize,
        #[arg(long, default_value = "on", value_parser = switch)]
        shrink: bool,
        /// Shrink the target during the BIC search too.
        #[arg(long, default_value = "off", value_parser = switch)]
        select_shrink: bool,
        /// Fraction of observations used for estimation.
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        /// Block-bootstrap draws for the intervals; 0 skips them.
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 20)]
        block_len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `asset,cluster` file enabling the factor benchmark.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Eigenvectors written for the heat map.
        #[arg(long, default_value_t = 4)]
        eigenvectors: usize,
        #[arg(long, default_value = "fit")]
        out: PathBuf,
    },
    /// Run a simulation experiment and write its tables.
    Experiment {
        name: Experiment,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Reuse finished replications from an earlier run.
        #[arg(long)]
        resume: bool,
        #[arg(long, short)]
        verbose: bool,
    },
    /// Eigenvalue ratio series from a saved fit.
    Ratio {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "ratio.csv")]
        out: PathBuf,
    },
}

fn switch(s: &str) -> Result<bool, String> {
    parse_switch(s).ok_or_else(|| format!("'{s}' is not on/off"))
}

fn load_raw(config: &Option<PathBuf>, set: &[String]) -> Result<RawConfig, CliError> {
    let mut raw = match config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::parse("", "<defaults>")?,
    };
    raw.apply_overrides(set)?;
    Ok(raw)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, set, out } => {
            let cfg = SimulateConfig::from_raw(load_raw(&config, &set)?)?;
            let (panel, truth) = cmd_simulate(&cfg, &out)?;
            println!("wrote {} and {}", panel.display(), truth.display());
        }
        Command::Fit {
            input,
            family,
            d0,
            d0_max,
            shrink,
            select_shrink,
            split,
            bootstrap,
            block_len,
            seed,
            clusters,
            eigenvectors,
            out,
        } => {
            let s = FitSettings {
                input,
                out: out.clone(),
                family,
                d0,
                d0_max,
                shrink,
                select_shrink,
                split,
                bootstrap,
                block_len,
                seed,
                clusters,
                heatmap_k: eigenvectors,
            };
            let r = cmd_fit(&s)?;
            println!("{} copula, d0 = {}, {} in-sample / {} out-of-sample", r.family, r.d0, r.n_in, r.n_oos);
            println!("loglik in-sample {:.2} (static {:.2})", r.loglik_in, r.static_loglik_in);
            if let (Some(a), Some(b)) = (r.loglik_oos, r.static_loglik_oos) {
                println!("loglik out-of-sample {a:.2} (static {b:.2})");
            }
            println!("results in {}", out.display());
        }
        Command::Experiment { name, config, set, out, resume, verbose } => {
            let cfg = ExperimentConfig::from_raw(name, load_raw(&config, &set)?)?;
            let start = Instant::now();
            let res = run_experiment(&cfg, &RunOptions { outdir: Some(out), resume, verbose })?;
            for t in &res.tables {
                if !t.name.ends_with("-replications") && !t.name.ends_with("-path") {
                    println!("{}", t.render());
                }
            }
            eprintln!("finished in {:.1}s", start.elapsed().as_secs_f64());
        }
        Command::Ratio { fit, input, out } => {
            let t = cmd_ratio(&fit, &input, &out)?;
            println!("wrote {} rows to {}", t.rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
