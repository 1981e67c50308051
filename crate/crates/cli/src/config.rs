//! Flat `key = value` configuration with `#` comments, and the resolved
//! experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spectral_copula::CopulaFamily;

use crate::error::CliError;

/// Raw key/value pairs remembering where each value came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut out = RawConfig::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Input(format!("{origin}:{}: expected key = value, got '{line}'", k + 1)));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Input(format!("{origin}:{}: empty key", k + 1)));
            }
            out.entries.insert(key.to_string(), (value.trim().to_string(), format!("{origin}:{}", k + 1)));
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for o in overrides {
            let Some((key, value)) = o.split_once('=') else {
                return Err(CliError::Input(format!("override '{o}' is not key=value")));
            };
            self.entries.insert(key.trim().to_string(), (value.trim().to_string(), "command line".to_string()));
        }
        Ok(())
    }

    pub(crate) fn take_string(&mut self, key: &str, default: &str) -> String {
        self.entries.remove(key).map_or_else(|| default.to_string(), |(v, _)| v)
    }

    /// Fails on the first key nobody consumed.
    pub(crate) fn finish(&self) -> Result<(), CliError> {
        match self.entries.iter().next() {
            Some((k, (_, at))) => Err(CliError::Input(format!("{at}: unknown field '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), "default".to_string()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub(crate) fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((v, at)) => v.parse().map_err(|e| CliError::Input(format!("{at}: field '{key}': '{v}': {e}"))),
        }
    }

    pub(crate) fn take_list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((v, at)) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|e| CliError::Input(format!("{at}: field '{key}': '{s}': {e}"))))
                .collect(),
        }
    }

    pub(crate) fn take_bool(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((v, at)) => parse_switch(&v).ok_or_else(|| CliError::Input(format!("{at}: field '{key}': '{v}' is not on/off"))),
        }
    }
}

pub fn parse_switch(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Table2,
    Table3,
    FigBic,
    FigMisspec,
    ShrinkCurve,
}

impl Experiment {
    pub const ALL: [Experiment; 5] =
        [Experiment::Table2, Experiment::Table3, Experiment::FigBic, Experiment::FigMisspec, Experiment::ShrinkCurve];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::FigBic => "fig-bic",
            Experiment::FigMisspec => "fig-misspec",
            Experiment::ShrinkCurve => "shrink-curve",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Input(format!("unknown experiment '{s}' (expected one of table2, table3, fig-bic, fig-misspec, shrink-curve)")))
    }
}

/// Everything an experiment run depends on besides the output location.
/// Default sizes are desk scale; the full 100-asset settings live in `configs/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_groups: usize,
    pub n_countries: usize,
    pub beta_c: Vec<f64>,
    pub t: Vec<usize>,
    pub t_oos: usize,
    pub nu: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    /// Dynamic eigenvalues in the data-generating process (and fitted model).
    pub d0: usize,
    pub d0_max: usize,
    /// Period of the periodic eigenvalue paths; 0 means the in-sample length.
    pub horizon: usize,
    pub reps: usize,
    pub seed: u64,
    pub family: CopulaFamily,
    pub shrink: bool,
    pub factor: bool,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            n_groups: 5,
            n_countries: 5,
            beta_c: vec![1.5],
            t: vec![1000],
            t_oos: 0,
            nu: 25.0,
            gamma: -0.25,
            a: 0.1,
            b: 0.9,
            d0: 2,
            d0_max: 3,
            horizon: 0,
            reps: 20,
            seed: 1,
            family: CopulaFamily::SkewT,
            shrink: true,
            factor: true,
        };
        match experiment {
            Experiment::Table2 => ExperimentConfig {
                n_groups: 10,
                beta_c: vec![0.0, 0.75, 1.5],
                t: vec![250, 1000],
                t_oos: 1000,
                d0: 0,
                ..base
            },
            Experiment::Table3 => base,
            Experiment::FigBic => ExperimentConfig { n_groups: 10, n_countries: 10, shrink: false, ..base },
            Experiment::FigMisspec => ExperimentConfig { t_oos: 1000, reps: 5, ..base },
            Experiment::ShrinkCurve => ExperimentConfig { n_groups: 10, t: vec![500], t_oos: 500, d0: 1, reps: 5, ..base },
        }
    }

    /// Resolves a raw configuration; unknown keys are rejected.
    pub fn from_raw(experiment: Experiment, mut raw: RawConfig) -> Result<Self, CliError> {
        if let Some((v, at)) = raw.entries.remove("experiment") {
            if v != experiment.name() {
                return Err(CliError::Input(format!("{at}: config is for experiment '{v}', not '{}'", experiment.name())));
            }
        }
        let d = Self::defaults(experiment);
        let family = match raw.entries.remove("family") {
            None => d.family,
            Some((v, at)) => v.parse().map_err(|e| CliError::Input(format!("{at}: field 'family': {e}")))?,
        };
        let cfg = ExperimentConfig {
            experiment,
            n_groups: raw.take("n_groups", d.n_groups)?,
            n_countries: raw.take("n_countries", d.n_countries)?,
            beta_c: raw.take_list("beta_c", d.beta_c)?,
            t: raw.take_list("t", d.t)?,
            t_oos: raw.take("t_oos", d.t_oos)?,
            nu: raw.take("nu", d.nu)?,
            gamma: raw.take("gamma", d.gamma)?,
            a: raw.take("a", d.a)?,
            b: raw.take("b", d.b)?,
            d0: raw.take("d0", d.d0)?,
            d0_max: raw.take("d0_max", d.d0_max)?,
            horizon: raw.take("horizon", d.horizon)?,
            reps: raw.take("reps", d.reps)?,
            seed: raw.take("seed", d.seed)?,
            family,
            shrink: raw.take_bool("shrink", d.shrink)?,
            factor: raw.take_bool("factor", d.factor)?,
        };
        raw.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(m));
        if self.n_groups == 0 || self.n_countries == 0 {
            return bad("n_groups and n_countries must be positive".into());
        }
        if self.beta_c.is_empty() || self.t.is_empty() {
            return bad("beta_c and t need at least one value".into());
        }
        if let Some(t) = self.t.iter().find(|t| **t <= self.dim()) {
            return bad(format!("t = {t} must exceed d = {}", self.dim()));
        }
        if self.reps == 0 {
            return bad("reps must be positive".into());
        }
        if self.d0 > self.dim() || self.d0_max > self.dim() {
            return bad(format!("d0 and d0_max must not exceed d = {}", self.dim()));
        }
        if !(self.a > 0.0 && self.b > 0.0 && self.b < 1.0) {
            return bad(format!("need a > 0 and 0 < b < 1, got a = {}, b = {}", self.a, self.b));
        }
        if self.family != CopulaFamily::Gaussian && !(self.nu > 4.0) {
            return bad(format!("nu must exceed 4, got {}", self.nu));
        }
        match self.experiment {
            Experiment::Table2 | Experiment::FigMisspec | Experiment::ShrinkCurve if self.t_oos == 0 => {
                bad(format!("{} needs t_oos > 0", self.experiment.name()))
            }
            Experiment::FigMisspec | Experiment::ShrinkCurve if self.d0 == 0 => {
                bad(format!("{} needs d0 > 0", self.experiment.name()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_groups * self.n_countries
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_overrides_and_diagnostics() {
        let mut raw = RawConfig::parse("# desk run\nreps = 3  # few\nbeta_c = 0, 1.5\n\nt=300\n", "x.conf").unwrap();
        raw.apply_overrides(&["seed=9".into()]).unwrap();
        let cfg = ExperimentConfig::from_raw(Experiment::Table2, raw).unwrap();
        assert_eq!((cfg.reps, cfg.seed, cfg.t.clone()), (3, 9, vec![300]));
        assert_eq!(cfg.beta_c, vec![0.0, 1.5]);

        let err = ExperimentConfig::from_raw(Experiment::Table3, RawConfig::parse("a = 0.1\nnu = abc\n", "y.conf").unwrap());
        let msg = err.unwrap_err().to_string();
        assert!(msg.contains("y.conf:2") && msg.contains("nu"), "{msg}");
        let err = ExperimentConfig::from_raw(Experiment::Table3, RawConfig::parse("colour = red\n", "z.conf").unwrap());
        assert!(err.unwrap_err().to_string().contains("unknown field 'colour'"));
        assert!(RawConfig::parse("just words\n", "w").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::defaults(Experiment::Table3);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
