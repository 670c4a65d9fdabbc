//! Flags, the optional TOML config file, and their resolution into a [`RunConfig`].
//!
//! Precedence: config file over flags over built-in defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use dppsel::eval::{SplitSpec, SyntheticSpec};
use dppsel::methods::Registry;
use dppsel::preselect::DEFAULT_K;
use dppsel::selection::FixedHyper;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    /// Fit each method once and report the selected model.
    Select,
    /// Simulated risk curve of the maximum coefficient loss.
    Risk,
    /// Out-of-distribution prediction study on a real dataset.
    Predict,
}

/// Bayesian variable selection with determinantal point process priors.
///
/// Values in the --config file override flags, which override defaults.
/// Without --data the synthetic collinear design is used, with the noise
/// variance known and no intercept; with --data the intercept and noise
/// variance are estimated.
#[derive(Debug, Default, Parser)]
#[command(name = "dppsel", version)]
pub struct Args {
    #[arg(long, value_enum)]
    pub workflow: Option<Workflow>,

    /// CSV with a header row; omit for the synthetic design.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Response column: header name or 1-based column number.
    #[arg(long)]
    pub response: Option<String>,

    /// Comma-separated subset of EB,DPP,LDPP,GDPP,RIDGE,OLS,ORACLE.
    #[arg(long)]
    pub methods: Option<String>,

    /// Hold hyperparameters fixed instead of estimating them, e.g. "g=20,w=0.3,theta=0.5,alpha=1".
    #[arg(long)]
    pub prior: Option<String>,

    /// Upper end of the GDPP exponent search interval [default: 3].
    #[arg(long)]
    pub alpha_max: Option<f64>,

    /// Predictors kept by LARS before enumerating models [default: 10].
    #[arg(long)]
    pub preselect_k: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Risk-study repetitions [default: 10000], or predictive-study rounds when given.
    #[arg(long)]
    pub reps: Option<usize>,

    /// Largest risk-curve step; sample sizes are 20, 40, ..., 20*k-max [default: 20].
    #[arg(long)]
    pub k_max: Option<usize>,

    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// TOML file with the same keys in camelCase, plus [prior], [synthetic] and [split] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Include the full posterior over the enumerated models (at most 2^20 masks).
    #[arg(long)]
    pub posterior_table: bool,

    /// Worker threads for the studies [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum MethodList {
    #[default]
    Empty,
    Joined(String),
    Items(Vec<String>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ConfigFile {
    workflow: Option<Workflow>,
    data: Option<PathBuf>,
    response: Option<String>,
    #[serde(default)]
    methods: MethodList,
    prior: Option<FixedHyper>,
    alpha_max: Option<f64>,
    preselect_k: Option<usize>,
    seed: Option<u64>,
    reps: Option<usize>,
    k_max: Option<usize>,
    out: Option<PathBuf>,
    posterior_table: Option<bool>,
    threads: Option<usize>,
    synthetic: Option<toml::Table>,
    split: Option<toml::Table>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub workflow: Workflow,
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub methods: Vec<String>,
    pub fixed: FixedHyper,
    pub alpha_max: f64,
    pub preselect_k: usize,
    pub seed: u64,
    pub reps: usize,
    pub k_max: usize,
    pub out: Option<PathBuf>,
    pub posterior_table: bool,
    pub threads: Option<usize>,
    pub synthetic: SyntheticSpec,
    pub split: SplitSpec,
}

const SELECT_METHODS: &[&str] = &["EB", "DPP", "LDPP", "GDPP"];
const STUDY_METHODS: &[&str] = &["EB", "DPP", "LDPP", "GDPP", "RIDGE", "OLS"];

pub fn parse_fixed(text: &str) -> Result<FixedHyper, CliError> {
    let mut fixed = FixedHyper::default();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--prior expects key=value pairs, got {part:?}")))?;
        let v = f64::from_str(value.trim())
            .map_err(|_| CliError::Config(format!("--prior value for {key} is not a number: {value:?}")))?;
        let slot = match key.trim() {
            "g" => &mut fixed.g,
            "w" => &mut fixed.w,
            "theta" => &mut fixed.theta,
            "alpha" => &mut fixed.alpha,
            other => return Err(CliError::Config(format!("unknown --prior key {other:?}; use g, w, theta or alpha"))),
        };
        *slot = Some(v);
    }
    Ok(fixed)
}

fn split_methods(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_ascii_uppercase()).filter(|s| !s.is_empty()).collect()
}

/// Lay the keys of `patch` over the serialized `base`.
fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: Option<toml::Table>, what: &str) -> Result<T, CliError> {
    let Some(patch) = patch else { return Ok(base) };
    let mut table = toml::Table::try_from(&base).map_err(|e| CliError::Config(format!("[{what}]: {e}")))?;
    table.extend(patch);
    toml::Value::Table(table).try_into().map_err(|e| CliError::Config(format!("[{what}]: {e}")))
}

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path.display(), e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(args: Args) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => ConfigFile::default(),
        };
        let workflow = file
            .workflow
            .or(args.workflow)
            .ok_or_else(|| CliError::Config("no workflow given; use --workflow select|risk|predict".into()))?;
        let data = file.data.or(args.data);
        let seed = file.seed.or(args.seed).unwrap_or(0);

        let methods = match file.methods {
            MethodList::Joined(s) => split_methods(&s),
            MethodList::Items(v) => v.iter().map(|s| s.trim().to_ascii_uppercase()).collect(),
            MethodList::Empty => args.methods.as_deref().map(split_methods).unwrap_or_default(),
        };
        let methods = if methods.is_empty() {
            let defaults = if workflow == Workflow::Select { SELECT_METHODS } else { STUDY_METHODS };
            defaults.iter().map(|s| s.to_string()).collect()
        } else {
            methods
        };
        Registry::standard().resolve(&methods).map_err(|e| CliError::Config(e.to_string()))?;

        let fixed = match (file.prior, args.prior.as_deref()) {
            (Some(p), _) => p,
            (None, Some(text)) => parse_fixed(text)?,
            (None, None) => FixedHyper::default(),
        };
        let reps_given = file.reps.or(args.reps);
        let synthetic = overlay(SyntheticSpec { seed, ..Default::default() }, file.synthetic, "synthetic")?;
        let mut split = overlay(SplitSpec { seed, ..Default::default() }, file.split, "split")?;
        if workflow == Workflow::Predict {
            if let Some(r) = reps_given {
                split.rounds = r;
            }
        }

        let cfg = Self {
            workflow,
            response: file.response.or(args.response),
            methods,
            fixed,
            alpha_max: file.alpha_max.or(args.alpha_max).unwrap_or(3.0),
            preselect_k: file.preselect_k.or(args.preselect_k).unwrap_or(DEFAULT_K),
            seed,
            reps: reps_given.unwrap_or(10_000),
            k_max: file.k_max.or(args.k_max).unwrap_or(20),
            out: file.out.or(args.out),
            posterior_table: file.posterior_table.unwrap_or(args.posterior_table),
            threads: file.threads.or(args.threads),
            synthetic,
            split,
            data,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let synthetic = self.data.is_none();
        if self.methods.iter().any(|m| m == "ORACLE") && !synthetic {
            return Err(CliError::Config("ORACLE needs the true coefficients, so it is only available without --data".into()));
        }
        if self.data.is_some() && self.response.is_none() {
            return Err(CliError::Config("--data requires --response".into()));
        }
        match self.workflow {
            Workflow::Risk if !synthetic => {
                return Err(CliError::Config("the risk workflow runs on the synthetic design; drop --data".into()))
            }
            Workflow::Predict if synthetic => {
                return Err(CliError::Config("the predict workflow needs --data and --response".into()))
            }
            _ => {}
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 3.0) {
            return Err(CliError::Config(format!("--alpha-max must lie in (0, 3], got {}", self.alpha_max)));
        }
        if self.preselect_k == 0 || self.k_max == 0 || self.reps < 2 || self.threads == Some(0) {
            return Err(CliError::Config("--preselect-k, --k-max and --threads must be positive and --reps at least 2".into()));
        }
        self.fixed.validate(self.alpha_max).map_err(|e| CliError::Config(e.to_string()))?;
        if self.fixed.w.is_some_and(|w| w >= 1.0) && self.methods.iter().any(|m| m == "EB") {
            return Err(CliError::Config("a fixed w of 1 or more is not an inclusion probability, so EB cannot use it".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(line: &str) -> Args {
        Args::try_parse_from(std::iter::once("dppsel").chain(line.split_whitespace())).unwrap()
    }

    #[test]
    fn defaults_per_workflow() {
        let c = RunConfig::resolve(args("--workflow select")).unwrap();
        assert_eq!(c.methods, vec!["EB", "DPP", "LDPP", "GDPP"]);
        assert_eq!((c.alpha_max, c.preselect_k, c.seed, c.reps), (3.0, 10, 0, 10_000));
        let c = RunConfig::resolve(args("--workflow risk --seed 5")).unwrap();
        assert_eq!(c.methods.len(), 6);
        assert_eq!(c.synthetic.seed, 5);
    }

    #[test]
    fn prior_pairs() {
        let f = parse_fixed("g=20, w=0.25,alpha=1").unwrap();
        assert_eq!((f.g, f.w, f.theta, f.alpha), (Some(20.0), Some(0.25), None, Some(1.0)));
        assert!(parse_fixed("g").is_err());
        assert!(parse_fixed("q=1").is_err());
        assert!(parse_fixed("g=x").is_err());
    }

    #[test]
    fn invalid_combinations() {
        for line in [
            "",
            "--workflow risk --data x.csv --response y",
            "--workflow predict",
            "--workflow select --methods DPP,LASSO",
            "--workflow select --data x.csv --response y --methods ORACLE",
            "--workflow select --data x.csv",
            "--workflow select --alpha-max 4",
            "--workflow risk --reps 1",
        ] {
            let e = RunConfig::resolve(args(line)).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{line}: {e}");
        }
    }

    #[test]
    fn file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "workflow = \"risk\"\nmethods = \"ols, oracle\"\nreps = 50\nkMax = 2\n[prior]\ng = 4.0\n[synthetic]\nnoiseSd = 0.5\n",
        )
        .unwrap();
        let c = RunConfig::resolve(args(&format!(
            "--workflow select --reps 7 --seed 3 --methods DPP --config {}",
            path.display()
        )))
        .unwrap();
        assert_eq!(c.workflow, Workflow::Risk);
        assert_eq!(c.methods, vec!["OLS", "ORACLE"]);
        assert_eq!((c.reps, c.k_max, c.seed), (50, 2, 3));
        assert_eq!(c.fixed.g, Some(4.0));
        assert_eq!(c.synthetic.noise_sd, 0.5);
        assert_eq!(c.synthetic.seed, 3);
        assert_eq!(c.synthetic.rows, 400);

        std::fs::write(&path, "colour = 1\n").unwrap();
        let e = RunConfig::resolve(args(&format!("--workflow select --config {}", path.display()))).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn predict_rounds_from_reps() {
        let c = RunConfig::resolve(args("--workflow predict --data d.csv --response y --reps 12")).unwrap();
        assert_eq!(c.split.rounds, 12);
        let c = RunConfig::resolve(args("--workflow predict --data d.csv --response y")).unwrap();
        assert_eq!(c.split.rounds, 60);
    }
}
