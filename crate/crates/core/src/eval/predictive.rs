use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{abs_loss, mahalanobis_split, substream, Split, SplitSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::methods::{Estimator, FitProblem};
use crate::optimize::OptimizerOptions;
use crate::preselect::DEFAULT_K;
use crate::selection::{FixedHyper, Sigma2Mode};

#[derive(Debug, Clone)]
pub struct PredictOptions {
    /// LARS support size for the Bayesian methods.
    pub preselect_k: usize,
    pub fixed: FixedHyper,
    pub alpha_max: f64,
    pub optimizer: OptimizerOptions,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self { preselect_k: DEFAULT_K, fixed: FixedHyper::default(), alpha_max: 3.0, optimizer: OptimizerOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundFailure {
    pub method: String,
    pub round: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictiveResult {
    pub methods: Vec<String>,
    /// `losses[i][l]`: absolute loss of method `i` in round `l`, `None` if the fit failed.
    pub losses: Vec<Vec<Option<f64>>>,
    pub test_rows: Vec<usize>,
    pub failures: Vec<RoundFailure>,
    pub split: Split,
}

impl PredictiveResult {
    pub fn losses_for(&self, method: &str) -> Option<&[Option<f64>]> {
        self.methods.iter().position(|m| m == method).map(|i| self.losses[i].as_slice())
    }

    /// Rounds where both methods succeeded, as paired loss vectors.
    pub fn paired(&self, a: &str, b: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let (la, lb) = (self.losses_for(a)?, self.losses_for(b)?);
        Some(la.iter().zip(lb).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip())
    }
}

/// Per round: one test row from the outlying pool, `m` training rows drawn
/// without replacement from the inner pool, every method fitted and scored.
pub fn run_predictive_study(
    dataset: &Dataset,
    spec: &SplitSpec,
    methods: &[&dyn Estimator],
    options: &PredictOptions,
) -> Result<PredictiveResult> {
    if methods.is_empty() {
        return Err(Error::InvalidInput("predictive study needs at least one method".into()));
    }
    let split = mahalanobis_split(dataset, spec)?;
    let rounds: Vec<(usize, Vec<std::result::Result<f64, String>>)> = (0..spec.rounds)
        .into_par_iter()
        .map(|round| {
            let mut rng = substream(spec.seed, round as u64);
            let test = split.test_pool[rng.random_range(0..split.test_pool.len())];
            let mut rows: Vec<usize> = index::sample(&mut rng, split.train_pool.len(), spec.train_sample_size)
                .into_iter()
                .map(|i| split.train_pool[i])
                .collect();
            rows.sort_unstable();
            let train = dataset.select_rows(&rows);
            let x_test: Vec<f64> = dataset.x.row(test).iter().copied().collect();
            let losses = methods
                .iter()
                .map(|m| {
                    let problem = FitProblem {
                        preselect_k: m.is_bayesian().then_some(options.preselect_k),
                        fixed: options.fixed.clone(),
                        alpha_max: options.alpha_max,
                        optimizer: options.optimizer.clone(),
                        ..FitProblem::new(&train, Sigma2Mode::Estimated, true)
                    };
                    m.fit(&problem).map(|f| abs_loss(dataset.y[test], f.predict(&x_test))).map_err(|e| e.to_string())
                })
                .collect();
            (test, losses)
        })
        .collect();

    let mut losses = vec![Vec::with_capacity(spec.rounds); methods.len()];
    let mut failures = Vec::new();
    let mut test_rows = Vec::with_capacity(spec.rounds);
    for (round, (test, per_method)) in rounds.into_iter().enumerate() {
        test_rows.push(test);
        for (i, r) in per_method.into_iter().enumerate() {
            match r {
                Ok(v) => losses[i].push(Some(v)),
                Err(message) => {
                    losses[i].push(None);
                    failures.push(RoundFailure { method: methods[i].name().to_string(), round, message });
                }
            }
        }
    }
    Ok(PredictiveResult {
        methods: methods.iter().map(|m| m.name().to_string()).collect(),
        losses,
        test_rows,
        failures,
        split,
    })
}
