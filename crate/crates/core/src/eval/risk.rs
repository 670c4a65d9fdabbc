use rayon::prelude::*;
use serde::Serialize;

use super::{generate_synthetic, max_loss, mean_and_se, simulate_response, SyntheticSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::methods::{Estimator, FitProblem};
use crate::optimize::OptimizerOptions;
use crate::selection::{FixedHyper, Sigma2Mode};

/// Rows added per step of the risk curve.
pub const ROWS_PER_STEP: usize = 20;

#[derive(Debug, Clone)]
pub struct RiskOptions {
    pub reps: usize,
    pub fixed: FixedHyper,
    pub alpha_max: f64,
    pub optimizer: OptimizerOptions,
}

impl Default for RiskOptions {
    fn default() -> Self {
        Self { reps: 10_000, fixed: FixedHyper::default(), alpha_max: 3.0, optimizer: OptimizerOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskPoint {
    pub method: String,
    pub sample_size: usize,
    pub mean_max_loss: f64,
    pub std_err: f64,
    pub reps: usize,
    /// Fits that errored; each scored as an infinite loss.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub sample_sizes: Vec<usize>,
    /// Ordered by sample size, then by method in the caller's order.
    pub points: Vec<RiskPoint>,
}

impl RiskCurve {
    pub fn get(&self, method: &str, sample_size: usize) -> Option<&RiskPoint> {
        self.points.iter().find(|p| p.method == method && p.sample_size == sample_size)
    }
}

/// Risk curve at sample sizes `20, 40, …, 20·k_max`.
pub fn run_risk_study(
    spec: &SyntheticSpec,
    methods: &[&dyn Estimator],
    k_max: usize,
    options: &RiskOptions,
) -> Result<RiskCurve> {
    let sizes: Vec<usize> = (1..=k_max).map(|k| k * ROWS_PER_STEP).collect();
    run_risk_study_at(spec, methods, &sizes, options)
}

/// Mean maximum loss over repeated responses on one shared design, whose
/// first `n` rows are used at sample size `n`.
pub fn run_risk_study_at(
    spec: &SyntheticSpec,
    methods: &[&dyn Estimator],
    sample_sizes: &[usize],
    options: &RiskOptions,
) -> Result<RiskCurve> {
    if methods.is_empty() || sample_sizes.is_empty() {
        return Err(Error::InvalidInput("risk study needs at least one method and one sample size".into()));
    }
    if options.reps < 2 {
        return Err(Error::InvalidParameter(format!("reps must be at least 2, got {}", options.reps)));
    }
    let design = generate_synthetic(spec)?;
    if let Some(&n) = sample_sizes.iter().find(|&&n| n > spec.rows || n < 2) {
        return Err(Error::InvalidParameter(format!("sample size {n} outside 2..={}", spec.rows)));
    }
    let beta = spec.beta();
    let support = spec.true_support();
    let mut points = Vec::new();
    for (step, &n) in sample_sizes.iter().enumerate() {
        let x = design.head(n);
        let losses: Vec<Vec<f64>> = (0..options.reps)
            .into_par_iter()
            .map(|rep| {
                let y = simulate_response(spec, &x, 1 + ((step as u64) << 32) + rep as u64);
                let data = Dataset::new(y, x.clone(), None).expect("dimensions agree");
                let problem = FitProblem {
                    true_support: Some(support),
                    fixed: options.fixed.clone(),
                    alpha_max: options.alpha_max,
                    optimizer: options.optimizer.clone(),
                    ..FitProblem::new(&data, Sigma2Mode::Known(spec.sigma2()), false)
                };
                methods
                    .iter()
                    .map(|m| m.fit(&problem).and_then(|f| max_loss(&beta, &f.beta)).unwrap_or(f64::INFINITY))
                    .collect()
            })
            .collect();
        for (i, m) in methods.iter().enumerate() {
            let column: Vec<f64> = losses.iter().map(|row| row[i]).collect();
            let (mean, se) = mean_and_se(&column);
            points.push(RiskPoint {
                method: m.name().to_string(),
                sample_size: n,
                mean_max_loss: mean,
                std_err: se,
                reps: options.reps,
                failures: column.iter().filter(|v| v.is_infinite()).count(),
            });
        }
    }
    Ok(RiskCurve { sample_sizes: sample_sizes.to_vec(), points })
}
