//! Reference estimators: least squares, empirical-Bayes ridge and the oracle.
//!
//! Every estimator takes the same working design as the Bayesian methods,
//! so that with an intercept the columns are standardized and results are
//! folded back to the raw predictor scale.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{log_det_psd, solve_spd, SubsetMask};
use crate::selection::{Sigma2Mode, WorkingDesign};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Search interval for `log λ`.
pub const LOG_LAMBDA_RANGE: (f64, f64) = (-12.0, 12.0);

/// Coefficients on the raw predictor scale plus an intercept (zero when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub beta: DVector<f64>,
    pub intercept: f64,
}

impl LinearFit {
    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.intercept + self.beta.dot(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub lambda: f64,
    pub beta_hat: DVector<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    pub log_evidence: f64,
}

fn intercept_mu(dataset: &Dataset, intercept: bool) -> Option<f64> {
    intercept.then(|| dataset.y.mean())
}

/// Ordinary least squares; with `intercept` the data are centred first.
pub fn ols(dataset: &Dataset, intercept: bool) -> Result<LinearFit> {
    supported_ols(dataset, &SubsetMask::full(dataset.p()), intercept)
}

/// Least squares on the true support, zeros elsewhere.
pub fn oracle(dataset: &Dataset, support: &SubsetMask, intercept: bool) -> Result<LinearFit> {
    if support.len() != dataset.p() {
        return Err(Error::DimensionMismatch { expected: dataset.p(), found: support.len() });
    }
    supported_ols(dataset, support, intercept)
}

fn supported_ols(dataset: &Dataset, support: &SubsetMask, intercept: bool) -> Result<LinearFit> {
    let design = WorkingDesign::new(dataset, intercept_mu(dataset, intercept))?;
    let idx = support.indices();
    let mut beta = DVector::zeros(dataset.p());
    if !idx.is_empty() {
        let z = design.z.select_columns(idx.iter());
        let coef = solve_spd(&z.tr_mul(&z), &z.tr_mul(&design.y))?;
        for (k, &j) in idx.iter().enumerate() {
            beta[j] = coef[k];
        }
    }
    let (beta, intercept) = design.to_raw(&beta);
    Ok(LinearFit { beta, intercept })
}

struct RidgeSystem {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n: usize,
}

impl RidgeSystem {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
        }
        Ok(Self { gram: x.tr_mul(x), xty: x.tr_mul(y), yty: y.dot(y), n: y.len() })
    }

    fn p(&self) -> usize {
        self.gram.nrows()
    }

    /// `(β̂(λ), log det(XᵀX + λI), yᵀy − yᵀX(XᵀX + λI)⁻¹Xᵀy)`.
    fn solve(&self, lambda: f64) -> Result<(DVector<f64>, f64, f64)> {
        let mut a = self.gram.clone();
        for i in 0..self.p() {
            a[(i, i)] += lambda;
        }
        let beta = solve_spd(&a, &self.xty)?;
        let log_det = log_det_psd(&a);
        let resid = (self.yty - self.xty.dot(&beta)).max(0.0);
        Ok((beta, log_det, resid))
    }

    fn evidence(&self, lambda: f64, sigma2: f64) -> Result<f64> {
        let (_, log_det, q) = self.solve(lambda)?;
        Ok(evidence_from_parts(self.p(), self.n, lambda, sigma2, log_det, q))
    }
}

fn evidence_from_parts(p: usize, n: usize, lambda: f64, sigma2: f64, log_det: f64, q: f64) -> f64 {
    p as f64 / 2.0 * lambda.ln() - 0.5 * log_det - n as f64 / 2.0 * (LN_2PI + sigma2.ln()) - q / (2.0 * sigma2)
}

/// `log p(y | λ, σ²)` with `β ~ N(0, σ²λ⁻¹I)`, all constants included.
pub fn ridge_evidence(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, sigma2: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda and sigma2 must be positive, got {lambda}, {sigma2}")));
    }
    RidgeSystem::new(x, y)?.evidence(lambda, sigma2)
}

/// Ridge coefficients `(XᵀX + λI)⁻¹Xᵀy` on the given matrices.
pub fn ridge_coefficients(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    Ok(RidgeSystem::new(x, y)?.solve(lambda)?.0)
}

/// Evidence at `λ` with σ² either known or profiled out (`σ̂² = Q(λ)/n`).
fn profiled(sys: &RidgeSystem, lambda: f64, sigma2: Sigma2Mode) -> Result<(f64, f64)> {
    let (_, log_det, q) = sys.solve(lambda)?;
    let s2 = match sigma2 {
        Sigma2Mode::Known(s) => s,
        Sigma2Mode::Estimated => (q / sys.n as f64).max(f64::MIN_POSITIVE),
    };
    Ok((evidence_from_parts(sys.p(), sys.n, lambda, s2, log_det, q), s2))
}

/// Ridge with `λ` (and σ² when unknown) chosen by maximizing the evidence.
pub fn fit_ridge(dataset: &Dataset, sigma2: Sigma2Mode, intercept: bool) -> Result<RidgeFit> {
    if let Sigma2Mode::Known(s) = sigma2 {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("known sigma2 must be positive, got {s}")));
        }
    }
    let design = WorkingDesign::new(dataset, intercept_mu(dataset, intercept))?;
    let sys = RidgeSystem::new(&design.z, &design.y)?;
    let objective = |t: f64| profiled(&sys, t.exp(), sigma2).map_or(f64::NEG_INFINITY, |v| v.0);

    // coarse scan, then golden-section inside the bracket around the best grid point
    let (lo, hi) = LOG_LAMBDA_RANGE;
    let steps = 48;
    let h = (hi - lo) / steps as f64;
    let grid: Vec<(f64, f64)> = (0..=steps).map(|k| lo + h * k as f64).map(|t| (t, objective(t))).collect();
    let best = grid.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(i, _)| i).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)].0, grid[(best + 1).min(steps)].0);
    let mut top = grid[best];
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while b - a > 1e-9 {
        if f1 >= f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - INV_PHI * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + INV_PHI * (b - a);
            f2 = objective(x2);
        }
        for (t, f) in [(x1, f1), (x2, f2)] {
            if f > top.1 {
                top = (t, f);
            }
        }
    }
    if !top.1.is_finite() {
        return Err(Error::OptimizationFailed("ridge evidence is non-finite on the whole grid".into()));
    }
    let lambda = top.0.exp();
    let (log_evidence, s2) = profiled(&sys, lambda, sigma2)?;
    let (beta_work, _, _) = sys.solve(lambda)?;
    let (beta_hat, intercept) = design.to_raw(&beta_work);
    Ok(RidgeFit { lambda, beta_hat, intercept, sigma2: s2, log_evidence })
}
