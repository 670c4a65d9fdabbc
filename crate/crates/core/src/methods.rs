//! Estimators behind one interface, looked up by name at run time.

use nalgebra::DVector;

use crate::baselines::{fit_ridge, ols, oracle};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::SubsetMask;
use crate::optimize::{OptimizerOptions, OptimizerTrace};
use crate::preselect::select_support;
use crate::priors::PriorFamily;
use crate::selection::{fit_and_select, FitOptions, FixedHyper, Hyperparams, Sigma2Mode};

/// Everything an estimator may need to fit one dataset.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    pub dataset: &'a Dataset,
    pub sigma2: Sigma2Mode,
    pub intercept: bool,
    /// LARS preselection size for the Bayesian methods; `None` enumerates all predictors.
    pub preselect_k: Option<usize>,
    /// Only known for simulated data.
    pub true_support: Option<SubsetMask>,
    pub fixed: FixedHyper,
    pub alpha_max: f64,
    pub optimizer: OptimizerOptions,
}

impl<'a> FitProblem<'a> {
    pub fn new(dataset: &'a Dataset, sigma2: Sigma2Mode, intercept: bool) -> Self {
        Self {
            dataset,
            sigma2,
            intercept,
            preselect_k: None,
            true_support: None,
            fixed: FixedHyper::default(),
            alpha_max: 3.0,
            optimizer: OptimizerOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub beta: DVector<f64>,
    pub intercept: f64,
    /// Selected predictors, for the methods that select.
    pub mask: Option<SubsetMask>,
    /// Preselected support the Bayesian search was restricted to.
    pub support: Option<SubsetMask>,
    pub hyper: Option<Hyperparams>,
    pub lambda: Option<f64>,
    pub log_evidence: Option<f64>,
    pub log_posterior: Vec<(SubsetMask, f64)>,
    pub diagnostics: Option<OptimizerTrace>,
}

impl Fit {
    fn linear(beta: DVector<f64>, intercept: f64) -> Self {
        Self {
            beta,
            intercept,
            mask: None,
            support: None,
            hyper: None,
            lambda: None,
            log_evidence: None,
            log_posterior: Vec::new(),
            diagnostics: None,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the method enumerates models and therefore uses preselection.
    fn is_bayesian(&self) -> bool {
        false
    }

    fn fit(&self, problem: &FitProblem) -> Result<Fit>;
}

pub struct Bayes {
    name: &'static str,
    family: PriorFamily,
}

impl Bayes {
    pub fn new(name: &'static str, family: PriorFamily) -> Self {
        Self { name, family }
    }
}

impl Estimator for Bayes {
    fn name(&self) -> &'static str {
        self.name
    }

    fn is_bayesian(&self) -> bool {
        true
    }

    fn fit(&self, problem: &FitProblem) -> Result<Fit> {
        let d = problem.dataset;
        let support = match problem.preselect_k {
            Some(k) if d.p() > k => Some(select_support(d, k)?),
            _ => None,
        };
        let options = FitOptions {
            sigma2: problem.sigma2,
            intercept: problem.intercept,
            support,
            fixed: problem.fixed.clone(),
            alpha_max: problem.alpha_max,
            optimizer: problem.optimizer.clone(),
        };
        let r = fit_and_select(d, self.family, &options)?;
        Ok(Fit {
            beta: r.beta_hat,
            intercept: r.intercept,
            mask: Some(r.best_mask),
            support,
            hyper: Some(r.hyper),
            lambda: None,
            log_evidence: Some(r.log_type_ii),
            log_posterior: r.log_posterior,
            diagnostics: r.diagnostics,
        })
    }
}

pub struct Ridge;

impl Estimator for Ridge {
    fn name(&self) -> &'static str {
        "RIDGE"
    }

    fn fit(&self, problem: &FitProblem) -> Result<Fit> {
        let r = fit_ridge(problem.dataset, problem.sigma2, problem.intercept)?;
        let mut fit = Fit::linear(r.beta_hat, r.intercept);
        fit.lambda = Some(r.lambda);
        fit.log_evidence = Some(r.log_evidence);
        Ok(fit)
    }
}

pub struct Ols;

impl Estimator for Ols {
    fn name(&self) -> &'static str {
        "OLS"
    }

    fn fit(&self, problem: &FitProblem) -> Result<Fit> {
        let r = ols(problem.dataset, problem.intercept)?;
        Ok(Fit::linear(r.beta, r.intercept))
    }
}

pub struct Oracle;

impl Estimator for Oracle {
    fn name(&self) -> &'static str {
        "ORACLE"
    }

    fn fit(&self, problem: &FitProblem) -> Result<Fit> {
        let support = problem
            .true_support
            .ok_or_else(|| Error::InvalidInput("ORACLE needs the true support, which only simulated data has".into()))?;
        let r = oracle(problem.dataset, &support, problem.intercept)?;
        let mut fit = Fit::linear(r.beta, r.intercept);
        fit.mask = Some(support);
        Ok(fit)
    }
}

/// Name-indexed estimator table; lookups are case-insensitive.
pub struct Registry {
    entries: Vec<Box<dyn Estimator>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// EB, DPP, LDPP, GDPP, RIDGE, OLS and ORACLE.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Bayes::new("EB", PriorFamily::Bernoulli)));
        r.register(Box::new(Bayes::new("DPP", PriorFamily::Dpp)));
        r.register(Box::new(Bayes::new("LDPP", PriorFamily::Ldpp)));
        r.register(Box::new(Bayes::new("GDPP", PriorFamily::Gdpp)));
        r.register(Box::new(Ridge));
        r.register(Box::new(Ols));
        r.register(Box::new(Oracle));
        r
    }

    /// Adds an estimator, replacing any existing one with the same name.
    pub fn register(&mut self, estimator: Box<dyn Estimator>) {
        self.entries.retain(|e| !e.name().eq_ignore_ascii_case(estimator.name()));
        self.entries.push(estimator);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn Estimator> {
        self.entries.iter().find(|e| e.name().eq_ignore_ascii_case(name.trim())).map(|e| e.as_ref())
    }

    /// Resolve a list of names, keeping the caller's order and rejecting unknowns or repeats.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<&dyn Estimator>> {
        if names.is_empty() {
            return Err(Error::InvalidInput("method list is empty".into()));
        }
        let mut out: Vec<&dyn Estimator> = Vec::new();
        for n in names {
            let e = self.get(n.as_ref()).ok_or_else(|| {
                Error::InvalidInput(format!("unknown method {:?}; known: {}", n.as_ref(), self.names().join(", ")))
            })?;
            if out.iter().any(|o| o.name() == e.name()) {
                return Err(Error::InvalidInput(format!("method {} listed twice", e.name())));
            }
            out.push(e);
        }
        Ok(out)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::standard()
    }
}
