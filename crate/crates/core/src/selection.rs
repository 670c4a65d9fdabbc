//! g-prior marginal likelihoods, posterior over submodels and empirical-Bayes
//! hyperparameter fitting.
//!
//! Two working designs are used. Without an intercept the raw columns of `X`
//! enter the likelihood directly. With an intercept the columns are
//! standardized and `y` is centred at `μ`; since standardized columns sum to
//! zero, centring at the sample mean is the exact profile of `μ`.
//! The DPP kernel is always the correlation matrix of the design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{
    correlation_kernel, principal_log_det, projection_ss, solve_spd, standardize, GramSystem,
    KernelMatrix, SpectralKernel, SubsetMask, MAX_MASK_BITS,
};
use crate::optimize::{maximize, Bounds, OptimizerOptions, OptimizerTrace};
use crate::priors::{linear_mixture, PriorFamily, PriorSpec, MAX_TABLE_P};

/// Largest number of free predictors summed over exhaustively.
pub const MAX_ENUMERATION_P: usize = 25;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "lowercase")]
pub enum Sigma2Mode {
    Known(f64),
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyperparams {
    pub g: f64,
    pub w: f64,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma2: f64,
    pub sigma2_estimated: bool,
    /// `Some` when the intercept is estimated, `None` when the model has none.
    pub mu: Option<f64>,
}

impl Hyperparams {
    /// Known-σ² hyperparameters without an intercept.
    pub fn known(g: f64, w: f64, sigma2: f64) -> Self {
        Self { g, w, theta: None, alpha: None, sigma2, sigma2_estimated: false, mu: None }
    }

    fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) || !(self.sigma2 > 0.0) || !(self.w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g, w and sigma2 must be positive (g={}, w={}, sigma2={})",
                self.g, self.w, self.sigma2
            )));
        }
        Ok(())
    }

    pub fn prior_spec(&self, family: PriorFamily, p: usize, kernel: Option<&KernelMatrix>) -> Result<PriorSpec> {
        PriorSpec::for_family(family, p, kernel, self.w, self.theta, self.alpha)
    }
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub best_mask: SubsetMask,
    pub hyper: Hyperparams,
    /// Coefficients on the original predictor scale, zero off the selected support.
    pub beta_hat: DVector<f64>,
    /// Intercept on the original scale (zero without an intercept).
    pub intercept: f64,
    /// Normalized log posterior over the enumerated masks.
    pub log_posterior: Vec<(SubsetMask, f64)>,
    pub log_type_ii: f64,
    pub diagnostics: Option<OptimizerTrace>,
}

/// `log ∫ p(y | β_γ) p(β_γ | g) dβ_γ` under the g-prior.
pub fn log_marginal_given_model(xg: &DMatrix<f64>, y: &DVector<f64>, g: f64, sigma2: f64) -> f64 {
    match projection_ss(xg, y) {
        Ok(ss) => log_marginal_from_ss(ss, xg.ncols(), y.len(), y.dot(y), g, sigma2),
        Err(_) => f64::NEG_INFINITY,
    }
}

fn log_marginal_from_ss(ss: f64, k: usize, n: usize, yty: f64, g: f64, sigma2: f64) -> f64 {
    -(k as f64) / 2.0 * g.ln_1p() - n as f64 / 2.0 * (LN_2PI + sigma2.ln()) + g / (1.0 + g) * ss / (2.0 * sigma2)
        - yty / (2.0 * sigma2)
}

/// Stable `log Σ exp(v)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Design and response as they enter the likelihood, plus the map back to raw scale.
#[derive(Debug, Clone)]
pub struct WorkingDesign {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub shift: DVector<f64>,
    pub scale: DVector<f64>,
    pub mu: Option<f64>,
}

impl WorkingDesign {
    pub fn new(dataset: &Dataset, mu: Option<f64>) -> Result<Self> {
        let p = dataset.p();
        match mu {
            None => Ok(Self {
                z: dataset.x.values().clone(),
                y: dataset.y.clone(),
                shift: DVector::zeros(p),
                scale: DVector::from_element(p, 1.0),
                mu: None,
            }),
            Some(m) => {
                let s = standardize(&dataset.x)?;
                Ok(Self { z: s.values, y: dataset.y.add_scalar(-m), shift: s.means, scale: s.scales, mu: Some(m) })
            }
        }
    }

    /// Map working-scale coefficients back to the raw predictor scale.
    pub fn to_raw(&self, beta: &DVector<f64>) -> (DVector<f64>, f64) {
        let raw = beta.component_div(&self.scale);
        let intercept = self.mu.map_or(0.0, |m| m - raw.dot(&self.shift));
        (raw, intercept)
    }
}

fn enumeration_support(p: usize, support: Option<&SubsetMask>, limit: usize) -> Result<SubsetMask> {
    if p > MAX_MASK_BITS {
        return Err(Error::TooLarge { p, limit: MAX_MASK_BITS });
    }
    let s = match support {
        Some(s) if s.len() != p => return Err(Error::DimensionMismatch { expected: p, found: s.len() }),
        Some(s) => *s,
        None => SubsetMask::full(p),
    };
    if s.cardinality() > limit {
        return Err(Error::TooLarge { p: s.cardinality(), limit });
    }
    Ok(s)
}

/// All hyperparameter-independent quantities of the enumerated model space.
#[derive(Debug, Clone)]
pub(crate) struct ModelSpace {
    n: usize,
    p: usize,
    masks: Vec<SubsetMask>,
    indices: Vec<Vec<usize>>,
    ss: Vec<Option<f64>>,
    yty: f64,
    pub(crate) design: WorkingDesign,
}

impl ModelSpace {
    pub(crate) fn new(dataset: &Dataset, mu: Option<f64>, support: Option<&SubsetMask>, limit: usize) -> Result<Self> {
        let support = enumeration_support(dataset.p(), support, limit)?;
        let design = WorkingDesign::new(dataset, mu)?;
        let gram = GramSystem::new(&design.z, &design.y)?;
        let masks: Vec<SubsetMask> = support.submasks().collect();
        let indices: Vec<Vec<usize>> = masks.iter().map(SubsetMask::indices).collect();
        let (mut work, mut rhs) = (Vec::new(), Vec::new());
        let ss = indices.iter().map(|idx| gram.projection_ss(idx, &mut work, &mut rhs)).collect();
        Ok(Self { n: dataset.n(), p: dataset.p(), masks, indices, ss, yty: gram.yty(), design })
    }

    fn log_marginal(&self, i: usize, g: f64, sigma2: f64) -> f64 {
        match self.ss[i] {
            Some(ss) => log_marginal_from_ss(ss, self.indices[i].len(), self.n, self.yty, g, sigma2),
            None => f64::NEG_INFINITY,
        }
    }

    /// `log p(γ) + log p(y|γ)` for every enumerated mask, using the reference prior path.
    fn log_joint(&self, prior: &PriorSpec, g: f64, sigma2: f64) -> Result<Vec<f64>> {
        if prior.p() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: prior.p() });
        }
        let z = prior.log_normalizer();
        let mut work = Vec::new();
        Ok((0..self.masks.len())
            .map(|i| {
                let lp = prior.log_mass(&self.indices[i], &mut work) - z;
                if lp == f64::NEG_INFINITY {
                    lp
                } else {
                    lp + self.log_marginal(i, g, sigma2)
                }
            })
            .collect())
    }
}

/// Correlation kernel of the design, or `None` for the Bernoulli family.
pub fn design_kernel(dataset: &Dataset, family: PriorFamily) -> Result<Option<KernelMatrix>> {
    if family.uses_kernel() {
        Ok(Some(correlation_kernel(&standardize(&dataset.x)?)))
    } else {
        Ok(None)
    }
}

/// Log type-II likelihood `log Σ_γ p(γ) p(y|γ)`, over all masks or over the masks inside `support`.
pub fn log_type_ii_likelihood(
    dataset: &Dataset,
    prior: &PriorSpec,
    hyper: &Hyperparams,
    support: Option<&SubsetMask>,
) -> Result<f64> {
    hyper.validate()?;
    let space = ModelSpace::new(dataset, hyper.mu, support, MAX_ENUMERATION_P)?;
    Ok(log_sum_exp(&space.log_joint(prior, hyper.g, hyper.sigma2)?))
}

/// Normalized posterior over all `2^p` masks.
pub fn posterior_table(dataset: &Dataset, prior: &PriorSpec, hyper: &Hyperparams) -> Result<Vec<(SubsetMask, f64)>> {
    hyper.validate()?;
    let space = ModelSpace::new(dataset, hyper.mu, None, MAX_TABLE_P)?;
    let joint = space.log_joint(prior, hyper.g, hyper.sigma2)?;
    let z = log_sum_exp(&joint);
    Ok(space.masks.iter().zip(joint).map(|(m, v)| (*m, (v - z).exp())).collect())
}

/// `(ĝ/(1+ĝ))·OLS` on the selected columns, reported on the raw predictor scale.
pub fn estimate_coefficients(dataset: &Dataset, mask: &SubsetMask, g: f64, mu: Option<f64>) -> Result<DVector<f64>> {
    Ok(estimate_with_intercept(dataset, mask, g, mu)?.0)
}

/// As [`estimate_coefficients`], also returning the raw-scale intercept.
pub fn estimate_with_intercept(
    dataset: &Dataset,
    mask: &SubsetMask,
    g: f64,
    mu: Option<f64>,
) -> Result<(DVector<f64>, f64)> {
    if mask.len() != dataset.p() {
        return Err(Error::DimensionMismatch { expected: dataset.p(), found: mask.len() });
    }
    let design = WorkingDesign::new(dataset, mu)?;
    let idx = mask.indices();
    let mut beta = DVector::zeros(dataset.p());
    if !idx.is_empty() {
        let zg = design.z.select_columns(idx.iter());
        let coef = solve_spd(&zg.tr_mul(&zg), &zg.tr_mul(&design.y))? * (g / (1.0 + g));
        for (k, &j) in idx.iter().enumerate() {
            beta[j] = coef[k];
        }
    }
    Ok(design.to_raw(&beta))
}

fn select_from_space(space: &ModelSpace, prior: &PriorSpec, hyper: &Hyperparams) -> Result<(usize, Vec<f64>)> {
    let joint = space.log_joint(prior, hyper.g, hyper.sigma2)?;
    let mut best = 0;
    for i in 1..joint.len() {
        let (a, b) = (joint[i], joint[best]);
        if a > b || (a == b && space.masks[i].parsimony_cmp(&space.masks[best]).is_lt()) {
            best = i;
        }
    }
    if joint[best] == f64::NEG_INFINITY {
        return Err(Error::RankDeficient);
    }
    Ok((best, joint))
}

/// Highest-posterior mask among the enumerated ones, with its coefficient estimate.
pub fn select_best_model(
    dataset: &Dataset,
    prior: &PriorSpec,
    hyper: &Hyperparams,
    support: Option<&SubsetMask>,
) -> Result<SelectionResult> {
    hyper.validate()?;
    let space = ModelSpace::new(dataset, hyper.mu, support, MAX_ENUMERATION_P)?;
    let (best, joint) = select_from_space(&space, prior, hyper)?;
    let z = log_sum_exp(&joint);
    let mask = space.masks[best];
    let (beta_hat, intercept) = estimate_with_intercept(dataset, &mask, hyper.g, hyper.mu)?;
    Ok(SelectionResult {
        best_mask: mask,
        hyper: hyper.clone(),
        beta_hat,
        intercept,
        log_posterior: space.masks.iter().zip(&joint).map(|(m, v)| (*m, v - z)).collect(),
        log_type_ii: z,
        diagnostics: None,
    })
}

/// Hyperparameters held at fixed values instead of being estimated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedHyper {
    pub g: Option<f64>,
    pub w: Option<f64>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
}

impl FixedHyper {
    /// Range checks that hold for every family; EB additionally needs `w < 1`.
    pub fn validate(&self, alpha_max: f64) -> Result<()> {
        let bad = |name: &str, v: f64, range: &str| {
            Err(Error::InvalidParameter(format!("fixed {name} must lie in {range}, got {v}")))
        };
        match *self {
            Self { g: Some(g), .. } if !(g > 0.0 && g.is_finite()) => bad("g", g, "(0, inf)"),
            Self { w: Some(w), .. } if !(w > 0.0 && w.is_finite()) => bad("w", w, "(0, inf)"),
            Self { theta: Some(t), .. } if !(0.0..=1.0).contains(&t) => bad("theta", t, "[0, 1]"),
            Self { alpha: Some(a), .. } if !(0.0..=alpha_max).contains(&a) => bad("alpha", a, "[0, alpha_max]"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    pub sigma2: Sigma2Mode,
    /// Estimate an intercept by centring the response.
    pub intercept: bool,
    /// Restrict the likelihood sum to masks inside this support.
    pub support: Option<SubsetMask>,
    pub fixed: FixedHyper,
    pub alpha_max: f64,
    pub optimizer: OptimizerOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sigma2: Sigma2Mode::Estimated,
            intercept: true,
            support: None,
            fixed: FixedHyper::default(),
            alpha_max: 3.0,
            optimizer: OptimizerOptions::default(),
        }
    }
}

impl FitOptions {
    /// Known noise variance, no intercept: the synthetic-study setting.
    pub fn known_sigma2(sigma2: f64) -> Self {
        Self { sigma2: Sigma2Mode::Known(sigma2), intercept: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    LogG,
    /// logit w for Bernoulli, log w otherwise.
    W,
    LogitTheta,
    Alpha,
    LogSigma2,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Box limits of the transformed coordinates.
pub mod limits {
    pub const LOG_G: (f64, f64) = (-6.0, 16.0);
    pub const LOGIT_W: (f64, f64) = (-12.0, 12.0);
    pub const LOG_W: (f64, f64) = (-12.0, 12.0);
    pub const LOGIT_THETA: (f64, f64) = (-15.0, 15.0);
    /// log σ² relative to log of the mean squared working response.
    pub const LOG_SIGMA2_REL: (f64, f64) = (-14.0, 2.0);
}

/// Fast evaluator of the type-II objective over one model space.
///
/// DPP-type normalizers use `log det(wS + I) = Σ log(1 + w·f(λ_i))`, where
/// `λ_i` are eigenvalues of `R` and `f` is the family's spectral map; the
/// per-mask shape log-determinants are cached per `θ` or `α`.
pub(crate) struct TypeIIObjective<'a> {
    space: &'a ModelSpace,
    family: PriorFamily,
    kernel: Option<KernelMatrix>,
    spectral: Option<SpectralKernel>,
    cache_key: Option<f64>,
    shape_log_dets: Vec<f64>,
    work: Vec<f64>,
    terms: Vec<f64>,
}

impl<'a> TypeIIObjective<'a> {
    pub(crate) fn new(space: &'a ModelSpace, family: PriorFamily, kernel: Option<KernelMatrix>) -> Self {
        let spectral = kernel.as_ref().map(SpectralKernel::new);
        Self {
            space,
            family,
            kernel,
            spectral,
            cache_key: None,
            shape_log_dets: Vec::new(),
            work: Vec::new(),
            terms: vec![0.0; space.masks.len()],
        }
    }

    fn refresh_shape(&mut self, key: f64) {
        if self.cache_key == Some(key) {
            return;
        }
        let r = self.kernel.as_ref().expect("kernel families carry R");
        let shape = match self.family {
            PriorFamily::Dpp => r.clone(),
            PriorFamily::Ldpp => linear_mixture(r, key),
            PriorFamily::Gdpp => self.spectral.as_ref().expect("spectral").power(key),
            PriorFamily::Bernoulli => unreachable!(),
        };
        let work = &mut self.work;
        self.shape_log_dets = self.space.indices.iter().map(|idx| principal_log_det(shape.values(), idx, work)).collect();
        self.cache_key = Some(key);
    }

    fn log_normalizer(&self, w: f64, key: f64) -> f64 {
        let lam = self.spectral.as_ref().expect("spectral").eigenvalues();
        lam.iter()
            .map(|&l| {
                let s = match self.family {
                    PriorFamily::Dpp => l,
                    PriorFamily::Ldpp => key * l + (1.0 - key),
                    PriorFamily::Gdpp => l.powf(key),
                    PriorFamily::Bernoulli => unreachable!(),
                };
                (w * s).ln_1p()
            })
            .sum()
    }

    /// `key` is θ for LDPP, α for GDPP and ignored otherwise.
    pub(crate) fn value(&mut self, g: f64, w: f64, key: f64, sigma2: f64) -> f64 {
        let p = self.space.p as f64;
        let ln_w = w.ln();
        match self.family {
            PriorFamily::Bernoulli => {
                let ln_1mw = (-w).ln_1p();
                for i in 0..self.terms.len() {
                    let k = self.space.indices[i].len() as f64;
                    self.terms[i] = k * ln_w + (p - k) * ln_1mw + self.space.log_marginal(i, g, sigma2);
                }
            }
            _ => {
                self.refresh_shape(if self.family == PriorFamily::Dpp { 1.0 } else { key });
                let z = self.log_normalizer(w, key);
                for i in 0..self.terms.len() {
                    let ld = self.shape_log_dets[i];
                    self.terms[i] = if ld == f64::NEG_INFINITY {
                        ld
                    } else {
                        self.space.indices[i].len() as f64 * ln_w + ld - z + self.space.log_marginal(i, g, sigma2)
                    };
                }
            }
        }
        log_sum_exp(&self.terms)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeIIFit {
    pub hyper: Hyperparams,
    pub log_likelihood: f64,
    pub trace: OptimizerTrace,
}

/// Empirical-Bayes estimate of the family's free hyperparameters.
pub fn fit_type_ii(dataset: &Dataset, family: PriorFamily, options: &FitOptions) -> Result<TypeIIFit> {
    let mu = options.intercept.then(|| dataset.y.mean());
    let space = ModelSpace::new(dataset, mu, options.support.as_ref(), MAX_ENUMERATION_P)?;
    fit_on_space(&space, dataset, family, options)
}

pub(crate) fn fit_on_space(
    space: &ModelSpace,
    dataset: &Dataset,
    family: PriorFamily,
    options: &FitOptions,
) -> Result<TypeIIFit> {
    if !(0.0..=3.0).contains(&options.alpha_max) || options.alpha_max == 0.0 {
        return Err(Error::InvalidParameter(format!("alpha_max must lie in (0, 3], got {}", options.alpha_max)));
    }
    options.fixed.validate(options.alpha_max)?;
    if let (PriorFamily::Bernoulli, Some(w)) = (family, options.fixed.w) {
        if w >= 1.0 {
            return Err(Error::InvalidParameter(format!("fixed w is an inclusion probability for EB, got {w}")));
        }
    }
    let kernel = design_kernel(dataset, family)?;
    let fixed = &options.fixed;

    let mut coords = Vec::new();
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    let mut push = |c: Coord, (lo, hi): (f64, f64)| {
        coords.push(c);
        lower.push(lo);
        upper.push(hi);
    };
    if fixed.g.is_none() {
        push(Coord::LogG, limits::LOG_G);
    }
    if fixed.w.is_none() {
        push(Coord::W, if family == PriorFamily::Bernoulli { limits::LOGIT_W } else { limits::LOG_W });
    }
    if family == PriorFamily::Ldpp && fixed.theta.is_none() {
        push(Coord::LogitTheta, limits::LOGIT_THETA);
    }
    if family == PriorFamily::Gdpp && fixed.alpha.is_none() {
        push(Coord::Alpha, (0.0, options.alpha_max));
    }
    let scale_sigma2 = (space.yty / space.n as f64).max(f64::MIN_POSITIVE);
    if options.sigma2 == Sigma2Mode::Estimated {
        let (lo, hi) = limits::LOG_SIGMA2_REL;
        push(Coord::LogSigma2, (scale_sigma2.ln() + lo, scale_sigma2.ln() + hi));
    }
    if let Sigma2Mode::Known(s) = options.sigma2 {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("known sigma2 must be positive, got {s}")));
        }
    }

    let decode = |x: &[f64]| -> Hyperparams {
        let mut h = Hyperparams {
            g: fixed.g.unwrap_or(f64::NAN),
            w: fixed.w.unwrap_or(f64::NAN),
            theta: (family == PriorFamily::Ldpp).then(|| fixed.theta.unwrap_or(f64::NAN)),
            alpha: (family == PriorFamily::Gdpp).then(|| fixed.alpha.unwrap_or(f64::NAN)),
            sigma2: match options.sigma2 {
                Sigma2Mode::Known(s) => s,
                Sigma2Mode::Estimated => f64::NAN,
            },
            sigma2_estimated: options.sigma2 == Sigma2Mode::Estimated,
            mu: space.design.mu,
        };
        for (c, &v) in coords.iter().zip(x) {
            match c {
                Coord::LogG => h.g = v.exp(),
                Coord::W if family == PriorFamily::Bernoulli => h.w = logistic(v),
                Coord::W => h.w = v.exp(),
                Coord::LogitTheta => h.theta = Some(logistic(v)),
                Coord::Alpha => h.alpha = Some(v),
                Coord::LogSigma2 => h.sigma2 = v.exp(),
            }
        }
        h
    };

    let mut objective = TypeIIObjective::new(space, family, kernel);
    let mut eval = |h: &Hyperparams| {
        let key = h.theta.or(h.alpha).unwrap_or(1.0);
        objective.value(h.g, h.w, key, h.sigma2)
    };

    if coords.is_empty() {
        let hyper = decode(&[]);
        hyper.validate()?;
        let v = eval(&hyper);
        return Ok(TypeIIFit {
            hyper,
            log_likelihood: v,
            trace: OptimizerTrace { evaluations: 1, sweeps: 0, converged_starts: 1, best_start: 0 },
        });
    }
    let bounds = Bounds::new(lower, upper)?;
    let opt = maximize(|x| eval(&decode(x)), &bounds, &options.optimizer)?;
    let hyper = decode(&opt.x);
    hyper.validate()?;
    Ok(TypeIIFit { hyper, log_likelihood: opt.value, trace: opt.trace })
}

/// Full pipeline for one prior family: fit hyperparameters, pick the best mask, estimate coefficients.
pub fn fit_and_select(dataset: &Dataset, family: PriorFamily, options: &FitOptions) -> Result<SelectionResult> {
    let mu = options.intercept.then(|| dataset.y.mean());
    let space = ModelSpace::new(dataset, mu, options.support.as_ref(), MAX_ENUMERATION_P)?;
    let fit = fit_on_space(&space, dataset, family, options)?;
    let kernel = design_kernel(dataset, family)?;
    let prior = fit.hyper.prior_spec(family, dataset.p(), kernel.as_ref())?;
    let (best, joint) = select_from_space(&space, &prior, &fit.hyper)?;
    let z = log_sum_exp(&joint);
    let mask = space.masks[best];
    let (beta_hat, intercept) = estimate_with_intercept(dataset, &mask, fit.hyper.g, fit.hyper.mu)?;
    Ok(SelectionResult {
        best_mask: mask,
        hyper: fit.hyper,
        beta_hat,
        intercept,
        log_posterior: space.masks.iter().zip(&joint).map(|(m, v)| (*m, v - z)).collect(),
        log_type_ii: z,
        diagnostics: Some(fit.trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn random_dataset(n: usize, p: usize, beta: &[f64], noise: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DVector::from_column_slice(beta);
        let e = DVector::from_fn(n, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
        Dataset::new(&x * b + e, DesignMatrix::new(x).unwrap(), None).unwrap()
    }

    #[test]
    fn empty_model_marginal() {
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let v = log_marginal_given_model(&DMatrix::zeros(3, 0), &y, 4.0, 0.7);
        let expected = -1.5 * (2.0 * std::f64::consts::PI * 0.7).ln() - y.dot(&y) / 1.4;
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn marginal_rank_deficient_is_neg_infinity() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert_eq!(log_marginal_given_model(&x, &y, 1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn marginal_increases_with_g_when_fit_is_strong() {
        // ss/σ² large relative to |γ| log(1+g): derivative in g positive at g = 1
        let d = random_dataset(30, 1, &[3.0], 0.5, 1);
        let xg = d.x.values().clone();
        let h = 1e-5;
        let slope = (log_marginal_given_model(&xg, &d.y, 1.0 + h, 0.25)
            - log_marginal_given_model(&xg, &d.y, 1.0 - h, 0.25))
            / (2.0 * h);
        assert!(slope > 0.0);
        // and decreases in g for pure noise
        let null = random_dataset(30, 1, &[0.0], 1.0, 2);
        let xn = null.x.values().clone();
        let slope_null = (log_marginal_given_model(&xn, &null.y, 50.0 + h, 1.0)
            - log_marginal_given_model(&xn, &null.y, 50.0 - h, 1.0))
            / (2.0 * h);
        assert!(slope_null < 0.0);
    }

    #[test]
    fn type_ii_single_predictor_hand_sum() {
        let d = random_dataset(12, 1, &[0.8], 1.0, 3);
        let hyper = Hyperparams::known(5.0, 0.3, 1.0);
        let prior = PriorSpec::bernoulli(1, 0.3).unwrap();
        let x = d.x.values().clone();
        let direct = log_sum_exp(&[
            0.7f64.ln() + log_marginal_given_model(&DMatrix::zeros(12, 0), &d.y, 5.0, 1.0),
            0.3f64.ln() + log_marginal_given_model(&x, &d.y, 5.0, 1.0),
        ]);
        let v = log_type_ii_likelihood(&d, &prior, &hyper, None).unwrap();
        assert!((v - direct).abs() < 1e-12);
    }

    /// Bernoulli type-II likelihood written out term by term from the closed form.
    #[test]
    fn bernoulli_matches_closed_form_sum() {
        let d = random_dataset(20, 3, &[1.0, 0.0, -0.5], 1.0, 4);
        let (g, w, s2): (f64, f64, f64) = (7.0, 0.4, 1.3);
        let n: f64 = 20.0;
        let mut terms = Vec::new();
        for bits in 0u64..8 {
            let idx: Vec<usize> = (0..3).filter(|i| bits >> i & 1 == 1).collect();
            let k = idx.len() as f64;
            let xg = d.x.values().select_columns(idx.iter());
            let ss = if idx.is_empty() {
                0.0
            } else {
                let b = (xg.transpose() * &xg).try_inverse().unwrap() * xg.transpose() * &d.y;
                (&xg * b).norm_squared()
            };
            let log_term = k * w.ln() + (3.0 - k) * (1.0 - w).ln()
                - n * s2.sqrt().ln()
                - k / 2.0 * (1.0 + g).ln()
                + g / (1.0 + g) * ss / (2.0 * s2)
                - d.y.norm_squared() / (2.0 * s2);
            terms.push(log_term);
        }
        let expected = log_sum_exp(&terms) - n / 2.0 * (2.0 * std::f64::consts::PI).ln();
        let prior = PriorSpec::bernoulli(3, w).unwrap();
        let v = log_type_ii_likelihood(&d, &prior, &Hyperparams::known(g, w, s2), None).unwrap();
        assert!((v - expected).abs() < 1e-10);
    }

    #[test]
    fn full_support_equals_unrestricted_and_partial_sums_underestimate() {
        let d = random_dataset(25, 4, &[1.0, -1.0, 0.0, 0.5], 1.0, 5);
        let r = design_kernel(&d, PriorFamily::Dpp).unwrap().unwrap();
        let prior = PriorSpec::dpp(r, 0.8).unwrap();
        let h = Hyperparams::known(10.0, 0.8, 1.0);
        let full = log_type_ii_likelihood(&d, &prior, &h, None).unwrap();
        let with_full = log_type_ii_likelihood(&d, &prior, &h, Some(&SubsetMask::full(4))).unwrap();
        assert_eq!(full, with_full);
        for bits in 0u64..16 {
            let s = SubsetMask::from_bits(4, bits).unwrap();
            assert!(log_type_ii_likelihood(&d, &prior, &h, Some(&s)).unwrap() <= full + 1e-10);
        }
    }

    #[test]
    fn fast_objective_matches_reference_path() {
        let d = random_dataset(30, 4, &[1.0, -1.0, 0.0, 0.0], 0.9, 6);
        for family in PriorFamily::ALL {
            let space = ModelSpace::new(&d, Some(d.y.mean()), None, 25).unwrap();
            let kernel = design_kernel(&d, family).unwrap();
            let mut obj = TypeIIObjective::new(&space, family, kernel.clone());
            let (g, w, key, s2) = (12.0, 0.35, 0.6, 0.9);
            let fast = obj.value(g, w, key, s2);
            let hyper = Hyperparams {
                g,
                w,
                theta: (family == PriorFamily::Ldpp).then_some(key),
                alpha: (family == PriorFamily::Gdpp).then_some(key),
                sigma2: s2,
                sigma2_estimated: true,
                mu: Some(d.y.mean()),
            };
            let prior = hyper.prior_spec(family, 4, kernel.as_ref()).unwrap();
            let reference = log_type_ii_likelihood(&d, &prior, &hyper, None).unwrap();
            assert!((fast - reference).abs() < 1e-9, "{family}: {fast} vs {reference}");
        }
    }

    #[test]
    fn enumeration_guard() {
        let d = random_dataset(40, 26, &[0.0; 26], 1.0, 7);
        let prior = PriorSpec::bernoulli(26, 0.5).unwrap();
        let r = log_type_ii_likelihood(&d, &prior, &Hyperparams::known(1.0, 0.5, 1.0), None);
        assert_eq!(r.unwrap_err(), Error::TooLarge { p: 26, limit: 25 });
        let small = SubsetMask::from_indices(26, &[0, 1, 2]).unwrap();
        assert!(log_type_ii_likelihood(&d, &prior, &Hyperparams::known(1.0, 0.5, 1.0), Some(&small)).is_ok());
    }

    #[test]
    fn selection_tie_prefers_smaller_model() {
        // identical scores everywhere: y = 0, g tiny, Bernoulli w = 1/2
        let mut d = random_dataset(10, 3, &[0.0; 3], 1.0, 8);
        d.y = DVector::zeros(10);
        let prior = PriorSpec::bernoulli(3, 0.5).unwrap();
        let res = select_best_model(&d, &prior, &Hyperparams::known(1e-300, 0.5, 1.0), None).unwrap();
        assert!(res.best_mask.is_empty());
    }

    #[test]
    fn coefficients_shrink_ols_on_support() {
        let d = random_dataset(40, 3, &[2.0, 0.0, -1.0], 0.5, 9);
        let m = SubsetMask::from_indices(3, &[0, 2]).unwrap();
        let beta = estimate_coefficients(&d, &m, 4.0, None).unwrap();
        let xg = d.x.values().select_columns([0usize, 2].iter());
        let ols = (xg.transpose() * &xg).try_inverse().unwrap() * xg.transpose() * &d.y;
        assert!((beta[0] - 0.8 * ols[0]).abs() < 1e-12);
        assert!((beta[2] - 0.8 * ols[1]).abs() < 1e-12);
        assert_eq!(beta[1], 0.0);
        assert_eq!(estimate_coefficients(&d, &SubsetMask::empty(3), 4.0, None).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn coefficients_equivariant_under_column_rescaling() {
        let d = random_dataset(30, 3, &[1.0, -2.0, 0.5], 0.5, 10);
        let mut scaled = d.clone();
        let mut x = d.x.values().clone();
        x.column_mut(1).scale_mut(7.5);
        scaled.x = DesignMatrix::new(x).unwrap();
        let m = SubsetMask::full(3);
        for mu in [None, Some(d.y.mean())] {
            let (a, ia) = estimate_with_intercept(&d, &m, 9.0, mu).unwrap();
            let (b, ib) = estimate_with_intercept(&scaled, &m, 9.0, mu).unwrap();
            assert!((a[1] / 7.5 - b[1]).abs() < 1e-10);
            assert!((a[0] - b[0]).abs() < 1e-10);
            let fa = d.x.values() * &a;
            let fb = scaled.x.values() * &b;
            assert!((fa - fb).amax() < 1e-10);
            assert!((ia - ib).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_predictors_are_never_selected_together() {
        let mut d = random_dataset(30, 3, &[1.0, 0.0, 1.0], 0.3, 11);
        let mut x = d.x.values().clone();
        let c = x.column(0).into_owned();
        x.set_column(1, &c);
        d.x = DesignMatrix::new(x).unwrap();
        let res = fit_and_select(&d, PriorFamily::Dpp, &FitOptions::known_sigma2(0.09)).unwrap();
        assert!(!(res.best_mask.contains(0) && res.best_mask.contains(1)));
        let r = design_kernel(&d, PriorFamily::Dpp).unwrap().unwrap();
        let prior = PriorSpec::dpp(r, 1.0).unwrap();
        let post = posterior_table(&d, &prior, &Hyperparams::known(10.0, 1.0, 0.09)).unwrap();
        for (m, p) in post {
            if m.contains(0) && m.contains(1) {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn posterior_sums_to_one_and_ignores_prior_scale() {
        let d = random_dataset(20, 3, &[1.0, 0.0, 0.0], 1.0, 12);
        let r = design_kernel(&d, PriorFamily::Dpp).unwrap().unwrap();
        let prior = PriorSpec::dpp(r, 0.5).unwrap();
        let h = Hyperparams::known(5.0, 0.5, 1.0);
        let post = posterior_table(&d, &prior, &h).unwrap();
        assert!((post.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-10);
        let modal = post.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(modal, SubsetMask::from_indices(3, &[0]).unwrap());
    }

    #[test]
    fn gdpp_alpha_stays_in_box() {
        let d = random_dataset(40, 3, &[1.0, -1.0, 0.0], 0.9, 13);
        let fit = fit_type_ii(&d, PriorFamily::Gdpp, &FitOptions::known_sigma2(0.81)).unwrap();
        let a = fit.hyper.alpha.unwrap();
        assert!((0.0..=3.0).contains(&a));
    }

    #[test]
    fn fit_is_deterministic() {
        let d = random_dataset(30, 4, &[1.0, -1.0, 0.0, 0.0], 0.9, 14);
        let o = FitOptions::default();
        let a = fit_type_ii(&d, PriorFamily::Ldpp, &o).unwrap();
        let b = fit_type_ii(&d, PriorFamily::Ldpp, &o).unwrap();
        assert_eq!(a.hyper, b.hyper);
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn fixed_values_are_range_checked() {
        assert!(FixedHyper::default().validate(3.0).is_ok());
        assert!(FixedHyper { g: Some(-1.0), ..Default::default() }.validate(3.0).is_err());
        assert!(FixedHyper { theta: Some(1.5), ..Default::default() }.validate(3.0).is_err());
        assert!(FixedHyper { alpha: Some(2.5), ..Default::default() }.validate(2.0).is_err());
        assert!(FixedHyper { w: Some(4.0), theta: Some(0.0), ..Default::default() }.validate(3.0).is_ok());
    }
}
