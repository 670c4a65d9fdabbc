//! The three workflows.

use std::io::Write;

use dppsel::eval::{
    generate_synthetic, run_predictive_study, run_risk_study, simulate_response, with_threads, wilcoxon_signed_rank,
    Alternative, PredictOptions, RiskOptions,
};
use dppsel::linalg::SubsetMask;
use dppsel::methods::{Estimator, Fit, FitProblem, Registry};
use dppsel::priors::MAX_TABLE_P;
use dppsel::selection::Sigma2Mode;
use dppsel::Dataset;
use serde::Serialize;

use crate::config::{RunConfig, Workflow};
use crate::data::load_csv;
use crate::error::CliError;
use crate::output::{floats, fmt_float, open, write_err, F};

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let registry = Registry::standard();
    let methods = registry.resolve(&cfg.methods)?;
    let mut buf = Vec::new();
    with_threads(cfg.threads, || match cfg.workflow {
        Workflow::Select => select(cfg, &methods, &mut buf),
        Workflow::Risk => risk(cfg, &methods, &mut buf),
        Workflow::Predict => predict(cfg, &methods, &mut buf),
    })??;
    let mut out = open(cfg.out.as_deref())?;
    out.write_all(&buf).and_then(|_| out.flush()).map_err(write_err)
}

/// Problem data for the select workflow: a CSV, or one draw from the synthetic design.
fn select_problem(cfg: &RunConfig) -> Result<(Dataset, Sigma2Mode, bool, Option<SubsetMask>), CliError> {
    match (&cfg.data, &cfg.response) {
        (Some(path), Some(response)) => Ok((load_csv(path, response)?, Sigma2Mode::Estimated, true, None)),
        _ => {
            let spec = &cfg.synthetic;
            let x = generate_synthetic(spec)?;
            let y = simulate_response(spec, &x, 1);
            let d = Dataset::new(y, x, None)?;
            Ok((d, Sigma2Mode::Known(spec.sigma2()), false, Some(spec.true_support())))
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct HyperRecord {
    g: F,
    w: F,
    theta: Option<F>,
    alpha: Option<F>,
    sigma2: F,
    sigma2_estimated: bool,
    mu: Option<F>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PosteriorEntry {
    mask: Vec<String>,
    probability: F,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Diagnostics {
    evaluations: usize,
    sweeps: usize,
    converged_starts: usize,
    best_start: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SelectRecord {
    method: &'static str,
    n: usize,
    p: usize,
    best_mask: Option<Vec<String>>,
    support: Option<Vec<String>>,
    hyper: Option<HyperRecord>,
    lambda: Option<F>,
    predictors: Vec<String>,
    beta_hat: Vec<F>,
    intercept: F,
    #[serde(rename = "logTypeII")]
    log_type_ii: Option<F>,
    log_evidence: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    posterior: Option<Vec<PosteriorEntry>>,
    diagnostics: Option<Diagnostics>,
}

fn named(mask: &SubsetMask, names: &[String]) -> Vec<String> {
    mask.indices().into_iter().map(|j| names[j].clone()).collect()
}

fn select_record(cfg: &RunConfig, e: &dyn Estimator, d: &Dataset, fit: Fit) -> SelectRecord {
    let bayes = e.is_bayesian();
    let posterior = (cfg.posterior_table && bayes).then(|| {
        let enumerated = fit.support.map_or(d.p(), |s| s.cardinality());
        (enumerated <= MAX_TABLE_P).then(|| {
            fit.log_posterior
                .iter()
                .map(|(m, lp)| PosteriorEntry { mask: named(m, &d.names), probability: F(lp.exp()) })
                .collect()
        })
    });
    SelectRecord {
        method: e.name(),
        n: d.n(),
        p: d.p(),
        best_mask: fit.mask.map(|m| named(&m, &d.names)),
        support: fit.support.map(|m| named(&m, &d.names)),
        hyper: fit.hyper.map(|h| HyperRecord {
            g: F(h.g),
            w: F(h.w),
            theta: h.theta.map(F),
            alpha: h.alpha.map(F),
            sigma2: F(h.sigma2),
            sigma2_estimated: h.sigma2_estimated,
            mu: h.mu.map(F),
        }),
        lambda: fit.lambda.map(F),
        predictors: d.names.clone(),
        beta_hat: floats(fit.beta.iter().copied()),
        intercept: F(fit.intercept),
        log_type_ii: if bayes { fit.log_evidence.map(F) } else { None },
        log_evidence: if bayes { None } else { fit.log_evidence.map(F) },
        posterior: posterior.flatten(),
        diagnostics: fit.diagnostics.map(|t| Diagnostics {
            evaluations: t.evaluations,
            sweeps: t.sweeps,
            converged_starts: t.converged_starts,
            best_start: t.best_start,
        }),
    }
}

fn select(cfg: &RunConfig, methods: &[&dyn Estimator], out: &mut dyn Write) -> Result<(), CliError> {
    let (d, sigma2, intercept, truth) = select_problem(cfg)?;
    for e in methods {
        let problem = FitProblem {
            preselect_k: Some(cfg.preselect_k),
            true_support: truth,
            fixed: cfg.fixed.clone(),
            alpha_max: cfg.alpha_max,
            ..FitProblem::new(&d, sigma2, intercept)
        };
        let fit = e.fit(&problem)?;
        let line = serde_json::to_string(&select_record(cfg, *e, &d, fit)).expect("records serialize");
        writeln!(out, "{line}").map_err(write_err)?;
    }
    Ok(())
}

fn risk(cfg: &RunConfig, methods: &[&dyn Estimator], out: &mut dyn Write) -> Result<(), CliError> {
    let options = RiskOptions { reps: cfg.reps, fixed: cfg.fixed.clone(), alpha_max: cfg.alpha_max, ..Default::default() };
    let curve = run_risk_study(&cfg.synthetic, methods, cfg.k_max, &options)?;
    writeln!(out, "method,sampleSize,meanMaxLoss,stdErr,reps").map_err(write_err)?;
    for e in methods {
        for &n in &curve.sample_sizes {
            let p = curve.get(e.name(), n).expect("every method has every sample size");
            if p.failures > 0 {
                eprintln!("warning: {} failed on {} of {} fits at sample size {n}", p.method, p.failures, p.reps);
            }
            writeln!(out, "{},{},{},{},{}", p.method, n, fmt_float(p.mean_max_loss), fmt_float(p.std_err), p.reps)
                .map_err(write_err)?;
        }
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn predict(cfg: &RunConfig, methods: &[&dyn Estimator], out: &mut dyn Write) -> Result<(), CliError> {
    let (path, response) = (cfg.data.as_ref().expect("validated"), cfg.response.as_ref().expect("validated"));
    let d = load_csv(path, response)?;
    let options = PredictOptions {
        preselect_k: cfg.preselect_k,
        fixed: cfg.fixed.clone(),
        alpha_max: cfg.alpha_max,
        ..Default::default()
    };
    let r = run_predictive_study(&d, &cfg.split, methods, &options)?;
    for f in &r.failures {
        eprintln!("warning: {} failed in round {}: {}", f.method, f.round + 1, f.message);
    }
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(write_err);

    w(out, format!("round,testRow,{}", r.methods.join(",")))?;
    for (l, test) in r.test_rows.iter().enumerate() {
        let cells: Vec<String> = r.losses.iter().map(|m| m[l].map(fmt_float).unwrap_or_default()).collect();
        w(out, format!("{},{},{}", l + 1, test + 1, cells.join(",")))?;
    }

    w(out, String::new())?;
    w(out, "method,rounds,failures,meanLoss,medianLoss".into())?;
    for (name, losses) in r.methods.iter().zip(&r.losses) {
        let ok: Vec<f64> = losses.iter().flatten().copied().collect();
        let mean = ok.iter().sum::<f64>() / ok.len() as f64;
        let failures = losses.len() - ok.len();
        w(out, format!("{name},{},{failures},{},{}", losses.len(), fmt_float(mean), fmt_float(median(ok))))?;
    }

    // one-sided tests of "A has smaller loss than B" for every ordered pair
    w(out, String::new())?;
    w(out, "methodA,methodB,pairs,wPlus,pValue,exact".into())?;
    for a in &r.methods {
        for b in r.methods.iter().filter(|b| *b != a) {
            let (la, lb) = r.paired(a, b).expect("both methods ran");
            let line = match wilcoxon_signed_rank(&la, &lb, Alternative::Less) {
                Ok(t) => format!("{a},{b},{},{},{},{}", la.len(), fmt_float(t.w_plus), fmt_float(t.p_value), t.exact),
                Err(e) => {
                    eprintln!("warning: no Wilcoxon test for {a} vs {b}: {e}");
                    format!("{a},{b},{},,,", la.len())
                }
            };
            w(out, line)?;
        }
    }
    Ok(())
}
