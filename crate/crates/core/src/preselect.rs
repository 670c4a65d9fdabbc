//! Least angle regression, used only to rank predictors for preselection.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, standardize, StandardizedDesign, SubsetMask};

/// Default number of predictors kept by [`select_support`].
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LarsPath {
    pub entry_order: Vec<usize>,
    /// Coefficients at each breakpoint, starting from zero; one more than entries.
    pub breakpoints: Vec<DVector<f64>>,
    /// Predictors whose entry would have made the active Gram matrix singular.
    pub skipped: Vec<usize>,
}

/// Plain LARS (no lasso step) on a standardized design and centred response.
pub fn lars_path(xs: &StandardizedDesign, y: &DVector<f64>, max_steps: usize) -> Result<LarsPath> {
    let x = &xs.values;
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let limit = p.min(n.saturating_sub(1));
    if max_steps > limit {
        return Err(Error::InvalidParameter(format!("max_steps {max_steps} exceeds min(n-1, p) = {limit}")));
    }
    let gram = x.tr_mul(x);
    let mut beta = DVector::zeros(p);
    let mut fitted = DVector::zeros(n);
    let mut active: Vec<usize> = Vec::new();
    let mut skipped: Vec<usize> = Vec::new();
    let mut breakpoints = vec![beta.clone()];

    let corr = x.tr_mul(y);
    let mut next = argmax_abs(&corr, |_| true);
    let scale = y.norm().max(f64::MIN_POSITIVE);

    while active.len() < max_steps {
        let Some(j) = next else { break };
        let mut trial = active.clone();
        trial.push(j);
        let sub = gram.select_rows(trial.iter()).select_columns(trial.iter());
        let c = x.tr_mul(&(y - &fitted));
        let signs = DVector::from_iterator(trial.len(), trial.iter().map(|&i| c[i].signum()));
        let (dir, signs_used) = match solve_spd(&sub, &signs).ok() {
            Some(v) => {
                active = trial;
                (v, signs)
            }
            None => {
                // collinear with the active set: skip it and continue the current segment
                skipped.push(j);
                breakpoints.pop();
                if active.is_empty() {
                    breakpoints.push(beta.clone());
                    next = argmax_abs(&c, |i| !skipped.contains(&i));
                    continue;
                }
                let sub = gram.select_rows(active.iter()).select_columns(active.iter());
                let s = DVector::from_iterator(active.len(), active.iter().map(|&i| c[i].signum()));
                (solve_spd(&sub, &s)?, s)
            }
        };
        let c_max = active.iter().map(|&i| c[i].abs()).fold(0.0, f64::max);
        if c_max <= 1e-14 * scale {
            breakpoints.push(beta.clone());
            break;
        }
        let big_a = 1.0 / signs_used.dot(&dir).sqrt();
        let w = dir * big_a;
        let u = active.iter().zip(w.iter()).fold(DVector::zeros(n), |acc, (&i, &wi)| acc + x.column(i) * wi);
        let a = x.tr_mul(&u);

        let mut gamma = c_max / big_a;
        next = None;
        for k in 0..p {
            if active.contains(&k) || skipped.contains(&k) {
                continue;
            }
            // moves in lockstep with the active set: a copy of an active column
            if (c[k].abs() - c_max).abs() <= 1e-10 * scale && (a[k].abs() - big_a).abs() <= 1e-10 {
                skipped.push(k);
                continue;
            }
            if c[k].abs() >= c_max - 1e-12 * scale {
                // already tied: enters with a zero-length step
                gamma = 0.0;
                next = Some(k);
                break;
            }
            for cand in [(c_max - c[k]) / (big_a - a[k]), (c_max + c[k]) / (big_a + a[k])] {
                if cand > 1e-14 * gamma && cand < gamma {
                    gamma = cand;
                    next = Some(k);
                }
            }
        }
        for (&i, &wi) in active.iter().zip(w.iter()) {
            beta[i] += gamma * wi;
        }
        fitted += u * gamma;
        breakpoints.push(beta.clone());
    }
    Ok(LarsPath { entry_order: active, breakpoints, skipped })
}

fn argmax_abs(c: &DVector<f64>, eligible: impl Fn(usize) -> bool) -> Option<usize> {
    (0..c.len()).filter(|&i| eligible(i)).fold(None, |best, i| match best {
        Some(b) if c[b].abs() >= c[i].abs() => Some(b),
        _ => Some(i),
    })
}

/// Mask of the first `k` LARS entrants, or every predictor when `p <= k`.
pub fn select_support(dataset: &Dataset, k: usize) -> Result<SubsetMask> {
    let p = dataset.p();
    if p <= k {
        return Ok(SubsetMask::full(p));
    }
    let xs = standardize(&dataset.x)?;
    let y = dataset.y.add_scalar(-dataset.y.mean());
    let path = lars_path(&xs, &y, k)?;
    let mut order = path.entry_order;
    // exhausted early (duplicates or an exact fit): fill by absolute correlation
    if order.len() < k {
        let c = xs.values.tr_mul(&y);
        let mut rest: Vec<usize> = (0..p).filter(|i| !order.contains(i)).collect();
        rest.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
        order.extend(rest.into_iter().take(k - order.len()));
    }
    SubsetMask::from_indices(p, &order)
}

/// Residual correlations `X̃ᵀ(y − X̃β)` at a coefficient vector.
pub fn residual_correlations(xs: &StandardizedDesign, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    let x: &DMatrix<f64> = &xs.values;
    x.tr_mul(&(y - x * beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn random(n: usize, p: usize, seed: u64) -> (StandardizedDesign, DVector<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let xs = standardize(&DesignMatrix::new(x).unwrap()).unwrap();
        (xs, y.add_scalar(-y.mean()))
    }

    /// At breakpoint `t` the first `t` entrants share the largest absolute
    /// correlation and the next entrant has just caught up with them.
    fn check_equicorrelation(xs: &StandardizedDesign, y: &DVector<f64>, path: &LarsPath, tol: f64) {
        for (t, b) in path.breakpoints.iter().enumerate().skip(1) {
            let c = residual_correlations(xs, y, b);
            let active = &path.entry_order[..t];
            let level = c[active[0]].abs();
            for &i in active {
                assert!((c[i].abs() - level).abs() < tol, "breakpoint {t}: {} vs {level}", c[i].abs());
            }
            let next = path.entry_order.get(t);
            for k in 0..c.len() {
                if active.contains(&k) || path.skipped.contains(&k) {
                    continue;
                }
                if Some(&k) == next {
                    assert!((c[k].abs() - level).abs() < tol);
                } else {
                    assert!(c[k].abs() < level + tol, "inactive {k} exceeds active level at {t}");
                }
            }
        }
    }

    #[test]
    fn equicorrelation_on_fixed_instance() {
        let (xs, y) = random(20, 6, 11);
        let path = lars_path(&xs, &y, 6).unwrap();
        assert_eq!(path.entry_order.len(), 6);
        assert_eq!(path.breakpoints.len(), 7);
        check_equicorrelation(&xs, &y, &path, 1e-8);
        // the full path ends at least squares
        let c = residual_correlations(&xs, &y, path.breakpoints.last().unwrap());
        assert!(c.amax() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn equicorrelation_holds(seed in 0u64..1_000_000, n in 8usize..30, p in 2usize..8) {
            let (xs, y) = random(n, p, seed);
            let steps = p.min(n - 1);
            let path = lars_path(&xs, &y, steps).unwrap();
            let mut seen = path.entry_order.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), path.entry_order.len());
            check_equicorrelation(&xs, &y, &path, 1e-8);
        }
    }

    #[test]
    fn orthogonal_design_ranks_by_correlation() {
        // columns of a centred Hadamard-like basis are orthonormal
        let h = DMatrix::from_row_slice(
            8,
            4,
            &[
                1., 1., 1., 1., -1., 1., -1., 1., 1., -1., -1., 1., -1., -1., 1., 1., 1., 1., 1., -1., -1., 1., -1., -1.,
                1., -1., -1., -1., -1., -1., 1., -1.,
            ],
        );
        let xs = standardize(&DesignMatrix::new(h).unwrap()).unwrap();
        let g = xs.values.tr_mul(&xs.values);
        assert!((g - DMatrix::identity(4, 4)).amax() < 1e-12);
        let y = DVector::from_vec(vec![0.3, -2.0, 1.1, 0.45, -0.7, 2.2, 0.9, -1.4]);
        let y = y.add_scalar(-y.mean());
        let c = xs.values.tr_mul(&y);
        let mut expected: Vec<usize> = (0..4).collect();
        expected.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()));
        assert_eq!(lars_path(&xs, &y, 4).unwrap().entry_order, expected);
    }

    #[test]
    fn single_predictor_reaches_ols() {
        let (xs, y) = random(10, 1, 3);
        let path = lars_path(&xs, &y, 1).unwrap();
        assert_eq!(path.entry_order, vec![0]);
        let ols = xs.values.column(0).dot(&y);
        assert!((path.breakpoints[1][0] - ols).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_is_skipped() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut x = DMatrix::from_fn(15, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let c0 = x.column(0).into_owned();
        x.set_column(3, &c0);
        let y = &c0 * 2.0 + DVector::from_fn(15, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let xs = standardize(&DesignMatrix::new(x).unwrap()).unwrap();
        let y = y.add_scalar(-y.mean());
        let path = lars_path(&xs, &y, 3).unwrap();
        assert_eq!(path.entry_order[0], 0);
        assert_eq!(path.skipped, vec![3]);
        assert_eq!(path.entry_order.len(), 3);
        assert_eq!(path.breakpoints.len(), 4);
        check_equicorrelation(&xs, &y, &path, 1e-8);
    }

    #[test]
    fn too_many_steps_rejected() {
        let (xs, y) = random(5, 6, 5);
        assert!(lars_path(&xs, &y, 5).is_err());
        assert!(lars_path(&xs, &y, 4).is_ok());
    }

    fn dataset(n: usize, p: usize, signals: &[(usize, f64)], seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        for &(j, b) in signals {
            y += x.column(j) * b;
        }
        Dataset::new(y, DesignMatrix::new(x).unwrap(), None).unwrap()
    }

    #[test]
    fn support_sizes() {
        let d = dataset(30, 10, &[], 6);
        assert_eq!(select_support(&d, 10).unwrap(), SubsetMask::full(10));
        let d = dataset(60, 15, &[], 7);
        assert_eq!(select_support(&d, 10).unwrap().cardinality(), 10);
    }

    #[test]
    fn planted_signals_are_kept() {
        let d = dataset(40, 15, &[(3, 3.0), (11, -2.5)], 8);
        let m = select_support(&d, 10).unwrap();
        assert!(m.contains(3) && m.contains(11));
        let m = select_support(&d, 2).unwrap();
        assert_eq!(m.indices(), vec![3, 11]);
    }

    #[test]
    fn support_is_scale_invariant() {
        let d = dataset(40, 12, &[(0, 1.0), (5, 1.0)], 9);
        let mut scaled = d.clone();
        let mut x = d.x.values().clone();
        for j in 0..12 {
            x.column_mut(j).scale_mut(10f64.powi(j as i32 % 4 - 2));
        }
        scaled.x = DesignMatrix::new(x).unwrap();
        assert_eq!(select_support(&d, 5).unwrap(), select_support(&scaled, 5).unwrap());
    }
}
