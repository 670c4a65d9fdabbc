//! Derivative-free box-constrained maximization.
//!
//! Multi-start coordinate ascent: every coordinate is improved in turn by a
//! bracketing golden-section line search, and each sweep ends with one
//! extra line search along the sweep's net displacement so that narrow
//! diagonal ridges do not stall the search. Starts come from a Latin grid
//! drawn with a seeded ChaCha stream, so results depend only on the options.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("every bound needs finite lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        v.clamp(self.lower[i], self.upper[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerOptions {
    /// Number of Latin-grid starting points.
    pub starts: usize,
    pub seed: u64,
    /// Stop a start once a full sweep improves the objective by less than this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Line-search resolution as a fraction of each coordinate's box width.
    pub line_tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { starts: 5, seed: 0, tol: 1e-9, max_sweeps: 200, line_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerTrace {
    pub evaluations: usize,
    pub sweeps: usize,
    pub converged_starts: usize,
    pub best_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub trace: OptimizerTrace,
}

/// Latin-grid starting points: one stratum centre per start in every coordinate.
pub fn latin_grid(bounds: &Bounds, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; bounds.dim()]; count];
    for d in 0..bounds.dim() {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        for (point, s) in points.iter_mut().zip(strata) {
            point[d] = bounds.lower[d] + (s as f64 + 0.5) / count as f64 * bounds.width(d);
        }
    }
    points
}

struct Tracked<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Tracked<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Maximize a one-dimensional function on `[lo, hi]` starting from `(t0, f0)`.
/// Returns the best point seen, which is never worse than the start.
fn line_search(
    phi: &mut dyn FnMut(f64) -> f64,
    t0: f64,
    f0: f64,
    lo: f64,
    hi: f64,
    step: f64,
    tol: f64,
) -> (f64, f64) {
    let mut best = (t0, f0);
    let mut probe = |t: f64, best: &mut (f64, f64)| {
        let v = phi(t);
        if v > best.1 {
            *best = (t, v);
        }
        v
    };

    // Bracket a local maximum around t0.
    let right = (t0 + step).min(hi);
    let left = (t0 - step).max(lo);
    let f_right = if right > t0 { probe(right, &mut best) } else { f64::NEG_INFINITY };
    let f_left = if left < t0 { probe(left, &mut best) } else { f64::NEG_INFINITY };

    let (mut a, mut b) = (left, right);
    if f_right > f0 || f_left > f0 {
        let dir = if f_right >= f_left { 1.0 } else { -1.0 };
        let (mut prev, mut cur, mut f_cur) = if dir > 0.0 { (t0, right, f_right) } else { (t0, left, f_left) };
        let mut h = step;
        loop {
            h *= 2.0;
            let next = (cur + dir * h).clamp(lo, hi);
            if next == cur {
                (a, b) = (prev.min(cur), prev.max(cur));
                break;
            }
            let f_next = probe(next, &mut best);
            if f_next <= f_cur {
                (a, b) = (prev.min(next), prev.max(next));
                break;
            }
            (prev, cur, f_cur) = (cur, next, f_next);
        }
    }

    // Golden-section refinement inside [a, b].
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = probe(x1, &mut best);
    let mut f2 = probe(x2, &mut best);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            (x2, f2) = (x1, f1);
            x1 = b - INV_PHI * (b - a);
            f1 = probe(x1, &mut best);
        } else {
            a = x1;
            (x1, f1) = (x2, f2);
            x2 = a + INV_PHI * (b - a);
            f2 = probe(x2, &mut best);
        }
    }
    best
}

/// Largest `t` interval keeping `x + t·d` inside the box.
fn ray_limits(bounds: &Bounds, x: &[f64], d: &[f64]) -> (f64, f64) {
    let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..x.len() {
        if d[i] == 0.0 {
            continue;
        }
        let a = (bounds.lower[i] - x[i]) / d[i];
        let b = (bounds.upper[i] - x[i]) / d[i];
        t_lo = t_lo.max(a.min(b));
        t_hi = t_hi.min(a.max(b));
    }
    (t_lo.min(0.0), t_hi.max(0.0))
}

fn ascend_from<F: FnMut(&[f64]) -> f64>(
    f: &mut Tracked<F>,
    bounds: &Bounds,
    start: Vec<f64>,
    opts: &OptimizerOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let dim = bounds.dim();
    let mut x = start;
    let mut fx = f.eval(&x);
    let mut steps: Vec<f64> = (0..dim).map(|i| 0.05 * bounds.width(i)).collect();
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let before = x.clone();
        let f_before = fx;
        for i in 0..dim {
            let tol = opts.line_tol * bounds.width(i);
            let mut probe = x.clone();
            let mut phi = |t: f64| {
                probe[i] = t;
                f.eval(&probe)
            };
            let (t, ft) = line_search(&mut phi, x[i], fx, bounds.lower[i], bounds.upper[i], steps[i], tol);
            let moved = (t - x[i]).abs();
            steps[i] = (2.0 * moved).max(1e3 * tol).min(0.25 * bounds.width(i));
            x[i] = t;
            fx = ft;
        }

        let d: Vec<f64> = x.iter().zip(&before).map(|(a, b)| a - b).collect();
        if d.iter().any(|v| *v != 0.0) && dim > 1 {
            let (t_lo, t_hi) = ray_limits(bounds, &x, &d);
            let base = x.clone();
            let mut probe = x.clone();
            let mut phi = |t: f64| {
                for k in 0..dim {
                    probe[k] = bounds.clamp(k, base[k] + t * d[k]);
                }
                f.eval(&probe)
            };
            let (t, ft) = line_search(&mut phi, 0.0, fx, t_lo, t_hi, 1.0, opts.line_tol);
            if ft > fx {
                for k in 0..dim {
                    x[k] = bounds.clamp(k, base[k] + t * d[k]);
                }
                fx = ft;
            }
        }

        if fx.is_finite() && f_before.is_finite() && fx - f_before < opts.tol {
            converged = true;
            break;
        }
    }
    (x, fx, sweeps, converged)
}

/// Maximize `f` over the box.
pub fn maximize<F: FnMut(&[f64]) -> f64>(f: F, bounds: &Bounds, opts: &OptimizerOptions) -> Result<Optimum> {
    if opts.starts == 0 {
        return Err(Error::InvalidParameter("optimizer needs at least one start".into()));
    }
    let mut tracked = Tracked { f, evaluations: 0 };
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut sweeps = 0;
    let mut converged_starts = 0;
    for (k, start) in latin_grid(bounds, opts.starts, opts.seed).into_iter().enumerate() {
        let (x, fx, s, conv) = ascend_from(&mut tracked, bounds, start, opts);
        sweeps += s;
        converged_starts += usize::from(conv);
        if fx.is_finite() && best.as_ref().is_none_or(|b| fx > b.1) {
            best = Some((x, fx, k));
        }
    }
    let (x, value, best_start) = best.ok_or_else(|| {
        Error::OptimizationFailed("objective is non-finite at every start".into())
    })?;
    Ok(Optimum {
        x,
        value,
        trace: OptimizerTrace { evaluations: tracked.evaluations, sweeps, converged_starts, best_start },
    })
}
