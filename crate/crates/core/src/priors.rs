//! Prior mass over subset masks.
//!
//! Every DPP-type family is expressed through an effective kernel
//! `K = w·S`, where the shape `S` is `R` (DPP), `θR + (1-θ)I` (LDPP) or
//! `R^α` (GDPP). The unnormalized log mass of a mask is `log det(K_γ)` and
//! the normalizer is `log det(K + I)`. The Bernoulli family is kept in its
//! already-normalized product form.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    log_det_plus_identity, principal_log_det, KernelMatrix, SpectralKernel, SubsetMask,
};

/// Largest `p` for which full probability tables are produced.
pub const MAX_TABLE_P: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorFamily {
    Bernoulli,
    Dpp,
    Ldpp,
    Gdpp,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 4] =
        [PriorFamily::Bernoulli, PriorFamily::Dpp, PriorFamily::Ldpp, PriorFamily::Gdpp];

    pub fn uses_kernel(self) -> bool {
        self != PriorFamily::Bernoulli
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorFamily::Bernoulli => "Bernoulli",
            PriorFamily::Dpp => "DPP",
            PriorFamily::Ldpp => "LDPP",
            PriorFamily::Gdpp => "GDPP",
        })
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BERNOULLI" | "EB" => Ok(PriorFamily::Bernoulli),
            "DPP" => Ok(PriorFamily::Dpp),
            "LDPP" => Ok(PriorFamily::Ldpp),
            "GDPP" => Ok(PriorFamily::Gdpp),
            _ => Err(Error::InvalidParameter(format!("unknown prior family {s:?}"))),
        }
    }
}

/// `θR + (1-θ)I`.
pub(crate) fn linear_mixture(r: &KernelMatrix, theta: f64) -> KernelMatrix {
    let p = r.dim();
    KernelMatrix::trusted(r.values() * theta + DMatrix::identity(p, p) * (1.0 - theta))
}

/// A fully specified prior over masks of length `p`.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    family: PriorFamily,
    p: usize,
    w: f64,
    theta: Option<f64>,
    alpha: Option<f64>,
    kernel: Option<KernelMatrix>,
    shape: Option<KernelMatrix>,
}

impl PriorSpec {
    pub fn bernoulli(p: usize, w: f64) -> Result<Self> {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::InvalidParameter(format!("Bernoulli w must lie in (0, 1), got {w}")));
        }
        Ok(Self { family: PriorFamily::Bernoulli, p, w, theta: None, alpha: None, kernel: None, shape: None })
    }

    pub fn dpp(r: KernelMatrix, w: f64) -> Result<Self> {
        check_w(w)?;
        Ok(Self {
            family: PriorFamily::Dpp,
            p: r.dim(),
            w,
            theta: None,
            alpha: None,
            shape: Some(r.clone()),
            kernel: Some(r),
        })
    }

    pub fn ldpp(r: KernelMatrix, w: f64, theta: f64) -> Result<Self> {
        check_w(w)?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, 1], got {theta}")));
        }
        Ok(Self {
            family: PriorFamily::Ldpp,
            p: r.dim(),
            w,
            theta: Some(theta),
            alpha: None,
            shape: Some(linear_mixture(&r, theta)),
            kernel: Some(r),
        })
    }

    /// The power `R^α` is computed here, once.
    pub fn gdpp(r: KernelMatrix, w: f64, alpha: f64) -> Result<Self> {
        check_w(w)?;
        if !(0.0..=3.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must lie in [0, 3], got {alpha}")));
        }
        let shape = SpectralKernel::new(&r).power(alpha);
        Ok(Self {
            family: PriorFamily::Gdpp,
            p: r.dim(),
            w,
            theta: None,
            alpha: Some(alpha),
            shape: Some(shape),
            kernel: Some(r),
        })
    }

    /// Builds the family's spec from shared parameters; `kernel` is ignored for Bernoulli.
    pub fn for_family(
        family: PriorFamily,
        p: usize,
        kernel: Option<&KernelMatrix>,
        w: f64,
        theta: Option<f64>,
        alpha: Option<f64>,
    ) -> Result<Self> {
        let need_kernel = || {
            kernel
                .cloned()
                .ok_or_else(|| Error::InvalidParameter(format!("{family} prior needs a kernel")))
        };
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("{family} prior needs {name}")))
        };
        match family {
            PriorFamily::Bernoulli => Self::bernoulli(p, w),
            PriorFamily::Dpp => Self::dpp(need_kernel()?, w),
            PriorFamily::Ldpp => Self::ldpp(need_kernel()?, w, need(theta, "theta")?),
            PriorFamily::Gdpp => Self::gdpp(need_kernel()?, w, need(alpha, "alpha")?),
        }
    }

    pub fn family(&self) -> PriorFamily {
        self.family
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn kernel(&self) -> Option<&KernelMatrix> {
        self.kernel.as_ref()
    }

    /// The kernel `K` with `P(γ) ∝ det(K_γ)`.
    pub fn effective_kernel(&self) -> KernelMatrix {
        match &self.shape {
            Some(s) => KernelMatrix::trusted(s.values() * self.w),
            None => KernelMatrix::trusted(
                DMatrix::identity(self.p, self.p) * (self.w / (1.0 - self.w)),
            ),
        }
    }

    fn check_mask(&self, mask: &SubsetMask) -> Result<()> {
        if mask.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: mask.len() });
        }
        Ok(())
    }

    pub fn log_prior_unnormalized(&self, mask: &SubsetMask) -> Result<f64> {
        self.check_mask(mask)?;
        let mut work = Vec::new();
        Ok(self.log_mass(&mask.indices(), &mut work))
    }

    pub(crate) fn log_mass(&self, idx: &[usize], work: &mut Vec<f64>) -> f64 {
        let k = idx.len() as f64;
        match &self.shape {
            None => k * self.w.ln() + (self.p as f64 - k) * (1.0 - self.w).ln(),
            Some(s) => k * self.w.ln() + principal_log_det(s.values(), idx, work),
        }
    }

    pub fn log_normalizer(&self) -> f64 {
        match self.family {
            PriorFamily::Bernoulli => 0.0,
            _ => log_det_plus_identity(&self.effective_kernel()),
        }
    }

    pub fn log_prior(&self, mask: &SubsetMask) -> Result<f64> {
        Ok(self.log_prior_unnormalized(mask)? - self.log_normalizer())
    }

    /// Exact probabilities of all `2^p` masks, in ascending bit order.
    pub fn prior_table(&self) -> Result<Vec<(SubsetMask, f64)>> {
        if self.p > MAX_TABLE_P {
            return Err(Error::TooLarge { p: self.p, limit: MAX_TABLE_P });
        }
        let z = self.log_normalizer();
        let mut work = Vec::new();
        Ok(SubsetMask::full(self.p)
            .submasks()
            .map(|m| {
                let lp = self.log_mass(&m.indices(), &mut work) - z;
                (m, lp.exp())
            })
            .collect())
    }

    /// `P({i,j}) - Z·(P({i})P({j}) - (K_ij/Z)²)` with `Z = det(K + I)`.
    /// Zero up to rounding for every DPP-type kernel.
    pub fn pair_suppression_residual(&self, i: usize, j: usize) -> Result<f64> {
        if i == j || i >= self.p || j >= self.p {
            return Err(Error::InvalidParameter(format!("need two distinct indices below {}, got ({i}, {j})", self.p)));
        }
        let z = self.log_normalizer().exp();
        let prob = |idx: &[usize]| -> Result<f64> {
            Ok(self.log_prior(&SubsetMask::from_indices(self.p, idx)?)?.exp())
        };
        let kij = self.effective_kernel().get(i, j);
        let pij = prob(&[i, j])?;
        Ok(pij - z * (prob(&[i])? * prob(&[j])? - (kij / z).powi(2)))
    }
}

fn check_w(w: f64) -> Result<()> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(format!("w must be positive and finite, got {w}")));
    }
    Ok(())
}
