use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::substream;
use crate::error::{Error, Result};
use crate::linalg::{DesignMatrix, SubsetMask};

/// Six-column collinear design: three independent columns and three noisy pairwise sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub beta_star: Vec<f64>,
    pub noise_sd: f64,
    pub collinear_noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rows: 400,
            beta_star: vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            noise_sd: 0.9,
            collinear_noise_scale: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 6 {
            return Err(Error::InvalidParameter(format!("rows must be at least 6, got {}", self.rows)));
        }
        if self.beta_star.len() != 6 {
            return Err(Error::DimensionMismatch { expected: 6, found: self.beta_star.len() });
        }
        if !(self.noise_sd > 0.0) || !(self.collinear_noise_scale >= 0.0) {
            return Err(Error::InvalidParameter("noise_sd must be positive and collinear_noise_scale non-negative".into()));
        }
        Ok(())
    }

    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_star)
    }

    /// Predictors with a nonzero true coefficient.
    pub fn true_support(&self) -> SubsetMask {
        let idx: Vec<usize> = (0..self.beta_star.len()).filter(|&j| self.beta_star[j] != 0.0).collect();
        SubsetMask::from_indices(self.beta_star.len(), &idx).expect("six predictors fit in a mask")
    }

    pub fn sigma2(&self) -> f64 {
        self.noise_sd * self.noise_sd
    }
}

/// Draw the design on stream 0 of the spec's seed, column by column.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let n = spec.rows;
    let mut rng = substream(spec.seed, 0);
    let mut draw = || DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let base = [draw(), draw(), draw()];
    let noise = [draw(), draw(), draw()];
    let s = spec.collinear_noise_scale;
    let mut x = DMatrix::zeros(n, 6);
    for (j, col) in base.iter().enumerate() {
        x.set_column(j, col);
    }
    for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        x.set_column(3 + k, &(&base[a] + &base[b] + &noise[k] * s));
    }
    DesignMatrix::new(x)
}

/// `y = Xβ* + σε` with noise from stream `stream` of the spec's seed (stream 0 is the design's).
pub fn simulate_response(spec: &SyntheticSpec, x: &DesignMatrix, stream: u64) -> DVector<f64> {
    let mut rng = substream(spec.seed, stream);
    let noise = DVector::from_fn(x.nrows(), |_, _| spec.noise_sd * rng.sample::<f64, _>(StandardNormal));
    x.values() * spec.beta() + noise
}
