use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::mahalanobis_distances;

/// Distribution-shift split: the most outlying rows form the test pool,
/// a wider outlying band is excluded from training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct SplitSpec {
    pub test_pool_size: usize,
    pub exclude_furthest: usize,
    pub train_sample_size: usize,
    pub rounds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { test_pool_size: 10, exclude_furthest: 20, train_sample_size: 20, rounds: 60, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.test_pool_size == 0 || self.exclude_furthest < self.test_pool_size {
            return Err(Error::InvalidParameter(format!(
                "need 0 < testPoolSize <= excludeFurthest, got {} and {}",
                self.test_pool_size, self.exclude_furthest
            )));
        }
        if self.exclude_furthest >= n || self.train_sample_size > n - self.exclude_furthest {
            return Err(Error::InvalidParameter(format!(
                "{n} rows cannot exclude {} and still sample {} training rows",
                self.exclude_furthest, self.train_sample_size
            )));
        }
        if self.train_sample_size < 2 || self.rounds == 0 {
            return Err(Error::InvalidParameter("trainSampleSize must be at least 2 and rounds positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Split {
    /// Row indices, most outlying first.
    pub test_pool: Vec<usize>,
    /// Row indices in ascending order.
    pub train_pool: Vec<usize>,
    /// Rows in neither pool.
    pub dropped: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Rank rows by Mahalanobis distance of their predictors (ties by row index).
pub fn mahalanobis_split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate(dataset.n())?;
    let distances = mahalanobis_distances(&dataset.x)?;
    let mut order: Vec<usize> = (0..dataset.n()).collect();
    order.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
    let test_pool = order[..spec.test_pool_size].to_vec();
    let mut dropped = order[spec.test_pool_size..spec.exclude_furthest].to_vec();
    let mut train_pool = order[spec.exclude_furthest..].to_vec();
    dropped.sort_unstable();
    train_pool.sort_unstable();
    Ok(Split { test_pool, train_pool, dropped, distances })
}
