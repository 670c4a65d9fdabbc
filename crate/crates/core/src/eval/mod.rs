//! Experiment harness: simulated data, losses, the risk and predictive studies,
//! and the paired signed-rank test used to compare methods.

mod loss;
mod predictive;
mod risk;
mod split;
mod synthetic;
mod wilcoxon;

pub use loss::{abs_loss, max_loss, quad_loss};
pub use predictive::{run_predictive_study, PredictOptions, PredictiveResult, RoundFailure};
pub use risk::{run_risk_study, run_risk_study_at, RiskCurve, RiskOptions, RiskPoint};
pub use split::{mahalanobis_split, Split, SplitSpec};
pub use synthetic::{generate_synthetic, simulate_response, SyntheticSpec};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_by, Alternative, PValueMethod, WilcoxonResult, EXACT_LIMIT};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Independent ChaCha20 stream `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run `f` on a dedicated pool of `threads` workers; `None` uses the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Mean and standard error `sd / √n`, summed in index order.
/// Any infinite value makes both infinite.
pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.iter().any(|v| !v.is_finite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
