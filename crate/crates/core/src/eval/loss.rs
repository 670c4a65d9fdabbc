use nalgebra::DVector;

use crate::error::{Error, Result};

fn check(a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(())
}

/// `max_i |β*_i − β̂_i|`.
pub fn max_loss(beta_star: &DVector<f64>, beta_hat: &DVector<f64>) -> Result<f64> {
    check(beta_star, beta_hat)?;
    Ok((beta_star - beta_hat).amax())
}

/// `Σ_i (β*_i − β̂_i)²`.
pub fn quad_loss(beta_star: &DVector<f64>, beta_hat: &DVector<f64>) -> Result<f64> {
    check(beta_star, beta_hat)?;
    Ok((beta_star - beta_hat).norm_squared())
}

pub fn abs_loss(y: f64, y_hat: f64) -> f64 {
    (y - y_hat).abs()
}
