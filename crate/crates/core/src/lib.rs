pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod methods;
pub mod optimize;
pub mod preselect;
pub mod priors;
pub mod selection;

pub use dataset::Dataset;
pub use error::{Error, Result};
