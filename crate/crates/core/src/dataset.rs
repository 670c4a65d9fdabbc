use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;

/// Response, raw design and predictor names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DesignMatrix,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DesignMatrix, names: Option<Vec<String>>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("response has non-finite entries".into()));
        }
        let names = match names {
            Some(n) if n.len() != x.ncols() => {
                return Err(Error::DimensionMismatch { expected: x.ncols(), found: n.len() })
            }
            Some(n) => n,
            None => (1..=x.ncols()).map(|j| format!("x{j}")).collect(),
        };
        Ok(Self { y, x, names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            x: self.x.select_rows(rows),
            names: self.names.clone(),
        }
    }

    pub fn head(&self, n: usize) -> Dataset {
        Dataset { y: self.y.rows(0, n).into_owned(), x: self.x.head(n), names: self.names.clone() }
    }
}
