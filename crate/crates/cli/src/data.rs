//! CSV ingestion: a header row, then numeric cells only.

use std::io::{Read, Write};
use std::path::Path;

use dppsel::linalg::DesignMatrix;
use dppsel::Dataset;
use nalgebra::{DMatrix, DVector};

use crate::error::{io_error, CliError};

/// Load `path`, taking `response` (a header name, or a 1-based column number
/// when no header matches) as y and every other column as a predictor.
pub fn load_csv(path: &Path, response: &str) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path.display(), e))?;
    read_csv(file, response)
}

pub fn read_csv(reader: impl Read, response: &str) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(parse_error)?.iter().map(str::to_string).collect();
    let target = headers
        .iter()
        .position(|h| h == response)
        .or_else(|| response.parse::<usize>().ok().filter(|&k| k >= 1 && k <= headers.len()).map(|k| k - 1))
        .ok_or_else(|| CliError::MissingColumn(response.to_string()))?;
    if headers.len() < 2 {
        return Err(CliError::Config("the CSV needs a response and at least one predictor column".into()));
    }

    let mut y = Vec::new();
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(parse_error)?;
        let line = record.position().map_or(0, |p| p.line());
        for (column, value) in record.iter().enumerate() {
            let v: f64 = value.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| CliError::NonNumericCell {
                line,
                column: column + 1,
                name: headers[column].clone(),
                value: value.to_string(),
            })?;
            if column == target {
                y.push(v);
            } else {
                cells.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::Config("the CSV has a header but no data rows".into()));
    }
    let p = headers.len() - 1;
    let x = DMatrix::from_row_slice(y.len(), p, &cells);
    let names = headers.iter().enumerate().filter(|&(j, _)| j != target).map(|(_, h)| h.clone()).collect();
    Ok(Dataset::new(DVector::from_vec(y), DesignMatrix::new(x)?, Some(names))?)
}

fn parse_error(e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    let column = match e.kind() {
        csv::ErrorKind::UnequalLengths { len, .. } => *len as usize,
        _ => 0,
    };
    CliError::Parse { line, column, message: e.to_string() }
}

/// Write the response first, then the predictors, with shortest round-trip floats.
pub fn write_csv(dataset: &Dataset, response: &str, writer: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| io_error("csv output", e);
    w.write_record(std::iter::once(response).chain(dataset.names.iter().map(String::as_str))).map_err(err)?;
    for i in 0..dataset.n() {
        let x = dataset.x.values().row(i);
        let row = std::iter::once(dataset.y[i]).chain(x.iter().copied());
        w.write_record(row.map(|v| format!("{v:?}"))).map_err(err)?;
    }
    w.flush().map_err(|e| io_error("csv output", e))
}
