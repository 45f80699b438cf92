//! CSV ingestion of covariates and blockwise-missing compositional responses, and
//! atomic CSV output.
//!
//! Input schema: a header of `x1..xp`, response columns `y1..yk` and an optional
//! `delta` column, in any order. A response is observed only when every response
//! field of the row is filled.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::data::{Covariates, Dataset};
use crate::estimators::DensityEstimate;
use crate::simplex::{closure_renormalize, Composition, SimplexGrid};

/// Row sums within this distance of one are accepted as they are.
pub const SUM_TOL: f64 = 1e-9;
/// Row sums off by at least this much are rejected rather than renormalized.
pub const MAX_RENORMALIZE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    /// `row` counts data rows from 1; row 0 is the header.
    #[error("row {row}, column {column:?}: {message}")]
    Schema { row: usize, column: String, message: String },
    #[error(transparent)]
    Data(#[from] crate::error::Error),
}

/// How the response columns map onto simplex parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseLayout {
    /// `y1..yd` hold the first `d` parts; the last is one minus their sum.
    #[default]
    Implicit,
    /// `y1..y(d+1)` hold every part.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestWarning {
    Renormalized { row: usize, sum: f64 },
    /// Some but not all response fields were filled; the response is treated as missing.
    InconsistentRow { row: usize, filled: usize, expected: usize },
    /// `delta = 0` on a row whose response fields are filled; the response is dropped.
    DeltaZeroWithValues { row: usize },
}

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Renormalized { row, sum } => write!(f, "row {row}: parts sum to {sum}; renormalized"),
            Self::InconsistentRow { row, filled, expected } => {
                write!(f, "row {row}: {filled} of {expected} response fields filled; treated as missing")
            }
            Self::DeltaZeroWithValues { row } => write!(f, "row {row}: delta = 0 but response present; treated as missing"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub dataset: Dataset,
    pub warnings: Vec<IngestWarning>,
}

impl IngestReport {
    pub fn inconsistent_rows(&self) -> usize {
        self.warnings.iter().filter(|w| matches!(w, IngestWarning::InconsistentRow { .. })).count()
    }

    pub fn renormalized_rows(&self) -> usize {
        self.warnings.iter().filter(|w| matches!(w, IngestWarning::Renormalized { .. })).count()
    }
}

struct Schema {
    x: Vec<usize>,
    y: Vec<usize>,
    delta: Option<usize>,
    names: Vec<String>,
}

fn schema_error(row: usize, column: &str, message: impl Into<String>) -> IoError {
    IoError::Schema { row, column: column.to_string(), message: message.into() }
}

fn parse_header(header: &csv::StringRecord) -> Result<Schema, IoError> {
    let mut xs: Vec<(usize, usize)> = Vec::new();
    let mut ys: Vec<(usize, usize)> = Vec::new();
    let mut delta = None;
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    for (col, name) in names.iter().enumerate() {
        let lower = name.to_ascii_lowercase();
        if lower == "delta" {
            if delta.replace(col).is_some() {
                return Err(schema_error(0, name, "duplicate column"));
            }
            continue;
        }
        let (target, digits) = if let Some(rest) = lower.strip_prefix('x') {
            (&mut xs, rest)
        } else if let Some(rest) = lower.strip_prefix('y') {
            (&mut ys, rest)
        } else {
            return Err(schema_error(0, name, "expected x<k>, y<k> or delta"));
        };
        let k: usize = digits
            .parse()
            .ok()
            .filter(|k| *k >= 1)
            .ok_or_else(|| schema_error(0, name, "column index must be a positive integer"))?;
        target.push((k, col));
    }
    let ordered = |mut v: Vec<(usize, usize)>, prefix: &str| -> Result<Vec<usize>, IoError> {
        v.sort_unstable();
        for (expect, (k, _)) in v.iter().enumerate() {
            if *k != expect + 1 {
                return Err(schema_error(0, &format!("{prefix}{k}"), format!("expected {prefix}1..{prefix}{} without gaps", v.len())));
            }
        }
        if v.is_empty() {
            return Err(schema_error(0, prefix, format!("no {prefix} columns")));
        }
        Ok(v.into_iter().map(|(_, c)| c).collect())
    };
    Ok(Schema { x: ordered(xs, "x")?, y: ordered(ys, "y")?, delta, names })
}

fn parse_number(row: usize, column: &str, field: &str) -> Result<f64, IoError> {
    let v: f64 = field.trim().parse().map_err(|_| schema_error(row, column, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(schema_error(row, column, "value is not finite"));
    }
    Ok(v)
}

fn build_composition(
    row: usize,
    values: &[f64],
    layout: ResponseLayout,
    warnings: &mut Vec<IngestWarning>,
) -> Result<Composition, IoError> {
    if let Some(k) = values.iter().position(|v| *v < 0.0) {
        return Err(schema_error(row, &format!("y{}", k + 1), format!("negative part {}", values[k])));
    }
    let sum: f64 = values.iter().sum();
    let deviation = match layout {
        // an implicit last part absorbs any shortfall
        ResponseLayout::Implicit => (sum - 1.0).max(0.0),
        ResponseLayout::Full => (sum - 1.0).abs(),
    };
    if deviation >= MAX_RENORMALIZE {
        return Err(schema_error(row, "y", format!("parts sum to {sum}")));
    }
    let parts: Vec<f64> = match layout {
        ResponseLayout::Implicit => values.iter().copied().chain([(1.0 - sum).max(0.0)]).collect(),
        ResponseLayout::Full => values.to_vec(),
    };
    if deviation > SUM_TOL {
        warnings.push(IngestWarning::Renormalized { row, sum });
        return Ok(closure_renormalize(&parts)?);
    }
    let d = parts.len() - 1;
    Ok(Composition::new(&parts[..d], SUM_TOL)?)
}

/// Reads a dataset from CSV.
pub fn read_dataset<R: Read>(reader: R, layout: ResponseLayout) -> Result<IngestReport, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let schema = parse_header(rdr.headers()?)?;
    if layout == ResponseLayout::Full && schema.y.len() < 2 {
        return Err(schema_error(0, "y", "the full layout needs at least two response columns"));
    }
    let width = schema.names.len();
    let mut xs = Vec::new();
    let mut responses = Vec::new();
    let mut warnings = Vec::new();
    let mut values = Vec::with_capacity(schema.y.len());
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        if record.len() != width {
            return Err(schema_error(row, "", format!("expected {width} fields, found {}", record.len())));
        }
        for &c in &schema.x {
            xs.push(parse_number(row, &schema.names[c], &record[c])?);
        }
        values.clear();
        for &c in &schema.y {
            let field = record[c].trim();
            if !field.is_empty() {
                values.push(parse_number(row, &schema.names[c], field)?);
            }
        }
        let delta = match schema.delta {
            None => None,
            Some(c) => match record[c].trim() {
                "1" => Some(true),
                "0" => Some(false),
                other => return Err(schema_error(row, &schema.names[c], format!("delta must be 0 or 1, got {other:?}"))),
            },
        };
        let filled = values.len();
        let expected = schema.y.len();
        let response = if filled == 0 {
            if delta == Some(true) {
                return Err(schema_error(row, "delta", "delta = 1 but the response is missing"));
            }
            None
        } else if filled < expected {
            warnings.push(IngestWarning::InconsistentRow { row, filled, expected });
            None
        } else if delta == Some(false) {
            warnings.push(IngestWarning::DeltaZeroWithValues { row });
            None
        } else {
            Some(build_composition(row, &values, layout, &mut warnings)?)
        };
        responses.push(response);
    }
    let dataset = Dataset::new(Covariates::new(xs, schema.x.len())?, responses)?;
    Ok(IngestReport { dataset, warnings })
}

pub fn ingest_csv(path: impl AsRef<Path>, layout: ResponseLayout) -> Result<IngestReport, IoError> {
    read_dataset(File::open(path)?, layout)
}

/// Writes through a temporary file in the destination directory, then renames it
/// into place.
pub fn write_atomic<F>(path: impl AsRef<Path>, write: F) -> Result<(), IoError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), IoError>,
{
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}

/// Grid coordinates and density values, 17 significant digits.
pub fn write_grid_csv<W: Write + ?Sized>(out: &mut W, grid: &SimplexGrid, values: &[f64]) -> Result<(), IoError> {
    if values.len() != grid.len() {
        return Err(crate::error::Error::LengthMismatch { expected: grid.len(), actual: values.len() }.into());
    }
    let header: Vec<String> = (1..=grid.dim()).map(|k| format!("s{k}")).chain(["density".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (s, v) in grid.points().iter().zip(values) {
        let mut line = String::new();
        for c in s.coords() {
            line.push_str(&format!("{c:.16e},"));
        }
        line.push_str(&format!("{v:.16e}"));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Evaluates `estimate` on `grid` and writes `s1..sd,density` atomically.
pub fn emit_grid_csv(estimate: &DensityEstimate, grid: &SimplexGrid, path: impl AsRef<Path>) -> Result<(), IoError> {
    let values = estimate.evaluate_grid(grid)?;
    write_atomic(path, |out| write_grid_csv(out, grid, &values))
}

/// Writes a dataset in the implicit layout with a `delta` column; values use the
/// shortest representation that parses back exactly.
pub fn write_dataset_csv<W: Write + ?Sized>(out: &mut W, data: &Dataset) -> Result<(), IoError> {
    let d = data.dim().max(1);
    let header: Vec<String> = (1..=data.p())
        .map(|k| format!("x{k}"))
        .chain((1..=d).map(|k| format!("y{k}")))
        .chain(["delta".to_string()])
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (x, y) in data.covariates().rows().zip(data.responses()) {
        let mut fields: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        match y {
            Some(c) => {
                fields.extend(c.coords().iter().map(|v| v.to_string()));
                fields.push("1".into());
            }
            None => {
                fields.extend(std::iter::repeat(String::new()).take(d));
                fields.push("0".into());
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
