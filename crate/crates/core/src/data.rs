//! Covariates, responses and observation indicators.

use crate::error::{Error, Result};
use crate::simplex::Composition;

/// Row-major `n x p` covariate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl Covariates {
    pub fn new(values: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("covariate dimension must be positive".into()));
        }
        if values.len() % p != 0 {
            return Err(Error::LengthMismatch { expected: (values.len() / p + 1) * p, actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let n = values.len() / p;
        Ok(Self { values, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::LengthMismatch { expected: p, actual: bad.len() });
        }
        Self::new(rows.concat(), p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// `n` units of covariates, possibly-missing responses and observation indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Covariates,
    responses: Vec<Option<Composition>>,
    dim: usize,
}

impl Dataset {
    /// A unit is observed exactly when its response is present.
    pub fn new(covariates: Covariates, responses: Vec<Option<Composition>>) -> Result<Self> {
        if covariates.n() != responses.len() {
            return Err(Error::LengthMismatch { expected: covariates.n(), actual: responses.len() });
        }
        let mut dims = responses.iter().flatten().map(Composition::dim);
        let dim = dims.next().unwrap_or(0);
        if let Some(other) = dims.find(|&d| d != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: other });
        }
        Ok(Self { covariates, responses, dim })
    }

    /// Checks explicit indicators against response presence.
    pub fn with_indicators(
        covariates: Covariates,
        responses: Vec<Option<Composition>>,
        indicators: &[bool],
    ) -> Result<Self> {
        if indicators.len() != responses.len() {
            return Err(Error::LengthMismatch { expected: responses.len(), actual: indicators.len() });
        }
        if let Some(i) = responses.iter().zip(indicators).position(|(r, &d)| r.is_some() != d) {
            return Err(Error::InvalidArgument(format!("indicator of unit {i} disagrees with its response")));
        }
        Self::new(covariates, responses)
    }

    /// A dataset with every response observed.
    pub fn complete(covariates: Covariates, responses: Vec<Composition>) -> Result<Self> {
        Self::new(covariates, responses.into_iter().map(Some).collect())
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.p()
    }

    /// Simplex dimension of the responses; 0 when none is observed.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn responses(&self) -> &[Option<Composition>] {
        &self.responses
    }

    pub fn indicators(&self) -> Vec<bool> {
        self.responses.iter().map(Option::is_some).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.responses.iter().filter(|r| r.is_some()).count()
    }

    /// `(index, response)` of every observed unit, in order.
    pub fn observed(&self) -> impl Iterator<Item = (usize, &Composition)> {
        self.responses.iter().enumerate().filter_map(|(i, r)| r.as_ref().map(|c| (i, c)))
    }
}
