//! Nadaraya-Watson estimation of observation probabilities.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::data::Covariates;
use crate::error::{Error, Result};

/// Default lower clip applied to estimated propensities.
pub const DEFAULT_FLOOR: f64 = 0.05;

/// Smoothing kernel for the covariate regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropensityKernel {
    /// Product of standard normal densities.
    #[default]
    Gaussian,
}

/// Silverman's rule `h = 1.06 * sigma * n^{-1/(p+4)}`, with `sigma` the mean of the
/// per-coordinate sample standard deviations.
pub fn silverman_bandwidth(covariates: &Covariates) -> Result<f64> {
    let n = covariates.n();
    let p = covariates.p();
    if n < 2 {
        return Err(Error::DegenerateData(format!("Silverman's rule needs n >= 2, got {n}")));
    }
    let sigma = mean_std_dev(covariates);
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::DegenerateData("covariates have zero spread".into()));
    }
    Ok(1.06 * sigma * (n as f64).powf(-1.0 / (p as f64 + 4.0)))
}

/// Mean over coordinates of the sample standard deviation (denominator `n - 1`).
pub fn mean_std_dev(covariates: &Covariates) -> f64 {
    let n = covariates.n() as f64;
    let p = covariates.p();
    let mut total = 0.0;
    for k in 0..p {
        let mean = covariates.rows().map(|r| r[k]).sum::<f64>() / n;
        let ss: f64 = covariates.rows().map(|r| (r[k] - mean).powi(2)).sum();
        total += (ss / (n - 1.0)).sqrt();
    }
    total / p as f64
}

/// `K_h(u) = h^{-p} (2 pi)^{-p/2} exp(-|u/h|^2 / 2)`.
pub fn gaussian_kernel(u: &[f64], h: f64) -> f64 {
    let p = u.len() as i32;
    let q: f64 = u.iter().map(|v| (v / h).powi(2)).sum();
    h.powi(-p) * (2.0 * PI).powf(-(p as f64) / 2.0) * (-0.5 * q).exp()
}

/// Fitted propensities for every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pi_hat: Vec<f64>,
    bandwidth_h: f64,
    floor: f64,
    kernel: PropensityKernel,
    covariates: Covariates,
    indicators: Vec<bool>,
}

impl PropensityFit {
    pub fn pi_hat(&self) -> &[f64] {
        &self.pi_hat
    }

    pub fn into_pi_hat(self) -> Vec<f64> {
        self.pi_hat
    }

    pub fn bandwidth_h(&self) -> f64 {
        self.bandwidth_h
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn kernel(&self) -> PropensityKernel {
        self.kernel
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn indicators(&self) -> &[bool] {
        &self.indicators
    }
}

/// Nadaraya-Watson regression of the indicators on the covariates, evaluated at
/// every unit (the unit itself included), then clipped below at `floor`.
pub fn fit_propensity(covariates: &Covariates, indicators: &[bool], h: f64, floor: f64) -> Result<PropensityFit> {
    let n = covariates.n();
    if indicators.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: indicators.len() });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    if !(floor > 0.0 && floor < 1.0) {
        return Err(Error::InvalidArgument(format!("propensity floor {floor} must lie in (0, 1)")));
    }
    let raw = nadaraya_watson(covariates, indicators, h);
    let pi_hat = raw.into_iter().map(|v| v.max(floor)).collect();
    Ok(PropensityFit {
        pi_hat,
        bandwidth_h: h,
        floor,
        kernel: PropensityKernel::Gaussian,
        covariates: covariates.clone(),
        indicators: indicators.to_vec(),
    })
}

// The Gaussian normalizing constant cancels in the ratio and is omitted.
fn nadaraya_watson(covariates: &Covariates, indicators: &[bool], h: f64) -> Vec<f64> {
    let inv_two_h2 = 1.0 / (2.0 * h * h);
    (0..covariates.n())
        .into_par_iter()
        .map(|i| {
            let xi = covariates.row(i);
            let mut num = 0.0;
            let mut den = 0.0;
            for (xj, &delta) in covariates.rows().zip(indicators) {
                let q: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                let k = (-q * inv_two_h2).exp();
                den += k;
                if delta {
                    num += k;
                }
            }
            num / den
        })
        .collect()
}
