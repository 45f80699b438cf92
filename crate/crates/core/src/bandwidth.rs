//! Least-squares cross-validation of the smoothing bandwidth under IPW.
//!
//! For a candidate bandwidth the criterion is
//!
//! ```text
//! LSCV(b) = Q(b) - (2/n) sum_i (delta_i / pi_i) f^{(-i)}(Y_i)
//! ```
//!
//! where `Q(b)` is the grid Riemann approximation of the integral of the squared
//! estimate and `f^{(-i)}` is the estimate built without unit `i`.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{ipw_kde, ipw_logratio_kde, DensityEstimate, Family};
use crate::kernel::KernelAnchor;
use crate::logratio::{log_ratio_forward, LogRatio};
use crate::simplex::{build_interior_grid, SimplexGrid};

/// Normalization of the leave-one-out estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LooDivisor {
    /// A proper `(n-1)`-sample estimator.
    #[default]
    NMinusOne,
    /// Keep the full-sample divisor `n`.
    N,
}

/// The 35 candidates `0.01, 0.02, ..., 0.35`.
pub fn default_candidates() -> Vec<f64> {
    (1..=35).map(|k| k as f64 / 100.0).collect()
}

/// Evenly spaced candidates `lo, lo + step, ...` up to `hi` inclusive.
pub fn candidate_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || lo <= 0.0 || step <= 0.0 || hi < lo {
        return Err(Error::InvalidArgument(format!("bad candidate range {lo}:{hi}:{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(Error::InvalidArgument(format!("candidate range {lo}:{hi}:{step} is too long")));
    }
    // integer steps avoid accumulated drift; rounding to 12 digits keeps 0.07 as 0.07
    Ok((0..count).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Candidate set and integration grid for the Dirichlet bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct LscvConfig {
    candidates: Vec<f64>,
    integral_grid: SimplexGrid,
    loo_divisor: LooDivisor,
}

impl LscvConfig {
    /// Candidates must be strictly increasing and lie in (0, 1).
    pub fn new(candidates: Vec<f64>, integral_grid: SimplexGrid) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        if let Some(b) = candidates.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidArgument(format!("candidate bandwidth {b} outside (0, 1)")));
        }
        if candidates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("candidates must be strictly increasing".into()));
        }
        Ok(Self { candidates, integral_grid, loo_divisor: LooDivisor::default() })
    }

    /// Candidates `0.01..=0.35` and a `res = 40`, `eps = 0.01` grid.
    pub fn default_for_dim(d: usize) -> Result<Self> {
        Self::new(default_candidates(), build_interior_grid(d, 40, 0.01)?)
    }

    pub fn with_loo_divisor(mut self, loo_divisor: LooDivisor) -> Self {
        self.loo_divisor = loo_divisor;
        self
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn integral_grid(&self) -> &SimplexGrid {
        &self.integral_grid
    }

    pub fn loo_divisor(&self) -> LooDivisor {
        self.loo_divisor
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LscvPoint {
    pub bandwidth: f64,
    pub score: f64,
    /// Grid approximation of the integral of the squared estimate.
    pub integral: f64,
    /// `(2/n) sum_i w_i f^{(-i)}(Y_i)`.
    pub cross_term: f64,
}

fn check_observed(data: &Dataset) -> Result<()> {
    let observed = data.observed_count();
    if observed < 2 {
        return Err(Error::TooFewObserved { observed });
    }
    Ok(())
}

fn loo_scale(n: usize, divisor: LooDivisor) -> f64 {
    match divisor {
        LooDivisor::NMinusOne => 1.0 / (n as f64 - 1.0),
        LooDivisor::N => 1.0 / n as f64,
    }
}

// Integral term, leave-one-out sums and score for an already-built estimate.
fn components(est: &DensityEstimate, n: usize, grid: &SimplexGrid, loo: LooDivisor) -> Result<LscvPoint> {
    let values = est.evaluate_grid(grid)?;
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    let integral = grid.quadrature_mean(&squares)?;
    let weights = est.weights();
    let loo_sums: Vec<f64> = match &est.family {
        Family::Dirichlet { log_parts } => {
            let stride = est.dim() + 1;
            est.anchors()
                .par_iter()
                .enumerate()
                .map(|(i, yi)| {
                    let anchor = KernelAnchor::new(yi, est.bandwidth());
                    let mut acc = 0.0;
                    for (j, (lp, w)) in log_parts.chunks_exact(stride).zip(weights).enumerate() {
                        if j != i {
                            acc += w * anchor.eval(lp);
                        }
                    }
                    acc
                })
                .collect()
        }
        Family::LogRatio { map, points } => {
            let h = est.bandwidth();
            let inv_two_h = 1.0 / (2.0 * h);
            let norm = 1.0 / (2.0 * std::f64::consts::PI * h);
            est.anchors()
                .par_iter()
                .zip(points.par_iter())
                .enumerate()
                .map(|(i, (yi, ti))| {
                    let jac = crate::logratio::log_ratio_jacobian(*map, yi)?;
                    let mut acc = 0.0;
                    for (j, (tj, w)) in points.iter().zip(weights).enumerate() {
                        if j != i {
                            let q = (ti[0] - tj[0]).powi(2) + (ti[1] - tj[1]).powi(2);
                            acc += w * (-q * inv_two_h).exp();
                        }
                    }
                    Ok(acc * norm * jac)
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    let scale = loo_scale(n, loo);
    let cross_sum: f64 = weights.iter().zip(&loo_sums).map(|(w, s)| w * s * scale).sum();
    let cross_term = 2.0 * cross_sum / n as f64;
    Ok(LscvPoint { bandwidth: est.bandwidth(), score: integral - cross_term, integral, cross_term })
}

/// LSCV score of the IPW Dirichlet KDE at bandwidth `b`.
pub fn lscv_score(b: f64, data: &Dataset, pi: &[f64], cfg: &LscvConfig) -> Result<f64> {
    Ok(lscv_components(b, data, pi, cfg)?.score)
}

pub fn lscv_components(b: f64, data: &Dataset, pi: &[f64], cfg: &LscvConfig) -> Result<LscvPoint> {
    check_observed(data)?;
    let est = ipw_kde(data, pi, b)?;
    components(&est, data.n(), &cfg.integral_grid, cfg.loo_divisor)
}

/// Scores for every candidate, in candidate order.
pub fn lscv_profile(data: &Dataset, pi: &[f64], cfg: &LscvConfig) -> Result<Vec<LscvPoint>> {
    check_observed(data)?;
    cfg.candidates
        .iter()
        .map(|&b| {
            let est = ipw_kde(data, pi, b)?;
            components(&est, data.n(), &cfg.integral_grid, cfg.loo_divisor)
        })
        .collect()
}

/// Minimizer of the scores; ties go to the earliest (smallest) candidate.
pub fn argmin_first(points: &[LscvPoint]) -> Result<f64> {
    let mut best: Option<&LscvPoint> = None;
    for p in points.iter().filter(|p| !p.score.is_nan()) {
        if best.map_or(true, |b| p.score < b.score) {
            best = Some(p);
        }
    }
    best.map(|p| p.bandwidth)
        .ok_or_else(|| Error::DegenerateData("no candidate produced a finite score".into()))
}

/// `b* = argmin_{b in B} LSCV(b)`.
pub fn select_bandwidth(data: &Dataset, pi: &[f64], cfg: &LscvConfig) -> Result<f64> {
    argmin_first(&lscv_profile(data, pi, cfg)?)
}

/// Covariance bandwidths for a log-ratio KDE: `h = (3 sigma_T b)^2` for each base
/// candidate `b`, where `sigma_T` is the mean per-axis standard deviation of the
/// transformed observed responses.
pub fn logratio_candidates(kind: LogRatio, data: &Dataset, base: &[f64]) -> Result<Vec<f64>> {
    check_observed(data)?;
    let points: Vec<[f64; 2]> = data.observed().map(|(_, y)| log_ratio_forward(kind, y)).collect::<Result<_>>()?;
    let m = points.len() as f64;
    let mut sigma = 0.0;
    for axis in 0..2 {
        let mean = points.iter().map(|p| p[axis]).sum::<f64>() / m;
        let ss: f64 = points.iter().map(|p| (p[axis] - mean).powi(2)).sum();
        sigma += (ss / (m - 1.0)).sqrt() / 2.0;
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::DegenerateData("transformed responses have zero spread".into()));
    }
    Ok(base.iter().map(|b| (3.0 * sigma * b).powi(2)).collect())
}

/// Silverman covariance bandwidth `h = (1.06 sigma_T m^{-1/6})^2` on the transformed
/// observed responses (`m` observed units).
pub fn logratio_silverman(kind: LogRatio, data: &Dataset) -> Result<f64> {
    let m = data.observed_count() as f64;
    let unit = logratio_candidates(kind, data, &[1.0])?[0].sqrt() / 3.0;
    Ok((1.06 * unit * m.powf(-1.0 / 6.0)).powi(2))
}

/// LSCV scores of an IPW log-ratio KDE over covariance bandwidths `candidates`.
pub fn logratio_lscv_profile(
    kind: LogRatio,
    data: &Dataset,
    pi: &[f64],
    candidates: &[f64],
    grid: &SimplexGrid,
    loo: LooDivisor,
) -> Result<Vec<LscvPoint>> {
    check_observed(data)?;
    candidates
        .iter()
        .map(|&h| {
            let est = ipw_logratio_kde(kind, data, pi, h)?;
            components(&est, data.n(), grid, loo)
        })
        .collect()
}
