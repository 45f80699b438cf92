//! Weighted kernel density estimators on the simplex.
//!
//! Every estimator evaluates `divisor^{-1} * sum_i w_i K_i(s)` over the observed
//! units. The constructors fix the weights and the divisor:
//!
//! | estimator              | `w_i`          | divisor        |
//! |------------------------|----------------|----------------|
//! | full data              | 1              | `n`            |
//! | complete case          | `delta_i`      | `sum delta_j`  |
//! | IPW (true or fitted pi)| `delta_i/pi_i` | `n` (all units)|

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{log_parts, KernelAnchor};
use crate::logratio::{log_ratio_forward, log_ratio_jacobian, LogRatio};
use crate::simplex::{Composition, SimplexGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Full,
    CompleteCase,
    IpwDirichlet,
    IpwAlr,
    IpwIlr,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Full => "full",
            EstimatorKind::CompleteCase => "cc",
            EstimatorKind::IpwDirichlet => "dirichlet",
            EstimatorKind::IpwAlr => "alr",
            EstimatorKind::IpwIlr => "ilr",
        }
    }

    pub fn log_ratio(self) -> Option<LogRatio> {
        match self {
            EstimatorKind::IpwAlr => Some(LogRatio::Alr),
            EstimatorKind::IpwIlr => Some(LogRatio::Ilr),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(EstimatorKind::Full),
            "cc" | "complete_case" | "complete-case" => Ok(EstimatorKind::CompleteCase),
            "dirichlet" | "ipw" => Ok(EstimatorKind::IpwDirichlet),
            "alr" => Ok(EstimatorKind::IpwAlr),
            "ilr" => Ok(EstimatorKind::IpwIlr),
            other => Err(Error::InvalidArgument(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Family {
    /// Flattened log-parts of the anchors, stride `d + 1`.
    Dirichlet { log_parts: Vec<f64> },
    /// Anchors mapped to the plane.
    LogRatio { map: LogRatio, points: Vec<[f64; 2]> },
}

/// An evaluable weighted kernel sum.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    kind: EstimatorKind,
    dim: usize,
    n_units: usize,
    units: Vec<usize>,
    anchors: Vec<Composition>,
    weights: Vec<f64>,
    divisor: f64,
    bandwidth: f64,
    pub(crate) family: Family,
}

fn check_bandwidth(b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(b))
    }
}

impl DensityEstimate {
    /// A Dirichlet-kernel estimate from explicit anchors, weights and divisor.
    pub fn dirichlet_from_parts(
        kind: EstimatorKind,
        anchors: Vec<Composition>,
        weights: Vec<f64>,
        divisor: f64,
        bandwidth: f64,
    ) -> Result<Self> {
        if kind.log_ratio().is_some() {
            return Err(Error::InvalidArgument(format!("{kind} is not a Dirichlet-kernel estimator")));
        }
        check_bandwidth(bandwidth)?;
        if anchors.is_empty() {
            return Err(Error::EmptySample);
        }
        if weights.len() != anchors.len() {
            return Err(Error::LengthMismatch { expected: anchors.len(), actual: weights.len() });
        }
        if !(divisor.is_finite() && divisor > 0.0) {
            return Err(Error::InvalidArgument(format!("divisor {divisor} must be positive")));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("weight {i} must be finite and nonnegative")));
        }
        let dim = anchors[0].dim();
        if let Some(a) = anchors.iter().find(|a| a.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: a.dim() });
        }
        let log_parts = anchors.iter().flat_map(log_parts).collect();
        let n_units = anchors.len();
        Ok(Self {
            kind,
            dim,
            n_units,
            units: (0..n_units).collect(),
            anchors,
            weights,
            divisor,
            bandwidth,
            family: Family::Dirichlet { log_parts },
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    /// Responses carried by the estimate (observed units only).
    pub fn anchors(&self) -> &[Composition] {
        &self.anchors
    }

    /// Weights aligned with [`Self::anchors`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of every unit of the source sample; unobserved units get 0.
    pub fn unit_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_units];
        for (&u, &w) in self.units.iter().zip(&self.weights) {
            out[u] = w;
        }
        out
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out
    }

    /// Evaluates the estimate at `s`.
    pub fn evaluate(&self, s: &Composition) -> Result<f64> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: s.dim() });
        }
        match &self.family {
            Family::Dirichlet { log_parts } => {
                let anchor = KernelAnchor::new(s, self.bandwidth);
                let stride = self.dim + 1;
                let sum: f64 = log_parts
                    .chunks_exact(stride)
                    .zip(&self.weights)
                    .map(|(lp, w)| w * anchor.eval(lp))
                    .sum();
                Ok(sum / self.divisor)
            }
            Family::LogRatio { map, points } => {
                let t = log_ratio_forward(*map, s)?;
                let jac = log_ratio_jacobian(*map, s)?;
                let h = self.bandwidth;
                let inv_two_h = 1.0 / (2.0 * h);
                let sum: f64 = points
                    .iter()
                    .zip(&self.weights)
                    .map(|(p, w)| {
                        let q = (t[0] - p[0]).powi(2) + (t[1] - p[1]).powi(2);
                        w * (-q * inv_two_h).exp()
                    })
                    .sum();
                Ok(sum * jac / (2.0 * PI * h) / self.divisor)
            }
        }
    }

    /// Evaluates at many points in parallel; output order follows `points`.
    pub fn evaluate_points(&self, points: &[Composition]) -> Result<Vec<f64>> {
        points.par_iter().map(|s| self.evaluate(s)).collect()
    }

    pub fn evaluate_grid(&self, grid: &SimplexGrid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: grid.dim() });
        }
        self.evaluate_points(grid.points())
    }
}

/// Full-data Dirichlet KDE `n^{-1} sum_i kappa_{s,b}(Y_i)`.
pub fn full_kde(responses: &[Composition], b: f64) -> Result<DensityEstimate> {
    if responses.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = responses.len();
    DensityEstimate::dirichlet_from_parts(EstimatorKind::Full, responses.to_vec(), vec![1.0; n], n as f64, b)
}

// Observed anchors with weights delta_i / pi_i.
fn ipw_weights(data: &Dataset, pi: &[f64]) -> Result<(Vec<usize>, Vec<Composition>, Vec<f64>)> {
    if pi.len() != data.n() {
        return Err(Error::LengthMismatch { expected: data.n(), actual: pi.len() });
    }
    if data.observed_count() == 0 {
        return Err(Error::NoObservedResponses);
    }
    let mut units = Vec::with_capacity(data.observed_count());
    let mut anchors = Vec::with_capacity(data.observed_count());
    let mut weights = Vec::with_capacity(data.observed_count());
    for (i, y) in data.observed() {
        let p = pi[i];
        if p.is_nan() || p <= 0.0 {
            return Err(Error::ZeroPropensityOnObserved { index: i, value: p });
        }
        if p > 1.0 {
            return Err(Error::InvalidArgument(format!("propensity {p} of unit {i} exceeds one")));
        }
        units.push(i);
        anchors.push(y.clone());
        weights.push(1.0 / p);
    }
    Ok((units, anchors, weights))
}

/// IPW Dirichlet KDE `n^{-1} sum_i (delta_i / pi_i) kappa_{s,b}(Y_i)`.
///
/// With true propensities this is the pseudo estimator; with fitted ones, the
/// feasible estimator. The divisor counts every unit, observed or not.
pub fn ipw_kde(data: &Dataset, pi: &[f64], b: f64) -> Result<DensityEstimate> {
    let (units, anchors, weights) = ipw_weights(data, pi)?;
    let mut est = DensityEstimate::dirichlet_from_parts(EstimatorKind::IpwDirichlet, anchors, weights, data.n() as f64, b)?;
    est.n_units = data.n();
    est.units = units;
    Ok(est)
}

/// Complete-case Dirichlet KDE `(sum_j delta_j)^{-1} sum_i delta_i kappa_{s,b}(Y_i)`.
pub fn complete_case_kde(data: &Dataset, b: f64) -> Result<DensityEstimate> {
    let observed = data.observed_count();
    if observed == 0 {
        return Err(Error::NoObservedResponses);
    }
    let (units, anchors): (Vec<usize>, Vec<Composition>) = data.observed().map(|(i, y)| (i, y.clone())).unzip();
    let mut est = DensityEstimate::dirichlet_from_parts(
        EstimatorKind::CompleteCase,
        anchors,
        vec![1.0; observed],
        observed as f64,
        b,
    )?;
    est.n_units = data.n();
    est.units = units;
    Ok(est)
}

/// IPW log-ratio KDE: a Gaussian KDE with covariance `h I_2` on the transformed
/// responses, mapped back with the Jacobian of the transform.
pub fn ipw_logratio_kde(kind: LogRatio, data: &Dataset, pi: &[f64], h: f64) -> Result<DensityEstimate> {
    check_bandwidth(h)?;
    if data.dim() != 2 && data.observed_count() > 0 {
        return Err(Error::DimensionMismatch { expected: 2, actual: data.dim() });
    }
    let (units, anchors, weights) = ipw_weights(data, pi)?;
    let points = anchors.iter().map(|y| log_ratio_forward(kind, y)).collect::<Result<Vec<_>>>()?;
    Ok(DensityEstimate {
        kind: match kind {
            LogRatio::Alr => EstimatorKind::IpwAlr,
            LogRatio::Ilr => EstimatorKind::IpwIlr,
        },
        dim: 2,
        n_units: data.n(),
        units,
        anchors,
        weights,
        divisor: data.n() as f64,
        bandwidth: h,
        family: Family::LogRatio { map: kind, points },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Covariates;
    use crate::kernel::{kappa, KernelSpec};
    use crate::simplex::build_interior_grid;

    fn comp(c: &[f64]) -> Composition {
        Composition::new(c, 1e-12).unwrap()
    }

    fn sample() -> Vec<Composition> {
        [[0.2, 0.3], [0.5, 0.1], [0.3, 0.3], [0.1, 0.7], [0.25, 0.5], [0.6, 0.2]]
            .iter()
            .map(|c| comp(c))
            .collect()
    }

    fn zeros(n: usize) -> Covariates {
        Covariates::new(vec![0.0; n], 1).unwrap()
    }

    #[test]
    fn single_point_full_kde_is_the_kernel() {
        let y = comp(&[0.2, 0.3]);
        let est = full_kde(std::slice::from_ref(&y), 0.1).unwrap();
        let s = comp(&[0.4, 0.4]);
        let want = kappa(&KernelSpec::new(s.clone(), 0.1).unwrap(), &y).unwrap();
        assert!((est.evaluate(&s).unwrap() - want).abs() < 1e-12 * want);
        assert_eq!(full_kde(&[], 0.1).unwrap_err(), Error::EmptySample);
    }

    #[test]
    fn duplicated_sample_is_invariant() {
        let ys = sample();
        let doubled: Vec<Composition> = ys.iter().chain(ys.iter()).cloned().collect();
        let a = full_kde(&ys, 0.15).unwrap();
        let b = full_kde(&doubled, 0.15).unwrap();
        let grid = build_interior_grid(2, 12, 0.01).unwrap();
        for s in grid.points() {
            let (x, y) = (a.evaluate(s).unwrap(), b.evaluate(s).unwrap());
            assert!((x - y).abs() <= 1e-13 * x.max(1.0));
        }
    }

    #[test]
    fn specializations_coincide_on_complete_data() {
        let ys = sample();
        let data = Dataset::complete(zeros(ys.len()), ys.clone()).unwrap();
        let full = full_kde(&ys, 0.1).unwrap();
        let ipw = ipw_kde(&data, &vec![1.0; ys.len()], 0.1).unwrap();
        let cc = complete_case_kde(&data, 0.1).unwrap();
        let grid = build_interior_grid(2, 40, 0.01).unwrap();
        let f = full.evaluate_grid(&grid).unwrap();
        assert_eq!(f, ipw.evaluate_grid(&grid).unwrap());
        assert_eq!(f, cc.evaluate_grid(&grid).unwrap());
    }

    #[test]
    fn single_observed_unit_hand_value() {
        let y = comp(&[0.3, 0.3]);
        let data = Dataset::new(zeros(2), vec![Some(y.clone()), None]).unwrap();
        let est = ipw_kde(&data, &[0.5, 0.9], 0.2).unwrap();
        let s = comp(&[0.25, 0.35]);
        let want = kappa(&KernelSpec::new(s.clone(), 0.2).unwrap(), &y).unwrap();
        assert!((est.evaluate(&s).unwrap() - want).abs() < 1e-12 * want);
        assert_eq!(est.unit_weights(), vec![2.0, 0.0]);
    }

    #[test]
    fn ipw_errors() {
        let y = comp(&[0.3, 0.3]);
        let data = Dataset::new(zeros(2), vec![Some(y), None]).unwrap();
        assert!(matches!(ipw_kde(&data, &[0.0, 0.5], 0.1), Err(Error::ZeroPropensityOnObserved { index: 0, .. })));
        // unobserved units may carry any propensity
        assert!(ipw_kde(&data, &[0.5, 0.0], 0.1).is_ok());
        let empty = Dataset::new(zeros(2), vec![None, None]).unwrap();
        assert_eq!(ipw_kde(&empty, &[0.5, 0.5], 0.1).unwrap_err(), Error::NoObservedResponses);
        assert_eq!(complete_case_kde(&empty, 0.1).unwrap_err(), Error::NoObservedResponses);
        assert!(matches!(ipw_kde(&data, &[0.5], 0.1), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn evaluation_is_linear_in_weights() {
        let ys = sample();
        let data = Dataset::new(
            zeros(ys.len()),
            ys.iter().enumerate().map(|(i, y)| (i % 3 != 0).then(|| y.clone())).collect(),
        )
        .unwrap();
        let est = ipw_kde(&data, &[0.4, 0.5, 0.6, 0.7, 0.8, 0.9], 0.12).unwrap();
        let twice = est.scaled(2.0);
        for s in build_interior_grid(2, 15, 0.01).unwrap().points() {
            assert_eq!(twice.evaluate(s).unwrap(), 2.0 * est.evaluate(s).unwrap());
        }
    }

    #[test]
    fn logratio_single_point_at_anchor() {
        let y = comp(&[0.2, 0.5]);
        let data = Dataset::complete(zeros(1), vec![y.clone()]).unwrap();
        for kind in [LogRatio::Alr, LogRatio::Ilr] {
            let h = 0.3;
            let est = ipw_logratio_kde(kind, &data, &[1.0], h).unwrap();
            let want = log_ratio_jacobian(kind, &y).unwrap() / (2.0 * PI * h);
            assert!((est.evaluate(&y).unwrap() - want).abs() < 1e-12 * want);
            assert_eq!(est.evaluate(&comp(&[0.5, 0.5])), Err(Error::BoundaryPoint));
        }
    }

    #[test]
    fn nonnegative_everywhere_on_grid() {
        let ys = sample();
        let data = Dataset::complete(zeros(ys.len()), ys.clone()).unwrap();
        let grid = build_interior_grid(2, 40, 0.01).unwrap();
        for est in [
            full_kde(&ys, 0.05).unwrap(),
            ipw_logratio_kde(LogRatio::Alr, &data, &[1.0; 6], 0.5).unwrap(),
            ipw_logratio_kde(LogRatio::Ilr, &data, &[1.0; 6], 0.5).unwrap(),
        ] {
            assert!(est.evaluate_grid(&grid).unwrap().iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [
            EstimatorKind::Full,
            EstimatorKind::CompleteCase,
            EstimatorKind::IpwDirichlet,
            EstimatorKind::IpwAlr,
            EstimatorKind::IpwIlr,
        ] {
            assert_eq!(kind.name().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!("gaussian".parse::<EstimatorKind>().is_err());
    }
}
