//! Dirichlet densities and the anchor-adaptive Dirichlet kernel.
//!
//! The kernel anchored at `s` with bandwidth `b` is the Dirichlet density with
//! parameters `alpha = s/b + 1` and `beta = (1 - |s|_1)/b + 1`. In the full
//! `(d+1)`-part representation every concentration is `part/b + 1`, so
//!
//! ```text
//! ln kappa_{s,b}(y) = lnG(1/b + d + 1) - sum_k lnG(s_k/b + 1) + sum_k (s_k/b) ln y_k
//! ```
//!
//! All arithmetic stays in log-space until a single final exponentiation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::simplex::Composition;

/// Natural log of the gamma function for positive arguments.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Parameters of a `Dirichlet(alpha, beta)` law on the `d`-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    beta: f64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>, beta: f64) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidParams("alpha must be non-empty".into()));
        }
        if let Some(bad) = alpha.iter().chain(std::iter::once(&beta)).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParams(format!("parameter {bad} is not a positive finite number")));
        }
        Ok(Self { alpha, beta })
    }

    /// Builds from all `d+1` concentrations; the last one becomes `beta`.
    pub fn from_concentrations(concentrations: &[f64]) -> Result<Self> {
        match concentrations.split_last() {
            Some((&beta, alpha)) if !alpha.is_empty() => Self::new(alpha.to_vec(), beta),
            _ => Err(Error::InvalidParams("need at least two concentrations".into())),
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// All `d+1` concentrations `(alpha_1, ..., alpha_d, beta)`.
    pub fn concentrations(&self) -> Vec<f64> {
        let mut c = self.alpha.clone();
        c.push(self.beta);
        c
    }

    /// `lnG(sum) - sum lnG(c_k)`.
    pub fn log_normalizer(&self) -> f64 {
        let total: f64 = self.alpha.iter().sum::<f64>() + self.beta;
        ln_gamma(total) - self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(self.beta)
    }

    /// Componentwise mean `alpha_k / (sum alpha + beta)` for the first `d` parts.
    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum::<f64>() + self.beta;
        self.alpha.iter().map(|a| a / total).collect()
    }
}

// `exponent * ln(part)` with the convention that a zero exponent contributes nothing.
#[inline]
fn power_term(exponent: f64, log_part: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else {
        exponent * log_part
    }
}

/// Log-density of `Dirichlet(alpha, beta)` at `x`.
///
/// A zero part with a positive exponent gives `-inf`; a zero part with a
/// negative exponent gives `+inf`; a zero exponent contributes a factor of one.
pub fn dirichlet_log_density(params: &DirichletParams, x: &Composition) -> Result<f64> {
    if params.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), actual: x.dim() });
    }
    let mut log_kernel = 0.0;
    for (k, &a) in params.alpha.iter().enumerate() {
        log_kernel += power_term(a - 1.0, x.coords()[k].ln());
    }
    log_kernel += power_term(params.beta - 1.0, x.last().ln());
    if log_kernel.is_nan() {
        // +inf and -inf factors together; the density is not defined there
        return Err(Error::BoundaryPoint);
    }
    Ok(params.log_normalizer() + log_kernel)
}

/// The Dirichlet kernel anchored at a point with a given bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    anchor: Composition,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(anchor: Composition, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        Ok(Self { anchor, bandwidth })
    }

    pub fn anchor(&self) -> &Composition {
        &self.anchor
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `alpha = s/b + 1`, `beta = (1 - |s|_1)/b + 1`.
    pub fn params(&self) -> DirichletParams {
        let b = self.bandwidth;
        DirichletParams {
            alpha: self.anchor.coords().iter().map(|s| s / b + 1.0).collect(),
            beta: self.anchor.last() / b + 1.0,
        }
    }
}

/// Value of the kernel `kappa_{s,b}` at `y`.
pub fn kappa(spec: &KernelSpec, y: &Composition) -> Result<f64> {
    Ok(dirichlet_log_density(&spec.params(), y)?.exp())
}

/// `psi(s) = {(4 pi)^d (1 - |s|_1) prod s_i}^{-1/2}` for interior `s`.
pub fn psi(s: &Composition) -> Result<f64> {
    if !s.is_interior() || s.last() <= 0.0 {
        return Err(Error::BoundaryPoint);
    }
    let d = s.dim() as i32;
    let prod: f64 = s.coords().iter().product::<f64>() * s.last();
    Ok(((4.0 * PI).powi(d) * prod).powf(-0.5))
}

/// Logs of all `d+1` parts of a point, `-inf` for zero parts.
pub fn log_parts(y: &Composition) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.dim() + 1);
    out.extend(y.coords().iter().map(|v| v.ln()));
    out.push(y.last().ln());
    out
}

/// Kernel constants for one anchor and bandwidth, for repeated evaluation.
///
/// Evaluating against precomputed [`log_parts`] costs `d+1` multiply-adds and one `exp`.
#[derive(Debug, Clone)]
pub struct KernelAnchor {
    log_norm: f64,
    exponents: Vec<f64>,
}

impl KernelAnchor {
    pub fn new(anchor: &Composition, bandwidth: f64) -> Self {
        let d = anchor.dim();
        let mut exponents = Vec::with_capacity(d + 1);
        exponents.extend(anchor.coords().iter().map(|s| s / bandwidth));
        exponents.push(anchor.last() / bandwidth);
        let log_norm = ln_gamma(1.0 / bandwidth + d as f64 + 1.0)
            - exponents.iter().map(|e| ln_gamma(e + 1.0)).sum::<f64>();
        Self { log_norm, exponents }
    }

    /// `ln kappa` at a point given its log-parts.
    #[inline]
    pub fn log_eval(&self, log_y: &[f64]) -> f64 {
        let mut acc = self.log_norm;
        for (&e, &ly) in self.exponents.iter().zip(log_y) {
            acc += power_term(e, ly);
        }
        acc
    }

    #[inline]
    pub fn eval(&self, log_y: &[f64]) -> f64 {
        self.log_eval(log_y).exp()
    }
}
