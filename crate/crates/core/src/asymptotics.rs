//! Leading-order bias, variance and optimal bandwidth of the IPW Dirichlet KDE for
//! a known Dirichlet-mixture target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{ln_gamma, psi};
use crate::simplex::Composition;
use crate::simulation::SimModel;

/// Finite mixture of Dirichlet densities on the d-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMixture {
    weights: Vec<f64>,
    components: Vec<Vec<f64>>,
    log_norms: Vec<f64>,
}

impl DirichletMixture {
    /// `components[k]` holds the `d + 1` concentrations of component `k`.
    pub fn new(weights: Vec<f64>, components: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidParams(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParams("mixture weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("mixture weights sum to {total}")));
        }
        let width = components[0].len();
        if width < 2 {
            return Err(Error::InvalidParams("components need at least two concentrations".into()));
        }
        for c in &components {
            if c.len() != width {
                return Err(Error::DimensionMismatch { expected: width - 1, actual: c.len().saturating_sub(1) });
            }
            if c.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(Error::InvalidParams(format!("concentrations {c:?} must be positive")));
            }
        }
        let log_norms = components
            .iter()
            .map(|c| ln_gamma(c.iter().sum()) - c.iter().map(|&a| ln_gamma(a)).sum::<f64>())
            .collect();
        Ok(Self { weights, components, log_norms })
    }

    /// A single Dirichlet component.
    pub fn single(concentrations: Vec<f64>) -> Result<Self> {
        Self::new(vec![1.0], vec![concentrations])
    }

    /// The uniform density `d!` on the d-simplex.
    pub fn uniform(d: usize) -> Self {
        Self::single(vec![1.0; d + 1]).expect("unit concentrations are valid")
    }

    /// `0.4 Dir(1.3, 1.6, 1) + 0.6 Dir(1.7, 1.2, 2.5)`.
    pub fn model_i() -> Self {
        Self::new(vec![0.4, 0.6], vec![vec![1.3, 1.6, 1.0], vec![1.7, 1.2, 2.5]]).expect("valid mixture")
    }

    /// `0.4 Dir(4, 1, 2) + 0.6 Dir(1, 3, 2)`.
    pub fn model_ii() -> Self {
        Self::new(vec![0.4, 0.6], vec![vec![4.0, 1.0, 2.0], vec![1.0, 3.0, 2.0]]).expect("valid mixture")
    }

    pub fn dim(&self) -> usize {
        self.components[0].len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Mean of the first `d` parts.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            let total: f64 = c.iter().sum();
            for (o, a) in out.iter_mut().zip(c) {
                *o += w * a / total;
            }
        }
        out
    }

    /// Density at `s`; zero (or infinity) on the boundary as the exponents dictate.
    pub fn pdf(&self, s: &Composition) -> Result<f64> {
        self.check_dim(s)?;
        let parts = s.parts();
        let mut total = 0.0;
        for ((w, c), ln) in self.weights.iter().zip(&self.components).zip(&self.log_norms) {
            let mut log = *ln;
            for (a, x) in c.iter().zip(&parts) {
                if *a != 1.0 {
                    log += (a - 1.0) * x.ln();
                }
            }
            total += w * log.exp();
        }
        Ok(total)
    }

    fn check_dim(&self, s: &Composition) -> Result<()> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: s.dim() });
        }
        Ok(())
    }
}

/// Density, gradient and Hessian with respect to the free coordinates `(s_1, ..., s_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfDerivatives {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major `d x d`.
    pub hess: Vec<f64>,
}

impl PdfDerivatives {
    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.grad.len() + j]
    }
}

/// Each component is `exp(L)` with `L` linear in the log-parts, so
/// `grad = g * dL` and `hess = g * (d2L + dL dL^T)`.
pub fn mixture_pdf_grad_hess(mix: &DirichletMixture, s: &Composition) -> Result<PdfDerivatives> {
    mix.check_dim(s)?;
    if !s.is_interior() {
        return Err(Error::BoundaryPoint);
    }
    let d = mix.dim();
    let parts = s.parts();
    let last = parts[d];
    let mut out = PdfDerivatives { value: 0.0, grad: vec![0.0; d], hess: vec![0.0; d * d] };
    let mut dl = vec![0.0; d];
    for ((w, c), ln) in mix.weights.iter().zip(&mix.components).zip(&mix.log_norms) {
        let log: f64 = ln + c.iter().zip(&parts).map(|(a, x)| (a - 1.0) * x.ln()).sum::<f64>();
        let g = w * log.exp();
        let tail = (c[d] - 1.0) / last;
        let tail2 = (c[d] - 1.0) / (last * last);
        for i in 0..d {
            dl[i] = (c[i] - 1.0) / parts[i] - tail;
        }
        out.value += g;
        for i in 0..d {
            out.grad[i] += g * dl[i];
            for j in 0..d {
                let mut d2 = -tail2 + dl[i] * dl[j];
                if i == j {
                    d2 -= (c[i] - 1.0) / (parts[i] * parts[i]);
                }
                out.hess[i * d + j] += g * d2;
            }
        }
    }
    Ok(out)
}

/// `phi(s) = sum_i (1 - (d+1) s_i) f_i + 1/2 sum_ij s_i (1{i=j} - s_j) f_ij`, the
/// leading bias coefficient: `E f_b(s) - f(s) = b phi(s) + o(b)`.
pub fn phi(mix: &DirichletMixture, s: &Composition) -> Result<f64> {
    Ok(phi_from_derivatives(s, &mixture_pdf_grad_hess(mix, s)?))
}

pub fn phi_from_derivatives(s: &Composition, der: &PdfDerivatives) -> f64 {
    let d = s.dim();
    let x = s.coords();
    let mut out = 0.0;
    for i in 0..d {
        out += (1.0 - (d as f64 + 1.0) * x[i]) * der.grad[i];
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            out += 0.5 * x[i] * (delta - x[j]) * der.hess_at(i, j);
        }
    }
    out
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

impl McEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, se: (var / n).sqrt() }
    }
}

/// `zeta(s) = E[(1 - pi(X)) / pi(X) | Y = s]` with `X | Y = s ~ N(rho s, (1 - rho^2) I)`.
pub fn zeta_mc(model: &SimModel, s: &Composition, n_mc: usize, seed: u64) -> McEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = model.rho();
    let scale = (1.0 - rho * rho).sqrt();
    let mut x = vec![0.0; s.dim()];
    let draws: Vec<f64> = (0..n_mc.max(1))
        .map(|_| {
            for (xi, si) in x.iter_mut().zip(s.coords()) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi = rho * si + scale * z;
            }
            let p = model.propensity(&x);
            (1.0 - p) / p
        })
        .collect();
    McEstimate::from_samples(&draws)
}

/// Theoretical quantities at one interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryPoint {
    pub s: Composition,
    pub f: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub phi: f64,
    pub psi: f64,
    pub zeta: f64,
}

impl TheoryPoint {
    /// `zeta` is supplied by the caller (see [`zeta_mc`]).
    pub fn new(mix: &DirichletMixture, s: &Composition, zeta: f64) -> Result<Self> {
        let der = mixture_pdf_grad_hess(mix, s)?;
        Ok(Self {
            phi: phi_from_derivatives(s, &der),
            psi: psi(s)?,
            f: der.value,
            grad: der.grad,
            hess: der.hess,
            s: s.clone(),
            zeta,
        })
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    /// `psi f (1 + zeta)`: the variance constant.
    pub fn variance_constant(&self) -> f64 {
        self.psi * self.f * (1.0 + self.zeta)
    }

    /// `n^{-2/(d+4)} [(d/4) psi f (1 + zeta) / phi^2]^{2/(d+4)}`.
    pub fn b_opt(&self, n: usize) -> Result<f64> {
        b_opt_from_parts(self.variance_constant(), self.phi, n, self.dim())
    }

    /// `(n^{-1} b^{-d/2} psi f (1 + zeta), b^2 phi^2)`.
    pub fn mse_leading(&self, n: usize, b: f64) -> Result<(f64, f64)> {
        mse_leading_from_parts(self.variance_constant(), self.phi, n, b, self.dim())
    }

    /// `sqrt(n b^{d/2}) (estimate - f - b phi) / sqrt(psi f (1 + zeta))`.
    pub fn standardize(&self, estimate: f64, n: usize, b: f64) -> f64 {
        let d = self.dim() as f64;
        let scale = (n as f64 * b.powf(d / 2.0) / self.variance_constant()).sqrt();
        scale * (estimate - self.f - b * self.phi)
    }
}

/// Optimal bandwidth from the variance constant `v = psi f (1 + zeta)` and `phi`.
pub fn b_opt_from_parts(v: f64, phi: f64, n: usize, d: usize) -> Result<f64> {
    if phi == 0.0 || !phi.is_finite() {
        return Err(Error::ZeroPhi);
    }
    if v.is_nan() || v <= 0.0 || n == 0 {
        return Err(Error::InvalidArgument(format!("variance constant {v} and n = {n} must be positive")));
    }
    let d = d as f64;
    let rate = 2.0 / (d + 4.0);
    Ok((n as f64).powf(-rate) * ((d / 4.0) * v / (phi * phi)).powf(rate))
}

pub fn mse_leading_from_parts(v: f64, phi: f64, n: usize, b: f64, d: usize) -> Result<(f64, f64)> {
    if b.is_nan() || b <= 0.0 {
        return Err(Error::InvalidBandwidth(b));
    }
    let variance = v / (n as f64 * b.powf(d as f64 / 2.0));
    Ok((variance, b * b * phi * phi))
}

#[cfg(test)]
#[allow(clippy::excessive_precision, clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::Rng;

    fn comp(c: &[f64]) -> Composition {
        Composition::new(c, 1e-12).unwrap()
    }

    fn fd_derivatives(mix: &DirichletMixture, x: [f64; 2], hg: f64, hh: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let f = |a: f64, b: f64| mix.pdf(&comp(&[a, b])).unwrap();
        let g = [
            (f(x[0] + hg, x[1]) - f(x[0] - hg, x[1])) / (2.0 * hg),
            (f(x[0], x[1] + hg) - f(x[0], x[1] - hg)) / (2.0 * hg),
        ];
        let c = f(x[0], x[1]);
        let h00 = (f(x[0] + hh, x[1]) - 2.0 * c + f(x[0] - hh, x[1])) / (hh * hh);
        let h11 = (f(x[0], x[1] + hh) - 2.0 * c + f(x[0], x[1] - hh)) / (hh * hh);
        let h01 = (f(x[0] + hh, x[1] + hh) - f(x[0] + hh, x[1] - hh) - f(x[0] - hh, x[1] + hh)
            + f(x[0] - hh, x[1] - hh))
            / (4.0 * hh * hh);
        (g, [[h00, h01], [h01, h11]])
    }

    fn random_interior(rng: &mut ChaCha8Rng) -> [f64; 2] {
        loop {
            let a: f64 = rng.random_range(0.05..0.9);
            let b: f64 = rng.random_range(0.05..0.9);
            if a + b < 0.95 {
                return [a, b];
            }
        }
    }

    #[test]
    fn mixture_validation() {
        assert!(DirichletMixture::new(vec![0.5, 0.4], vec![vec![1.0; 3], vec![2.0; 3]]).is_err());
        assert!(DirichletMixture::new(vec![1.0], vec![vec![1.0, 0.0, 1.0]]).is_err());
        assert!(DirichletMixture::new(vec![0.5, 0.5], vec![vec![1.0; 3], vec![2.0; 4]]).is_err());
        let m = DirichletMixture::model_i().mean();
        assert!((m[0] - 0.3222222222222222).abs() < 1e-15 && (m[1] - 0.29743589743589743).abs() < 1e-15);
    }

    #[test]
    fn uniform_density_is_flat() {
        let der = mixture_pdf_grad_hess(&DirichletMixture::uniform(2), &comp(&[0.2, 0.5])).unwrap();
        assert!((der.value - 2.0).abs() < 1e-15);
        assert!(der.grad.iter().chain(&der.hess).all(|v| *v == 0.0));
        assert_eq!(phi(&DirichletMixture::uniform(2), &comp(&[0.1, 0.3])).unwrap(), 0.0);
    }

    #[test]
    fn model_i_barycenter_value() {
        // 0.4 * Dir(1.3,1.6,1) + 0.6 * Dir(1.7,1.2,2.5) at (1/3,1/3,1/3), via mpmath
        let f = DirichletMixture::model_i().pdf(&Composition::barycenter(2)).unwrap();
        assert!((f - 2.711006869541088).abs() < 1e-12, "{f}");
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mix in [DirichletMixture::model_i(), DirichletMixture::model_ii()] {
            for _ in 0..100 {
                let x = random_interior(&mut rng);
                let s = comp(&x);
                let der = mixture_pdf_grad_hess(&mix, &s).unwrap();
                let (g, _) = fd_derivatives(&mix, x, 1e-5, 1e-4);
                let (_, h) = fd_derivatives(&mix, x, 1e-5, 1e-4);
                for i in 0..2 {
                    let scale = der.grad[i].abs().max(1.0);
                    assert!((der.grad[i] - g[i]).abs() < 1e-6 * scale, "{x:?} grad {i}: {} vs {}", der.grad[i], g[i]);
                    for j in 0..2 {
                        let scale = der.hess_at(i, j).abs().max(1.0);
                        assert!((der.hess_at(i, j) - h[i][j]).abs() < 1e-4 * scale);
                    }
                }
                assert!((der.hess_at(0, 1) - der.hess_at(1, 0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phi_matches_high_precision_derivatives() {
        // 40-digit mpmath differentiation of the mixture densities
        let cases = [
            (DirichletMixture::model_i(), [0.02, 0.3], 19.97644135333514754),
            (DirichletMixture::model_i(), [0.375, 0.6], 1.0077994580063353054),
            (DirichletMixture::model_i(), [1.0 / 3.0, 1.0 / 3.0], -2.5371646406477317883),
            (DirichletMixture::model_i(), [0.4, 0.3], -1.7717124240614923649),
            (DirichletMixture::model_ii(), [0.02, 0.3], -1.09238016),
            (DirichletMixture::model_ii(), [0.375, 0.6], 13.0966875),
            (DirichletMixture::model_ii(), [1.0 / 3.0, 1.0 / 3.0], 16.0 / 9.0),
            (DirichletMixture::model_ii(), [0.4, 0.3], 1.6032),
        ];
        for (mix, x, expected) in cases {
            let got = phi(&mix, &comp(&x)).unwrap();
            assert!((got - expected).abs() < 1e-11 * expected.abs().max(1.0), "{x:?}: {got} vs {expected}");
        }
    }

    #[test]
    fn phi_at_barycenter_is_pure_hessian_term() {
        let mix = DirichletMixture::model_i();
        let s = Composition::barycenter(2);
        let der = mixture_pdf_grad_hess(&mix, &s).unwrap();
        let t = 1.0 / 3.0;
        let hess_only = 0.5 * (t * (1.0 - t) * (der.hess_at(0, 0) + der.hess_at(1, 1)) - 2.0 * t * t * der.hess_at(0, 1));
        assert!((phi(&mix, &s).unwrap() - hess_only).abs() < 1e-12);
    }

    #[test]
    fn b_opt_examples() {
        // (d/4) v / phi^2 = 1/2 with v = phi = 1
        let b = b_opt_from_parts(1.0, 1.0, 100, 2).unwrap();
        assert!((b - 0.17099759466766973).abs() < 1e-15, "{b}");
        assert!((b - 200f64.cbrt().recip()).abs() < 1e-15);
        let b8 = b_opt_from_parts(1.0, 1.0, 800, 2).unwrap();
        assert!((b8 / b - 0.5).abs() < 1e-14);
        assert_eq!(b_opt_from_parts(1.0, 0.0, 100, 2), Err(Error::ZeroPhi));
    }

    #[test]
    fn mse_terms_balance_at_optimum() {
        for d in [1usize, 2, 3] {
            let (v, ph, n) = (0.7, -2.3, 500);
            let b = b_opt_from_parts(v, ph, n, d).unwrap();
            let (var, bias2) = mse_leading_from_parts(v, ph, n, b, d).unwrap();
            assert!((var - 4.0 / d as f64 * bias2).abs() < 1e-12 * var);
            let (var2, bias2b) = mse_leading_from_parts(v, ph, 2 * n, b, d).unwrap();
            assert!((var2 - var / 2.0).abs() < 1e-15 && bias2b == bias2);
        }
        let uni = TheoryPoint::new(&DirichletMixture::uniform(2), &comp(&[0.2, 0.3]), 0.0).unwrap();
        assert_eq!(uni.mse_leading(100, 0.1).unwrap().1, 0.0);
    }

    #[test]
    fn zeta_examples() {
        let mix = DirichletMixture::model_i();
        let constant = SimModel::new(mix.clone(), 0.5, (0.8f64 / 0.2).ln(), vec![0.0, 0.0]).unwrap();
        let z = zeta_mc(&constant, &comp(&[0.2, 0.3]), 1000, 1);
        assert!((z.mean - 0.25).abs() < 1e-12 && z.se < 1e-12);

        let always = SimModel::new(mix.clone(), 0.5, 40.0, vec![0.0, 0.0]).unwrap();
        assert!(zeta_mc(&always, &Composition::barycenter(2), 100, 1).mean < 1e-15);

        let indep = SimModel::new(mix, 0.0, 1.0, vec![1.0, 1.0]).unwrap();
        let a = zeta_mc(&indep, &comp(&[0.05, 0.05]), 40_000, 2);
        let b = zeta_mc(&indep, &comp(&[0.8, 0.15]), 40_000, 3);
        assert!((a.mean - b.mean).abs() < 3.0 * (a.se.hypot(b.se)), "{a:?} {b:?}");
    }

    #[test]
    fn boundary_points_are_rejected() {
        let mix = DirichletMixture::model_ii();
        assert_eq!(phi(&mix, &comp(&[0.5, 0.5])), Err(Error::BoundaryPoint));
        assert!(TheoryPoint::new(&mix, &comp(&[0.0, 0.4]), 0.0).is_err());
    }
}
