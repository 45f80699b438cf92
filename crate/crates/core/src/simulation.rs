//! Data generation under a logistic MAR mechanism, Monte Carlo studies of the
//! estimators, integrated squared error, and grid mode finding.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::asymptotics::DirichletMixture;
use crate::bandwidth::{argmin_first, logratio_candidates, logratio_lscv_profile, select_bandwidth, LscvConfig};
use crate::data::{Covariates, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{complete_case_kde, full_kde, ipw_kde, ipw_logratio_kde, DensityEstimate, EstimatorKind};
use crate::propensity::{fit_propensity, silverman_bandwidth, DEFAULT_FLOOR};
use crate::simplex::{build_interior_grid, Composition, SimplexGrid};

/// The two simulation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    I,
    II,
}

impl ModelId {
    pub fn mixture(self) -> DirichletMixture {
        match self {
            ModelId::I => DirichletMixture::model_i(),
            ModelId::II => DirichletMixture::model_ii(),
        }
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(ModelId::I),
            "II" | "ii" | "2" => Ok(ModelId::II),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?}; expected I or II"))),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelId::I => "I",
            ModelId::II => "II",
        })
    }
}

/// Response law, covariate coupling `X = rho Y + sqrt(1 - rho^2) X*`, and
/// observation probability `pi(x) = 1 / (1 + exp(-(beta0 + beta1' x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    mixture: DirichletMixture,
    rho: f64,
    beta0: f64,
    beta1: Vec<f64>,
    target_missing_rate: Option<f64>,
}

impl SimModel {
    pub fn new(mixture: DirichletMixture, rho: f64, beta0: f64, beta1: Vec<f64>) -> Result<Self> {
        if !(rho.is_finite() && rho * rho < 1.0) {
            return Err(Error::InvalidParams(format!("rho = {rho} must lie in (-1, 1)")));
        }
        if !beta0.is_finite() || beta1.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParams("logistic coefficients must be finite".into()));
        }
        if beta1.len() != mixture.dim() {
            return Err(Error::DimensionMismatch { expected: mixture.dim(), actual: beta1.len() });
        }
        Ok(Self { mixture, rho, beta0, beta1, target_missing_rate: None })
    }

    /// Model with `beta0` calibrated to a target marginal missing rate.
    pub fn calibrated(
        mixture: DirichletMixture,
        rho: f64,
        beta1: Vec<f64>,
        target_rate: f64,
        n_mc: usize,
        seed: u64,
    ) -> Result<Self> {
        let beta0 = calibrate_beta0(&mixture, rho, &beta1, target_rate, n_mc, seed)?;
        let mut model = Self::new(mixture, rho, beta0, beta1)?;
        model.target_missing_rate = Some(target_rate);
        Ok(model)
    }

    pub fn mixture(&self) -> &DirichletMixture {
        &self.mixture
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn beta1(&self) -> &[f64] {
        &self.beta1
    }

    pub fn target_missing_rate(&self) -> Option<f64> {
        self.target_missing_rate
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        let eta = self.beta0 + self.beta1.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        logistic(eta)
    }
}

fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Draws from a Dirichlet mixture by normalizing independent Gamma variates.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    cumulative: Vec<f64>,
    gammas: Vec<Vec<Gamma<f64>>>,
    dim: usize,
}

impl MixtureSampler {
    pub fn new(mix: &DirichletMixture) -> Self {
        let mut acc = 0.0;
        let cumulative = mix
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let gammas = mix
            .components()
            .iter()
            .map(|c| c.iter().map(|&a| Gamma::new(a, 1.0).expect("positive shape")).collect())
            .collect();
        Self { cumulative, gammas, dim: mix.dim() }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Composition {
        let u: f64 = rng.random();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1);
        let draws: Vec<f64> = self.gammas[k].iter().map(|g| g.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        let coords: Vec<f64> = draws[..self.dim].iter().map(|g| g / total).collect();
        Composition::from_coords_unchecked(coords)
    }
}

/// `n` i.i.d. responses from `mix`.
pub fn sample_full<R: Rng + ?Sized>(mix: &DirichletMixture, n: usize, rng: &mut R) -> Vec<Composition> {
    let sampler = MixtureSampler::new(mix);
    (0..n).map(|_| sampler.sample(rng)).collect()
}

/// A simulated sample together with its unobservable parts.
#[derive(Debug, Clone)]
pub struct Sample {
    pub dataset: Dataset,
    /// Every response, observed or not.
    pub complete: Vec<Composition>,
    /// True observation probabilities `pi(X_i)`.
    pub true_pi: Vec<f64>,
}

impl Sample {
    pub fn missing_rate(&self) -> f64 {
        1.0 - self.dataset.observed_count() as f64 / self.dataset.n() as f64
    }
}

/// Generates `n` units: responses, coupled covariates, and MAR indicators.
pub fn sample_with_rng<R: Rng + ?Sized>(model: &SimModel, n: usize, rng: &mut R) -> Result<Sample> {
    let sampler = MixtureSampler::new(&model.mixture);
    let d = model.mixture.dim();
    let scale = (1.0 - model.rho * model.rho).sqrt();
    let mut xs = Vec::with_capacity(n * d);
    let mut complete = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    let mut true_pi = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    for _ in 0..n {
        let y = sampler.sample(rng);
        for (xi, yi) in x.iter_mut().zip(y.coords()) {
            let z: f64 = StandardNormal.sample(rng);
            *xi = model.rho * yi + scale * z;
        }
        let p = model.propensity(&x);
        let observed = rng.random::<f64>() < p;
        xs.extend_from_slice(&x);
        responses.push(observed.then(|| y.clone()));
        complete.push(y);
        true_pi.push(p);
    }
    let dataset = Dataset::new(Covariates::new(xs, d)?, responses)?;
    Ok(Sample { dataset, complete, true_pi })
}

pub fn sample_dataset(model: &SimModel, n: usize, seed: u64) -> Result<Sample> {
    sample_with_rng(model, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `beta0` with Monte Carlo `E[1 - pi(X)]` equal to `target_rate`, by bisection over
/// one fixed set of draws (the rate is strictly decreasing in `beta0`).
pub fn calibrate_beta0(
    mix: &DirichletMixture,
    rho: f64,
    beta1: &[f64],
    target_rate: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.0..=0.95).contains(&target_rate) {
        return Err(Error::InvalidArgument(format!("target missing rate {target_rate} outside [0, 0.95]")));
    }
    if n_mc == 0 {
        return Err(Error::InvalidArgument("calibration needs at least one draw".into()));
    }
    let probe = SimModel::new(mix.clone(), rho, 0.0, beta1.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = MixtureSampler::new(mix);
    let scale = (1.0 - rho * rho).sqrt();
    let linear: Vec<f64> = (0..n_mc)
        .map(|_| {
            let y = sampler.sample(&mut rng);
            y.coords()
                .iter()
                .zip(probe.beta1())
                .map(|(yi, b)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b * (rho * yi + scale * z)
                })
                .sum()
        })
        .collect();
    let rate = |b0: f64| linear.iter().map(|u| 1.0 - logistic(b0 + u)).sum::<f64>() / n_mc as f64;

    const MAX_ITER: usize = 200;
    let (mut lo, mut hi) = (-60.0, 60.0);
    let mut iterations = 0;
    while hi - lo > 1e-10 && iterations < MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let beta0 = 0.5 * (lo + hi);
    if (rate(beta0) - target_rate).abs() > 0.002 {
        return Err(Error::NoConvergence { iterations });
    }
    Ok(beta0)
}

/// `volume * mean_m (f_hat(s_m) - f(s_m))^2` over the grid.
pub fn ise(estimate: &DensityEstimate, truth: &DirichletMixture, grid: &SimplexGrid) -> Result<f64> {
    let values = truth_on_grid(truth, grid)?;
    ise_against(estimate, &values, grid)
}

/// True density at every grid point.
pub fn truth_on_grid(truth: &DirichletMixture, grid: &SimplexGrid) -> Result<Vec<f64>> {
    grid.points().par_iter().map(|s| truth.pdf(s)).collect()
}

/// ISE against precomputed true values.
pub fn ise_against(estimate: &DensityEstimate, truth_values: &[f64], grid: &SimplexGrid) -> Result<f64> {
    let est = estimate.evaluate_grid(grid)?;
    if est.len() != truth_values.len() {
        return Err(Error::LengthMismatch { expected: est.len(), actual: truth_values.len() });
    }
    let sq: Vec<f64> = est.iter().zip(truth_values).map(|(a, b)| (a - b) * (a - b)).collect();
    grid.quadrature_mean(&sq)
}

/// Grid point of largest value; the first (lexicographically smallest) wins ties.
pub fn mode_on_grid(estimate: &DensityEstimate, grid: &SimplexGrid) -> Result<(Composition, f64)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let values = estimate.evaluate_grid(grid)?;
    let (idx, val) = argmax_first(&values).ok_or(Error::EmptyGrid)?;
    Ok((grid.points()[idx].clone(), val))
}

/// Index and value of the first maximum, ignoring NaN.
pub fn argmax_first(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_nan() && best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Outcome of one estimator on one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationResult {
    pub ise: f64,
    /// Selected bandwidth: `b` for Dirichlet kernels, the covariance scale `h` for
    /// log-ratio kernels.
    pub b_star: f64,
    pub achieved_missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub n: usize,
    pub missing_rate: f64,
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub outcome: std::result::Result<ReplicationResult, Error>,
}

/// Aggregate over the successful replications of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub n: usize,
    pub missing_rate: f64,
    pub estimator: EstimatorKind,
    pub rep_count: usize,
    pub failed_reps: usize,
    pub mean_ise: f64,
    pub median_ise: f64,
    pub sd_ise: f64,
    pub iqr_ise: f64,
    pub mean_b_star: f64,
    pub mean_missing_rate: f64,
}

/// Sample quantile with linear interpolation between order statistics (type 7).
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

impl McSummary {
    /// Summaries are computed from sorted values, so they do not depend on the
    /// order of `results`.
    pub fn from_results(
        n: usize,
        missing_rate: f64,
        estimator: EstimatorKind,
        results: &[ReplicationResult],
        failed_reps: usize,
    ) -> Self {
        let mut ises: Vec<f64> = results.iter().map(|r| r.ise).collect();
        ises.sort_by(f64::total_cmp);
        let k = ises.len();
        let mean_ise = ises.iter().sum::<f64>() / k as f64;
        let sd_ise = if k < 2 {
            0.0
        } else {
            let mut dev: Vec<f64> = ises.iter().map(|v| (v - mean_ise).powi(2)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (k as f64 - 1.0)).sqrt()
        };
        let b: Vec<f64> = results.iter().map(|r| r.b_star).collect();
        let m: Vec<f64> = results.iter().map(|r| r.achieved_missing_rate).collect();
        Self {
            n,
            missing_rate,
            estimator,
            rep_count: k,
            failed_reps,
            mean_ise,
            median_ise: quantile_type7(&ises, 0.5),
            sd_ise,
            iqr_ise: quantile_type7(&ises, 0.75) - quantile_type7(&ises, 0.25),
            mean_b_star: sorted_mean(&b),
            mean_missing_rate: sorted_mean(&m),
        }
    }
}

/// Settings of a Monte Carlo study over a grid of sample sizes and missing rates.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub mixture: DirichletMixture,
    pub rho: f64,
    pub beta1: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub missing_rates: Vec<f64>,
    pub reps: usize,
    pub estimators: Vec<EstimatorKind>,
    pub lscv: LscvConfig,
    pub ise_grid: SimplexGrid,
    pub pi_floor: f64,
    pub calibration_draws: usize,
    pub seed: u64,
}

impl StudyConfig {
    /// `rho = 0.5`, `beta1 = (1, 1)`, 200 replications of the IPW Dirichlet KDE,
    /// default LSCV candidates and a `res = 300` ISE grid.
    pub fn defaults(model: ModelId) -> Result<Self> {
        Ok(Self {
            mixture: model.mixture(),
            rho: 0.5,
            beta1: vec![1.0, 1.0],
            sample_sizes: vec![100, 200, 400, 800],
            missing_rates: vec![0.05, 0.10, 0.20, 0.40],
            reps: 200,
            estimators: vec![EstimatorKind::IpwDirichlet],
            lscv: LscvConfig::default_for_dim(2)?,
            ise_grid: build_interior_grid(2, 300, 0.01)?,
            pi_floor: DEFAULT_FLOOR,
            calibration_draws: 500_000,
            seed: 20_240_601,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    /// Cells ordered by sample size, then missing rate, then estimator.
    pub summaries: Vec<McSummary>,
    pub records: Vec<RepRecord>,
    /// Calibrated `beta0` for each missing rate, in config order.
    pub beta0: Vec<f64>,
}

// SplitMix64 finalizer, used to derive independent seeds.
fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `beta0` calibration draws for one missing rate.
pub fn calibration_seed(seed: u64, rate: f64) -> u64 {
    mix_seed(seed ^ 0xCA11_B8A7, rate.to_bits())
}

/// Generator of replication `rep`: stream `rep` of the master seed.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Restricts a dataset to its observed units.
pub fn observed_subset(data: &Dataset) -> Result<Dataset> {
    let p = data.p();
    let mut xs = Vec::with_capacity(data.observed_count() * p);
    let mut ys = Vec::with_capacity(data.observed_count());
    for (i, y) in data.observed() {
        xs.extend_from_slice(data.covariates().row(i));
        ys.push(y.clone());
    }
    Dataset::complete(Covariates::new(xs, p)?, ys)
}

/// Fits `kind` on `sample` with an LSCV-selected bandwidth.
///
/// `pi_hat` is used by the IPW estimators; complete-case and full-data fits use
/// unit weights on their own subsample.
pub fn fit_with_lscv(
    kind: EstimatorKind,
    sample: &Sample,
    pi_hat: &[f64],
    lscv: &LscvConfig,
) -> Result<DensityEstimate> {
    let data = &sample.dataset;
    match kind {
        EstimatorKind::Full => {
            let full = Dataset::complete(data.covariates().clone(), sample.complete.clone())?;
            let b = select_bandwidth(&full, &vec![1.0; full.n()], lscv)?;
            full_kde(&sample.complete, b)
        }
        EstimatorKind::CompleteCase => {
            let obs = observed_subset(data)?;
            let b = select_bandwidth(&obs, &vec![1.0; obs.n()], lscv)?;
            complete_case_kde(data, b)
        }
        EstimatorKind::IpwDirichlet => {
            let b = select_bandwidth(data, pi_hat, lscv)?;
            ipw_kde(data, pi_hat, b)
        }
        EstimatorKind::IpwAlr | EstimatorKind::IpwIlr => {
            let map = kind.log_ratio().expect("log-ratio kind");
            let candidates = logratio_candidates(map, data, lscv.candidates())?;
            let profile =
                logratio_lscv_profile(map, data, pi_hat, &candidates, lscv.integral_grid(), lscv.loo_divisor())?;
            ipw_logratio_kde(map, data, pi_hat, argmin_first(&profile)?)
        }
    }
}

/// Fitted propensities: Gaussian Nadaraya-Watson with Silverman's bandwidth.
pub fn fitted_propensity(data: &Dataset, floor: f64) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(data.covariates())?;
    Ok(fit_propensity(data.covariates(), &data.indicators(), h, floor)?.into_pi_hat())
}

fn run_replication(
    cfg: &StudyConfig,
    model: &SimModel,
    n: usize,
    rep: usize,
    truth: &[f64],
) -> Vec<std::result::Result<ReplicationResult, Error>> {
    let prepared = sample_with_rng(model, n, &mut replication_rng(cfg.seed, rep)).and_then(|sample| {
        let needs_pi = cfg.estimators.iter().any(|k| matches!(k, EstimatorKind::IpwDirichlet | EstimatorKind::IpwAlr | EstimatorKind::IpwIlr));
        let pi_hat = if needs_pi { fitted_propensity(&sample.dataset, cfg.pi_floor)? } else { Vec::new() };
        Ok((sample, pi_hat))
    });
    let (sample, pi_hat) = match prepared {
        Ok(v) => v,
        Err(e) => return vec![Err(e); cfg.estimators.len()],
    };
    let achieved = sample.missing_rate();
    cfg.estimators
        .iter()
        .map(|&kind| {
            let est = fit_with_lscv(kind, &sample, &pi_hat, &cfg.lscv)?;
            Ok(ReplicationResult {
                ise: ise_against(&est, truth, &cfg.ise_grid)?,
                b_star: est.bandwidth(),
                achieved_missing_rate: achieved,
            })
        })
        .collect()
}

/// Runs every (sample size, missing rate) cell.
///
/// Replication `r` of every cell draws from stream `r` of the master seed, so cells
/// share their responses, covariates and uniforms (common random numbers), and
/// smaller samples are prefixes of larger ones. `beta0` is calibrated once per
/// missing rate, from draws that depend only on the seed and the rate.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    if cfg.reps == 0 || cfg.sample_sizes.is_empty() || cfg.missing_rates.is_empty() || cfg.estimators.is_empty() {
        return Err(Error::InvalidArgument("study needs reps, sample sizes, missing rates and estimators".into()));
    }
    if cfg.ise_grid.dim() != cfg.mixture.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.mixture.dim(), actual: cfg.ise_grid.dim() });
    }
    let truth = truth_on_grid(&cfg.mixture, &cfg.ise_grid)?;
    let models = cfg
        .missing_rates
        .iter()
        .map(|&rate| {
            SimModel::calibrated(
                cfg.mixture.clone(),
                cfg.rho,
                cfg.beta1.clone(),
                rate,
                cfg.calibration_draws,
                calibration_seed(cfg.seed, rate),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::new();
    let mut records = Vec::new();
    for &n in &cfg.sample_sizes {
        for (model, &rate) in models.iter().zip(&cfg.missing_rates) {
            let per_rep: Vec<_> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| run_replication(cfg, model, n, rep, &truth))
                .collect();
            for (e, &kind) in cfg.estimators.iter().enumerate() {
                let mut ok = Vec::with_capacity(cfg.reps);
                let mut failed = 0;
                for (rep, outcomes) in per_rep.iter().enumerate() {
                    let outcome = outcomes[e].clone();
                    match &outcome {
                        Ok(r) => ok.push(*r),
                        Err(_) => failed += 1,
                    }
                    records.push(RepRecord { n, missing_rate: rate, rep, estimator: kind, outcome });
                }
                summaries.push(McSummary::from_results(n, rate, kind, &ok, failed));
            }
        }
    }
    Ok(StudyOutput { summaries, records, beta0: models.iter().map(SimModel::beta0).collect() })
}

/// Writes `n, missing_rate, mean_ise, median_ise, sd_ise, iqr_ise, mean_b_star,
/// estimator, failed_reps`.
pub fn write_summaries<W: Write>(out: W, summaries: &[McSummary]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "missing_rate", "mean_ise", "median_ise", "sd_ise", "iqr_ise", "mean_b_star", "estimator", "failed_reps"])?;
    for s in summaries {
        w.write_record([
            s.n.to_string(),
            s.missing_rate.to_string(),
            format!("{:.6e}", s.mean_ise),
            format!("{:.6e}", s.median_ise),
            format!("{:.6e}", s.sd_ise),
            format!("{:.6e}", s.iqr_ise),
            format!("{:.6}", s.mean_b_star),
            s.estimator.name().to_string(),
            s.failed_reps.to_string(),
        ])?;
    }
    w.flush()
}

/// Writes one row per replication and estimator; failures carry their error text.
pub fn write_records<W: Write>(out: W, records: &[RepRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "missing_rate", "rep", "estimator", "ise", "b_star", "achieved_missing_rate", "error"])?;
    for r in records {
        let (ise, b, m, err) = match &r.outcome {
            Ok(v) => (format!("{:.16e}", v.ise), v.b_star.to_string(), v.achieved_missing_rate.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string()),
        };
        w.write_record([r.n.to_string(), r.missing_rate.to_string(), r.rep.to_string(), r.estimator.name().to_string(), ise, b, m, err])?;
    }
    w.flush()
}

/// Per-replication estimates at one point with a fixed bandwidth.
#[derive(Debug, Clone)]
pub struct PointwiseDraws {
    pub full: Vec<f64>,
    /// IPW with the true propensities.
    pub pseudo: Vec<f64>,
    pub complete_case: Vec<f64>,
    /// IPW with fitted propensities, when requested.
    pub feasible: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct PointwiseConfig {
    pub model: SimModel,
    pub n: usize,
    pub reps: usize,
    pub bandwidth: f64,
    pub point: Composition,
    pub feasible: bool,
    pub pi_floor: f64,
    pub seed: u64,
}

/// All estimators of a replication see the same sample (matched seeds).
pub fn pointwise_study(cfg: &PointwiseConfig) -> Result<PointwiseDraws> {
    let rows: Vec<[f64; 4]> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let sample = sample_with_rng(&cfg.model, cfg.n, &mut replication_rng(cfg.seed, rep))?;
            let data = &sample.dataset;
            let s = &cfg.point;
            let b = cfg.bandwidth;
            let full = full_kde(&sample.complete, b)?.evaluate(s)?;
            let pseudo = ipw_kde(data, &sample.true_pi, b)?.evaluate(s)?;
            let cc = complete_case_kde(data, b)?.evaluate(s)?;
            let feasible = if cfg.feasible {
                ipw_kde(data, &fitted_propensity(data, cfg.pi_floor)?, b)?.evaluate(s)?
            } else {
                f64::NAN
            };
            Ok([full, pseudo, cc, feasible])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    Ok(PointwiseDraws {
        full: col(0),
        pseudo: col(1),
        complete_case: col(2),
        feasible: cfg.feasible.then(|| col(3)),
    })
}
