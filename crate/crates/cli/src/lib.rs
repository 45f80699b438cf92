//! Command-line front end for the simplex KDE library.
//!
//! Settings come from an optional `--config` file (`key = value` lines or a JSON
//! object) and are overridden by flags. Exit codes: 0 success, 2 configuration
//! error, 3 data error, 4 numerical failure.

pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use simplex_kde::bandwidth::{argmin_first, logratio_candidates, logratio_lscv_profile};
use simplex_kde::io::{ingest_csv, write_atomic, write_grid_csv, IoError};
use simplex_kde::simulation::{observed_subset, write_records, write_summaries};
use simplex_kde::{
    build_interior_grid, complete_case_kde, fit_propensity, full_kde, ipw_kde, ipw_logratio_kde, lscv_profile,
    mode_on_grid, run_study, sample_dataset, silverman_bandwidth, Dataset, DensityEstimate, EstimatorKind,
    LscvConfig, LscvPoint, PropensityFit, SimModel, StudyConfig,
};

pub use config::{parse_b_grid, parse_config, ConfigMap, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "simplex-kde", version, about = "Dirichlet kernel density estimation with missing compositional responses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo study over sample sizes and missing rates.
    Simulate(Settings),
    /// Fit one estimator and report its bandwidth.
    Estimate(Settings),
    /// LSCV profile over the candidate grid.
    Bandwidth(Settings),
    /// Fitted density on the interior grid.
    GridEval(Settings),
    /// Grid maximizer of the fitted density.
    Mode(Settings),
    /// Fitted response propensities.
    Propensity(Settings),
}

/// Flags shared by every subcommand. Values are validated together with the
/// config file so both sources follow the same rules.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// `key = value` or JSON settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with columns x1.., y1.., delta. Without it a sample is simulated.
    #[arg(long)]
    pub input: Option<String>,
    /// Output file, written atomically; stdout when absent.
    #[arg(long)]
    pub output: Option<String>,
    /// Per-replication records of `simulate`.
    #[arg(long)]
    pub per_rep: Option<String>,
    /// I or II.
    #[arg(long)]
    pub model: Option<String>,
    /// Sample size, or a comma list for `simulate`.
    #[arg(long)]
    pub n: Option<String>,
    /// Target missing rate, or a comma list for `simulate`.
    #[arg(long)]
    pub missing_rate: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Resolution of the evaluation grid.
    #[arg(long)]
    pub res: Option<String>,
    /// Distance of the grid from the simplex faces.
    #[arg(long)]
    pub eps: Option<String>,
    /// Resolution of the LSCV integration grid.
    #[arg(long)]
    pub lscv_res: Option<String>,
    /// Candidate bandwidths as lo:hi:step.
    #[arg(long)]
    pub b_grid: Option<String>,
    /// Fixed bandwidth; skips LSCV.
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub pi_floor: Option<String>,
    /// Propensity smoothing bandwidth; Silverman's rule when absent.
    #[arg(long)]
    pub propensity_h: Option<String>,
    #[arg(long)]
    pub rho: Option<String>,
    /// Two comma-separated slopes.
    #[arg(long, allow_hyphen_values = true)]
    pub beta1: Option<String>,
    /// dirichlet, alr, ilr, cc or full; a comma list for `simulate`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// implicit (y1..yd) or full (y1..y(d+1)).
    #[arg(long)]
    pub layout: Option<String>,
    /// n-1 or n.
    #[arg(long)]
    pub loo_divisor: Option<String>,
    #[arg(long)]
    pub calibration_draws: Option<String>,
}

impl Settings {
    fn flags(&self) -> [(&'static str, &Option<String>); 21] {
        [
            ("input", &self.input),
            ("output", &self.output),
            ("per_rep", &self.per_rep),
            ("model", &self.model),
            ("n", &self.n),
            ("missing_rate", &self.missing_rate),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("res", &self.res),
            ("eps", &self.eps),
            ("lscv_res", &self.lscv_res),
            ("b_grid", &self.b_grid),
            ("b", &self.b),
            ("pi_floor", &self.pi_floor),
            ("propensity_h", &self.propensity_h),
            ("rho", &self.rho),
            ("beta1", &self.beta1),
            ("estimator", &self.estimator),
            ("layout", &self.layout),
            ("loo_divisor", &self.loo_divisor),
            ("calibration_draws", &self.calibration_draws),
        ]
    }

    /// Config file entries overlaid with the flags that were given.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => ConfigMap::new(),
        };
        for (key, value) in self.flags() {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        RunConfig::from_map(&map)
    }
}

impl Command {
    pub fn settings(&self) -> &Settings {
        match self {
            Command::Simulate(s)
            | Command::Estimate(s)
            | Command::Bandwidth(s)
            | Command::GridEval(s)
            | Command::Mode(s)
            | Command::Propensity(s) => s,
        }
    }
}

/// Runs a parsed command. Results go to `out` unless an output file is set;
/// the effective configuration and diagnostics go to `log`.
pub fn run(cli: &Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.command.settings().resolve()?;
    writeln!(log, "# effective configuration")?;
    write!(log, "{}", cfg.describe())?;
    match &cli.command {
        Command::Simulate(_) => simulate(&cfg, out, log),
        Command::Estimate(_) => estimate(&cfg, out, log),
        Command::Bandwidth(_) => bandwidth(&cfg, out, log),
        Command::GridEval(_) => grid_eval(&cfg, out, log),
        Command::Mode(_) => mode(&cfg, out, log),
        Command::Propensity(_) => propensity(&cfg, out, log),
    }
}

fn emit<F>(path: Option<&Path>, out: &mut dyn Write, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), IoError>,
{
    match path {
        Some(p) => write_atomic(p, write)?,
        None => write(out)?,
    }
    Ok(())
}

/// Reads `--input`, or simulates one sample of the configured model.
pub fn load_data(cfg: &RunConfig, log: &mut dyn Write) -> Result<Dataset, CliError> {
    if let Some(path) = &cfg.input {
        let report = ingest_csv(path, cfg.layout).map_err(|e| match e {
            IoError::Io(io) => CliError::Data(format!("cannot read {}: {io}", path.display())),
            other => other.into(),
        })?;
        for w in report.warnings.iter().take(20) {
            writeln!(log, "warning: {w}")?;
        }
        if report.warnings.len() > 20 {
            writeln!(log, "warning: {} more rows with warnings", report.warnings.len() - 20)?;
        }
        return Ok(report.dataset);
    }
    let rate = cfg.missing_rate[0];
    let model = SimModel::calibrated(
        cfg.model.mixture(),
        cfg.rho,
        cfg.beta1.clone(),
        rate,
        cfg.calibration_draws,
        simplex_kde::simulation::calibration_seed(cfg.seed, rate),
    )?;
    let sample = sample_dataset(&model, cfg.n[0], cfg.seed)?;
    writeln!(
        log,
        "simulated model {} sample: n = {}, beta0 = {:.6}, missing rate {:.4}",
        cfg.model,
        cfg.n[0],
        model.beta0(),
        sample.missing_rate()
    )?;
    Ok(sample.dataset)
}

pub fn fit_propensity_for(cfg: &RunConfig, data: &Dataset) -> Result<PropensityFit, CliError> {
    let h = match cfg.propensity_h {
        Some(h) => h,
        None => silverman_bandwidth(data.covariates())?,
    };
    Ok(fit_propensity(data.covariates(), &data.indicators(), h, cfg.pi_floor)?)
}

/// A fitted estimator with the LSCV profile that chose its bandwidth.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub estimate: DensityEstimate,
    /// Empty when the bandwidth was fixed.
    pub profile: Vec<LscvPoint>,
    pub propensity: Option<PropensityFit>,
}

fn lscv_config(cfg: &RunConfig, d: usize) -> Result<LscvConfig, CliError> {
    let grid = build_interior_grid(d, cfg.lscv_res, cfg.eps)?;
    Ok(LscvConfig::new(cfg.b_grid.clone(), grid)?.with_loo_divisor(cfg.loo_divisor))
}

/// Fits the first configured estimator. For the log-ratio estimators `b` and the
/// candidate grid are mapped to covariance bandwidths `h = (3 sigma_T b)^2`.
pub fn fit(cfg: &RunConfig, data: &Dataset) -> Result<Fitted, CliError> {
    let kind = cfg.primary_estimator();
    let lscv = lscv_config(cfg, data.dim())?;
    let choose = |profile: &[LscvPoint]| -> Result<f64, CliError> { Ok(argmin_first(profile)?) };
    let mut profile = Vec::new();
    let mut propensity = None;
    let estimate = match kind {
        EstimatorKind::Full => {
            if data.observed_count() != data.n() {
                return Err(CliError::Data(format!(
                    "the full-data estimator needs every response; {} of {} are missing",
                    data.n() - data.observed_count(),
                    data.n()
                )));
            }
            let ys: Vec<_> = data.observed().map(|(_, y)| y.clone()).collect();
            let b = match cfg.b {
                Some(b) => b,
                None => {
                    profile = lscv_profile(data, &vec![1.0; data.n()], &lscv)?;
                    choose(&profile)?
                }
            };
            full_kde(&ys, b)?
        }
        EstimatorKind::CompleteCase => {
            let b = match cfg.b {
                Some(b) => b,
                None => {
                    let obs = observed_subset(data)?;
                    profile = lscv_profile(&obs, &vec![1.0; obs.n()], &lscv)?;
                    choose(&profile)?
                }
            };
            complete_case_kde(data, b)?
        }
        EstimatorKind::IpwDirichlet => {
            let pf = fit_propensity_for(cfg, data)?;
            let b = match cfg.b {
                Some(b) => b,
                None => {
                    profile = lscv_profile(data, pf.pi_hat(), &lscv)?;
                    choose(&profile)?
                }
            };
            let est = ipw_kde(data, pf.pi_hat(), b)?;
            propensity = Some(pf);
            est
        }
        EstimatorKind::IpwAlr | EstimatorKind::IpwIlr => {
            let map = kind.log_ratio().expect("log-ratio estimator");
            let pf = fit_propensity_for(cfg, data)?;
            let h = match cfg.b {
                Some(b) => logratio_candidates(map, data, &[b])?[0],
                None => {
                    let cands = logratio_candidates(map, data, &cfg.b_grid)?;
                    profile = logratio_lscv_profile(map, data, pf.pi_hat(), &cands, lscv.integral_grid(), cfg.loo_divisor)?;
                    choose(&profile)?
                }
            };
            let est = ipw_logratio_kde(map, data, pf.pi_hat(), h)?;
            propensity = Some(pf);
            est
        }
    };
    Ok(Fitted { estimate, profile, propensity })
}

fn simulate(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let study = StudyConfig {
        mixture: cfg.model.mixture(),
        rho: cfg.rho,
        beta1: cfg.beta1.clone(),
        sample_sizes: cfg.n.clone(),
        missing_rates: cfg.missing_rate.clone(),
        reps: cfg.reps,
        estimators: cfg.estimator.clone(),
        lscv: lscv_config(cfg, 2)?,
        ise_grid: build_interior_grid(2, cfg.res, cfg.eps)?,
        pi_floor: cfg.pi_floor,
        calibration_draws: cfg.calibration_draws,
        seed: cfg.seed,
    };
    let result = run_study(&study)?;
    for (rate, beta0) in cfg.missing_rate.iter().zip(&result.beta0) {
        writeln!(log, "missing rate {rate}: beta0 = {beta0:.6}")?;
    }
    let failed: usize = result.summaries.iter().map(|s| s.failed_reps).sum();
    if failed > 0 {
        writeln!(log, "warning: {failed} replications failed; see the per-replication records")?;
    }
    if let Some(path) = &cfg.per_rep {
        write_atomic(path, |w| Ok(write_records(w, &result.records)?))?;
    }
    emit(cfg.output.as_deref(), out, |w| Ok(write_summaries(w, &result.summaries)?))
}

fn estimate(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(cfg, log)?;
    let fitted = fit(cfg, &data)?;
    let est = &fitted.estimate;
    writeln!(out, "estimator = {}", est.kind())?;
    writeln!(out, "n = {}", data.n())?;
    writeln!(out, "observed = {}", data.observed_count())?;
    writeln!(out, "bandwidth = {}", est.bandwidth())?;
    if let Some(pf) = &fitted.propensity {
        writeln!(out, "propensity_h = {}", pf.bandwidth_h())?;
        let floored = pf.pi_hat().iter().filter(|&&p| p <= pf.floor()).count();
        writeln!(out, "propensity_floored = {floored}")?;
    }
    if let Some(best) = fitted.profile.iter().find(|p| p.bandwidth == est.bandwidth()) {
        writeln!(out, "lscv_score = {}", best.score)?;
    }
    if let Some(path) = &cfg.output {
        let grid = build_interior_grid(data.dim(), cfg.res, cfg.eps)?;
        let values = est.evaluate_grid(&grid)?;
        write_atomic(path, |w| write_grid_csv(w, &grid, &values))?;
    }
    Ok(())
}

fn bandwidth(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    if cfg.b.is_some() {
        return Err(CliError::Config("bandwidth profiles the candidate grid; drop --b".into()));
    }
    let data = load_data(cfg, log)?;
    let fitted = fit(cfg, &data)?;
    writeln!(log, "selected bandwidth = {}", fitted.estimate.bandwidth())?;
    emit(cfg.output.as_deref(), out, |w| {
        writeln!(w, "bandwidth,score,integral,cross_term")?;
        for p in &fitted.profile {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e}", p.bandwidth, p.score, p.integral, p.cross_term)?;
        }
        Ok(())
    })
}

fn grid_eval(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(cfg, log)?;
    let fitted = fit(cfg, &data)?;
    writeln!(log, "bandwidth = {}", fitted.estimate.bandwidth())?;
    let grid = build_interior_grid(data.dim(), cfg.res, cfg.eps)?;
    let values = fitted.estimate.evaluate_grid(&grid)?;
    emit(cfg.output.as_deref(), out, |w| write_grid_csv(w, &grid, &values))
}

fn mode(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(cfg, log)?;
    let fitted = fit(cfg, &data)?;
    writeln!(log, "bandwidth = {}", fitted.estimate.bandwidth())?;
    let grid = build_interior_grid(data.dim(), cfg.res, cfg.eps)?;
    let (s, value) = mode_on_grid(&fitted.estimate, &grid)?;
    emit(cfg.output.as_deref(), out, |w| {
        let parts = s.parts();
        let header: Vec<String> = (1..=parts.len()).map(|k| format!("s{k}")).chain(["density".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        let fields: Vec<String> = parts.iter().chain([&value]).map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", fields.join(","))?;
        Ok(())
    })
}

fn propensity(cfg: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(cfg, log)?;
    let pf = fit_propensity_for(cfg, &data)?;
    writeln!(log, "propensity_h = {}", pf.bandwidth_h())?;
    emit(cfg.output.as_deref(), out, |w| {
        writeln!(w, "unit,delta,pi_hat")?;
        for (i, (&delta, p)) in pf.indicators().iter().zip(pf.pi_hat()).enumerate() {
            writeln!(w, "{},{},{:.16e}", i + 1, u8::from(delta), p)?;
        }
        Ok(())
    })
}
