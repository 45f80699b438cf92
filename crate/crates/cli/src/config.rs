//! Run configuration: a flat `key = value` or JSON file, overridden by flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use simplex_kde::bandwidth::{candidate_range, LooDivisor};
use simplex_kde::io::ResponseLayout;
use simplex_kde::propensity::DEFAULT_FLOOR;
use simplex_kde::{EstimatorKind, ModelId};

use crate::error::CliError;

/// Raw settings by canonical key (lower case, `_` separators).
pub type ConfigMap = BTreeMap<String, String>;

pub const DEFAULT_SEED: u64 = 20_240_601;

const KEYS: &[&str] = &[
    "input",
    "output",
    "per_rep",
    "model",
    "n",
    "missing_rate",
    "reps",
    "seed",
    "res",
    "eps",
    "lscv_res",
    "b_grid",
    "b",
    "pi_floor",
    "propensity_h",
    "rho",
    "beta1",
    "estimator",
    "layout",
    "loo_divisor",
    "calibration_draws",
];

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn canonical_key(key: &str) -> String {
    key.trim().trim_start_matches("--").to_ascii_lowercase().replace('-', "_")
}

/// Parses a config file: a JSON object when the text starts with `{`, otherwise
/// `key = value` lines with `#` comments. Later entries win.
pub fn parse_config(text: &str) -> Result<ConfigMap, CliError> {
    let trimmed = text.trim_start_matches('\u{feff}').trim();
    if trimmed.starts_with('{') {
        parse_json(trimmed)
    } else {
        parse_key_values(trimmed)
    }
}

fn parse_key_values(text: &str) -> Result<ConfigMap, CliError> {
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(format!("line {}: expected key = value", i + 1)))?;
        let key = canonical_key(key);
        if key.is_empty() {
            return Err(config_error(format!("line {}: empty key", i + 1)));
        }
        map.insert(key, value.trim().trim_matches('"').to_string());
    }
    Ok(map)
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String, CliError> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(config_error(format!("{key}: unsupported value {other}"))),
    }
}

fn parse_json(text: &str) -> Result<ConfigMap, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config_error(format!("invalid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| config_error("JSON config must be an object"))?;
    let mut map = ConfigMap::new();
    for (k, v) in obj {
        let key = canonical_key(k);
        let text = match v {
            serde_json::Value::Array(items) => {
                items.iter().map(|x| json_scalar(&key, x)).collect::<Result<Vec<_>, _>>()?.join(",")
            }
            serde_json::Value::Null => continue,
            other => json_scalar(&key, other)?,
        };
        map.insert(key, text);
    }
    Ok(map)
}

/// Parses `lo:hi:step` into the candidate bandwidths `lo, lo + step, ..., <= hi`.
pub fn parse_b_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let fields: Vec<&str> = text.trim().split(':').collect();
    let [lo, hi, step] = fields[..] else {
        return Err(config_error(format!("b-grid {text:?} must look like lo:hi:step")));
    };
    let num = |s: &str| -> Result<f64, CliError> {
        s.trim().parse::<f64>().map_err(|_| config_error(format!("b-grid value {s:?} is not a number")))
    };
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if hi >= 1.0 {
        return Err(config_error(format!("b-grid upper end {hi} must be below 1")));
    }
    candidate_range(lo, hi, step).map_err(|e| config_error(e.to_string()))
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub per_rep: Option<PathBuf>,
    pub model: ModelId,
    pub n: Vec<usize>,
    pub missing_rate: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub res: usize,
    pub eps: f64,
    pub lscv_res: usize,
    pub b_grid: Vec<f64>,
    b_grid_text: String,
    pub b: Option<f64>,
    pub pi_floor: f64,
    pub propensity_h: Option<f64>,
    pub rho: f64,
    pub beta1: Vec<f64>,
    pub estimator: Vec<EstimatorKind>,
    pub layout: ResponseLayout,
    pub loo_divisor: LooDivisor,
    pub calibration_draws: usize,
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| config_error(format!("{key}: cannot parse {s:?}"))))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(config_error(format!("{key}: empty list")));
    }
    Ok(items)
}

fn one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse::<T>().map_err(|_| config_error(format!("{key}: cannot parse {value:?}")))
}

fn in_range(key: &str, v: f64, ok: bool, range: &str) -> Result<f64, CliError> {
    if ok && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(format!("{key} = {v} must lie in {range}")))
    }
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(config_error(format!("unknown setting {k:?}")));
        }
        let get = |k: &str| map.get(k).map(String::as_str).filter(|v| !v.trim().is_empty());
        let b_grid_text = get("b_grid").unwrap_or("0.01:0.35:0.01").to_string();
        let cfg = Self {
            input: get("input").map(PathBuf::from),
            output: get("output").map(PathBuf::from),
            per_rep: get("per_rep").map(PathBuf::from),
            model: get("model").map(|v| v.parse::<ModelId>().map_err(|e| config_error(e.to_string()))).transpose()?.unwrap_or(ModelId::I),
            n: get("n").map(|v| list("n", v)).transpose()?.unwrap_or_else(|| vec![100, 200, 400, 800]),
            missing_rate: get("missing_rate").map(|v| list("missing_rate", v)).transpose()?.unwrap_or_else(|| vec![0.05, 0.10, 0.20, 0.40]),
            reps: get("reps").map(|v| one("reps", v)).transpose()?.unwrap_or(200),
            seed: get("seed").map(|v| one("seed", v)).transpose()?.unwrap_or(DEFAULT_SEED),
            res: get("res").map(|v| one("res", v)).transpose()?.unwrap_or(300),
            eps: get("eps").map(|v| one("eps", v)).transpose()?.unwrap_or(0.01),
            lscv_res: get("lscv_res").map(|v| one("lscv_res", v)).transpose()?.unwrap_or(40),
            b_grid: parse_b_grid(&b_grid_text)?,
            b_grid_text,
            b: get("b").map(|v| one("b", v)).transpose()?,
            pi_floor: get("pi_floor").map(|v| one("pi_floor", v)).transpose()?.unwrap_or(DEFAULT_FLOOR),
            propensity_h: get("propensity_h").map(|v| one("propensity_h", v)).transpose()?,
            rho: get("rho").map(|v| one("rho", v)).transpose()?.unwrap_or(0.5),
            beta1: get("beta1").map(|v| list("beta1", v)).transpose()?.unwrap_or_else(|| vec![1.0, 1.0]),
            estimator: get("estimator")
                .map(|v| list::<String>("estimator", v)?.iter().map(|e| e.parse::<EstimatorKind>().map_err(|e| config_error(e.to_string()))).collect())
                .transpose()?
                .unwrap_or_else(|| vec![EstimatorKind::IpwDirichlet]),
            layout: match get("layout").map(|v| v.trim().to_ascii_lowercase()) {
                None => ResponseLayout::Implicit,
                Some(v) if v == "implicit" => ResponseLayout::Implicit,
                Some(v) if v == "full" => ResponseLayout::Full,
                Some(v) => return Err(config_error(format!("layout {v:?}: expected implicit or full"))),
            },
            loo_divisor: match get("loo_divisor").map(str::trim) {
                None | Some("n-1") | Some("n_minus_one") => LooDivisor::NMinusOne,
                Some("n") => LooDivisor::N,
                Some(v) => return Err(config_error(format!("loo_divisor {v:?}: expected n-1 or n"))),
            },
            calibration_draws: get("calibration_draws").map(|v| one("calibration_draws", v)).transpose()?.unwrap_or(500_000),
        };
        cfg.validate()
    }

    fn validate(self) -> Result<Self, CliError> {
        if self.n.iter().any(|&n| n < 2) {
            return Err(config_error("n must be at least 2"));
        }
        for &r in &self.missing_rate {
            in_range("missing_rate", r, (0.0..=0.95).contains(&r), "[0, 0.95]")?;
        }
        if self.reps == 0 {
            return Err(config_error("reps must be positive"));
        }
        if self.res < 4 || self.lscv_res < 4 {
            return Err(config_error("grid resolutions must be at least 4"));
        }
        in_range("eps", self.eps, self.eps > 0.0 && self.eps < 1.0 / 3.0, "(0, 1/3)")?;
        if let Some(b) = self.b {
            in_range("b", b, b > 0.0, "(0, inf)")?;
        }
        in_range("pi_floor", self.pi_floor, self.pi_floor > 0.0 && self.pi_floor < 1.0, "(0, 1)")?;
        if let Some(h) = self.propensity_h {
            in_range("propensity_h", h, h > 0.0, "(0, inf)")?;
        }
        in_range("rho", self.rho, self.rho * self.rho < 1.0, "(-1, 1)")?;
        if self.beta1.len() != 2 || self.beta1.iter().any(|b| !b.is_finite()) {
            return Err(config_error("beta1 must hold two finite numbers"));
        }
        if self.calibration_draws == 0 {
            return Err(config_error("calibration_draws must be positive"));
        }
        Ok(self)
    }

    /// The single estimator used by the file-based commands.
    pub fn primary_estimator(&self) -> EstimatorKind {
        self.estimator[0]
    }

    /// `key = value` lines of every setting, defaults included.
    pub fn describe(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let join = |v: Vec<String>| v.join(",");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("input", path(&self.input));
        line("output", path(&self.output));
        line("per_rep", path(&self.per_rep));
        line("model", self.model.to_string());
        line("n", join(self.n.iter().map(ToString::to_string).collect()));
        line("missing_rate", join(self.missing_rate.iter().map(ToString::to_string).collect()));
        line("reps", self.reps.to_string());
        line("seed", self.seed.to_string());
        line("res", self.res.to_string());
        line("eps", self.eps.to_string());
        line("lscv_res", self.lscv_res.to_string());
        line("b_grid", format!("{} ({} candidates)", self.b_grid_text, self.b_grid.len()));
        line("b", self.b.map_or("lscv".to_string(), |b| b.to_string()));
        line("pi_floor", self.pi_floor.to_string());
        line("propensity_h", self.propensity_h.map_or("silverman".to_string(), |h| h.to_string()));
        line("rho", self.rho.to_string());
        line("beta1", join(self.beta1.iter().map(ToString::to_string).collect()));
        line("estimator", join(self.estimator.iter().map(|e| e.name().to_string()).collect()));
        line("layout", format!("{:?}", self.layout).to_ascii_lowercase());
        line("loo_divisor", match self.loo_divisor {
            LooDivisor::NMinusOne => "n-1".to_string(),
            LooDivisor::N => "n".to_string(),
        });
        line("calibration_draws", self.calibration_draws.to_string());
        out
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_map(&ConfigMap::new()).expect("defaults are valid")
    }
}
