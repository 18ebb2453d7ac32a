//! Run configuration: a flat `key = value` file, overridden by CLI flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fdsic_core::transceiver::TransceiverProfile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("profile: {0}")]
    Profile(#[from] fdsic_core::Error),
    #[error("no experiment given")]
    MissingExperiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    PowerBudget,
    Bias,
    SinrSweep,
    AttenuationSweep,
    Convergence,
    BoundsProbe,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::PowerBudget,
        Experiment::Bias,
        Experiment::SinrSweep,
        Experiment::AttenuationSweep,
        Experiment::Convergence,
        Experiment::BoundsProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PowerBudget => "power-budget",
            Experiment::Bias => "bias",
            Experiment::SinrSweep => "sinr-sweep",
            Experiment::AttenuationSweep => "attenuation-sweep",
            Experiment::Convergence => "convergence",
            Experiment::BoundsProbe => "bounds-probe",
        }
    }

    /// Single Tx power used by experiments that do not sweep.
    pub fn default_tx(self) -> f64 {
        match self {
            Experiment::Bias => 25.0,
            _ => 15.0,
        }
    }

    fn default_iterations(self) -> usize {
        match self {
            // the slow IMD eigenmode needs this long to settle at 5 dBm
            Experiment::SinrSweep | Experiment::AttenuationSweep => 200_000,
            Experiment::PowerBudget => 100_000,
            _ => 30_000,
        }
    }

    fn default_mu_frac(self) -> f64 {
        match self {
            Experiment::Convergence => 0.005,
            _ => 0.05,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('-', "_") == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Gaussian,
    Ofdm,
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Source::Gaussian),
            "ofdm" => Ok(Source::Ofdm),
            _ => Err("expected `gaussian` or `ofdm`".into()),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Gaussian => "gaussian",
            Source::Ofdm => "ofdm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub profile: TransceiverProfile,
    pub profile_label: String,
    pub trials: usize,
    pub iterations: usize,
    /// Step size of the linear canceller (and of every run in the
    /// convergence study) as a fraction of its bound.
    pub mu_frac: f64,
    /// Step size of the nonlinear canceller as a fraction of its
    /// mean-square bound.
    pub mu_frac_nl: f64,
    pub tx_grid: Vec<f64>,
    pub tx: f64,
    pub source: Source,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub out: Option<PathBuf>,
    pub check: bool,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            profile: TransceiverProfile::type2(),
            profile_label: "type2".into(),
            trials: 50,
            iterations: experiment.default_iterations(),
            mu_frac: experiment.default_mu_frac(),
            mu_frac_nl: 0.25,
            tx_grid: vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            tx: experiment.default_tx(),
            source: Source::Gaussian,
            seed: 1,
            m: 5,
            n: 4,
            out: None,
            check: false,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue { key: key.into(), value: value.into(), reason };
        fn num<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "profile" => {
                self.profile = load_profile(value)?;
                self.profile_label = value.to_string();
            }
            "trials" => self.trials = num(value).map_err(bad)?,
            "iterations" => self.iterations = num(value).map_err(bad)?,
            "mu_frac" | "mu-frac" => self.mu_frac = num(value).map_err(bad)?,
            "mu_frac_nl" | "mu-frac-nl" => self.mu_frac_nl = num(value).map_err(bad)?,
            "tx_grid" | "tx-grid" => self.tx_grid = parse_grid(value).map_err(bad)?,
            "tx" => self.tx = num(value).map_err(bad)?,
            "source" => self.source = value.parse().map_err(bad)?,
            "seed" => self.seed = num(value).map_err(bad)?,
            "m" => self.m = num(value).map_err(bad)?,
            "n" => self.n = num(value).map_err(bad)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "check" => self.check = num(value).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: String, reason: &str| {
            Err(ConfigError::BadValue { key: key.into(), value, reason: reason.into() })
        };
        if self.trials == 0 {
            return bad("trials", "0".into(), "must be positive");
        }
        if self.iterations < 1000 {
            return bad("iterations", self.iterations.to_string(), "must be at least 1000");
        }
        for (key, v) in [("mu_frac", self.mu_frac), ("mu_frac_nl", self.mu_frac_nl)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, v.to_string(), "must be positive");
            }
        }
        if self.tx_grid.is_empty() {
            return bad("tx_grid", String::new(), "must not be empty");
        }
        if self.m == 0 || self.n >= self.m {
            return bad("n", self.n.to_string(), "need 0 <= N < M");
        }
        self.profile.validate()?;
        Ok(())
    }
}

/// `type1` / `type2` presets or a path to a profile file.
pub fn load_profile(value: &str) -> Result<TransceiverProfile, ConfigError> {
    match value {
        "type1" => Ok(TransceiverProfile::type1()),
        "type2" => Ok(TransceiverProfile::type2()),
        path => Ok(TransceiverProfile::load(path)?),
    }
}

/// `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step): (f64, f64, f64) = (
                a.parse().map_err(|_| format!("bad start `{a}`"))?,
                b.parse().map_err(|_| format!("bad end `{b}`"))?,
                step.parse().map_err(|_| format!("bad step `{step}`"))?,
            );
            if !(step > 0.0) || b < a {
                return Err("need start <= end and a positive step".into());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * step).collect())
        }
        [_] => s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}`")))
            .collect(),
        _ => Err("expected a:b:step or a comma-separated list".into()),
    }
}

/// Reads a flat config file. Blank lines and `#` comments are skipped; the
/// `experiment` key may be absent when it is given on the command line.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: format!("expected key = value, got `{line}`") })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
