use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fdsic::config::{read_config_file, ConfigError, Experiment, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fdsic", about = "Run a self-interference cancellation experiment")]
struct Cli {
    /// power-budget, bias, sinr-sweep, attenuation-sweep, convergence or bounds-probe
    experiment: Option<String>,
    /// Flat `key = value` file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// `type1`, `type2` or a profile file
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Shorthand for 200 trials
    #[arg(long)]
    full: bool,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    mu_frac: Option<f64>,
    #[arg(long)]
    mu_frac_nl: Option<f64>,
    /// `start:end:step` or a comma-separated list, in dBm
    #[arg(long)]
    tx_grid: Option<String>,
    #[arg(long)]
    tx: Option<f64>,
    /// `gaussian` or `ofdm`
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when any check fails
    #[arg(long)]
    check: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let file = match &cli.config {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    let name = cli
        .experiment
        .clone()
        .or_else(|| file.iter().find(|(k, _)| k == "experiment").map(|(_, v)| v.clone()))
        .ok_or(ConfigError::MissingExperiment)?;
    let mut cfg = RunConfig::new(name.parse::<Experiment>()?);
    for (k, v) in file.iter().filter(|(k, _)| k != "experiment") {
        cfg.set(k, v)?;
    }
    let overrides = [
        ("profile", cli.profile.clone()),
        ("trials", cli.trials.map(|v| v.to_string()).or(cli.full.then(|| "200".into()))),
        ("iterations", cli.iterations.map(|v| v.to_string())),
        ("mu_frac", cli.mu_frac.map(|v| v.to_string())),
        ("mu_frac_nl", cli.mu_frac_nl.map(|v| v.to_string())),
        ("tx_grid", cli.tx_grid.clone()),
        ("tx", cli.tx.map(|v| v.to_string())),
        ("source", cli.source.clone()),
        ("seed", cli.seed.map(|v| v.to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.check |= cli.check;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("fdsic: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match fdsic::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("fdsic: {} failed: {e}", cfg.experiment);
            return ExitCode::from(1);
        }
    };
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
    match report.write(&dir, &cfg) {
        Ok(files) => files.iter().for_each(|f| println!("wrote {}", f.display())),
        Err(e) => {
            eprintln!("fdsic: writing {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    for c in &report.checks {
        println!("{:<44} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    if cfg.check && !report.all_passed() {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
