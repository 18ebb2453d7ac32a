//! The six studies. Each returns a [`Report`] with its tables and checks.

use fdsic_core::cancellers::{run_canceller_slices, CancellerConfig, CancellerKind, RunTrace};
use fdsic_core::linalg::{hermitian_eigen, CMatrix};
use fdsic_core::signal::{gen_ofdm_waveform, gen_proper_gaussian, ComplexSequence, WaveformSpec};
use fdsic_core::theory::*;
use fdsic_core::transceiver::*;
use fdsic_core::units::{db_to_linear, linear_to_db};
use fdsic_core::{Complex64, Result};
use rayon::prelude::*;

use crate::config::{Experiment, RunConfig, Source};
use crate::report::{PlotKind, Report, Table};

pub fn run(cfg: &RunConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::PowerBudget => power_budget(cfg),
        Experiment::Bias => bias(cfg),
        Experiment::SinrSweep => sinr_sweep(cfg),
        Experiment::AttenuationSweep => attenuation_sweep(cfg),
        Experiment::Convergence => convergence(cfg),
        Experiment::BoundsProbe => bounds_probe(cfg),
    }
}

/// Profile, budget and channels at one Tx power.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub profile: TransceiverProfile,
    pub budget: NoiseBudget,
    pub channels: ChannelSet,
}

impl Scenario {
    pub fn at(cfg: &RunConfig, tx: f64) -> Result<Self> {
        let profile = cfg.profile.with_tx_power(tx);
        let budget = profile_noise_budget(&profile)?;
        let channels = synthesize_channels(&profile, cfg.m, cfg.n, cfg.seed)?;
        Ok(Self { profile, budget, channels })
    }

    pub fn k(&self) -> f64 {
        self.profile.k_tiq_lin()
    }

    pub fn sigma_x2(&self) -> f64 {
        self.budget.sigma_x2
    }

    pub fn inputs(&self, mu: f64) -> Result<TheoryInputs> {
        TheoryInputs::new(&self.profile, &self.budget, &self.channels, mu)
    }

    pub fn weights(&self, kind: CancellerKind) -> Vec<Complex64> {
        match kind {
            CancellerKind::Alms => self.channels.linear_weights(),
            CancellerKind::Anclms => self.channels.nonlinear_weights(),
        }
    }

    /// Mean-square step bound of either canceller under Gaussian moments.
    pub fn ms_bound(&self, kind: CancellerKind, m: usize, n: usize) -> Result<f64> {
        match kind {
            CancellerKind::Alms => Ok(alms_ms_bound(self.sigma_x2(), m)),
            CancellerKind::Anclms => anclms_ms_bound_gaussian(self.sigma_x2(), self.k(), m, n),
        }
    }

    /// Total power of `d(n)` without the signal of interest.
    pub fn observation_power(&self) -> f64 {
        let ch = &self.channels;
        let e = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let s2 = self.sigma_x2();
        s2 * (e(&ch.h) + e(&ch.g)) + 6.0 * self.k().powi(3) * s2.powi(3) * ch.imd_energy() + self.budget.noise_power()
    }
}

pub fn draw_source(source: Source, len: usize, sigma_x2: f64, seed: u64) -> Result<ComplexSequence> {
    match source {
        Source::Gaussian => gen_proper_gaussian(len, sigma_x2, seed),
        Source::Ofdm => {
            let spec = WaveformSpec { target_power_dbm: linear_to_db(sigma_x2), ..WaveformSpec::default() };
            let symbols = len.div_ceil(spec.samples_per_symbol());
            let wave = gen_ofdm_waveform(&spec, symbols, seed)?;
            let rate = wave.sample_rate_hz();
            let mut samples = wave.into_samples();
            samples.truncate(len);
            ComplexSequence::new(samples, rate)
        }
    }
}

/// Source and observation for one trial; trial `t` uses seed `seed + t`.
pub fn render_trial(cfg: &RunConfig, sc: &Scenario, trial: usize) -> Result<(ComplexSequence, Observation)> {
    let seed = cfg.seed + trial as u64;
    let x = draw_source(cfg.source, cfg.iterations + cfg.m - 1, sc.sigma_x2(), seed)?;
    let obs = render_observation(&x, &sc.channels, &sc.budget, &sc.profile, seed)?;
    Ok((x, obs))
}

/// Runs a canceller on `scale·x` against the unscaled `d`.
fn run_scaled(x: &ComplexSequence, d: &ComplexSequence, cc: &CancellerConfig, scale: f64) -> Result<RunTrace> {
    if scale == 1.0 {
        return run_canceller_slices(x.samples(), d.samples(), cc);
    }
    let xs: Vec<Complex64> = x.samples().iter().map(|v| v * scale).collect();
    run_canceller_slices(&xs, d.samples(), cc)
}

/// Runs `f` for every trial on the worker pool, results in trial order.
pub fn for_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

fn db(v: f64) -> f64 {
    linear_to_db(v)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------

fn power_budget(cfg: &RunConfig) -> Result<Report> {
    let rows = compute_power_budget(&cfg.profile, &cfg.tx_grid, cfg.m, cfg.n, cfg.seed)?;
    let names = PowerBudgetRow::NAMES;
    let mut analytic = vec![Vec::new(); names.len()];
    let mut measured = vec![Vec::new(); names.len()];
    for (row, &tx) in rows.iter().zip(&cfg.tx_grid) {
        let sc = Scenario::at(cfg, tx)?;
        let x = draw_source(cfg.source, cfg.iterations, sc.sigma_x2(), cfg.seed)?;
        let obs = render_observation_with(&x, &sc.channels, &sc.budget, &sc.profile, cfg.seed, RenderOptions { include_soi: true })?;
        for (i, (_, p)) in obs.components.powers().iter().enumerate() {
            analytic[i].push(row.values()[i]);
            measured[i].push(db(*p));
        }
    }

    let mut report = Report::new(Experiment::PowerBudget);
    if cfg.source != Source::Gaussian {
        report.note("analytic_budget_assumes", "white proper-Gaussian input");
    }
    let mut table = Table::new("", "tx_power_dbm", cfg.tx_grid.clone());
    for (i, name) in names.iter().enumerate() {
        table.push(format!("analytic_{name}"), analytic[i].clone());
    }
    for (i, name) in names.iter().enumerate() {
        table.push(format!("measured_{name}"), measured[i].clone());
    }

    let mut worst: (f64, String) = (0.0, String::new());
    let mut mismatch = false;
    for (i, name) in names.iter().enumerate() {
        for (j, (a, m)) in analytic[i].iter().zip(&measured[i]).enumerate() {
            if a.is_finite() != m.is_finite() {
                mismatch = true;
                worst = (f64::INFINITY, format!("{name} at {} dBm", cfg.tx_grid[j]));
            } else if a.is_finite() && (a - m).abs() > worst.0 {
                worst = ((a - m).abs(), format!("{name} at {} dBm", cfg.tx_grid[j]));
            }
        }
    }
    report.check(
        "rendered_matches_analytic",
        !mismatch && worst.0 <= 0.5,
        format!("largest gap {:.3} dB ({})", worst.0, worst.1),
    );

    let (thermal, quant) = (&analytic[4], &analytic[5]);
    let above: Vec<bool> = cfg.tx_grid.iter().zip(thermal.iter().zip(quant)).filter(|(tx, _)| **tx > 20.0).map(|(_, (t, q))| t < q).collect();
    let below: Vec<bool> = cfg.tx_grid.iter().zip(thermal.iter().zip(quant)).filter(|(tx, _)| **tx < 15.0).map(|(_, (t, q))| t > q).collect();
    report.check(
        "thermal_below_quantization_above_20dbm",
        above.iter().all(|&b| b),
        format!("{} of {} grid points", above.iter().filter(|&&b| b).count(), above.len()),
    );
    report.check(
        "thermal_above_quantization_below_15dbm",
        below.iter().all(|&b| b),
        format!("{} of {} grid points", below.iter().filter(|&&b| b).count(), below.len()),
    );
    if let Some(x) = crossing(&cfg.tx_grid, thermal, quant) {
        report.note("thermal_quantization_crossover_dbm", format!("{x:.2}"));
    }
    report.tables.push(table);
    Ok(report)
}

/// Linearly interpolated point where `a − b` changes sign.
fn crossing(x: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    (1..x.len()).find_map(|i| {
        let (d0, d1) = (a[i - 1] - b[i - 1], a[i] - b[i]);
        (d0.is_finite() && d1.is_finite() && d0.signum() != d1.signum()).then(|| x[i - 1] + (x[i] - x[i - 1]) * d0 / (d0 - d1))
    })
}

// ---------------------------------------------------------------------------

struct BiasRun {
    label: String,
    /// Trial-mean tracked tap errors, one per block.
    tap_means: Vec<[Complex64; 2]>,
    steady_error: Vec<Complex64>,
    diverged: usize,
}

fn bias(cfg: &RunConfig) -> Result<Report> {
    let sc = Scenario::at(cfg, cfg.tx)?;
    let (m, n) = (cfg.m, cfg.n);
    let fracs = [cfg.mu_frac, 2.0 * cfg.mu_frac];
    let skip = cfg.iterations / 10;
    let mut runs = Vec::new();
    let mut report = Report::new(Experiment::Bias);
    for kind in [CancellerKind::Alms, CancellerKind::Anclms] {
        let bound = sc.ms_bound(kind, m, n)?;
        report.note(&format!("{}_ms_bound", kind.label()), bound);
        let w0 = sc.weights(kind);
        for frac in fracs {
            let mut cc = CancellerConfig::new(kind, frac * bound, m, n, sc.k());
            cc.reference = Some(w0.clone());
            cc.tracked_taps = vec![0, 1];
            cc.steady_window = Some(cfg.iterations - skip);
            let per_trial = for_trials(cfg.trials, |t| {
                let (x, obs) = render_trial(cfg, &sc, t)?;
                let tr = run_scaled(&x, &obs.d, &cc, 1.0)?;
                let w = if kind == CancellerKind::Alms { &tr.steady_mean_weights } else { &tr.final_weights };
                let err: Vec<Complex64> = w.iter().zip(&w0).map(|(a, b)| a - b).collect();
                Ok((tr.tap_errors, err, tr.diverged))
            })?;
            let blocks = per_trial.iter().map(|(e, _, _)| e.len()).max().unwrap_or(0);
            let nan = Complex64::new(f64::NAN, f64::NAN);
            let tap_means = (0..blocks)
                .map(|b| {
                    let mut acc = [Complex64::new(0.0, 0.0); 2];
                    for (errs, _, _) in &per_trial {
                        match errs.get(b) {
                            Some(e) => (0..2).for_each(|i| acc[i] += e[i]),
                            None => return [nan, nan],
                        }
                    }
                    acc.map(|a| a / cfg.trials as f64)
                })
                .collect();
            let mut steady_error = vec![Complex64::new(0.0, 0.0); w0.len()];
            for (_, err, _) in &per_trial {
                for (s, e) in steady_error.iter_mut().zip(err) {
                    *s += e / cfg.trials as f64;
                }
            }
            runs.push(BiasRun {
                label: format!("{}_mu{}", kind.label(), frac),
                tap_means,
                steady_error,
                diverged: per_trial.iter().filter(|r| r.2).count(),
            });
        }
    }

    let blocks = runs.iter().map(|r| r.tap_means.len()).max().unwrap_or(0);
    let x = (1..=blocks).map(|b| (b * 100) as f64).collect();
    let mut table = Table::new("", "iteration", x);
    let h = &sc.channels.h;
    for r in &runs {
        for tap in 0..2 {
            let col = (0..blocks)
                .map(|b| r.tap_means.get(b).map_or(f64::NAN, |e| e[tap].norm() / h[tap].norm()))
                .collect();
            table.push(format!("{}_h{}", r.label, tap + 1), col);
        }
    }
    let inputs = sc.inputs(0.0)?;
    let theory = alms_bias(&inputs);
    for tap in 0..2 {
        table.push(format!("theory_alms_h{}", tap + 1), vec![theory[tap].norm() / h[tap].norm(); blocks]);
    }

    let alms = &runs[0];
    let imd_taps: Vec<usize> = (0..n).chain(m..m + n).collect();
    let mut worst = (0.0f64, 0usize);
    for &i in &imd_taps {
        let rel = (alms.steady_error[i] - theory[i]).norm() / theory[i].norm();
        report.note(&format!("alms_tap{i}_relative_error"), format!("{rel:.4}"));
        if !(rel <= worst.0) {
            worst = (rel, i);
        }
    }
    report.check(
        "alms_bias_per_tap",
        alms.diverged == 0 && worst.0 <= 0.1,
        format!("worst tap {} relative error {:.4} over {} IMD taps", worst.1, worst.0, imd_taps.len()),
    );
    let anclms = &runs[2];
    let ratio = norm(&anclms.steady_error) / norm(&sc.weights(CancellerKind::Anclms));
    report.note("anclms_error_norm_ratio", format!("{ratio:.5}"));
    report.check("anclms_error_norm", anclms.diverged == 0 && ratio < 0.05, format!("‖mean error‖/‖w°‖ = {ratio:.5}"));
    let fast = &runs[3];
    let decay = fast.tap_means.last().map_or(f64::NAN, |e| (0..2).map(|t| e[t].norm() / h[t].norm()).fold(0.0, f64::max));
    report.check("anclms_decays_40db", decay <= 0.01, format!("largest final normalised tap error {decay:.3e}"));
    report.tables.push(table);
    Ok(report)
}

// ---------------------------------------------------------------------------

/// Trial-averaged outcome of both cancellers at one Tx power.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub tx: f64,
    pub alms_mse: f64,
    pub anclms_mse: f64,
    pub d_power: f64,
    pub alms_theory: f64,
    pub alms_theory_low: f64,
    pub regime: Regime,
    pub anclms_theory: f64,
    pub anclms_theory_full: f64,
    pub analytic_d_power: f64,
    pub p_soi: f64,
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    cfg.tx_grid
        .iter()
        .map(|&tx| {
            let sc = Scenario::at(cfg, tx)?;
            let (m, n, k) = (cfg.m, cfg.n, sc.k());
            let mu_lin = cfg.mu_frac * alms_ms_bound(sc.sigma_x2(), m);
            let model = MomentModel::gaussian(sc.sigma_x2(), k, m, n)?;
            let mu_nl = cfg.mu_frac_nl * anclms_ms_bound_model(&model)?.bound();
            let lin = CancellerConfig::new(CancellerKind::Alms, mu_lin, m, n, k);
            let nl = CancellerConfig::new(CancellerKind::Anclms, mu_nl, m, n, k);
            let per_trial = for_trials(cfg.trials, |t| {
                let (x, obs) = render_trial(cfg, &sc, t)?;
                let a = run_scaled(&x, &obs.d, &lin, 1.0)?;
                let b = run_scaled(&x, &obs.d, &nl, 1.0)?;
                let (start, end) = a.steady_state_window;
                let d = &obs.d.samples()[m - 1..];
                let end = end.max(start + 1).min(d.len());
                let p_d = d[start.min(end - 1)..end].iter().map(|c| c.norm_sqr()).sum::<f64>() / (end - start.min(end - 1)) as f64;
                Ok([a.steady_state_mse, b.steady_state_mse, p_d])
            })?;
            let col = |i: usize| mean(&per_trial.iter().map(|r| r[i]).collect::<Vec<_>>());
            let lin_in = sc.inputs(mu_lin)?;
            let nl_in = sc.inputs(mu_nl)?;
            let regime = Regime::select(&lin_in);
            Ok(SweepPoint {
                tx,
                alms_mse: col(0),
                anclms_mse: col(1),
                d_power: col(2),
                alms_theory: alms_steady_mse(&lin_in, regime)?,
                alms_theory_low: alms_steady_mse(&lin_in, Regime::Low)?,
                regime,
                anclms_theory: anclms_steady_mse(&nl_in),
                anclms_theory_full: anclms_steady_mse_full(&nl_in, &model)?,
                analytic_d_power: sc.observation_power(),
                p_soi: sc.budget.p_x_soi,
            })
        })
        .collect()
}

fn sinr_sweep(cfg: &RunConfig) -> Result<Report> {
    let pts = sweep(cfg)?;
    let mut report = Report::new(Experiment::SinrSweep);
    let x: Vec<f64> = pts.iter().map(|p| p.tx).collect();
    let sinr = |f: &dyn Fn(&SweepPoint) -> f64| pts.iter().map(|p| db(p.p_soi / f(p))).collect::<Vec<f64>>();
    let alms_sim = sinr(&|p| p.alms_mse);
    let alms_th = sinr(&|p| p.alms_theory);
    let alms_low = sinr(&|p| p.alms_theory_low);
    let nl_sim = sinr(&|p| p.anclms_mse);
    let nl_th = sinr(&|p| p.anclms_theory);
    let nl_full = sinr(&|p| p.anclms_theory_full);

    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    let alms_gap = gap(&alms_sim, &alms_th);
    let nl_gap = gap(&nl_sim, &nl_th);
    report.check("alms_matches_theory", alms_gap <= 0.5, format!("max |sim − theory| {alms_gap:.3} dB"));
    report.check("anclms_matches_theory", nl_gap <= 0.5, format!("max |sim − theory| {nl_gap:.3} dB"));
    let last = pts.len() - 1;
    let top_gap = nl_sim[last] - alms_sim[last];
    report.check(
        "gap_at_highest_tx",
        top_gap > 3.0,
        format!("ANCLMS − ALMS at {} dBm = {top_gap:.2} dB", x[last]),
    );
    let ordered = x.iter().enumerate().all(|(i, &tx)| if tx > 10.0 { nl_sim[i] > alms_sim[i] } else { nl_sim[i] >= alms_sim[i] });
    report.check("anclms_not_below_alms", ordered, "simulated SINR ordering across the grid");
    let low = (nl_sim[0] - alms_sim[0]).abs();
    report.check("low_tx_agreement", low <= 0.2, format!("|ANCLMS − ALMS| at {} dBm = {low:.3} dB", x[0]));
    let cont = (alms_th[0] - alms_low[0]).abs();
    report.check("regime_continuity", cont <= 0.1, format!("high − low regime SINR at {} dBm = {cont:.4} dB", x[0]));
    for p in &pts {
        report.note(&format!("regime_at_{}dbm", p.tx), format!("{:?}", p.regime));
    }

    let mut table = Table::new("", "tx_power_dbm", x);
    table.push("alms_sim_db", alms_sim);
    table.push("alms_theory_db", alms_th);
    table.push("alms_theory_low_db", alms_low);
    table.push("anclms_sim_db", nl_sim);
    table.push("anclms_theory_db", nl_th);
    table.push("anclms_theory_full_db", nl_full);
    report.tables.push(table);
    report.tables.push(attenuation_table(&pts, "attenuation"));
    Ok(report)
}

fn attenuation_table(pts: &[SweepPoint], name: &str) -> Table {
    let mut table = Table::new(name, "tx_power_dbm", pts.iter().map(|p| p.tx).collect());
    table.push("alms_sim_db", pts.iter().map(|p| db(p.d_power / p.alms_mse)).collect());
    table.push("alms_theory_db", pts.iter().map(|p| db(p.analytic_d_power / p.alms_theory)).collect());
    table.push("anclms_sim_db", pts.iter().map(|p| db(p.d_power / p.anclms_mse)).collect());
    table.push("anclms_theory_db", pts.iter().map(|p| db(p.analytic_d_power / p.anclms_theory_full)).collect());
    table
}

fn attenuation_sweep(cfg: &RunConfig) -> Result<Report> {
    let pts = sweep(cfg)?;
    let mut report = Report::new(Experiment::AttenuationSweep);
    let table = attenuation_table(&pts, "");
    for name in ["alms", "anclms"] {
        let sim = table.column(&format!("{name}_sim_db")).unwrap_or_default();
        let th = table.column(&format!("{name}_theory_db")).unwrap_or_default();
        let gap = sim.iter().zip(th).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.check(&format!("{name}_matches_theory"), gap <= 0.5, format!("max |sim − theory| {gap:.3} dB"));
    }
    let (a, b) = (table.column("alms_sim_db").unwrap_or_default(), table.column("anclms_sim_db").unwrap_or_default());
    if let (Some(a), Some(b)) = (a.last(), b.last()) {
        report.check("anclms_ahead_at_highest_tx", b > a, format!("{:.2} dB vs {:.2} dB", b, a));
    }
    report.tables.push(table);
    Ok(report)
}

// ---------------------------------------------------------------------------

/// One learning-curve run of the convergence study.
struct CurveSpec {
    label: &'static str,
    sigma_x2: f64,
    whiten: bool,
}

fn convergence(cfg: &RunConfig) -> Result<Report> {
    let sc = Scenario::at(cfg, cfg.tx)?;
    let (m, n, k) = (cfg.m, cfg.n, sc.k());
    let mut report = Report::new(Experiment::Convergence);

    // condition-number surface
    let s2_grid: Vec<f64> = (-30..=0).map(f64::from).collect();
    let mut heat = Table::new("condition_number", "sigma_x2_dbm", s2_grid.clone());
    heat.kind = PlotKind::Heatmap;
    let mut heat_min = f64::INFINITY;
    for k_db in 0..=10 {
        let kl = db_to_linear(k_db as f64);
        let col: Vec<f64> = s2_grid.iter().map(|&s| condition_number(db_to_linear(s), kl)).collect();
        heat_min = col.iter().copied().fold(heat_min, f64::min);
        heat.push(format!("k_tiq_{k_db}db"), col);
    }
    let (eps_star, c_star) = min_condition_number();
    report.note("min_condition_number", c_star);
    report.note("min_condition_epsilon", eps_star);
    report.check(
        "heatmap_minimum",
        heat_min >= c_star * (1.0 - 1e-12) && heat_min <= c_star * 1.01,
        format!("grid minimum {heat_min:.4} vs {c_star:.4}"),
    );

    let s_opt = optimal_sigma_x2(k);
    let mu = cfg.mu_frac * anclms_ms_bound_gaussian(s_opt, k, m, n)?;
    report.note("optimal_sigma_x2_dbm", format!("{:.3}", db(s_opt)));
    report.note("native_sigma_x2_dbm", format!("{:.3}", db(sc.sigma_x2())));
    report.note("mu", mu);
    let specs = [
        CurveSpec { label: "unwhitened_optimal", sigma_x2: s_opt, whiten: false },
        CurveSpec { label: "unwhitened_suboptimal", sigma_x2: db_to_linear(-10.0), whiten: false },
        CurveSpec { label: "whitened", sigma_x2: sc.sigma_x2(), whiten: true },
    ];
    let inputs = sc.inputs(mu)?;
    let n0 = inputs.noise_power();
    let w0 = sc.channels.nonlinear_weights();
    let blocks = (cfg.iterations) / 100;
    let x: Vec<f64> = (1..=blocks).map(|b| (b * 100) as f64).collect();
    let mut curves = Table::new("", "iteration", x);
    let mut reach = Vec::new();
    for spec in &specs {
        let c = (spec.sigma_x2 / sc.sigma_x2()).sqrt();
        let (model, r, start) = curve_theory(&w0, spec, c, k, m, n)?;
        let steady = db(sc.budget.p_x_soi / anclms_steady_mse_full(&inputs, &model)?);
        let mut cc = CancellerConfig::new(CancellerKind::Anclms, mu, m, n, k);
        cc.whiten = spec.whiten;
        let per_trial = for_trials(cfg.trials, |t| {
            let (x, obs) = render_trial(cfg, &sc, t)?;
            Ok(run_scaled(&x, &obs.d, &cc, c)?.block_mse)
        })?;
        let sim: Vec<f64> = (0..blocks)
            .map(|b| {
                let vals: Option<Vec<f64>> = per_trial.iter().map(|bm| bm.get(b).copied()).collect();
                vals.map_or(f64::NAN, |v| db(sc.budget.p_x_soi / mean(&v)))
            })
            .collect();
        let theory_mse = transient_in_eigenbasis(&r, &start, mu, n0, blocks * 100)?;
        let theory: Vec<f64> = (0..blocks).map(|b| db(sc.budget.p_x_soi / mean(&theory_mse[b * 100..(b + 1) * 100]))).collect();
        let hit = sim.iter().position(|&s| s >= steady - 1.0).map(|b| (b + 1) * 100);
        report.note(&format!("{}_steady_sinr_db", spec.label), format!("{steady:.3}"));
        report.note(&format!("{}_reach_iterations", spec.label), hit.map_or("not reached".to_string(), |h| h.to_string()));
        reach.push(hit);
        curves.push(format!("sim_{}", spec.label), sim);
        curves.push(format!("theory_{}", spec.label), theory);
    }
    let total = cfg.iterations;
    let count = |r: Option<usize>| r.unwrap_or(total) as f64;
    let (opt, white) = (reach[0], reach[2]);
    report.check(
        "whitened_faster",
        white.is_some() && count(white) < count(opt),
        format!("whitened {} vs unwhitened optimal {}", fmt_reach(white), fmt_reach(opt)),
    );
    let ratio = count(opt) / count(white);
    report.check("speedup_ratio", white.is_some() && ratio >= 1.8, format!("ratio {ratio:.2} (unreached counted as {total})"));
    let near = |r: Option<usize>, target: f64| r.is_some_and(|v| (v as f64 / target - 1.0).abs() <= 0.3);
    report.check(
        "iteration_counts_near_reference",
        near(white, 3000.0) && near(opt, 7000.0),
        format!("whitened {} (≈3000), unwhitened optimal {} (≈7000)", fmt_reach(white), fmt_reach(opt)),
    );
    report.tables.push(curves);
    report.tables.push(heat);
    Ok(report)
}

fn fmt_reach(r: Option<usize>) -> String {
    r.map_or("not reached".into(), |v| v.to_string())
}

/// Moments, covariance and initial weight error of the filter that a curve
/// run adapts: the raw regressor of `c·x`, or its exact whitening.
fn curve_theory(w0: &[Complex64], spec: &CurveSpec, c: f64, k: f64, m: usize, n: usize) -> Result<(MomentModel, CMatrix, Vec<Complex64>)> {
    let model = MomentModel::gaussian(spec.sigma_x2, k, m, n)?;
    // scaling x by c scales linear taps by 1/c and IMD taps by 1/c³
    let scaled: Vec<Complex64> = w0
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let imd = (m..m + n).contains(&i) || (2 * m + n..2 * m + 2 * n).contains(&i);
            w / if imd { c.powi(3) } else { c }
        })
        .collect();
    if !spec.whiten {
        let r = model.r.clone();
        return Ok((model, r, scaled.iter().map(|w| -w).collect()));
    }
    let (vals, u) = hermitian_eigen(&model.r);
    let d = model.dim();
    let phi = CMatrix::from_fn(d, d, |r, col| u[(col, r)].conj() / vals[r].sqrt());
    let white = model.transformed(&phi)?;
    // internal weights satisfy Φᵀ w = w°
    let target = fdsic_core::linalg::CVector::from_iterator(d, scaled.iter().copied());
    let internal = phi
        .transpose()
        .lu()
        .solve(&target)
        .ok_or_else(|| fdsic_core::Error::DegenerateInput("whitening transform is singular".into()))?;
    let r = white.r.clone();
    Ok((white, r, internal.iter().map(|w| -w).collect()))
}

// ---------------------------------------------------------------------------

pub const PROBE_FRACTIONS: [f64; 4] = [0.5, 0.9, 1.1, 1.5];

fn bounds_probe(cfg: &RunConfig) -> Result<Report> {
    let sc = Scenario::at(cfg, cfg.tx)?;
    let (m, n, k) = (cfg.m, cfg.n, sc.k());
    let mut report = Report::new(Experiment::BoundsProbe);
    let mut table = Table::new("", "mu_fraction", PROBE_FRACTIONS.to_vec());
    let need = (0.9 * cfg.trials as f64).ceil() as usize;
    let model = MomentModel::gaussian(sc.sigma_x2(), k, m, n)?;
    let mean_bound = anclms_mean_bound(sc.sigma_x2(), k);
    report.note("anclms_mean_bound", mean_bound);
    for kind in [CancellerKind::Alms, CancellerKind::Anclms] {
        let bound = sc.ms_bound(kind, m, n)?;
        report.note(&format!("{}_ms_bound", kind.label()), bound);
        let (mut div_col, mut within_col, mut ratio_col) = (Vec::new(), Vec::new(), Vec::new());
        let mut edge = None;
        for &frac in &PROBE_FRACTIONS {
            let mu = frac * bound;
            let inputs = sc.inputs(mu)?;
            let theory = if frac < 1.0 {
                match kind {
                    CancellerKind::Alms => alms_steady_mse(&inputs, Regime::select(&inputs))?,
                    CancellerKind::Anclms => anclms_steady_mse_full(&inputs, &model)?,
                }
            } else {
                f64::NAN
            };
            let cc = CancellerConfig::new(kind, mu, m, n, k);
            let per_trial = for_trials(cfg.trials, |t| {
                let (x, obs) = render_trial(cfg, &sc, t)?;
                let tr = run_scaled(&x, &obs.d, &cc, 1.0)?;
                Ok((tr.diverged, tr.steady_state_mse))
            })?;
            let diverged = per_trial.iter().filter(|r| r.0).count();
            let mut ratios: Vec<f64> = per_trial.iter().filter(|r| !r.0).map(|r| r.1 / theory).collect();
            let within = ratios.iter().filter(|&&r| (0.5..=2.0).contains(&r)).count();
            ratios.sort_by(f64::total_cmp);
            let median = ratios.get(ratios.len() / 2).copied().unwrap_or(f64::NAN);
            if edge.is_none() && 2 * diverged > cfg.trials {
                edge = Some(frac);
            }
            div_col.push(diverged as f64);
            within_col.push(within as f64);
            ratio_col.push(median);
            if frac == 0.9 {
                report.check(
                    &format!("{}_converges_at_0.9", kind.label()),
                    within >= need,
                    format!("{within}/{} trials within 2× of theory, {diverged} diverged, median ratio {median:.3}", cfg.trials),
                );
            }
            if frac == 1.5 {
                report.check(
                    &format!("{}_diverges_at_1.5", kind.label()),
                    diverged >= need,
                    format!("{diverged}/{} trials diverged", cfg.trials),
                );
            }
        }
        let label = kind.label();
        report.note(&format!("{label}_empirical_edge_fraction"), edge.map_or("none".to_string(), |e| e.to_string()));
        if kind == CancellerKind::Anclms {
            let ok = edge.is_some_and(|e| e * bound >= bound && e * bound <= mean_bound);
            report.check(
                "anclms_edge_between_bounds",
                ok,
                format!("edge {} of the mean-square bound, mean bound at {:.3}×", edge.map_or("none".into(), |e| e.to_string()), mean_bound / bound),
            );
        }
        table.push(format!("{label}_diverged"), div_col);
        table.push(format!("{label}_within_2x"), within_col);
        table.push(format!("{label}_median_ratio"), ratio_col);
    }
    report.tables.push(table);
    Ok(report)
}
