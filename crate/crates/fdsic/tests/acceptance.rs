//! The nine acceptance criteria. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

use std::time::{Duration, Instant};

use fdsic::config::{Experiment, RunConfig};
use fdsic::Report;
use fdsic_core::cancellers::*;
use fdsic_core::linalg::{hermitian_eigenvalues, CMatrix, CVector};
use fdsic_core::signal::gen_proper_gaussian;
use fdsic_core::theory::*;
use fdsic_core::transceiver::*;
use fdsic_core::units::linear_to_db;
use fdsic_core::Complex64;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn run(cfg: &RunConfig) -> Report {
    fdsic::run(cfg).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.experiment))
}

/// Conjunction of named checks from a report.
fn checks(report: &Report, names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in names {
        match report.find_check(name) {
            Some(ch) => {
                passed &= ch.passed;
                parts.push(format!("{}={} ({})", name, if ch.passed { "ok" } else { "FAIL" }, ch.detail));
            }
            None => {
                passed = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    Outcome::new(passed, parts.join("; "))
}

fn min_condition() -> Outcome {
    let (eps, value) = min_condition_number();
    let reference = (17.0 + 4.0 * 15f64.sqrt()) / 7.0;
    let eps_ok = (eps - 1.0 / 6.0).abs() < 1e-12;
    let value_ok = (value - reference).abs() < 5e-7;
    let (eps_n, value_n) = numeric_min_condition_number(1e-4, 1e2);
    let numeric_ok = (eps_n - eps).abs() < 1e-4 && (value_n - value).abs() < 1e-4;
    Outcome::new(
        eps_ok && value_ok && numeric_ok,
        format!("ε*={eps:.9} value={value:.7} reference={reference:.7} numeric ε={eps_n:.6} value={value_n:.7}"),
    )
}

fn rb_spectrum() -> Outcome {
    let (m, n) = (5, 4);
    let mut worst = 0.0f64;
    let mut multiplicity_ok = true;
    for (s2, k) in [(0.1, 1.0), (0.1, 4.0), (1.0, 1.0), (1.0, 4.0)] {
        let x = gen_proper_gaussian(1_000_000 + m - 1, s2, 17).expect("source");
        let cov = regressor_covariance(x.samples(), m, n, k, CancellerKind::Anclms).expect("covariance");
        let sample = hermitian_eigenvalues(&cov);
        let spec = rb_eigenvalues(s2, k, m, n);
        multiplicity_ok &= spec.multiplicities == (2 * m - 2 * n, 2 * n, 2 * n);
        for (a, b) in sample.iter().zip(spec.expanded()) {
            worst = worst.max((a / b - 1.0).abs());
        }
    }
    Outcome::new(worst <= 0.02 && multiplicity_ok, format!("worst relative eigenvalue error {worst:.4}, multiplicities ok={multiplicity_ok}"))
}

fn bias() -> Outcome {
    checks(&run(&RunConfig::new(Experiment::Bias)), &["alms_bias_per_tap", "anclms_error_norm"])
}

fn steady_sinr() -> Outcome {
    checks(&run(&RunConfig::new(Experiment::SinrSweep)), &["alms_matches_theory", "anclms_matches_theory", "gap_at_highest_tx"])
}

fn low_power_limit() -> Outcome {
    let mut cfg = RunConfig::new(Experiment::SinrSweep);
    cfg.tx_grid = vec![-5.0];
    cfg.mu_frac = 0.01;
    cfg.mu_frac_nl = 0.01;
    cfg.iterations = 30_000;
    let report = run(&cfg);
    let table = report.table("").expect("sinr table");
    let target = cfg.profile.snr_req_db;
    let alms = table.column("alms_sim_db").expect("alms")[0];
    let anclms = table.column("anclms_sim_db").expect("anclms")[0];
    let ok = (alms - target).abs() <= 0.3 && (anclms - target).abs() <= 0.3;
    Outcome::new(ok, format!("ALMS {alms:.3} dB, ANCLMS {anclms:.3} dB, required {target:.1} dB"))
}

fn dichotomy() -> Outcome {
    checks(
        &run(&RunConfig::new(Experiment::BoundsProbe)),
        &["alms_converges_at_0.9", "alms_diverges_at_1.5", "anclms_converges_at_0.9", "anclms_diverges_at_1.5"],
    )
}

fn whitening() -> Outcome {
    let mut cfg = RunConfig::new(Experiment::Convergence);
    cfg.profile = cfg.profile.with_k_tiq_db(6.0);
    let report = run(&cfg);
    let mut out = checks(&report, &["whitened_faster", "speedup_ratio"]);
    if let Some(ch) = report.find_check("iteration_counts_near_reference") {
        out.detail.push_str(&format!("; reference counts {}", if ch.passed { "matched" } else { "not matched" }));
    }
    out
}

fn power_budget() -> Outcome {
    checks(
        &run(&RunConfig::new(Experiment::PowerBudget)),
        &["thermal_below_quantization_above_20dbm", "thermal_above_quantization_below_15dbm", "rendered_matches_analytic"],
    )
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();

    // regressor structure
    let window: Vec<Complex64> = (0..5).map(|i| c(0.3 * i as f64 - 0.5, 0.1 * i as f64)).collect();
    let (k, n) = (2.0f64, 3);
    let z = build_augmented_nonlinear(&window, k, n).expect("regressor").values;
    let half = window.len() + n;
    let mut layout = z.len() == 2 * half;
    for (i, x) in window.iter().enumerate() {
        layout &= z[i] == *x && z[half + i] == x.conj();
    }
    for (i, x) in window.iter().take(n).enumerate() {
        let imd = x * x.norm_sqr() * k.powf(1.5);
        layout &= (z[window.len() + i] - imd).norm() < 1e-12 && z[half + window.len() + i] == z[window.len() + i].conj();
    }
    if !layout {
        failures.push("regressor layout");
    }

    // component sum and determinism
    let profile = TransceiverProfile::type2();
    let budget = profile_noise_budget(&profile).expect("budget");
    let ch = synthesize_channels(&profile, 5, 4, 3).expect("channels");
    let x = gen_proper_gaussian(2000, budget.sigma_x2, 3).expect("source");
    let opts = RenderOptions { include_soi: true };
    let obs = render_observation_with(&x, &ch, &budget, &profile, 3, opts).expect("render");
    let sum_ok = obs.d.samples().iter().enumerate().all(|(i, d)| {
        let s: Complex64 = obs.components.named().iter().map(|(_, v)| v[i]).sum();
        (d - s).norm() <= 1e-12 * d.norm().max(1e-12)
    });
    if !sum_ok {
        failures.push("component sum");
    }
    let again = render_observation_with(&x, &ch, &budget, &profile, 3, opts).expect("render");
    let x_again = gen_proper_gaussian(2000, budget.sigma_x2, 3).expect("source");
    if obs != again || x != x_again {
        failures.push("determinism");
    }

    // transient fixed points
    let small = ChannelSet::new(
        vec![c(1.0, 0.2), c(-0.4, 0.3), c(0.1, -0.05)],
        vec![c(0.05, 0.01), c(0.0, -0.02), c(0.01, 0.0)],
        vec![c(0.3, -0.1), c(0.05, 0.2)],
        vec![c(0.02, 0.01), c(-0.01, 0.0)],
    )
    .expect("channels");
    let base = TheoryInputs { sigma_x2: 0.5, sigma_v2: 1e-3, sigma_q2: 1e-4, k_tiq: 1.5, m: 3, n: 2, mu: 0.0, channels: small, p_x_soi: 1.0 };
    let lin = base.with_mu(0.1 * alms_ms_bound(base.sigma_x2, base.m));
    for regime in [Regime::Low, Regime::High] {
        let curve = alms_transient(&lin, regime, 20_000).expect("transient");
        let last = *curve.mse.last().expect("curve");
        let steady = alms_steady_mse(&lin, regime).expect("steady");
        if (last / steady - 1.0).abs() > 1e-3 {
            failures.push("linear transient fixed point");
        }
    }
    let nl = base.with_mu(0.1 * anclms_ms_bound_gaussian(base.sigma_x2, base.k_tiq, base.m, base.n).expect("bound"));
    let curve = anclms_transient(&nl, 200_000).expect("transient");
    if (curve.last().expect("curve") / anclms_steady_mse(&nl) - 1.0).abs() > 1e-3 {
        failures.push("nonlinear transient fixed point");
    }

    // converged nonlinear canceller against least squares
    let tiny = ChannelSet::new(vec![c(0.9, -0.2), c(0.3, 0.4)], vec![c(0.05, 0.02), c(-0.02, 0.01)], vec![c(0.2, 0.1)], vec![c(0.01, -0.02)])
        .expect("channels");
    let (s2, k) = (0.5, 2.0);
    let silent = NoiseBudget { sigma_x2: s2, sigma_v2: 0.0, sigma_q2: 0.0, k_bb: 1.0, p_x_soi: 1.0, alpha1: 0.0 };
    let prof = TransceiverProfile::type2().with_k_tiq_db(linear_to_db(k));
    let x = gen_proper_gaussian(60_000, s2, 9).expect("source");
    let obs = render_observation(&x, &tiny, &silent, &prof, 9).expect("render");
    let regs = nonlinear_regressors(x.samples(), 2, 1, k).expect("regressors");
    let ls = least_squares(&regs, &obs.d.samples()[1..]);
    let mu = 0.2 * anclms_ms_bound_gaussian(s2, k, 2, 1).expect("bound");
    for whiten in [false, true] {
        let mut cc = CancellerConfig::new(CancellerKind::Anclms, mu, 2, 1, k);
        cc.whiten = whiten;
        let tr = run_canceller(&x, &obs.d, &cc).expect("run");
        let agree = !tr.diverged && tr.final_weights.iter().zip(&ls).all(|(a, b)| (a - b).norm() <= 1e-4 * b.norm().max(1e-2));
        if !agree {
            failures.push(if whiten { "whitened least-squares oracle" } else { "least-squares oracle" });
        }
    }

    Outcome::new(failures.is_empty(), if failures.is_empty() { "all suites green".to_string() } else { format!("failed: {}", failures.join(", ")) })
}

/// `argmin Σ|d − zᵀw|²` from the normal equations.
fn least_squares(regs: &[Vec<Complex64>], d: &[Complex64]) -> Vec<Complex64> {
    let dim = regs[0].len();
    let mut a = CMatrix::zeros(dim, dim);
    let mut b = CVector::zeros(dim);
    for (z, &dn) in regs.iter().zip(d) {
        for i in 0..dim {
            b[i] += z[i].conj() * dn;
            for j in 0..dim {
                a[(i, j)] += z[i].conj() * z[j];
            }
        }
    }
    a.lu().solve(&b).expect("normal equations").iter().copied().collect()
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 9] = [
        ("minimum condition number", min_condition, 1),
        ("nonlinear covariance spectrum", rb_spectrum, 60),
        ("linear canceller bias", bias, 300),
        ("steady-state SINR", steady_sinr, 900),
        ("low-power limit", low_power_limit, 180),
        ("step-size dichotomy", dichotomy, 600),
        ("pre-whitening speedup", whitening, 300),
        ("power-budget crossover", power_budget, 60),
        ("property suites", property_suites, 120),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*limit);
        let passed = out.passed && in_time;
        failed += usize::from(!passed);
        println!(
            "criterion {}: {} {name} [{:.1} s of {limit} s] {}",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
