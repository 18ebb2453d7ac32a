//! Monte Carlo checks of the closed forms against independent estimates.

use fdsic_core::cancellers::*;
use fdsic_core::linalg::{hermitian_eigenvalues, CMatrix, CVector};
use fdsic_core::signal::gen_proper_gaussian;
use fdsic_core::theory::*;
use fdsic_core::transceiver::*;
use fdsic_core::units::linear_to_db;
use fdsic_core::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn small_channels() -> ChannelSet {
    ChannelSet::new(
        vec![c(1.0, 0.3), c(-0.5, 0.2), c(0.2, -0.1)],
        vec![c(0.06, -0.02), c(0.03, 0.01), c(-0.01, 0.02)],
        vec![c(0.25, -0.1), c(-0.08, 0.15)],
        vec![c(0.04, 0.02), c(0.01, -0.03)],
    )
    .unwrap()
}

fn silent_budget(sigma_x2: f64) -> NoiseBudget {
    NoiseBudget { sigma_x2, sigma_v2: 0.0, sigma_q2: 0.0, k_bb: 1.0, p_x_soi: 1.0, alpha1: 0.0 }
}

/// `argmin Σ|d − zᵀw|²` via the normal equations `(Σ z* zᵀ) w = Σ z* d`.
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
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn nonlinear_covariance_spectrum_matches_closed_form() {
    let (s2, k, m, n) = (0.5, 2.0, 4, 2);
    let x = gen_proper_gaussian(400_000, s2, 7).unwrap();
    let cov = regressor_covariance(x.samples(), m, n, k, CancellerKind::Anclms).unwrap();
    let sample = hermitian_eigenvalues(&cov);
    let closed = rb_eigenvalues(s2, k, m, n).expanded();
    for (a, b) in sample.iter().zip(&closed) {
        assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
    }
}

#[test]
fn fourth_moment_estimate_matches_gaussian_closed_form() {
    let (s2, k, m, n) = (0.4, 1.5, 2, 1);
    let x = gen_proper_gaussian(300_000, s2, 11).unwrap();
    let sampled = estimate_fourth_moment(&nonlinear_regressors(x.samples(), m, n, k).unwrap()).unwrap();
    let exact = gaussian_fourth_moment(s2, k, m, n);
    let scale = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = (&sampled - &exact).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(err < 0.05 * scale, "max deviation {err} against scale {scale}");
}

#[test]
fn sampled_ms_bound_tracks_gaussian_bound() {
    let (s2, k, m, n) = (0.4, 1.5, 2, 1);
    let x = gen_proper_gaussian(200_000, s2, 3).unwrap();
    let regs = nonlinear_regressors(x.samples(), m, n, k).unwrap();
    let sampled = anclms_ms_bound(&regs, s2, k, m, n).unwrap();
    let exact = anclms_ms_bound_gaussian(s2, k, m, n).unwrap();
    assert!((sampled / exact - 1.0).abs() < 0.05, "{sampled} vs {exact}");
    assert!(anclms_ms_bound(&regs[..10], s2, k, m, n).is_err());
}

#[test]
fn linear_least_squares_carries_predicted_bias() {
    let ch = small_channels();
    let s2 = 0.5;
    let profile = TransceiverProfile::type2().with_k_tiq_db(linear_to_db(2.0));
    let x = gen_proper_gaussian(200_000, s2, 5).unwrap();
    let obs = render_observation(&x, &ch, &silent_budget(s2), &profile, 5).unwrap();
    let regs = regressors(x.samples(), 3, 2, 2.0, CancellerKind::Alms).unwrap();
    let w = least_squares(&regs, &obs.d.samples()[2..]);
    let err: Vec<Complex64> = w.iter().zip(ch.linear_weights()).map(|(a, b)| a - b).collect();
    let inputs = TheoryInputs {
        sigma_x2: s2,
        sigma_v2: 0.0,
        sigma_q2: 0.0,
        k_tiq: 2.0,
        m: 3,
        n: 2,
        mu: 0.0,
        channels: ch,
        p_x_soi: 1.0,
    };
    let bias = alms_bias(&inputs);
    assert!(dist(&err, &bias) < 0.03 * norm(&bias), "{err:?} vs {bias:?}");
}

#[test]
fn nonlinear_canceller_converges_to_least_squares_solution() {
    let ch = ChannelSet::new(
        vec![c(0.9, -0.2), c(0.3, 0.4)],
        vec![c(0.05, 0.02), c(-0.02, 0.01)],
        vec![c(0.2, 0.1)],
        vec![c(0.01, -0.02)],
    )
    .unwrap();
    let (s2, k) = (0.5, 2.0);
    let profile = TransceiverProfile::type2().with_k_tiq_db(linear_to_db(k));
    let x = gen_proper_gaussian(60_000, s2, 9).unwrap();
    let obs = render_observation(&x, &ch, &silent_budget(s2), &profile, 9).unwrap();
    let regs = nonlinear_regressors(x.samples(), 2, 1, k).unwrap();
    let ls = least_squares(&regs, &obs.d.samples()[1..]);
    let mu = 0.2 * anclms_ms_bound_gaussian(s2, k, 2, 1).unwrap();
    for whiten in [false, true] {
        let mut cfg = CancellerConfig::new(CancellerKind::Anclms, mu, 2, 1, k);
        cfg.whiten = whiten;
        let tr = run_canceller(&x, &obs.d, &cfg).unwrap();
        assert!(!tr.diverged);
        for (a, b) in tr.final_weights.iter().zip(&ls) {
            assert!((a - b).norm() <= 1e-4 * b.norm().max(1e-2), "whiten={whiten}: {a} vs {b}");
        }
    }
}

#[test]
fn imd_component_power_matches_budget() {
    let profile = TransceiverProfile::type2();
    let budget = profile_noise_budget(&profile).unwrap();
    let ch = synthesize_channels(&profile, 5, 4, 1).unwrap();
    let x = gen_proper_gaussian(200_000, budget.sigma_x2, 2).unwrap();
    let obs = render_observation(&x, &ch, &budget, &profile, 2).unwrap();
    let k3s6 = profile.k_tiq_lin().powi(3) * budget.sigma_x2.powi(3);
    let energy = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let powers = obs.components.powers();
    let measured = |name: &str| powers.iter().find(|(k, _)| *k == name).unwrap().1;
    let imd = 6.0 * k3s6 * energy(&ch.h_imd);
    let image_imd = 6.0 * k3s6 * energy(&ch.g_imd);
    assert!((measured("imd_si") / imd - 1.0).abs() < 0.03);
    assert!((measured("image_imd_si") / image_imd - 1.0).abs() < 0.05);
    assert!((measured("linear_si") / (budget.sigma_x2 * energy(&ch.h)) - 1.0).abs() < 0.03);
}

#[test]
fn linear_canceller_low_power_steady_state() {
    let profile = TransceiverProfile::type2().with_tx_power(-5.0);
    let budget = profile_noise_budget(&profile).unwrap();
    let ch = synthesize_channels(&profile, 5, 4, 1).unwrap();
    let mu = 0.1 / (6.0 * budget.sigma_x2);
    let trials = 20;
    let mut total = 0.0;
    for t in 0..trials {
        let x = gen_proper_gaussian(30_004, budget.sigma_x2, 100 + t).unwrap();
        let obs = render_observation(&x, &ch, &budget, &profile, 100 + t).unwrap();
        let tr = run_canceller(&x, &obs.d, &CancellerConfig::new(CancellerKind::Alms, mu, 5, 4, profile.k_tiq_lin())).unwrap();
        total += tr.steady_state_mse;
    }
    let inputs = TheoryInputs::new(&profile, &budget, &ch, mu).unwrap();
    let closed = alms_steady_mse(&inputs, Regime::Low).unwrap();
    let sim = total / trials as f64;
    assert!((sim / closed - 1.0).abs() < 0.05, "{sim} vs {closed}");
}

/// With a fresh regressor every step the independence assumption holds
/// exactly, so the closed form must hold right up to the bound.
#[test]
fn linear_closed_form_is_exact_for_independent_regressors() {
    let (m, s2, sv2) = (5usize, 1.0, 1e-3);
    let w0: Vec<Complex64> = (0..2 * m).map(|i| c(1.0 / (i + 1) as f64, 0.3 - 0.05 * i as f64)).collect();
    let normal = Normal::new(0.0, (s2 / 2.0f64).sqrt()).unwrap();
    let noise = Normal::new(0.0, (sv2 / 2.0f64).sqrt()).unwrap();
    for frac in [0.5, 0.9] {
        let mu = frac * alms_ms_bound(s2, m);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let (mut acc, mut count) = (0.0, 0usize);
        for _ in 0..10 {
            let mut state = CancellerState::new(CancellerKind::Alms, 2 * m, mu).unwrap();
            for it in 0..40_000 {
                let xs: Vec<Complex64> = (0..m).map(|_| c(normal.sample(&mut rng), normal.sample(&mut rng))).collect();
                let reg = build_augmented(&xs).unwrap();
                let v = c(noise.sample(&mut rng), noise.sample(&mut rng));
                let d: Complex64 = reg.values.iter().zip(&w0).map(|(z, w)| z * w).sum::<Complex64>() + v;
                let e = state.alms_step(&reg, d).unwrap();
                if it >= 20_000 {
                    acc += e.norm_sqr();
                    count += 1;
                }
            }
        }
        let sim = acc / count as f64;
        let closed = (1.0 - mu * s2) * sv2 / (1.0 - mu * (m as f64 + 1.0) * s2);
        assert!((sim / closed - 1.0).abs() < 0.1, "frac {frac}: {sim} vs {closed}");
    }
}
