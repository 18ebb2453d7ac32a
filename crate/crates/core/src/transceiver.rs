//! Hardware profiles, end-to-end channels, noise budget and rendering of the
//! pre-cancellation observation.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::signal::{mean_power, proper_gaussian, ComplexSequence};
use crate::units::{db_to_linear, linear_to_db};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Transceiver hardware parameters. Fields are stored as given (dB / dBm);
/// the `*_lin` getters convert to linear power or mW.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverProfile {
    pub p_sen_dbm: f64,
    pub snr_req_db: f64,
    pub noise_floor_dbm: f64,
    pub rf_separation_db: f64,
    pub rf_attenuation_db: f64,
    pub irr_db: f64,
    pub k_tiq_db: f64,
    pub k_riq_db: f64,
    pub pa_gain_db: f64,
    pub pa_iip3_dbm: f64,
    pub k_lna_db: f64,
    pub tx_power_dbm: f64,
    pub adc_dynamic_range_db: f64,
    pub adc_bits: u32,
    pub papr_db: f64,
    pub k_vga_db: f64,
}

const TYPE1: &str = include_str!("../profiles/type1.profile");
const TYPE2: &str = include_str!("../profiles/type2.profile");

impl TransceiverProfile {
    /// Preset with 40 dB RF separation and 30 dB RF attenuation.
    pub fn type1() -> Self {
        Self::parse(TYPE1).expect("bundled profile parses")
    }

    /// Preset with 30 dB RF separation and 20 dB RF attenuation.
    pub fn type2() -> Self {
        Self::parse(TYPE2).expect("bundled profile parses")
    }

    /// Parses `key = value [unit]` lines. `#` starts a comment. Every field
    /// except `k_vga_db` (default 0 dB) must be present.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 16] = [None; 16];
        vals[15] = Some(0.0);
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let (key, rest) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let slot = FIELDS
                .iter()
                .position(|f| *f == key)
                .ok_or_else(|| parse_err(format!("unknown key `{key}`")))?;
            let mut tokens = rest.split_whitespace();
            let num = tokens.next().ok_or_else(|| parse_err(format!("missing value for `{key}`")))?;
            let value: f64 = match num {
                "inf" | "+inf" => f64::INFINITY,
                _ => num.parse().map_err(|_| parse_err(format!("`{num}` is not a number")))?,
            };
            let expected = if key == "adc_bits" {
                None
            } else if key.ends_with("_dbm") {
                Some("dbm")
            } else {
                Some("db")
            };
            match (tokens.next(), expected) {
                (None, _) => {}
                (Some(u), Some(e)) if u.eq_ignore_ascii_case(e) => {}
                (Some(u), _) => return Err(parse_err(format!("unexpected unit `{u}` for `{key}`"))),
            }
            if let Some(extra) = tokens.next() {
                return Err(parse_err(format!("trailing token `{extra}`")));
            }
            vals[slot] = Some(value);
        }
        let get = |i: usize| {
            vals[i].ok_or_else(|| Error::Parse { line: 0, message: format!("missing key `{}`", FIELDS[i]) })
        };
        let bits = get(13)?;
        if bits.fract() != 0.0 || bits < 1.0 {
            return Err(Error::Parse { line: 0, message: format!("adc_bits must be a positive integer, got {bits}") });
        }
        let profile = Self {
            p_sen_dbm: get(0)?,
            snr_req_db: get(1)?,
            noise_floor_dbm: get(2)?,
            rf_separation_db: get(3)?,
            rf_attenuation_db: get(4)?,
            irr_db: get(5)?,
            k_tiq_db: get(6)?,
            k_riq_db: get(7)?,
            pa_gain_db: get(8)?,
            pa_iip3_dbm: get(9)?,
            k_lna_db: get(10)?,
            tx_power_dbm: get(11)?,
            adc_dynamic_range_db: get(12)?,
            adc_bits: bits as u32,
            papr_db: get(14)?,
            k_vga_db: get(15)?,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Renders back to the text format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let vals = self.values();
        let mut out = String::new();
        for (k, v) in FIELDS.iter().zip(vals) {
            let unit = if *k == "adc_bits" {
                ""
            } else if k.ends_with("_dbm") {
                " dBm"
            } else {
                " dB"
            };
            out.push_str(&format!("{k} = {v}{unit}\n"));
        }
        out
    }

    fn values(&self) -> [f64; 16] {
        [
            self.p_sen_dbm,
            self.snr_req_db,
            self.noise_floor_dbm,
            self.rf_separation_db,
            self.rf_attenuation_db,
            self.irr_db,
            self.k_tiq_db,
            self.k_riq_db,
            self.pa_gain_db,
            self.pa_iip3_dbm,
            self.k_lna_db,
            self.tx_power_dbm,
            self.adc_dynamic_range_db,
            self.adc_bits as f64,
            self.papr_db,
            self.k_vga_db,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.adc_bits == 0 {
            return Err(invalid("adc_bits must be at least 1"));
        }
        for (k, v) in FIELDS.iter().zip(self.values()) {
            // an infinite IRR means an ideal mixer with no image branch
            let ok = v.is_finite() || (*k == "irr_db" && v == f64::INFINITY);
            if !ok {
                return Err(invalid(format!("`{k}` must be finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_tx_power(&self, tx_power_dbm: f64) -> Self {
        Self { tx_power_dbm, ..self.clone() }
    }

    pub fn with_k_tiq_db(&self, k_tiq_db: f64) -> Self {
        Self { k_tiq_db, ..self.clone() }
    }

    pub fn p_sen_lin(&self) -> f64 {
        db_to_linear(self.p_sen_dbm)
    }
    pub fn snr_req_lin(&self) -> f64 {
        db_to_linear(self.snr_req_db)
    }
    pub fn k_tiq_lin(&self) -> f64 {
        db_to_linear(self.k_tiq_db)
    }
    pub fn k_riq_lin(&self) -> f64 {
        db_to_linear(self.k_riq_db)
    }
    pub fn k_lna_lin(&self) -> f64 {
        db_to_linear(self.k_lna_db)
    }
    pub fn k_vga_lin(&self) -> f64 {
        db_to_linear(self.k_vga_db)
    }
    pub fn tx_power_lin(&self) -> f64 {
        db_to_linear(self.tx_power_dbm)
    }
    pub fn p_adc_lin(&self) -> f64 {
        db_to_linear(self.adc_dynamic_range_db)
    }

    /// Linear PA gain as an amplitude factor.
    pub fn alpha0(&self) -> f64 {
        db_to_linear(self.pa_gain_db).sqrt()
    }

    /// Third-order PA coefficient from the two-tone intercept definition.
    pub fn alpha1(&self) -> f64 {
        -4.0 / 3.0 * self.alpha0() / db_to_linear(self.pa_iip3_dbm)
    }

    /// Baseband SI variance that yields `tx_power_dbm` at the PA output.
    pub fn sigma_x2(&self) -> f64 {
        self.tx_power_lin() / (self.alpha0().powi(2) * self.k_vga_lin() * self.k_tiq_lin())
    }

    /// Tx power (dBm) that corresponds to a given baseband SI variance.
    pub fn tx_power_for_sigma_x2(&self, sigma_x2: f64) -> f64 {
        linear_to_db(sigma_x2 * self.alpha0().powi(2) * self.k_vga_lin() * self.k_tiq_lin())
    }

    /// Energy of the residual analog SI path, `‖f‖²`.
    pub fn f_rfe_norm2(&self) -> f64 {
        db_to_linear(-(self.rf_separation_db + self.rf_attenuation_db))
    }

    /// Power ratio between image and direct channel.
    pub fn image_ratio(&self) -> f64 {
        if self.irr_db == f64::INFINITY {
            0.0
        } else {
            db_to_linear(-self.irr_db)
        }
    }

    /// Amplitude ratio between the IMD path and the linear path of the PA,
    /// after pulling `k_TIQ^{3/2}` into the IMD regressor.
    pub fn imd_path_ratio(&self) -> f64 {
        self.alpha1() * self.k_vga_lin() / (self.alpha0() * self.k_tiq_lin().sqrt())
    }
}

const FIELDS: [&str; 16] = [
    "p_sen_dbm",
    "snr_req_db",
    "noise_floor_dbm",
    "rf_separation_db",
    "rf_attenuation_db",
    "irr_db",
    "k_tiq_db",
    "k_riq_db",
    "pa_gain_db",
    "pa_iip3_dbm",
    "k_lna_db",
    "tx_power_dbm",
    "adc_dynamic_range_db",
    "adc_bits",
    "papr_db",
    "k_vga_db",
];

/// End-to-end impulse responses seen by the digital canceller.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<Complex64>,
    pub g: Vec<Complex64>,
    pub h_imd: Vec<Complex64>,
    pub g_imd: Vec<Complex64>,
}

impl ChannelSet {
    pub fn new(h: Vec<Complex64>, g: Vec<Complex64>, h_imd: Vec<Complex64>, g_imd: Vec<Complex64>) -> Result<Self> {
        if h.is_empty() || g.len() != h.len() {
            return Err(invalid("h and g must be non-empty and of equal length"));
        }
        if h_imd.len() != g_imd.len() || h_imd.len() >= h.len() {
            return Err(invalid("IMD channels must share a length N < M"));
        }
        let all = h.iter().chain(&g).chain(&h_imd).chain(&g_imd);
        if all.into_iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("channel taps must be finite"));
        }
        Ok(Self { h, g, h_imd, g_imd })
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }

    pub fn n(&self) -> usize {
        self.h_imd.len()
    }

    /// Optimal widely linear weights `[h; g]` for the regressor `[x; x*]`.
    pub fn linear_weights(&self) -> Vec<Complex64> {
        self.h.iter().chain(&self.g).copied().collect()
    }

    /// Optimal weights `[h; h_imd; g; g_imd]` for `[x; x_imd; x*; x_imd*]`.
    pub fn nonlinear_weights(&self) -> Vec<Complex64> {
        self.h.iter().chain(&self.h_imd).chain(&self.g).chain(&self.g_imd).copied().collect()
    }

    /// `‖h_imd‖² + ‖g_imd‖²`.
    pub fn imd_energy(&self) -> f64 {
        norm2(&self.h_imd) + norm2(&self.g_imd)
    }
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn fit_length(mut v: Vec<Complex64>, len: usize) -> Vec<Complex64> {
    v.resize(len, ZERO);
    v
}

fn scale_to_energy(v: &mut [Complex64], energy: f64) {
    let e = norm2(v);
    if e > 0.0 {
        let s = (energy / e).sqrt();
        v.iter_mut().for_each(|c| *c *= s);
    }
}

/// Receiver chain gain from the antenna to the canceller input (power).
fn rx_chain_gain(profile: &TransceiverProfile, k_bb: f64) -> f64 {
    profile.k_lna_lin() * profile.k_riq_lin() * k_bb
}

/// Draws the end-to-end channels for `profile`. The residual analog channel is
/// a 3-tap Rayleigh channel with a [0, −3, −6] dB delay profile, cascaded with
/// 2-tap Tx and Rx IQ filters, and scaled through the full gain chain.
pub fn synthesize_channels(profile: &TransceiverProfile, m: usize, n: usize, seed: u64) -> Result<ChannelSet> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    if n >= m {
        return Err(invalid(format!("N must be smaller than M, got N={n}, M={m}")));
    }
    profile.validate()?;
    let mut rng = rng::stream(seed, rng::STREAM_CHANNEL);

    let pdp = [1.0, 0.5, 0.25];
    let f: Vec<Complex64> = pdp
        .iter()
        .map(|&p| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (p / 2.0f64).sqrt()
        })
        .collect();
    let mut two_tap = |lo: f64, hi: f64| {
        let mag = rng.random_range(lo..hi);
        let phase = rng.random_range(0.0..2.0 * PI);
        vec![Complex64::new(1.0, 0.0), Complex64::from_polar(mag, phase)]
    };
    let tx_direct = two_tap(0.05, 0.2);
    let rx_direct = two_tap(0.05, 0.2);
    let image = two_tap(0.05, 0.5);

    let sigma_x2 = profile.sigma_x2();
    let budget = compute_noise_budget(profile, sigma_x2, profile.f_rfe_norm2())?;
    let tx_gain = profile.alpha0().powi(2) * profile.k_vga_lin() * profile.k_tiq_lin();
    let amp = (tx_gain * rx_chain_gain(profile, budget.k_bb)).sqrt();

    let mut h = fit_length(convolve(&convolve(&f, &tx_direct), &rx_direct), m);
    scale_to_energy(&mut h, profile.f_rfe_norm2());
    h.iter_mut().for_each(|c| *c *= amp);

    let ratio = profile.image_ratio();
    let mut g = fit_length(convolve(&convolve(&f, &image), &rx_direct), m);
    if ratio == 0.0 {
        g.iter_mut().for_each(|c| *c = ZERO);
    } else {
        scale_to_energy(&mut g, norm2(&h) * ratio);
    }

    let r = profile.imd_path_ratio();
    let h_imd = h[..n].iter().map(|c| c * r).collect();
    let g_imd = g[..n].iter().map(|c| c * r).collect();
    ChannelSet::new(h, g, h_imd, g_imd)
}

/// Receiver noise and gain quantities for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    pub sigma_x2: f64,
    pub sigma_v2: f64,
    pub sigma_q2: f64,
    pub k_bb: f64,
    pub p_x_soi: f64,
    pub alpha1: f64,
}

impl NoiseBudget {
    /// `σ_v² + σ_q²`.
    pub fn noise_power(&self) -> f64 {
        self.sigma_v2 + self.sigma_q2
    }
}

/// Baseband gain is chosen so that the strongest expected input (residual SI
/// plus its IMD, plus a sensitivity-level SOI) fills the ADC range.
pub fn compute_noise_budget(profile: &TransceiverProfile, sigma_x2: f64, f_rfe_norm2: f64) -> Result<NoiseBudget> {
    if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
        return Err(invalid(format!("sigma_x2 must be positive, got {sigma_x2}")));
    }
    if !(f_rfe_norm2 >= 0.0) {
        return Err(invalid("f_rfe_norm2 must be nonnegative"));
    }
    let a0 = profile.alpha0();
    let a1 = profile.alpha1();
    let (kv, kt) = (profile.k_vga_lin(), profile.k_tiq_lin());
    let p_sen = profile.p_sen_lin();
    let si_at_antenna =
        (a0 * a0 * kv * kt * sigma_x2 + a1 * a1 * kv.powi(3) * kt.powi(3) * sigma_x2.powi(3)) * f_rfe_norm2;
    let k_bb = profile.p_adc_lin() / (profile.k_lna_lin() * profile.k_riq_lin()) / (si_at_antenna + p_sen);
    let rx = rx_chain_gain(profile, k_bb);
    let sqnr_db = 6.02 * profile.adc_bits as f64 + 4.76 - profile.papr_db;
    Ok(NoiseBudget {
        sigma_x2,
        sigma_v2: rx * p_sen / profile.snr_req_lin(),
        sigma_q2: profile.p_adc_lin() / db_to_linear(sqnr_db),
        k_bb,
        p_x_soi: p_sen * rx,
        alpha1: a1,
    })
}

/// Budget at the profile's own Tx power.
pub fn profile_noise_budget(profile: &TransceiverProfile) -> Result<NoiseBudget> {
    compute_noise_budget(profile, profile.sigma_x2(), profile.f_rfe_norm2())
}

/// Separately stored additive components of `d(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationComponents {
    pub linear_si: Vec<Complex64>,
    pub image_si: Vec<Complex64>,
    pub imd_si: Vec<Complex64>,
    pub image_imd_si: Vec<Complex64>,
    pub thermal: Vec<Complex64>,
    pub quantization: Vec<Complex64>,
    pub soi: Vec<Complex64>,
}

impl ObservationComponents {
    pub fn named(&self) -> [(&'static str, &[Complex64]); 7] {
        [
            ("linear_si", &self.linear_si),
            ("image_si", &self.image_si),
            ("imd_si", &self.imd_si),
            ("image_imd_si", &self.image_imd_si),
            ("thermal", &self.thermal),
            ("quantization", &self.quantization),
            ("soi", &self.soi),
        ]
    }

    /// Mean power of each component, same order as [`named`](Self::named).
    pub fn powers(&self) -> [(&'static str, f64); 7] {
        self.named().map(|(k, v)| (k, mean_power(v)))
    }
}

/// Pre-cancellation observation with its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub d: ComplexSequence,
    pub components: ObservationComponents,
    pub channels: ChannelSet,
    pub budget: NoiseBudget,
}

/// Optional parts of the rendering.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderOptions {
    /// Add a proper Gaussian signal of interest with power `p_x_soi`.
    pub include_soi: bool,
}

/// `k^{3/2}|x|²x` per sample.
pub fn imd_signal(x: &[Complex64], k_tiq: f64) -> Vec<Complex64> {
    let c = k_tiq.powf(1.5);
    x.iter().map(|s| s * (c * s.norm_sqr())).collect()
}

fn fir(x: &[Complex64], taps: &[Complex64], conj_input: bool) -> Vec<Complex64> {
    let mut out = vec![ZERO; x.len()];
    if taps.iter().all(|t| *t == ZERO) {
        return out;
    }
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (i, t) in taps.iter().enumerate().take(n + 1) {
            let s = x[n - i];
            acc += if conj_input { s.conj() } else { s } * t;
        }
        *o = acc;
    }
    out
}

/// Renders `d(n)`. Samples before the start of `x` are taken as zero, so only
/// `n ≥ M−1` carries the full channel memory.
pub fn render_observation(
    x: &ComplexSequence,
    channels: &ChannelSet,
    budget: &NoiseBudget,
    profile: &TransceiverProfile,
    seed: u64,
) -> Result<Observation> {
    render_observation_with(x, channels, budget, profile, seed, RenderOptions::default())
}

pub fn render_observation_with(
    x: &ComplexSequence,
    channels: &ChannelSet,
    budget: &NoiseBudget,
    profile: &TransceiverProfile,
    seed: u64,
    opts: RenderOptions,
) -> Result<Observation> {
    let m = channels.m();
    if x.len() <= m {
        return Err(invalid(format!("sequence of {} samples is too short for M={m}", x.len())));
    }
    let xs = x.samples();
    let len = xs.len();
    let ximd = imd_signal(xs, profile.k_tiq_lin());

    let noise = |variance: f64, stream: u64| {
        if variance > 0.0 {
            proper_gaussian(&mut rng::stream(seed, stream), len, variance)
        } else {
            vec![ZERO; len]
        }
    };
    let components = ObservationComponents {
        linear_si: fir(xs, &channels.h, false),
        image_si: fir(xs, &channels.g, true),
        imd_si: fir(&ximd, &channels.h_imd, false),
        image_imd_si: fir(&ximd, &channels.g_imd, true),
        thermal: noise(budget.sigma_v2, rng::STREAM_THERMAL),
        quantization: noise(budget.sigma_q2, rng::STREAM_QUANTIZATION),
        soi: if opts.include_soi { noise(budget.p_x_soi, rng::STREAM_SOI) } else { vec![ZERO; len] },
    };
    let mut d = vec![ZERO; len];
    for (_, comp) in components.named() {
        for (acc, c) in d.iter_mut().zip(comp) {
            *acc += c;
        }
    }
    Ok(Observation {
        d: ComplexSequence::new(d, x.sample_rate_hz())?,
        components,
        channels: channels.clone(),
        budget: *budget,
    })
}

/// Expected component powers (dBm) at the canceller input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudgetRow {
    pub tx_power_dbm: f64,
    pub linear_si: f64,
    pub image_si: f64,
    pub imd_si: f64,
    pub image_imd_si: f64,
    pub thermal: f64,
    pub quantization: f64,
    pub soi: f64,
}

impl PowerBudgetRow {
    pub const NAMES: [&'static str; 7] =
        ["linear_si", "image_si", "imd_si", "image_imd_si", "thermal", "quantization", "soi"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.linear_si,
            self.image_si,
            self.imd_si,
            self.image_imd_si,
            self.thermal,
            self.quantization,
            self.soi,
        ]
    }
}

/// Analytic component powers for each Tx power, using the channels drawn
/// with `seed` and the proper Gaussian moments `E|x|² = σ²`, `E|x|⁶ = 6σ⁶`.
pub fn compute_power_budget(
    profile: &TransceiverProfile,
    tx_powers_dbm: &[f64],
    m: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<PowerBudgetRow>> {
    if tx_powers_dbm.is_empty() {
        return Err(invalid("Tx power grid must not be empty"));
    }
    tx_powers_dbm
        .iter()
        .map(|&tx| {
            let p = profile.with_tx_power(tx);
            let ch = synthesize_channels(&p, m, n, seed)?;
            let b = profile_noise_budget(&p)?;
            Ok(power_budget_row(&p, &ch, &b))
        })
        .collect()
}

pub fn power_budget_row(profile: &TransceiverProfile, ch: &ChannelSet, b: &NoiseBudget) -> PowerBudgetRow {
    let s2 = b.sigma_x2;
    let imd_var = 6.0 * profile.k_tiq_lin().powi(3) * s2.powi(3);
    PowerBudgetRow {
        tx_power_dbm: profile.tx_power_dbm,
        linear_si: linear_to_db(norm2(&ch.h) * s2),
        image_si: linear_to_db(norm2(&ch.g) * s2),
        imd_si: linear_to_db(norm2(&ch.h_imd) * imd_var),
        image_imd_si: linear_to_db(norm2(&ch.g_imd) * imd_var),
        thermal: linear_to_db(b.sigma_v2),
        quantization: linear_to_db(b.sigma_q2),
        soi: linear_to_db(b.p_x_soi),
    }
}
