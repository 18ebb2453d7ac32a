//! Augmented LMS and augmented nonlinear LMS cancellers.
//!
//! Regressor windows are ordered newest first: `window[i] = x(n−i)`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, sample_covariance, CMatrix};
use crate::signal::ComplexSequence;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorVariant {
    /// `[x; x*]`, length 2M.
    Linear,
    /// `[x; x_imd; x*; x_imd*]`, length 2M+2N.
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRegressor {
    pub values: Vec<Complex64>,
    pub variant: RegressorVariant,
}

pub fn build_augmented(window: &[Complex64]) -> Result<AugmentedRegressor> {
    if window.is_empty() {
        return Err(invalid("window must hold M ≥ 1 samples"));
    }
    let mut values = Vec::with_capacity(2 * window.len());
    values.extend_from_slice(window);
    values.extend(window.iter().map(|s| s.conj()));
    Ok(AugmentedRegressor { values, variant: RegressorVariant::Linear })
}

pub fn build_augmented_nonlinear(window: &[Complex64], k_tiq: f64, n: usize) -> Result<AugmentedRegressor> {
    let m = window.len();
    if m == 0 {
        return Err(invalid("window must hold M ≥ 1 samples"));
    }
    if n >= m {
        return Err(invalid(format!("N must be smaller than M, got N={n}, M={m}")));
    }
    let mut values = vec![ZERO; 2 * (m + n)];
    fill_nonlinear(&mut values, window, k_tiq.powf(1.5), n);
    Ok(AugmentedRegressor { values, variant: RegressorVariant::Nonlinear })
}

fn fill_linear(buf: &mut [Complex64], window: &[Complex64]) {
    let m = window.len();
    for (i, &s) in window.iter().enumerate() {
        buf[i] = s;
        buf[m + i] = s.conj();
    }
}

fn fill_nonlinear(buf: &mut [Complex64], window: &[Complex64], k32: f64, n: usize) {
    let m = window.len();
    let half = m + n;
    for (i, &s) in window.iter().enumerate() {
        buf[i] = s;
        buf[half + i] = s.conj();
    }
    for (i, &s) in window.iter().take(n).enumerate() {
        let v = s * (k32 * s.norm_sqr());
        buf[m + i] = v;
        buf[half + m + i] = v.conj();
    }
}

/// `Φ = Λ^{-1/2}Uᴴ` fitted on a regressor sample, so that `Φ R̂ Φᴴ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub matrix: CMatrix,
    pub eigenvalues: Vec<f64>,
    pub basis: CMatrix,
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, z: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        for (r, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = ZERO;
            for (c, zc) in z.iter().enumerate() {
                acc += self.matrix[(r, c)] * zc;
            }
            *o = acc;
        }
    }

    /// Maps weights in whitened coordinates to the equivalent weights for the
    /// raw regressor: `(Φz)ᵀw̃ = zᵀ(Φᵀw̃)`.
    pub fn to_original(&self, w: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        (0..d).map(|c| (0..d).map(|r| self.matrix[(r, c)] * w[r]).sum()).collect()
    }
}

/// Fits a whitener on at least `10·dim` regressors.
pub fn prewhiten_fit(sample_regressors: &[Vec<Complex64>]) -> Result<WhiteningTransform> {
    let dim = sample_regressors.first().map(|r| r.len()).unwrap_or(0);
    if dim == 0 {
        return Err(invalid("no regressors supplied"));
    }
    if sample_regressors.len() < 10 * dim {
        return Err(invalid(format!(
            "need at least {} regressors of dimension {dim}, got {}",
            10 * dim,
            sample_regressors.len()
        )));
    }
    if sample_regressors.iter().any(|r| r.len() != dim) {
        return Err(invalid("regressors differ in length"));
    }
    let cov = sample_covariance(sample_regressors.iter().map(|r| r.as_slice()), dim);
    let (vals, basis) = hermitian_eigen(&cov);
    if let Some(bad) = vals.iter().find(|&&v| v <= 1e-12) {
        return Err(Error::DegenerateInput(format!("regressor covariance is singular (eigenvalue {bad:e})")));
    }
    let matrix = CMatrix::from_fn(dim, dim, |r, c| basis[(c, r)].conj() / vals[r].sqrt());
    Ok(WhiteningTransform { matrix, eigenvalues: vals, basis })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CancellerKind {
    /// Augmented (widely linear) LMS.
    Alms,
    /// Augmented nonlinear LMS.
    Anclms,
}

impl CancellerKind {
    pub fn label(self) -> &'static str {
        match self {
            CancellerKind::Alms => "alms",
            CancellerKind::Anclms => "anclms",
        }
    }

    pub fn dim(self, m: usize, n: usize) -> usize {
        match self {
            CancellerKind::Alms => 2 * m,
            CancellerKind::Anclms => 2 * (m + n),
        }
    }
}

/// Weights and step size of one canceller. With a whitener attached the
/// weights live in whitened coordinates; [`weights`](Self::weights) maps
/// them back.
#[derive(Debug, Clone, PartialEq)]
pub struct CancellerState {
    weights: Vec<Complex64>,
    pub mu: f64,
    pub iteration: u64,
    pub kind: CancellerKind,
    whitener: Option<WhiteningTransform>,
    scratch: Vec<Complex64>,
}

impl CancellerState {
    pub fn new(kind: CancellerKind, dim: usize, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!("step size must be nonnegative, got {mu}")));
        }
        if dim == 0 {
            return Err(invalid("weight dimension must be positive"));
        }
        Ok(Self { weights: vec![ZERO; dim], mu, iteration: 0, kind, whitener: None, scratch: vec![ZERO; dim] })
    }

    pub fn with_whitener(mut self, whitener: WhiteningTransform) -> Result<Self> {
        if self.kind != CancellerKind::Anclms {
            return Err(Error::InvalidState("whitening is only defined for the nonlinear canceller".into()));
        }
        if whitener.dim() != self.weights.len() {
            return Err(invalid("whitener dimension does not match the weights"));
        }
        self.whitener = Some(whitener);
        Ok(self)
    }

    pub fn whitener(&self) -> Option<&WhiteningTransform> {
        self.whitener.as_ref()
    }

    /// Weights for the raw (unwhitened) regressor.
    pub fn weights(&self) -> Vec<Complex64> {
        match &self.whitener {
            Some(w) => w.to_original(&self.weights),
            None => self.weights.clone(),
        }
    }

    /// Weights in the coordinates the filter adapts in.
    pub fn internal_weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn alms_step(&mut self, regressor: &AugmentedRegressor, d: Complex64) -> Result<Complex64> {
        if self.kind != CancellerKind::Alms {
            return Err(Error::InvalidState("alms_step called on a nonlinear canceller".into()));
        }
        if regressor.variant != RegressorVariant::Linear || regressor.values.len() != self.weights.len() {
            return Err(invalid("regressor does not match the linear canceller"));
        }
        Ok(self.step_raw(&regressor.values, d))
    }

    pub fn anclms_step(&mut self, regressor: &AugmentedRegressor, d: Complex64) -> Result<Complex64> {
        if self.kind != CancellerKind::Anclms {
            return Err(Error::InvalidState("anclms_step called on a linear canceller".into()));
        }
        if regressor.variant != RegressorVariant::Nonlinear || regressor.values.len() != self.weights.len() {
            return Err(invalid("regressor does not match the nonlinear canceller"));
        }
        Ok(self.step_raw(&regressor.values, d))
    }

    /// Prediction `zᵀw` for a raw regressor.
    pub fn predict(&self, z: &[Complex64]) -> Complex64 {
        match &self.whitener {
            Some(w) => {
                let mut t = vec![ZERO; z.len()];
                w.apply(z, &mut t);
                dot(&t, &self.weights)
            }
            None => dot(z, &self.weights),
        }
    }

    fn step_raw(&mut self, z: &[Complex64], d: Complex64) -> Complex64 {
        if let Some(w) = &self.whitener {
            let mut t = std::mem::take(&mut self.scratch);
            w.apply(z, &mut t);
            let e = lms_update(&mut self.weights, &t, d, self.mu);
            self.scratch = t;
            self.iteration += 1;
            e
        } else {
            self.iteration += 1;
            lms_update(&mut self.weights, z, d, self.mu)
        }
    }
}

#[inline]
fn dot(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    z.iter().zip(w).map(|(a, b)| a * b).sum()
}

#[inline]
fn lms_update(w: &mut [Complex64], z: &[Complex64], d: Complex64, mu: f64) -> Complex64 {
    let e = d - dot(z, w);
    let g = e * mu;
    for (wi, zi) in w.iter_mut().zip(z) {
        *wi += g * zi.conj();
    }
    e
}

/// Driver settings for [`run_canceller`].
#[derive(Debug, Clone, PartialEq)]
pub struct CancellerConfig {
    pub kind: CancellerKind,
    pub mu: f64,
    pub m: usize,
    pub n: usize,
    pub k_tiq: f64,
    pub whiten: bool,
    /// Trailing samples averaged for the steady state. `None` uses the final
    /// 20% of the run with a floor of 2000 samples.
    pub steady_window: Option<usize>,
    /// Block length for the averaged trace.
    pub block: usize,
    /// Regressors used to fit the whitener. `None` uses `50·dim`.
    pub preamble: Option<usize>,
    /// Stop once a block average exceeds this multiple of the first block.
    pub divergence_factor: f64,
    /// Reference weights and tap indices whose errors are recorded once per
    /// block.
    pub reference: Option<Vec<Complex64>>,
    pub tracked_taps: Vec<usize>,
}

impl CancellerConfig {
    pub fn new(kind: CancellerKind, mu: f64, m: usize, n: usize, k_tiq: f64) -> Self {
        Self {
            kind,
            mu,
            m,
            n,
            k_tiq,
            whiten: false,
            steady_window: None,
            block: 100,
            preamble: None,
            divergence_factor: 1e3,
            reference: None,
            tracked_taps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim(self.m, self.n)
    }
}

/// Result of one streaming run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// `|e(n)|²` for every adapted sample.
    pub error_power: Vec<f64>,
    /// Block averages of `error_power`.
    pub block_mse: Vec<f64>,
    pub block: usize,
    pub final_weights: Vec<Complex64>,
    /// Weights averaged over the steady window (raw coordinates).
    pub steady_mean_weights: Vec<Complex64>,
    pub steady_state_mse: f64,
    pub steady_state_window: (usize, usize),
    pub diverged: bool,
    /// One entry per block: errors `w_i − w°_i` of the tracked taps.
    pub tap_errors: Vec<Vec<Complex64>>,
}

impl RunTrace {
    /// Block-wise SINR (dB) for a signal of interest with power `p_soi`.
    pub fn sinr_db(&self, p_soi: f64) -> Vec<f64> {
        self.block_mse.iter().map(|&j| 10.0 * (p_soi / j).log10()).collect()
    }
}

fn steady_len(total: usize, requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| (total / 5).max(2000)).min(total)
}

/// Streams `x`, `d` through the canceller from `n = M−1` onwards.
pub fn run_canceller(x: &ComplexSequence, d: &ComplexSequence, cfg: &CancellerConfig) -> Result<RunTrace> {
    run_canceller_slices(x.samples(), d.samples(), cfg)
}

pub fn run_canceller_slices(x: &[Complex64], d: &[Complex64], cfg: &CancellerConfig) -> Result<RunTrace> {
    if !(cfg.mu > 0.0 && cfg.mu.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {}", cfg.mu)));
    }
    if x.len() != d.len() {
        return Err(invalid("x and d must have equal length"));
    }
    let (m, n) = (cfg.m, cfg.n);
    if m == 0 || (cfg.kind == CancellerKind::Anclms && n >= m) {
        return Err(invalid(format!("invalid filter orders M={m}, N={n}")));
    }
    if cfg.whiten && cfg.kind != CancellerKind::Anclms {
        return Err(invalid("whitening is only defined for the nonlinear canceller"));
    }
    if cfg.block == 0 {
        return Err(invalid("block length must be positive"));
    }
    if x.len() < m {
        return Err(invalid("sequence shorter than the filter"));
    }
    let total = x.len() - m + 1;
    let steady = steady_len(total, cfg.steady_window);
    if x.len() <= m + steady.min(total.saturating_sub(1)) {
        return Err(invalid("sequence too short for the steady-state window"));
    }
    let dim = cfg.dim();
    if let Some(r) = &cfg.reference {
        if r.len() != dim {
            return Err(invalid("reference weights have the wrong length"));
        }
    }
    if cfg.tracked_taps.iter().any(|&t| t >= dim) {
        return Err(invalid("tracked tap index out of range"));
    }

    let k32 = cfg.k_tiq.powf(1.5);
    let mut window = vec![ZERO; m];
    let fill = |buf: &mut [Complex64], window: &mut [Complex64], pos: usize| {
        for i in 0..m {
            window[i] = x[pos - i];
        }
        match cfg.kind {
            CancellerKind::Alms => fill_linear(buf, window),
            CancellerKind::Anclms => fill_nonlinear(buf, window, k32, n),
        }
    };

    let mut state = CancellerState::new(cfg.kind, dim, cfg.mu)?;
    if cfg.whiten {
        let p = cfg.preamble.unwrap_or(50 * dim).min(total);
        let mut sample = Vec::with_capacity(p);
        for k in 0..p {
            let mut z = vec![ZERO; dim];
            fill(&mut z, &mut window, m - 1 + k);
            sample.push(z);
        }
        state = state.with_whitener(prewhiten_fit(&sample)?)?;
    }

    let steady_start = total - steady;
    let mut z = vec![ZERO; dim];
    let mut error_power = Vec::with_capacity(total);
    let mut block_mse = Vec::with_capacity(total / cfg.block + 1);
    let mut tap_errors = Vec::new();
    let mut steady_sum = vec![ZERO; dim];
    let mut steady_count = 0usize;
    let mut block_acc = 0.0;
    let mut diverged = false;

    for k in 0..total {
        fill(&mut z, &mut window, m - 1 + k);
        let e = state.step_raw(&z, d[m - 1 + k]);
        let p = e.norm_sqr();
        error_power.push(p);
        block_acc += p;
        if k >= steady_start {
            for (s, w) in steady_sum.iter_mut().zip(state.internal_weights()) {
                *s += w;
            }
            steady_count += 1;
        }
        if (k + 1) % cfg.block == 0 {
            let avg = block_acc / cfg.block as f64;
            block_acc = 0.0;
            block_mse.push(avg);
            if let Some(r) = &cfg.reference {
                if !cfg.tracked_taps.is_empty() {
                    let w = state.weights();
                    tap_errors.push(cfg.tracked_taps.iter().map(|&t| w[t] - r[t]).collect());
                }
            }
            if !avg.is_finite() || avg > cfg.divergence_factor * block_mse[0] {
                diverged = true;
                break;
            }
        }
    }

    let len = error_power.len();
    let (start, steady_state_mse, steady_mean_weights) = if diverged {
        (len, f64::INFINITY, state.weights())
    } else {
        let start = len - steady.min(len);
        let mse = error_power[start..].iter().sum::<f64>() / (len - start) as f64;
        let inv = Complex64::new(1.0 / steady_count.max(1) as f64, 0.0);
        let mean_internal: Vec<Complex64> = steady_sum.iter().map(|s| s * inv).collect();
        let mean = match state.whitener() {
            Some(w) => w.to_original(&mean_internal),
            None => mean_internal,
        };
        (start, mse, mean)
    };

    Ok(RunTrace {
        error_power,
        block_mse,
        block: cfg.block,
        final_weights: state.weights(),
        steady_mean_weights,
        steady_state_mse,
        steady_state_window: (start, len),
        diverged,
        tap_errors,
    })
}

/// Nonlinear regressors `[x; x_imd; x*; x_imd*]` for every full window of `x`.
pub fn nonlinear_regressors(x: &[Complex64], m: usize, n: usize, k_tiq: f64) -> Result<Vec<Vec<Complex64>>> {
    regressors(x, m, n, k_tiq, CancellerKind::Anclms)
}

pub fn regressors(x: &[Complex64], m: usize, n: usize, k_tiq: f64, kind: CancellerKind) -> Result<Vec<Vec<Complex64>>> {
    if m == 0 || (kind == CancellerKind::Anclms && n >= m) {
        return Err(invalid(format!("invalid filter orders M={m}, N={n}")));
    }
    if x.len() < m {
        return Ok(Vec::new());
    }
    let k32 = k_tiq.powf(1.5);
    let dim = kind.dim(m, n);
    let mut window = vec![ZERO; m];
    Ok((m - 1..x.len())
        .map(|pos| {
            for i in 0..m {
                window[i] = x[pos - i];
            }
            let mut z = vec![ZERO; dim];
            match kind {
                CancellerKind::Alms => fill_linear(&mut z, &window),
                CancellerKind::Anclms => fill_nonlinear(&mut z, &window, k32, n),
            }
            z
        })
        .collect())
}

/// `E[z zᴴ]` over every full window of `x`, accumulated without storing the
/// regressors.
pub fn regressor_covariance(x: &[Complex64], m: usize, n: usize, k_tiq: f64, kind: CancellerKind) -> Result<CMatrix> {
    if m == 0 || (kind == CancellerKind::Anclms && n >= m) {
        return Err(invalid(format!("invalid filter orders M={m}, N={n}")));
    }
    if x.len() < m {
        return Err(invalid("sequence shorter than the filter"));
    }
    let k32 = k_tiq.powf(1.5);
    let dim = kind.dim(m, n);
    let mut window = vec![ZERO; m];
    let mut z = vec![ZERO; dim];
    let mut acc = CMatrix::zeros(dim, dim);
    for pos in m - 1..x.len() {
        for i in 0..m {
            window[i] = x[pos - i];
        }
        match kind {
            CancellerKind::Alms => fill_linear(&mut z, &window),
            CancellerKind::Anclms => fill_nonlinear(&mut z, &window, k32, n),
        }
        for i in 0..dim {
            for j in i..dim {
                acc[(i, j)] += z[i] * z[j].conj();
            }
        }
    }
    let count = (x.len() - m + 1) as f64;
    for i in 0..dim {
        for j in 0..i {
            acc[(i, j)] = acc[(j, i)].conj();
        }
    }
    Ok(acc / Complex64::new(count, 0.0))
}
