//! Closed-form predictions for both cancellers.
//!
//! Weight errors are reported as `w − w°`, where `w°` are the channel weights
//! returned by [`ChannelSet::linear_weights`] / [`ChannelSet::nonlinear_weights`].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cancellers::nonlinear_regressors;
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, CMatrix};
use crate::transceiver::{norm2, ChannelSet, NoiseBudget, TransceiverProfile};
use crate::units::linear_to_db;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Quantities the closed forms depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    pub sigma_x2: f64,
    pub sigma_v2: f64,
    pub sigma_q2: f64,
    pub k_tiq: f64,
    pub m: usize,
    pub n: usize,
    pub mu: f64,
    pub channels: ChannelSet,
    pub p_x_soi: f64,
}

impl TheoryInputs {
    pub fn new(profile: &TransceiverProfile, budget: &NoiseBudget, channels: &ChannelSet, mu: f64) -> Result<Self> {
        let inputs = Self {
            sigma_x2: budget.sigma_x2,
            sigma_v2: budget.sigma_v2,
            sigma_q2: budget.sigma_q2,
            k_tiq: profile.k_tiq_lin(),
            m: channels.m(),
            n: channels.n(),
            mu,
            channels: channels.clone(),
            p_x_soi: budget.p_x_soi,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n >= self.m {
            return Err(invalid(format!("N must be smaller than M, got N={}, M={}", self.n, self.m)));
        }
        if self.channels.m() != self.m || self.channels.n() != self.n {
            return Err(invalid("channel lengths do not match M and N"));
        }
        if !(self.sigma_x2 >= 0.0 && self.sigma_v2 >= 0.0 && self.sigma_q2 >= 0.0 && self.k_tiq >= 0.0) {
            return Err(invalid("variances and gains must be nonnegative"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("step size must be nonnegative"));
        }
        Ok(())
    }

    /// `σ_v² + σ_q²`.
    pub fn noise_power(&self) -> f64 {
        self.sigma_v2 + self.sigma_q2
    }

    /// `ε = k³σ⁴`.
    pub fn epsilon(&self) -> f64 {
        self.k_tiq.powi(3) * self.sigma_x2 * self.sigma_x2
    }

    /// Power of the IMD interference not modelled by the linear canceller,
    /// `6k³σ⁶(‖h_imd‖² + ‖g_imd‖²)`.
    pub fn imd_power(&self) -> f64 {
        6.0 * self.k_tiq.powi(3) * self.sigma_x2.powi(3) * self.channels.imd_energy()
    }
}

// ---------------------------------------------------------------------------
// Augmented LMS

pub fn alms_mean_bound(sigma_x2: f64) -> f64 {
    2.0 / sigma_x2
}

pub fn alms_ms_bound(sigma_x2: f64, m: usize) -> f64 {
    1.0 / ((m as f64 + 1.0) * sigma_x2)
}

/// Which steady-state expression applies to the linear canceller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Thermal noise dominates; IMD and quantization are ignored.
    Low,
    /// IMD and quantization noise are accounted for.
    High,
}

impl Regime {
    /// `Low` when quantization noise plus the unmodelled IMD residual stay
    /// under 1% of the thermal noise.
    pub fn select(inputs: &TheoryInputs) -> Regime {
        let extra = inputs.sigma_q2 + inputs.imd_power() / 3.0;
        if extra < 0.01 * inputs.sigma_v2 {
            Regime::Low
        } else {
            Regime::High
        }
    }
}

/// Steady-state mean weight error of the linear canceller,
/// `2k^{3/2}σ²[h_imd; 0; g_imd; 0]`.
pub fn alms_bias(inputs: &TheoryInputs) -> Vec<Complex64> {
    let c = 2.0 * inputs.k_tiq.powf(1.5) * inputs.sigma_x2;
    let m = inputs.m;
    let mut out = vec![ZERO; 2 * m];
    for (i, h) in inputs.channels.h_imd.iter().enumerate() {
        out[i] = h * c;
    }
    for (i, g) in inputs.channels.g_imd.iter().enumerate() {
        out[m + i] = g * c;
    }
    out
}

/// Cross-correlation `E[x^a* u]` between the augmented regressor and the
/// unmodelled IMD.
fn alms_cross_correlation(inputs: &TheoryInputs) -> Vec<Complex64> {
    alms_bias(inputs).into_iter().map(|b| b * inputs.sigma_x2).collect()
}

/// Diagonal of the steady-state cross term `E[u x^a*] E[w̃ᴴ]`:
/// `4k³σ⁶[|h_imd|²; 0; |g_imd|²; 0]`.
pub fn q3_diag(inputs: &TheoryInputs) -> Vec<f64> {
    let c = 4.0 * inputs.k_tiq.powi(3) * inputs.sigma_x2.powi(3);
    let m = inputs.m;
    let mut out = vec![0.0; 2 * m];
    for (i, h) in inputs.channels.h_imd.iter().enumerate() {
        out[i] = c * h.norm_sqr();
    }
    for (i, g) in inputs.channels.g_imd.iter().enumerate() {
        out[m + i] = c * g.norm_sqr();
    }
    out
}

fn check_alms_mu(inputs: &TheoryInputs) -> Result<()> {
    let bound = alms_ms_bound(inputs.sigma_x2, inputs.m);
    if !(inputs.mu >= 0.0 && inputs.mu < bound) {
        return Err(invalid(format!("step size {} outside (0, {bound})", inputs.mu)));
    }
    Ok(())
}

/// Steady-state MSE of the linear canceller (signal of interest excluded).
pub fn alms_steady_mse(inputs: &TheoryInputs, regime: Regime) -> Result<f64> {
    check_alms_mu(inputs)?;
    let (mu, s2, m) = (inputs.mu, inputs.sigma_x2, inputs.m as f64);
    let denom = 1.0 - mu * (m + 1.0) * s2;
    Ok(match regime {
        Regime::Low => (1.0 - mu * s2) * inputs.sigma_v2 / denom,
        Regime::High => {
            let n0 = inputs.noise_power();
            let h = 2.0 * inputs.k_tiq.powi(3) * s2.powi(3) * inputs.channels.imd_energy();
            n0 - h + (mu * m * s2 * n0 + 2.0 * h) / denom
        }
    })
}

/// `p_x_soi / J` in dB.
pub fn alms_sinr(inputs: &TheoryInputs, regime: Regime) -> Result<f64> {
    Ok(linear_to_db(inputs.p_x_soi / alms_steady_mse(inputs, regime)?))
}

/// Transition matrix of the weight-error variance recursion,
/// `(1−2μσ²+2μ²σ⁴)I + μ²σ⁴11ᵀ`.
pub fn alms_transition_matrix(sigma_x2: f64, m: usize, mu: f64) -> DMatrix<f64> {
    let q = mu * mu * sigma_x2 * sigma_x2;
    let diag = 1.0 - 2.0 * mu * sigma_x2 + 2.0 * q;
    DMatrix::from_fn(2 * m, 2 * m, |r, c| if r == c { diag + q } else { q })
}

/// Eigenvalues of [`alms_transition_matrix`]: the simple one along `1` and the
/// one of multiplicity `2M−1`.
pub fn alms_transition_eigenvalues(sigma_x2: f64, m: usize, mu: f64) -> (f64, f64) {
    let q = mu * mu * sigma_x2 * sigma_x2;
    let base = 1.0 - 2.0 * mu * sigma_x2;
    (base + (2.0 * m as f64 + 2.0) * q, base + 2.0 * q)
}

/// Predicted learning curve of the linear canceller.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmsTransient {
    /// Diagonal of the weight-error covariance per iteration.
    pub kappa: Vec<Vec<f64>>,
    pub mse: Vec<f64>,
    pub diverged: bool,
}

/// Iterates mean and variance of `w − w°` from the all-zero start.
pub fn alms_transient(inputs: &TheoryInputs, regime: Regime, n_iters: usize) -> Result<AlmsTransient> {
    inputs.validate()?;
    let w0 = inputs.channels.linear_weights();
    let start = w0.iter().map(|w| -w).collect();
    alms_transient_from(inputs, regime, n_iters, start)
}

/// As [`alms_transient`] with an explicit initial weight error.
pub fn alms_transient_from(
    inputs: &TheoryInputs,
    regime: Regime,
    n_iters: usize,
    initial_error: Vec<Complex64>,
) -> Result<AlmsTransient> {
    let dim = 2 * inputs.m;
    if initial_error.len() != dim {
        return Err(invalid("initial weight error must have length 2M"));
    }
    let (mu, s2) = (inputs.mu, inputs.sigma_x2);
    let (p, n0, u_power) = match regime {
        Regime::Low => (vec![ZERO; dim], inputs.sigma_v2, inputs.sigma_v2),
        Regime::High => {
            let n0 = inputs.noise_power();
            (alms_cross_correlation(inputs), n0, n0 + inputs.imd_power())
        }
    };
    let q = mu * mu * s2 * s2;
    let diag = 1.0 - 2.0 * mu * s2 + 2.0 * q;
    let drive = mu * mu * n0 * s2;

    let mut mean = initial_error.clone();
    let mut kappa: Vec<f64> = initial_error.iter().map(|w| w.norm_sqr()).collect();
    let mse_of = |kappa: &[f64], mean: &[Complex64]| {
        let cross: f64 = p.iter().zip(mean).map(|(a, b)| (a.conj() * b).re).sum();
        s2 * kappa.iter().sum::<f64>() + u_power - 2.0 * cross
    };
    let mut out = AlmsTransient { kappa: Vec::with_capacity(n_iters + 1), mse: Vec::with_capacity(n_iters + 1), diverged: false };
    out.mse.push(mse_of(&kappa, &mean));
    out.kappa.push(kappa.clone());
    for _ in 0..n_iters {
        let total: f64 = kappa.iter().sum();
        let next: Vec<f64> = (0..dim)
            .map(|i| diag * kappa[i] + q * total + 2.0 * mu * (p[i] * mean[i].conj()).re + drive)
            .collect();
        for (mi, pi) in mean.iter_mut().zip(&p) {
            *mi = *mi * (1.0 - mu * s2) + pi * mu;
        }
        kappa = next;
        let j = mse_of(&kappa, &mean);
        out.mse.push(j);
        out.kappa.push(kappa.clone());
        if !j.is_finite() || kappa.iter().any(|&k| k > 1e12) {
            out.diverged = true;
            break;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Augmented nonlinear LMS

/// Distinct eigenvalues of the nonlinear regressor covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbSpectrum {
    /// `σ²`, from taps without an IMD counterpart.
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Multiplicities `(2M−2N, 2N, 2N)`.
    pub multiplicities: (usize, usize, usize),
}

impl RbSpectrum {
    /// All `2M+2N` eigenvalues, ascending.
    pub fn expanded(&self) -> Vec<f64> {
        let (a, b, c) = self.multiplicities;
        let mut v: Vec<f64> = std::iter::repeat_n(self.lambda1, a)
            .chain(std::iter::repeat_n(self.lambda2, b))
            .chain(std::iter::repeat_n(self.lambda3, c))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Each delay with an IMD term contributes the 2×2 block
/// `[[σ², 2k^{3/2}σ⁴], [2k^{3/2}σ⁴, 6k³σ⁶]]` (twice, once per conjugate half).
pub fn rb_eigenvalues(sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> RbSpectrum {
    let eps = k_tiq.powi(3) * sigma_x2 * sigma_x2;
    let s = 1.0 + 6.0 * eps;
    let root = (1.0 + 4.0 * eps + 36.0 * eps * eps).sqrt();
    let lambda2 = sigma_x2 * (s + root) / 2.0;
    // det / λ₂ avoids cancellation for small ε
    let lambda3 = 2.0 * eps * sigma_x2 * sigma_x2 / lambda2;
    RbSpectrum { lambda1: sigma_x2, lambda2, lambda3, multiplicities: (2 * (m - n), 2 * n, 2 * n) }
}

/// Analytic covariance of `[x; x_imd; x*; x_imd*]` for a white proper
/// Gaussian input.
pub fn rb_matrix(sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> CMatrix {
    let half = m + n;
    let cross = 2.0 * k_tiq.powf(1.5) * sigma_x2 * sigma_x2;
    let imd = 6.0 * k_tiq.powi(3) * sigma_x2.powi(3);
    let mut r = CMatrix::zeros(2 * half, 2 * half);
    for off in [0, half] {
        for i in 0..m {
            r[(off + i, off + i)] = Complex64::new(sigma_x2, 0.0);
        }
        for i in 0..n {
            r[(off + m + i, off + m + i)] = Complex64::new(imd, 0.0);
            r[(off + i, off + m + i)] = Complex64::new(cross, 0.0);
            r[(off + m + i, off + i)] = Complex64::new(cross, 0.0);
        }
    }
    r
}

pub fn anclms_mean_bound(sigma_x2: f64, k_tiq: f64) -> f64 {
    let eps = k_tiq.powi(3) * sigma_x2 * sigma_x2;
    4.0 / (sigma_x2 * (1.0 + 6.0 * eps) + sigma_x2 * (1.0 + 4.0 * eps + 36.0 * eps * eps).sqrt())
}

/// Condition number `λ₂/λ₃` as a function of `ε = k³σ⁴` alone:
/// `(1+6ε+√(1+4ε+36ε²))² / (8ε)`.
pub fn condition_number_eps(eps: f64) -> f64 {
    if eps <= 0.0 {
        return f64::INFINITY;
    }
    let s = 1.0 + 6.0 * eps;
    let root = (1.0 + 4.0 * eps + 36.0 * eps * eps).sqrt();
    (s + root).powi(2) / (8.0 * eps)
}

pub fn condition_number(sigma_x2: f64, k_tiq: f64) -> f64 {
    condition_number_eps(k_tiq.powi(3) * sigma_x2 * sigma_x2)
}

/// Analytic minimiser of the condition number: `ε* = 1/6`, where it equals
/// `5 + 2√6`.
pub fn min_condition_number() -> (f64, f64) {
    let eps = 1.0 / 6.0;
    (eps, condition_number_eps(eps))
}

/// Golden-section search for the minimiser over `ε ∈ [lo, hi]`, carried out
/// in `log ε`.
pub fn numeric_min_condition_number(lo: f64, hi: f64) -> (f64, f64) {
    let f = |t: f64| condition_number_eps(t.exp());
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t.exp(), f(t))
}

/// SI variance that minimises the condition number for a given `k_TIQ`.
pub fn optimal_sigma_x2(k_tiq: f64) -> f64 {
    (1.0 / (6.0 * k_tiq.powi(3))).sqrt()
}

/// Small-step steady-state MSE of the nonlinear canceller,
/// `(σ_v²+σ_q²)(1 + μ(Mσ² + 6Nk³σ⁶))`.
pub fn anclms_steady_mse(inputs: &TheoryInputs) -> f64 {
    let (s2, k3) = (inputs.sigma_x2, inputs.k_tiq.powi(3));
    let spread = inputs.m as f64 * s2 + 6.0 * inputs.n as f64 * k3 * s2.powi(3);
    inputs.noise_power() * (1.0 + inputs.mu * spread)
}

pub fn anclms_sinr(inputs: &TheoryInputs) -> f64 {
    linear_to_db(inputs.p_x_soi / anclms_steady_mse(inputs))
}

/// Second- and fourth-order regressor moments entering the weight-error
/// covariance recursion `vec K(n+1) = (I − μS + μ²T) vec K + μ²N₀ vec R*`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentModel {
    pub r: CMatrix,
    /// `I⊗R* + R⊗I`.
    pub s: CMatrix,
    /// `E[(z zᴴ) ⊗ (z* zᵀ)]`.
    pub t: CMatrix,
}

impl MomentModel {
    pub fn new(r: CMatrix, t: CMatrix) -> Result<Self> {
        let d = r.nrows();
        if r.ncols() != d || t.nrows() != d * d || t.ncols() != d * d {
            return Err(invalid("moment matrices have inconsistent sizes"));
        }
        let s = kron(&CMatrix::identity(d, d), &r.map(|c| c.conj())) + kron(&r, &CMatrix::identity(d, d));
        Ok(Self { r, s, t })
    }

    /// Exact moments for a white proper Gaussian input.
    pub fn gaussian(sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> Result<Self> {
        Self::new(rb_matrix(sigma_x2, k_tiq, m, n), gaussian_fourth_moment(sigma_x2, k_tiq, m, n))
    }

    /// `R` from the closed form and `T` estimated from regressors of `x`.
    pub fn sampled(x: &[Complex64], sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> Result<Self> {
        let regs = nonlinear_regressors(x, m, n, k_tiq)?;
        Self::new(rb_matrix(sigma_x2, k_tiq, m, n), estimate_fourth_moment(&regs)?)
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// `I − μS + μ²T`.
    pub fn transition(&self, mu: f64) -> CMatrix {
        let d2 = self.dim() * self.dim();
        let c = |v: f64| Complex64::new(v, 0.0);
        CMatrix::identity(d2, d2) - &self.s * c(mu) + &self.t * c(mu * mu)
    }

    /// Moments of the transformed regressor `Φz`.
    pub fn transformed(&self, phi: &CMatrix) -> Result<Self> {
        if phi.nrows() != self.dim() || phi.ncols() != self.dim() {
            return Err(invalid("transform does not match the regressor dimension"));
        }
        let big = kron(phi, &phi.map(|c| c.conj()));
        Self::new(phi * &self.r * phi.adjoint(), &big * &self.t * big.adjoint())
    }
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    CMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// `T` from regressor samples, as the sample mean of `y yᴴ` with `y = z ⊗ z*`.
pub fn estimate_fourth_moment(regressors: &[Vec<Complex64>]) -> Result<CMatrix> {
    let d = regressors.first().map(|z| z.len()).unwrap_or(0);
    if d == 0 {
        return Err(invalid("no regressors supplied"));
    }
    let d2 = d * d;
    let mut acc = vec![ZERO; d2 * d2];
    let mut y = vec![ZERO; d2];
    for z in regressors {
        if z.len() != d {
            return Err(invalid("regressors differ in length"));
        }
        for i in 0..d {
            for k in 0..d {
                y[i * d + k] = z[i] * z[k].conj();
            }
        }
        // upper triangle only, row-major
        for a in 0..d2 {
            let ya = y[a];
            let row = &mut acc[a * d2..(a + 1) * d2];
            for b in a..d2 {
                row[b] += ya * y[b].conj();
            }
        }
    }
    let inv = 1.0 / regressors.len() as f64;
    Ok(CMatrix::from_fn(d2, d2, |r, c| if r <= c { acc[r * d2 + c] * inv } else { acc[c * d2 + r].conj() * inv }))
}

/// Exact `T` for a white proper Gaussian input: every regressor entry is a
/// monomial `c·x^p x*^q` of one delayed sample, and
/// `E[x^p x*^q] = δ_{pq} p! σ^{2p}`.
pub fn gaussian_fourth_moment(sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> CMatrix {
    let k32 = k_tiq.powf(1.5);
    let half = m + n;
    let d = 2 * half;
    // (delay, p, q, coefficient)
    let entry = |idx: usize| -> (usize, u32, u32, f64) {
        let (conj, i) = if idx < half { (false, idx) } else { (true, idx - half) };
        let (delay, p, q, c) = if i < m { (i, 1, 0, 1.0) } else { (i - m, 2, 1, k32) };
        if conj {
            (delay, q, p, c)
        } else {
            (delay, p, q, c)
        }
    };
    let entries: Vec<_> = (0..d).map(entry).collect();
    let moment = |p: u32| -> f64 { (1..=p).map(|v| v as f64).product::<f64>() * sigma_x2.powi(p as i32) };

    let d2 = d * d;
    let mut t = CMatrix::zeros(d2, d2);
    let mut pq = vec![(0u32, 0u32); m];
    for i in 0..d {
        for k in 0..d {
            for j in 0..d {
                for l in 0..d {
                    // E[z_i z_k* z_j* z_l]
                    pq.iter_mut().for_each(|v| *v = (0, 0));
                    let mut coef = 1.0;
                    for (idx, conj) in [(i, false), (k, true), (j, true), (l, false)] {
                        let (delay, p, q, c) = entries[idx];
                        let (p, q) = if conj { (q, p) } else { (p, q) };
                        pq[delay].0 += p;
                        pq[delay].1 += q;
                        coef *= c;
                    }
                    let mut val = coef;
                    for &(p, q) in &pq {
                        if p != q {
                            val = 0.0;
                            break;
                        }
                        if p > 0 {
                            val *= moment(p);
                        }
                    }
                    if val != 0.0 {
                        t[(i * d + k, j * d + l)] = Complex64::new(val, 0.0);
                    }
                }
            }
        }
    }
    t
}

/// Steady-state MSE from the full vectorised recursion,
/// `N₀(1 + μ Tr[R* K̂])` with `(S − μT) vec K̂ = vec R*`.
pub fn anclms_steady_mse_full(inputs: &TheoryInputs, model: &MomentModel) -> Result<f64> {
    let d = model.dim();
    let mu = inputs.mu;
    let a = &model.s - &model.t * Complex64::new(mu, 0.0);
    let r_conj = model.r.map(|c| c.conj());
    let rhs = CMatrix::from_fn(d * d, 1, |idx, _| r_conj[(idx % d, idx / d)]);
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateInput("steady-state system is singular".into()))?;
    let mut tr = ZERO;
    for r in 0..d {
        for c in 0..d {
            tr += r_conj[(c, r)] * sol[(r + c * d, 0)];
        }
    }
    Ok(inputs.noise_power() * (1.0 + mu * tr.re))
}

/// Mean-square bounds of the nonlinear canceller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsBound {
    /// `1/λ_max(S⁻¹T)`: edge where `I − μS + μ²T` reaches +1.
    pub plus_one_edge: f64,
    /// `1/max real positive eigenvalue of Γ`: edge where it reaches −1.
    pub minus_one_edge: f64,
}

impl MsBound {
    pub fn bound(&self) -> f64 {
        self.plus_one_edge.min(self.minus_one_edge)
    }
}

/// Spectral bounds from `S`, `T` via `S⁻¹T` and `Γ = [[S/2, −T/2], [I, 0]]`.
/// `S⁻¹T` is similar to the Hermitian `S^{-1/2} T S^{-1/2}`, which is what
/// gets decomposed.
pub fn anclms_ms_bound_model(model: &MomentModel) -> Result<MsBound> {
    let d2 = model.s.nrows();
    let (s_vals, s_vecs) = hermitian_eigen(&model.s);
    if s_vals[0] <= 0.0 {
        return Err(Error::DegenerateInput("S is not positive definite".into()));
    }
    let scale = CMatrix::from_fn(d2, d2, |r, c| s_vecs[(r, c)] / s_vals[c].sqrt());
    let sym = scale.adjoint() * &model.t * &scale;
    let lmax = *hermitian_eigenvalues(&sym).last().expect("nonempty");
    if lmax <= 0.0 {
        return Err(Error::DegenerateInput("T has no positive eigenvalue".into()));
    }

    let mut gamma = CMatrix::zeros(2 * d2, 2 * d2);
    let half = Complex64::new(0.5, 0.0);
    gamma.view_mut((0, 0), (d2, d2)).copy_from(&(&model.s * half));
    gamma.view_mut((0, d2), (d2, d2)).copy_from(&(&model.t * (-half)));
    gamma.view_mut((d2, 0), (d2, d2)).fill_with_identity();
    let eigs = general_eigenvalues(gamma)
        .ok_or_else(|| Error::DegenerateInput("eigenvalues of Γ did not converge".into()))?;
    let tol = 1e-8;
    let gmax = eigs
        .iter()
        .filter(|e| e.re > 0.0 && e.im.abs() <= tol * e.norm())
        .map(|e| e.re)
        .max_by(f64::total_cmp)
        .ok_or_else(|| Error::DegenerateInput("Γ has no real positive eigenvalue".into()))?;
    Ok(MsBound { plus_one_edge: 1.0 / lmax, minus_one_edge: 1.0 / gmax })
}

/// Eigenvalues of a general complex matrix (LAPACK `zgeev`).
fn general_eigenvalues(mut a: CMatrix) -> Option<Vec<Complex64>> {
    let n = a.nrows() as i32;
    let mut w = vec![ZERO; n as usize];
    let mut dummy = [ZERO; 1];
    let mut rwork = vec![0.0; 2 * n as usize];
    let mut info = 0;
    let mut query = [ZERO; 1];
    // SAFETY: buffers match the sizes zgeev documents for JOBVL = JOBVR = 'N'.
    unsafe {
        lapack::zgeev(b'N', b'N', n, a.as_mut_slice(), n, &mut w, &mut dummy, 1, &mut [ZERO; 1], 1, &mut query, -1, &mut rwork, &mut info);
    }
    if info != 0 {
        return None;
    }
    let lwork = (query[0].re as i32).max(2 * n);
    let mut work = vec![ZERO; lwork as usize];
    unsafe {
        lapack::zgeev(b'N', b'N', n, a.as_mut_slice(), n, &mut w, &mut dummy, 1, &mut [ZERO; 1], 1, &mut work, lwork, &mut rwork, &mut info);
    }
    (info == 0).then_some(w)
}

/// Mean-square bound with `T` estimated from `sample_regressors`; needs at
/// least `100·d²` regressors of dimension `d`.
pub fn anclms_ms_bound(sample_regressors: &[Vec<Complex64>], sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> Result<f64> {
    let d = 2 * (m + n);
    if sample_regressors.len() < 100 * d * d {
        return Err(invalid(format!("need at least {} regressors, got {}", 100 * d * d, sample_regressors.len())));
    }
    let model = MomentModel::new(rb_matrix(sigma_x2, k_tiq, m, n), estimate_fourth_moment(sample_regressors)?)?;
    Ok(anclms_ms_bound_model(&model)?.bound())
}

/// Mean-square bound for a white proper Gaussian input with exact moments.
pub fn anclms_ms_bound_gaussian(sigma_x2: f64, k_tiq: f64, m: usize, n: usize) -> Result<f64> {
    Ok(anclms_ms_bound_model(&MomentModel::gaussian(sigma_x2, k_tiq, m, n)?)?.bound())
}

/// Largest step for which every eigenvalue of the Hermitian `I − μS + μ²T`
/// stays inside (−1, 1), found by bisection. Independent of the Γ route.
pub fn anclms_ms_bound_bisect(model: &MomentModel, upper: f64) -> f64 {
    let stable = |mu: f64| {
        let ev = hermitian_eigenvalues(&model.transition(mu));
        ev.first().is_some_and(|&v| v > -1.0) && ev.last().is_some_and(|&v| v < 1.0)
    };
    let (mut lo, mut hi) = (0.0, upper);
    while stable(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid == 0.0 || stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    lo
}

/// Predicted learning curve of the nonlinear canceller from the all-zero
/// start, with the fourth-order term neglected.
pub fn anclms_transient(inputs: &TheoryInputs, n_iters: usize) -> Result<Vec<f64>> {
    inputs.validate()?;
    let r = rb_matrix(inputs.sigma_x2, inputs.k_tiq, inputs.m, inputs.n);
    let start: Vec<Complex64> = inputs.channels.nonlinear_weights().iter().map(|w| -w).collect();
    transient_in_eigenbasis(&r, &start, inputs.mu, inputs.noise_power(), n_iters)
}

/// Learning curve of an LMS filter with regressor covariance `r`, evolved in
/// its eigenbasis: `K̃ᵢᵢ(n+1) = (1−2μλᵢ)K̃ᵢᵢ(n) + μ²N₀λᵢ`,
/// `J(n) = N₀ + Σ λᵢK̃ᵢᵢ(n)`.
pub fn transient_in_eigenbasis(r: &CMatrix, initial_error: &[Complex64], mu: f64, n0: f64, n_iters: usize) -> Result<Vec<f64>> {
    if r.nrows() != initial_error.len() || r.ncols() != initial_error.len() {
        return Err(invalid("initial weight error does not match the covariance"));
    }
    let (lambda, u) = hermitian_eigen(r);
    let mut k: Vec<f64> = (0..lambda.len())
        .map(|i| {
            let proj: Complex64 = initial_error.iter().enumerate().map(|(row, w)| u[(row, i)] * w).sum();
            proj.norm_sqr()
        })
        .collect();
    let mse = |k: &[f64]| n0 + k.iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>();
    let mut out = Vec::with_capacity(n_iters + 1);
    out.push(mse(&k));
    for _ in 0..n_iters {
        for (ki, &li) in k.iter_mut().zip(&lambda) {
            *ki = (1.0 - 2.0 * mu * li) * *ki + mu * mu * n0 * li;
        }
        out.push(mse(&k));
    }
    Ok(out)
}

/// Everything the closed forms say about one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub alms: AlmsPrediction,
    pub anclms: AnclmsPrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmsPrediction {
    pub mean_bound: f64,
    pub ms_bound: f64,
    pub bias_vector: Vec<Complex64>,
    pub regime: Regime,
    pub mse_low: Option<f64>,
    pub mse_high: Option<f64>,
    pub sinr_low_db: Option<f64>,
    pub sinr_high_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnclmsPrediction {
    pub spectrum: RbSpectrum,
    pub mean_bound: f64,
    pub ms_bound: Option<f64>,
    pub mse_approx: f64,
    pub sinr_db: f64,
    pub condition_number: f64,
}

/// Assembles a [`TheoryReport`]. The nonlinear mean-square bound uses exact
/// Gaussian moments when `with_ms_bound` is set.
pub fn theory_report(inputs: &TheoryInputs, with_ms_bound: bool) -> Result<TheoryReport> {
    inputs.validate()?;
    let s2 = inputs.sigma_x2;
    let ok = |r: Result<f64>| r.ok();
    let spectrum = rb_eigenvalues(s2, inputs.k_tiq, inputs.m, inputs.n);
    Ok(TheoryReport {
        alms: AlmsPrediction {
            mean_bound: alms_mean_bound(s2),
            ms_bound: alms_ms_bound(s2, inputs.m),
            bias_vector: alms_bias(inputs),
            regime: Regime::select(inputs),
            mse_low: ok(alms_steady_mse(inputs, Regime::Low)),
            mse_high: ok(alms_steady_mse(inputs, Regime::High)),
            sinr_low_db: ok(alms_sinr(inputs, Regime::Low)),
            sinr_high_db: ok(alms_sinr(inputs, Regime::High)),
        },
        anclms: AnclmsPrediction {
            spectrum,
            mean_bound: anclms_mean_bound(s2, inputs.k_tiq),
            ms_bound: if with_ms_bound { Some(anclms_ms_bound_gaussian(s2, inputs.k_tiq, inputs.m, inputs.n)?) } else { None },
            mse_approx: anclms_steady_mse(inputs),
            sinr_db: anclms_sinr(inputs),
            condition_number: spectrum.lambda2 / spectrum.lambda3,
        },
    })
}

/// Norm of the linear-canceller bias relative to `‖w°‖`.
pub fn relative_bias(inputs: &TheoryInputs) -> f64 {
    (norm2(&alms_bias(inputs)) / norm2(&inputs.channels.linear_weights())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn inputs(mu: f64, sigma_q2: f64) -> TheoryInputs {
        let channels = ChannelSet::new(
            vec![c(1.0, 0.2), c(-0.4, 0.3), c(0.1, -0.05)],
            vec![c(0.05, 0.01), c(0.0, -0.02), c(0.01, 0.0)],
            vec![c(0.3, -0.1), c(0.05, 0.2)],
            vec![c(0.02, 0.01), c(-0.01, 0.0)],
        )
        .unwrap();
        TheoryInputs {
            sigma_x2: 0.5,
            sigma_v2: 1e-3,
            sigma_q2,
            k_tiq: 1.5,
            m: 3,
            n: 2,
            mu,
            channels,
            p_x_soi: 1e-2,
        }
    }

    #[test]
    fn alms_transition_eigenvalues_match_decomposition() {
        for &(s2, m, mu) in &[(1.0, 3, 0.05), (0.2, 5, 0.4), (2.0, 1, 0.01)] {
            let mut ev: Vec<f64> = SymmetricEigen::new(alms_transition_matrix(s2, m, mu)).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let (simple, repeated) = alms_transition_eigenvalues(s2, m, mu);
            let top = ev.pop().unwrap();
            assert!((top - simple).abs() < 1e-12, "{top} vs {simple}");
            assert!(ev.iter().all(|v| (v - repeated).abs() < 1e-12));
        }
    }

    #[test]
    fn alms_transient_settles_on_closed_forms() {
        let base = inputs(0.0, 1e-4);
        let mu = 0.1 * alms_ms_bound(base.sigma_x2, base.m);
        let inp = base.with_mu(mu);
        for regime in [Regime::Low, Regime::High] {
            let tr = alms_transient(&inp, regime, 20_000).unwrap();
            assert!(!tr.diverged);
            let last = *tr.mse.last().unwrap();
            let closed = alms_steady_mse(&inp, regime).unwrap();
            assert!((last / closed - 1.0).abs() < 1e-3, "{regime:?}: {last} vs {closed}");
        }
    }

    #[test]
    fn alms_regimes_coincide_without_extra_noise() {
        let mut inp = inputs(0.1, 0.0);
        inp.channels.h_imd.iter_mut().chain(inp.channels.g_imd.iter_mut()).for_each(|v| *v = ZERO);
        let low = alms_steady_mse(&inp, Regime::Low).unwrap();
        let high = alms_steady_mse(&inp, Regime::High).unwrap();
        assert!((low - high).abs() < 1e-15);
        assert_eq!(Regime::select(&inp), Regime::Low);
        assert_eq!(Regime::select(&inputs(0.1, 1e-4)), Regime::High);
    }

    #[test]
    fn alms_closed_form_rejects_unstable_steps() {
        let inp = inputs(0.0, 0.0);
        let bound = alms_ms_bound(inp.sigma_x2, inp.m);
        assert!(alms_steady_mse(&inp.with_mu(bound), Regime::Low).is_err());
        assert!(alms_steady_mse(&inp.with_mu(2.0 * bound), Regime::High).is_err());
    }

    #[test]
    fn alms_bias_scales_imd_taps() {
        let inp = inputs(0.1, 0.0);
        let b = alms_bias(&inp);
        let scale = 2.0 * 1.5f64.powf(1.5) * 0.5;
        assert!((b[0] - inp.channels.h_imd[0] * scale).norm() < 1e-15);
        assert!((b[4] - inp.channels.g_imd[1] * scale).norm() < 1e-15);
        assert_eq!(b[2], ZERO);
        assert_eq!(b[5], ZERO);
    }

    #[test]
    fn rb_spectrum_matches_decomposition() {
        for &(s2, k, m, n) in &[(0.1, 1.0, 3, 1), (1.0, 4.0, 5, 4), (0.05, 2.0, 2, 0)] {
            let numeric = hermitian_eigenvalues(&rb_matrix(s2, k, m, n));
            let closed = rb_eigenvalues(s2, k, m, n).expanded();
            assert_eq!(numeric.len(), closed.len());
            for (a, b) in numeric.iter().zip(&closed) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn condition_number_minimum() {
        let (eps, value) = min_condition_number();
        assert_eq!(eps, 1.0 / 6.0);
        assert!((value - (5.0 + 2.0 * 6f64.sqrt())).abs() < 1e-12);
        assert!((condition_number_eps(eps) - value).abs() < 1e-12);
        let (num_eps, num_val) = numeric_min_condition_number(1e-4, 1e2);
        assert!((num_eps - eps).abs() < 1e-4);
        assert!((num_val - value).abs() < 1e-6);
        let k = 4.0;
        assert!((condition_number(optimal_sigma_x2(k), k) - value).abs() < 1e-9);
    }

    #[test]
    fn anclms_transient_settles_on_small_step_formula() {
        let base = inputs(0.0, 1e-4);
        let bound = anclms_ms_bound_gaussian(base.sigma_x2, base.k_tiq, base.m, base.n).unwrap();
        let inp = base.with_mu(0.1 * bound);
        let curve = anclms_transient(&inp, 200_000).unwrap();
        let last = *curve.last().unwrap();
        assert!((last / anclms_steady_mse(&inp) - 1.0).abs() < 1e-3);
        assert!(curve[0] > 10.0 * last);
    }

    #[test]
    fn ms_bound_reduces_to_linear_case_without_imd() {
        for m in [1, 3] {
            let s2 = 0.7;
            let bound = anclms_ms_bound_gaussian(s2, 2.0, m, 0).unwrap();
            let expected = 1.0 / ((m as f64 + 1.0) * s2);
            assert!((bound / expected - 1.0).abs() < 1e-9, "M={m}: {bound} vs {expected}");
        }
    }

    #[test]
    fn ms_bound_routes_agree() {
        let model = MomentModel::gaussian(0.5, 2.0, 2, 1).unwrap();
        let gamma = anclms_ms_bound_model(&model).unwrap().bound();
        let bisect = anclms_ms_bound_bisect(&model, 1e-3);
        assert!((gamma / bisect - 1.0).abs() < 1e-8, "{gamma} vs {bisect}");
        assert!(gamma <= anclms_mean_bound(0.5, 2.0));
    }

    #[test]
    fn transition_contracts_only_inside_bound() {
        let model = MomentModel::gaussian(0.3, 3.0, 3, 2).unwrap();
        let bound = anclms_ms_bound_model(&model).unwrap().bound();
        let radius = |mu: f64| {
            let ev = hermitian_eigenvalues(&model.transition(mu));
            ev[0].abs().max(ev[ev.len() - 1].abs())
        };
        assert!(radius(0.5 * bound) < 1.0);
        assert!(radius(0.99 * bound) < 1.0);
        assert!(radius(1.01 * bound) > 1.0);
    }

    #[test]
    fn full_steady_mse_approaches_small_step_formula() {
        let base = inputs(0.0, 1e-4);
        let model = MomentModel::gaussian(base.sigma_x2, base.k_tiq, base.m, base.n).unwrap();
        let bound = anclms_ms_bound_model(&model).unwrap().bound();
        let inp = base.with_mu(1e-4 * bound);
        let full = anclms_steady_mse_full(&inp, &model).unwrap();
        assert!((full / anclms_steady_mse(&inp) - 1.0).abs() < 1e-6);
        let big = base.with_mu(0.5 * bound);
        assert!(anclms_steady_mse_full(&big, &model).unwrap() > anclms_steady_mse(&big));
    }

    #[test]
    fn transformed_model_whitens_covariance() {
        let model = MomentModel::gaussian(0.4, 2.0, 3, 1).unwrap();
        let (vals, u) = hermitian_eigen(&model.r);
        let d = model.dim();
        let phi = CMatrix::from_fn(d, d, |r, col| u[(col, r)].conj() / vals[r].sqrt());
        let white = model.transformed(&phi).unwrap();
        assert!((&white.r - CMatrix::identity(d, d)).norm() < 1e-10);
        assert!(model.transformed(&CMatrix::identity(d + 1, d + 1)).is_err());
    }

    #[test]
    fn theory_report_collects_predictions() {
        let inp = inputs(0.01, 1e-4);
        let report = theory_report(&inp, true).unwrap();
        assert_eq!(report.alms.regime, Regime::High);
        assert!(report.alms.sinr_high_db.unwrap() < report.anclms.sinr_db);
        assert!(report.anclms.ms_bound.unwrap() <= report.anclms.mean_bound);
        assert!(relative_bias(&inp) > 0.0);
    }

    #[test]
    fn epsilon_and_imd_power() {
        let inp = inputs(0.1, 0.0);
        assert!((inp.epsilon() - 1.5f64.powi(3) * 0.25).abs() < 1e-15);
        let h = inp.channels.imd_energy();
        assert!((inp.imd_power() - 6.0 * 1.5f64.powi(3) * 0.125 * h).abs() < 1e-15);
    }
}
