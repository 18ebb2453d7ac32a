//! SI waveform generation and moment estimation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::rng::{self, SimRng};
use crate::units::{db_to_linear, linear_to_db};

/// A block of complex baseband samples. Power is referenced to 1 mW.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSequence {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("sequence must contain at least one sample"));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(invalid("sequence contains non-finite samples"));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|x|²` (not mean-removed).
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub(crate) fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Subcarrier modulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Constellation {
    fn levels(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
        }
    }

    /// Uniformly random unit-average-power symbol.
    fn draw(self, rng: &mut SimRng) -> Complex64 {
        let l = self.levels();
        // square L×L grid on odd integers, mean power 2(L²-1)/3
        let scale = (2.0 * ((l * l - 1) as f64) / 3.0).sqrt().recip();
        let mut axis = || (2 * rng.random_range(0..l) + 1) as f64 - l as f64;
        let re = axis();
        let im = axis();
        Complex64::new(re, im) * scale
    }
}

impl std::str::FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            "64qam" | "qam64" => Ok(Constellation::Qam64),
            other => Err(invalid(format!("unsupported constellation `{other}`"))),
        }
    }
}

/// OFDM parameters. Defaults follow the 20 MHz WLAN numerology.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSpec {
    pub subcarriers: usize,
    pub null_subcarriers: usize,
    pub cyclic_prefix: usize,
    pub oversampling: usize,
    pub bandwidth_hz: f64,
    pub constellation: Constellation,
    pub target_power_dbm: f64,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        Self {
            subcarriers: 64,
            null_subcarriers: 14,
            cyclic_prefix: 16,
            oversampling: 4,
            bandwidth_hz: 20e6,
            constellation: Constellation::Qam16,
            target_power_dbm: 0.0,
        }
    }
}

impl WaveformSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subcarriers == 0 || self.oversampling == 0 {
            return Err(invalid("subcarriers and oversampling must be positive"));
        }
        if self.null_subcarriers >= self.subcarriers {
            return Err(invalid("null subcarriers must be fewer than subcarriers"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(invalid("bandwidth must be positive"));
        }
        if !self.target_power_dbm.is_finite() {
            return Err(invalid("target power must be finite"));
        }
        Ok(())
    }

    pub fn symbol_duration_s(&self) -> f64 {
        (self.subcarriers + self.cyclic_prefix) as f64 / self.bandwidth_hz
    }

    pub fn samples_per_symbol(&self) -> usize {
        (self.subcarriers + self.cyclic_prefix) * self.oversampling
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.bandwidth_hz * self.oversampling as f64
    }

    /// Signed bin indices of the active subcarriers, nearest DC first.
    /// Nulls are placed symmetrically around DC, DC itself included.
    pub fn active_bins(&self) -> Vec<i64> {
        let active = self.subcarriers - self.null_subcarriers;
        let mut bins = Vec::with_capacity(active);
        if self.null_subcarriers == 0 {
            bins.push(0);
        }
        let mut k = 1i64;
        while bins.len() < active {
            bins.push(k);
            if bins.len() < active {
                bins.push(-k);
            }
            k += 1;
        }
        bins
    }
}

/// White proper complex Gaussian samples of variance `sigma_x2`.
pub fn gen_proper_gaussian(n: usize, sigma_x2: f64, seed: u64) -> Result<ComplexSequence> {
    if n == 0 {
        return Err(invalid("sample count must be positive"));
    }
    if !(sigma_x2 > 0.0 && sigma_x2.is_finite()) {
        return Err(invalid(format!("variance must be positive, got {sigma_x2}")));
    }
    let mut rng = rng::stream(seed, rng::STREAM_WAVEFORM);
    let samples = proper_gaussian(&mut rng, n, sigma_x2);
    ComplexSequence::new(samples, 1.0)
}

pub(crate) fn proper_gaussian(rng: &mut SimRng, n: usize, variance: f64) -> Vec<Complex64> {
    let s = (variance / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// Oversampled CP-OFDM waveform scaled to `spec.target_power_dbm`.
pub fn gen_ofdm_waveform(spec: &WaveformSpec, num_symbols: usize, seed: u64) -> Result<ComplexSequence> {
    spec.validate()?;
    if num_symbols == 0 {
        return Err(invalid("symbol count must be positive"));
    }
    let nfft = spec.subcarriers * spec.oversampling;
    let ncp = spec.cyclic_prefix * spec.oversampling;
    let bins = spec.active_bins();
    let fft = FftPlanner::new().plan_fft_inverse(nfft);
    let mut rng = rng::stream(seed, rng::STREAM_WAVEFORM);

    let mut out = Vec::with_capacity(num_symbols * (nfft + ncp));
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for _ in 0..num_symbols {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for &k in &bins {
            let idx = k.rem_euclid(nfft as i64) as usize;
            buf[idx] = spec.constellation.draw(&mut rng);
        }
        fft.process(&mut buf);
        out.extend_from_slice(&buf[nfft - ncp..]);
        out.extend_from_slice(&buf);
    }

    let target = db_to_linear(spec.target_power_dbm);
    let scale = (target / mean_power(&out)).sqrt();
    out.iter_mut().for_each(|s| *s *= scale);
    ComplexSequence::new(out, spec.sample_rate_hz())
}

/// Sample moments of a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalStats {
    pub variance: f64,
    pub pseudo_variance: Complex64,
    pub abs_moment4: f64,
    pub abs_moment6: f64,
    pub sample_count: usize,
}

impl SignalStats {
    pub fn variance_dbm(&self) -> f64 {
        linear_to_db(self.variance)
    }
}

/// Mean-removed variance and pseudo-variance plus fourth and sixth absolute
/// moments about the sample mean.
pub fn estimate_stats(seq: &ComplexSequence) -> Result<SignalStats> {
    let x = seq.samples();
    if x.len() < 2 {
        return Err(invalid("at least two samples are needed"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<Complex64>() / n;
    let (mut m2, mut m4, mut m6) = (0.0, 0.0, 0.0);
    let mut pseudo = Complex64::new(0.0, 0.0);
    for &s in x {
        let c = s - mean;
        let p = c.norm_sqr();
        m2 += p;
        m4 += p * p;
        m6 += p * p * p;
        pseudo += c * c;
    }
    Ok(SignalStats {
        variance: m2 / n,
        pseudo_variance: pseudo / n,
        abs_moment4: m4 / n,
        abs_moment6: m6 / n,
        sample_count: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let x = gen_proper_gaussian(1_000_000, 1.0, 7).unwrap();
        let st = estimate_stats(&x).unwrap();
        assert!((st.variance - 1.0).abs() < 0.005);
        assert!(st.pseudo_variance.norm() < 0.01);
        assert!((st.abs_moment4 - 2.0).abs() < 0.04);
        assert!((st.abs_moment6 - 6.0).abs() < 0.18);
    }

    #[test]
    fn gaussian_rejects_bad_args() {
        assert!(gen_proper_gaussian(0, 1.0, 1).is_err());
        assert!(gen_proper_gaussian(10, 0.0, 1).is_err());
        assert!(gen_proper_gaussian(10, -1.0, 1).is_err());
    }

    #[test]
    fn constant_sequence_has_zero_variance() {
        let seq = ComplexSequence::new(vec![Complex64::new(1.0, 0.0); 16], 1.0).unwrap();
        let st = estimate_stats(&seq).unwrap();
        assert_eq!(st.variance, 0.0);
        assert_eq!(st.pseudo_variance, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn ofdm_numerology() {
        let spec = WaveformSpec::default();
        assert!((spec.symbol_duration_s() - 4e-6).abs() < 1e-15);
        let one = gen_ofdm_waveform(&spec, 1, 3).unwrap();
        assert_eq!(one.len(), 320);
        assert_eq!(spec.active_bins().len(), 50);
        assert!(!spec.active_bins().contains(&0));
    }

    #[test]
    fn ofdm_power_and_properness() {
        let spec = WaveformSpec::default();
        let x = gen_ofdm_waveform(&spec, 500, 11).unwrap();
        assert!(linear_to_db(x.mean_power()).abs() < 0.1);
        let st = estimate_stats(&x).unwrap();
        assert!(st.pseudo_variance.norm() / st.variance < 0.02);
    }

    #[test]
    fn ofdm_cyclic_prefix_repeats_tail() {
        let spec = WaveformSpec::default();
        let x = gen_ofdm_waveform(&spec, 2, 5).unwrap();
        let s = x.samples();
        let (ncp, nfft) = (64, 256);
        for i in 0..ncp {
            assert!((s[i] - s[nfft + i]).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_power_constellations() {
        let mut rng = rng::stream(1, 0);
        for c in [Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64] {
            let p: f64 = (0..200_000).map(|_| c.draw(&mut rng).norm_sqr()).sum::<f64>() / 2e5;
            assert!((p - 1.0).abs() < 0.01, "{c:?} {p}");
        }
    }
}
