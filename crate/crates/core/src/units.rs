//! Power unit conversions. Everything inside the crate is linear mW; dB and
//! dBm only appear at I/O boundaries.

/// `10^(db/10)`.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10·log10(linear)`. Zero maps to `-inf`.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Amplitude gain for a power gain expressed in dB.
#[inline]
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
