//! Simulation and analysis of digital self-interference cancellation for
//! full-duplex direct-conversion transceivers.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] generates SI waveforms (proper Gaussian, WLAN-style OFDM) and
//!   estimates the moments the analysis depends on.
//! * [`transceiver`] holds hardware profiles, synthesises end-to-end channels,
//!   computes the noise/power budget and renders the pre-cancellation
//!   observation `d(n)` component by component.
//! * [`cancellers`] implements the augmented (widely linear) LMS and the
//!   augmented nonlinear LMS, their regressor builders and pre-whitening.
//! * [`theory`] evaluates the closed-form bounds, biases, steady-state
//!   MSE/SINR, transient recursions and condition numbers.

pub mod cancellers;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod signal;
pub mod theory;
pub mod transceiver;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
