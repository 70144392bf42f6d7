//! Numerical kernels: moving-average despiking, SOS IIR filtering, Welch PSD,
//! average power and median frequency.

mod biquad;
mod hpf;
mod moving_average;
mod welch;

pub use biquad::{filter_apply, BiquadSection, SosFilter};
pub use hpf::{hpf_coefficients, HPF_CUTOFF_HZ, HPF_FS_HZ, HPF_ORDER};
pub use moving_average::{moving_average, MovingAverage};
pub use welch::{
    average_power, median_frequency, welch_psd, SpectralDensity, WelchEstimator, WelchParams,
    Window,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("InvalidWindow: moving-average window must be at least 1")]
    InvalidWindow,
    #[error("UnsupportedRate: no high-pass design shipped for {0} Hz (only 50 Hz)")]
    UnsupportedRate(f64),
    #[error("SignalTooShort: {len} samples, need at least {required}")]
    SignalTooShort { len: usize, required: usize },
    #[error("ZeroPower: spectrum has no power")]
    ZeroPower,
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
}
