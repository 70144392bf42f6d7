//! Welch power spectral density and the two scalar summaries taken from it.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (TAU * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchParams {
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one, in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchParams {
    fn default() -> Self {
        WelchParams {
            segment_len: 128,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

impl WelchParams {
    pub fn step(&self) -> usize {
        let shared = (self.overlap * self.segment_len as f64).round() as usize;
        (self.segment_len - shared).max(1)
    }
}

/// One-sided PSD estimate, `pxx` in signal-units squared per Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub freqs_hz: Vec<f64>,
    pub pxx: Vec<f64>,
    pub fs_hz: f64,
    pub nfft: usize,
    pub segment_len: usize,
    pub overlap: f64,
    pub segments: usize,
}

impl SpectralDensity {
    pub fn bin_width_hz(&self) -> f64 {
        self.fs_hz / self.nfft as f64
    }

    /// Rectangle-rule integral, `sum(pxx) * df`. For the one-sided estimate
    /// this approximates the mean square of the input.
    pub fn total_power(&self) -> f64 {
        self.pxx.iter().sum::<f64>() * self.bin_width_hz()
    }

    /// Index of the largest bin.
    pub fn peak_bin(&self) -> usize {
        self.pxx
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }
}

/// Reusable Welch estimator; holds the FFT plan and window for one parameter set.
pub struct WelchEstimator {
    params: WelchParams,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    window_power: f64,
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl WelchEstimator {
    pub fn new(params: WelchParams) -> Result<Self, DspError> {
        if params.segment_len < 2 {
            return Err(DspError::InvalidParameter(format!(
                "segment length {} is below 2",
                params.segment_len
            )));
        }
        if !(0.0..1.0).contains(&params.overlap) {
            return Err(DspError::InvalidParameter(format!(
                "overlap {} is outside [0, 1)",
                params.overlap
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(params.segment_len);
        let window = params.window.coefficients(params.segment_len);
        let window_power = window.iter().map(|w| w * w).sum();
        Ok(WelchEstimator {
            scratch: vec![Complex64::default(); fft.get_inplace_scratch_len()],
            buf: vec![Complex64::default(); params.segment_len],
            params,
            fft,
            window,
            window_power,
        })
    }

    pub fn params(&self) -> &WelchParams {
        &self.params
    }

    pub fn estimate(&mut self, signal: &[f64], fs_hz: f64) -> Result<SpectralDensity, DspError> {
        let len = self.params.segment_len;
        if signal.len() < len {
            return Err(DspError::SignalTooShort {
                len: signal.len(),
                required: len,
            });
        }
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(DspError::InvalidParameter(format!("sample rate {fs_hz}")));
        }
        let step = self.params.step();
        let segments = (signal.len() - len) / step + 1;
        let bins = len / 2 + 1;
        let mut acc = vec![0.0; bins];

        for seg in 0..segments {
            let chunk = &signal[seg * step..seg * step + len];
            for ((b, &x), &w) in self.buf.iter_mut().zip(chunk).zip(&self.window) {
                *b = Complex64::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
            for (a, b) in acc.iter_mut().zip(&self.buf) {
                *a += b.norm_sqr();
            }
        }

        let norm = 1.0 / (fs_hz * self.window_power * segments as f64);
        let nyquist = if len.is_multiple_of(2) { Some(len / 2) } else { None };
        let pxx: Vec<f64> = acc
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let one_sided = if k == 0 || Some(k) == nyquist { 1.0 } else { 2.0 };
                p * norm * one_sided
            })
            .collect();
        let freqs_hz = (0..bins).map(|k| k as f64 * fs_hz / len as f64).collect();

        Ok(SpectralDensity {
            freqs_hz,
            pxx,
            fs_hz,
            nfft: len,
            segment_len: len,
            overlap: self.params.overlap,
            segments,
        })
    }
}

pub fn welch_psd(signal: &[f64], fs_hz: f64, params: &WelchParams) -> Result<SpectralDensity, DspError> {
    WelchEstimator::new(*params)?.estimate(signal, fs_hz)
}

/// `fs * sum(pxx) / len(pxx)`, taken literally on the one-sided estimate.
///
/// With `nfft` points this equals `nfft / (nfft/2 + 1)` times
/// [`SpectralDensity::total_power`], e.g. 128/65 for 128-point segments.
pub fn average_power(psd: &SpectralDensity) -> f64 {
    if psd.pxx.is_empty() {
        return 0.0;
    }
    psd.fs_hz * psd.pxx.iter().sum::<f64>() / psd.pxx.len() as f64
}

/// Frequency splitting the trapezoidal area under the PSD into equal halves.
/// The cumulative area is interpolated linearly within the crossing bin.
pub fn median_frequency(psd: &SpectralDensity) -> Result<f64, DspError> {
    let p = &psd.pxx;
    let f = &psd.freqs_hz;
    if p.len() < 2 || p.iter().all(|&v| v <= 0.0) {
        return Err(DspError::ZeroPower);
    }
    let mut cumulative = Vec::with_capacity(p.len());
    cumulative.push(0.0);
    for k in 1..p.len() {
        let area = 0.5 * (p[k - 1] + p[k]) * (f[k] - f[k - 1]);
        cumulative.push(cumulative[k - 1] + area);
    }
    let half = cumulative[p.len() - 1] / 2.0;
    let k = cumulative
        .iter()
        .position(|&c| c >= half)
        .expect("last cumulative value is at least half of itself");
    if k == 0 {
        return Ok(f[0]);
    }
    let (lo, hi) = (cumulative[k - 1], cumulative[k]);
    Ok(f[k - 1] + (half - lo) / (hi - lo) * (f[k] - f[k - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn psd_from(pxx: Vec<f64>, fs: f64) -> SpectralDensity {
        let nfft = (pxx.len() - 1) * 2;
        SpectralDensity {
            freqs_hz: (0..pxx.len()).map(|k| k as f64 * fs / nfft as f64).collect(),
            pxx,
            fs_hz: fs,
            nfft,
            segment_len: nfft,
            overlap: 0.0,
            segments: 1,
        }
    }

    #[test]
    fn grid_invariants() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let psd = welch_psd(&x, 50.0, &WelchParams::default()).unwrap();
        assert_eq!(psd.freqs_hz.len(), 65);
        assert_eq!(psd.freqs_hz[0], 0.0);
        assert_eq!(*psd.freqs_hz.last().unwrap(), 25.0);
        assert_eq!(psd.segments, (300 - 128) / 64 + 1);
        assert!(psd.pxx.iter().all(|&v| v >= 0.0));
        for w in psd.freqs_hz.windows(2) {
            assert!((w[1] - w[0] - 50.0 / 128.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_signal_zero_psd() {
        let psd = welch_psd(&[0.0; 256], 50.0, &WelchParams::default()).unwrap();
        assert!(psd.pxx.iter().all(|&v| v == 0.0));
        assert_eq!(average_power(&psd), 0.0);
        assert_eq!(median_frequency(&psd), Err(DspError::ZeroPower));
    }

    #[test]
    fn too_short() {
        assert_eq!(
            welch_psd(&[0.0; 100], 50.0, &WelchParams::default()),
            Err(DspError::SignalTooShort { len: 100, required: 128 })
        );
    }

    #[test]
    fn average_power_constant() {
        let psd = psd_from(vec![0.25; 65], 50.0);
        assert!((average_power(&psd) - 50.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn median_of_flat_spectrum_is_centre() {
        let psd = psd_from(vec![1.0; 65], 50.0);
        assert!((median_frequency(&psd).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn median_of_single_spike_is_spike() {
        let mut p = vec![0.0; 65];
        p[20] = 3.0;
        let psd = psd_from(p, 50.0);
        assert!((median_frequency(&psd).unwrap() - psd.freqs_hz[20]).abs() < 1e-12);
    }
}
