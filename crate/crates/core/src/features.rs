//! Per-second features: signal magnitude area over the three axes and the
//! median frequency of the z axis.
//!
//! Decision windows are non-overlapping, one second long. The median
//! frequency comes from a Welch PSD of the most recent 256 z samples, so it is
//! missing until the buffer first fills (the first five windows at 50 Hz).

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{median_frequency, DspError, WelchEstimator, WelchParams};
use crate::table::{for_each_row, parse_field, TableError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("EmptyWindow: SMA needs at least one sample")]
    EmptyWindow,
    #[error("InvalidDuration: {0} s")]
    InvalidDuration(f64),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub window_start_ms: u64,
    pub sma_g: f64,
    pub fm_hz: Option<f64>,
    pub sample_count: usize,
    /// Set on a trailing window that ended before it filled.
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub fs_hz: f64,
    pub window_samples: usize,
    pub spectral_buffer: usize,
    pub welch: WelchParams,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            fs_hz: 50.0,
            window_samples: 50,
            spectral_buffer: 256,
            welch: WelchParams::default(),
        }
    }
}

impl FeatureConfig {
    /// Default layout scaled to another sample rate: one-second windows and a
    /// 5.12 s spectral buffer.
    pub fn for_rate(fs_hz: f64) -> Self {
        let window_samples = fs_hz.round().max(1.0) as usize;
        let spectral_buffer = (fs_hz * 5.12).round() as usize;
        FeatureConfig {
            fs_hz,
            window_samples,
            spectral_buffer,
            welch: WelchParams {
                segment_len: spectral_buffer / 2,
                ..WelchParams::default()
            },
        }
    }

    pub fn window_duration_s(&self) -> f64 {
        self.window_samples as f64 / self.fs_hz
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(FeatureError::InvalidConfig(format!("fs {}", self.fs_hz)));
        }
        if self.window_samples == 0 {
            return Err(FeatureError::InvalidConfig("empty decision window".into()));
        }
        if self.spectral_buffer < self.welch.segment_len {
            return Err(FeatureError::InvalidConfig(format!(
                "spectral buffer {} shorter than Welch segment {}",
                self.spectral_buffer, self.welch.segment_len
            )));
        }
        Ok(())
    }
}

/// Signal magnitude area: the time average of `|x| + |y| + |z|` over a window
/// lasting `duration_s`, i.e. `(1/T) * sum(|x|+|y|+|z|) * dt`.
pub fn compute_sma(window: &[[f64; 3]], duration_s: f64) -> Result<f64, FeatureError> {
    if window.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(FeatureError::InvalidDuration(duration_s));
    }
    let dt = duration_s / window.len() as f64;
    let area: f64 = window
        .iter()
        .map(|s| (s[0].abs() + s[1].abs() + s[2].abs()) * dt)
        .sum();
    Ok(area / duration_s)
}

/// Streaming feature extractor for one node.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    window: Vec<[f64; 3]>,
    window_start_ms: u64,
    z_history: VecDeque<f64>,
    z_scratch: Vec<f64>,
    welch: WelchEstimator,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self, FeatureError> {
        cfg.validate()?;
        Ok(FeatureExtractor {
            window: Vec::with_capacity(cfg.window_samples),
            window_start_ms: 0,
            z_history: VecDeque::with_capacity(cfg.spectral_buffer + 1),
            z_scratch: Vec::with_capacity(cfg.spectral_buffer),
            welch: WelchEstimator::new(cfg.welch)?,
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// Adds one preprocessed sample; returns a feature vector whenever a
    /// decision window completes.
    pub fn push(&mut self, timestamp_ms: u64, g: [f64; 3]) -> Option<FeatureVector> {
        if self.window.is_empty() {
            self.window_start_ms = timestamp_ms;
        }
        self.window.push(g);
        self.z_history.push_back(g[2]);
        if self.z_history.len() > self.cfg.spectral_buffer {
            self.z_history.pop_front();
        }
        if self.window.len() == self.cfg.window_samples {
            Some(self.emit(false))
        } else {
            None
        }
    }

    /// Emits the trailing partial window, if any samples are pending.
    pub fn finish(&mut self) -> Option<FeatureVector> {
        if self.window.is_empty() {
            None
        } else {
            Some(self.emit(true))
        }
    }

    fn emit(&mut self, partial: bool) -> FeatureVector {
        let duration_s = self.window.len() as f64 / self.cfg.fs_hz;
        let sma_g = compute_sma(&self.window, duration_s).expect("window is non-empty");
        let fm_hz = self.median_frequency();
        let fv = FeatureVector {
            window_start_ms: self.window_start_ms,
            sma_g,
            fm_hz,
            sample_count: self.window.len(),
            partial,
        };
        self.window.clear();
        fv
    }

    fn median_frequency(&mut self) -> Option<f64> {
        if self.z_history.len() < self.cfg.spectral_buffer {
            return None;
        }
        self.z_scratch.clear();
        self.z_scratch.extend(self.z_history.iter().copied());
        let psd = self.welch.estimate(&self.z_scratch, self.cfg.fs_hz).ok()?;
        median_frequency(&psd).ok().filter(|&f| f > 0.0)
    }
}

/// Batch form of [`FeatureExtractor`] over `(timestamp_ms, g)` samples,
/// including a flagged trailing partial window.
pub fn feature_stream(
    samples: &[(u64, [f64; 3])],
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut fx = FeatureExtractor::new(*cfg)?;
    let mut out: Vec<FeatureVector> = samples
        .iter()
        .filter_map(|&(ts, g)| fx.push(ts, g))
        .collect();
    out.extend(fx.finish());
    Ok(out)
}

/// `window_start_ms,sma_g,fm_hz`; a missing median frequency is an empty field.
pub fn write_features_csv<W: Write>(mut out: W, features: &[FeatureVector]) -> std::io::Result<()> {
    writeln!(out, "window_start_ms,sma_g,fm_hz")?;
    for f in features {
        match f.fm_hz {
            Some(fm) => writeln!(out, "{},{},{}", f.window_start_ms, f.sma_g, fm)?,
            None => writeln!(out, "{},{},", f.window_start_ms, f.sma_g)?,
        }
    }
    out.flush()
}

/// Inverse of [`write_features_csv`]. The file carries no sample counts, so
/// every vector comes back with `sample_count` set to `window_samples`.
pub fn read_features_csv<R: Read>(input: R, window_samples: usize) -> Result<Vec<FeatureVector>, TableError> {
    let mut out = Vec::new();
    for_each_row(input, &["window_start_ms", "sma_g", "fm_hz"], |line, f| {
        let fm_hz = if f[2].is_empty() {
            None
        } else {
            Some(parse_field(line, "fm_hz", f[2])?)
        };
        out.push(FeatureVector {
            window_start_ms: parse_field(line, "window_start_ms", f[0])?,
            sma_g: parse_field(line, "sma_g", f[1])?,
            fm_hz,
            sample_count: window_samples,
            partial: false,
        });
        Ok(())
    })?;
    Ok(out)
}
