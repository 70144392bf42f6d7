//! Reference implementations shared by the test targets.
#![allow(dead_code)]

use std::f64::consts::TAU;

use actipipe::dsp::{hpf_coefficients, SpectralDensity};

/// One-sided periodogram by direct DFT with window `w`.
pub fn periodogram(x: &[f64], w: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let u: f64 = w.iter().map(|v| v * v).sum();
    (0..n / 2 + 1)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (&xi, &wi)) in x.iter().zip(w).enumerate() {
                let a = TAU * (k * i) as f64 / n as f64;
                re += xi * wi * a.cos();
                im -= xi * wi * a.sin();
            }
            let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
            (re * re + im * im) / (fs * u) * if edge { 1.0 } else { 2.0 }
        })
        .collect()
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect()
}

/// Largest absolute difference relative to the largest reference value.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale
}

/// Steady-state gain of a sinusoid pushed through the shipped high-pass, by
/// least squares on whole periods after `settle_s` seconds.
pub fn injected_gain_db(f: f64, fs: f64, settle_s: f64) -> f64 {
    let mut filter = hpf_coefficients(fs).unwrap();
    let periods = (10.0 * f).ceil().max(4.0);
    let n_settle = (settle_s * fs) as usize;
    let n_fit = (periods / f * fs).round() as usize;
    let (mut s, mut c) = (0.0, 0.0);
    for n in 0..n_settle + n_fit {
        let phase = TAU * f * n as f64 / fs;
        let y = filter.process(phase.sin());
        if n >= n_settle {
            s += y * phase.sin();
            c += y * phase.cos();
        }
    }
    let amp = 2.0 * (s * s + c * c).sqrt() / n_fit as f64;
    20.0 * amp.log10()
}

pub fn tone(f: f64, a: f64, phase: f64, n: usize, fs: f64) -> Vec<f64> {
    (0..n).map(|i| a * (TAU * f * i as f64 / fs + phase).sin()).collect()
}

/// PSD container on the standard grid for a hand-made spectrum.
pub fn flat_grid(pxx: Vec<f64>, fs: f64) -> SpectralDensity {
    let nfft = 2 * (pxx.len() - 1);
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
