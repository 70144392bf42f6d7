//! Synthetic, annotated accelerometer sessions.
//!
//! Each activity is a gravity projection plus up to three harmonics of a gait
//! fundamental per axis, with Gaussian sensor noise. The fundamental is
//! redrawn once per stride (per cycle of the fundamental) with a relative
//! standard deviation of `jitter_fraction`. Rest has no harmonics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::calibration::CalibrationModel;
use crate::classifier::ActivityLabel;
use crate::eval::Annotation;
use crate::wire::{RawSample, RawSampleStream, SensorPacket, Source, Units};

/// Sensor full-scale range.
pub const RANGE_G: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("InvalidProfile: {0}")]
    InvalidProfile(String),
    #[error("InvalidProtocol: {0}")]
    InvalidProtocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityProfile {
    pub label: ActivityLabel,
    pub fundamental_hz: f64,
    /// `harmonics_g[axis][h]` is the amplitude of harmonic `h + 1` on `axis`.
    pub harmonics_g: [[f64; 3]; 3],
    pub noise_sigma_g: f64,
    /// Unit vector; the static reading when the wearer is still.
    pub gravity: [f64; 3],
    pub jitter_fraction: f64,
}

// Fixed phase of each harmonic per axis, so the axes are not in lockstep.
const PHASES: [[f64; 3]; 3] = [[0.9, 2.1, 0.4], [2.3, 0.7, 1.6], [0.0, 1.2, 2.8]];

impl ActivityProfile {
    pub fn rest() -> Self {
        ActivityProfile {
            label: ActivityLabel::Rest,
            fundamental_hz: 1.0,
            harmonics_g: [[0.0; 3]; 3],
            noise_sigma_g: 0.03,
            gravity: [0.0, 0.0, 1.0],
            jitter_fraction: 0.0,
        }
    }

    pub fn walk() -> Self {
        ActivityProfile {
            label: ActivityLabel::Walk,
            fundamental_hz: 2.6,
            harmonics_g: [[0.10, 0.04, 0.0], [0.08, 0.03, 0.0], [0.35, 0.08, 0.03]],
            noise_sigma_g: 0.03,
            gravity: [0.0, 0.0, 1.0],
            jitter_fraction: 0.05,
        }
    }

    pub fn run() -> Self {
        ActivityProfile {
            label: ActivityLabel::Run,
            fundamental_hz: 3.8,
            harmonics_g: [[0.30, 0.10, 0.0], [0.25, 0.08, 0.0], [1.10, 0.25, 0.08]],
            noise_sigma_g: 0.03,
            gravity: [0.0, 0.0, 1.0],
            jitter_fraction: 0.05,
        }
    }

    pub fn for_label(label: ActivityLabel) -> Self {
        match label {
            ActivityLabel::Walk => Self::walk(),
            ActivityLabel::Run => Self::run(),
            _ => Self::rest(),
        }
    }

    /// Copy with every harmonic amplitude multiplied by `k`.
    pub fn scaled(mut self, k: f64) -> Self {
        for axis in &mut self.harmonics_g {
            for a in axis.iter_mut() {
                *a *= k;
            }
        }
        self
    }

    /// Copy whose harmonics are a pure tone of `amplitude_g` on z only.
    pub fn z_tone(freq_hz: f64, amplitude_g: f64) -> Self {
        ActivityProfile {
            label: ActivityLabel::Unknown,
            fundamental_hz: freq_hz,
            harmonics_g: [[0.0; 3], [0.0; 3], [amplitude_g, 0.0, 0.0]],
            noise_sigma_g: 0.0,
            gravity: [0.0, 0.0, 1.0],
            jitter_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        if !(self.fundamental_hz > 0.0 && self.fundamental_hz < 25.0) {
            return bad(format!("fundamental {} Hz outside (0, 25)", self.fundamental_hz));
        }
        if self.harmonics_g.iter().flatten().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("harmonic amplitudes must be finite and non-negative".into());
        }
        if !(self.noise_sigma_g.is_finite() && self.noise_sigma_g >= 0.0) {
            return bad(format!("noise sigma {}", self.noise_sigma_g));
        }
        let norm = self.gravity.iter().map(|g| g * g).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return bad(format!("gravity vector has norm {norm}, expected 1"));
        }
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            return bad(format!("jitter fraction {} outside [0, 0.5)", self.jitter_fraction));
        }
        Ok(())
    }
}

fn render(
    profile: &ActivityProfile,
    n: usize,
    fs_hz: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 3]>, SynthError> {
    profile.validate()?;
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(SynthError::InvalidProfile(format!("sample rate {fs_hz}")));
    }
    let noise = Normal::new(0.0, profile.noise_sigma_g)
        .map_err(|e| SynthError::InvalidProfile(e.to_string()))?;
    let stride = Normal::new(0.0, 1.0).expect("unit normal");
    let draw_freq = |rng: &mut ChaCha8Rng| {
        if profile.jitter_fraction == 0.0 {
            profile.fundamental_hz
        } else {
            let z: f64 = stride.sample(rng);
            profile.fundamental_hz * (1.0 + profile.jitter_fraction * z.clamp(-3.0, 3.0))
        }
    };

    let start_phase: f64 = if profile.jitter_fraction > 0.0 { rng.random() } else { 0.0 };
    let mut cycles = start_phase;
    let mut freq = draw_freq(rng);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = profile.gravity;
        for (axis, value) in s.iter_mut().enumerate() {
            for (h, (&a, phase)) in profile.harmonics_g[axis].iter().zip(PHASES[axis]).enumerate() {
                if a != 0.0 {
                    let arg = std::f64::consts::TAU * (h + 1) as f64 * cycles + phase;
                    *value += a * arg.sin();
                }
            }
            if profile.noise_sigma_g > 0.0 {
                *value += noise.sample(rng);
            }
            *value = value.clamp(-RANGE_G, RANGE_G);
        }
        out.push(s);
        let before = cycles.floor();
        cycles += freq / fs_hz;
        if cycles.floor() != before {
            freq = draw_freq(rng);
        }
    }
    Ok(out)
}

/// `duration_s * fs_hz` samples in g, deterministic for a given seed.
pub fn generate_activity(
    profile: &ActivityProfile,
    duration_s: f64,
    fs_hz: f64,
    seed: u64,
) -> Result<Vec<[f64; 3]>, SynthError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(SynthError::InvalidProfile(format!("duration {duration_s} s")));
    }
    let n = (duration_s * fs_hz).round() as usize;
    render(profile, n, fs_hz, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Samples in g with the ground-truth annotation track.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSession {
    pub fs_hz: f64,
    pub samples_g: Vec<[f64; 3]>,
    pub annotations: Vec<Annotation>,
}

impl AnnotatedSession {
    pub fn timestamp_ms(&self, index: usize) -> u64 {
        (index as f64 * 1000.0 / self.fs_hz).round() as u64
    }

    pub fn duration_ms(&self) -> u64 {
        self.timestamp_ms(self.samples_g.len())
    }

    /// Stream in g.
    pub fn to_g_stream(&self) -> RawSampleStream {
        let mut s = RawSampleStream::new(Source::Synthetic, Units::G);
        s.samples = self
            .samples_g
            .iter()
            .enumerate()
            .map(|(i, &axes)| RawSample {
                node_id: 0,
                timestamp_ms: self.timestamp_ms(i) as u32,
                axes,
            })
            .collect();
        s
    }

    /// Stream in millivolts as a device described by `device` would report it.
    pub fn to_mv_stream(&self, device: &CalibrationModel) -> RawSampleStream {
        let mut s = self.to_g_stream();
        s.units = Units::Mv;
        for sample in &mut s.samples {
            sample.axes = std::array::from_fn(|k| device.axes[k].to_mv(sample.axes[k]));
        }
        s
    }

    /// One frame per sample, millivolts rounded to the nearest integer.
    pub fn to_packets(&self, device: &CalibrationModel, node_id: u16) -> Vec<SensorPacket> {
        self.to_mv_stream(device)
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mv = s.axes.map(|v| v.round().clamp(0.0, u16::MAX as f64) as u16);
                SensorPacket {
                    node_id,
                    seq: i as u16,
                    timestamp_ms: s.timestamp_ms,
                    ax_mv: mv[0],
                    ay_mv: mv[1],
                    az_mv: mv[2],
                }
            })
            .collect()
    }
}

pub fn generate_session(
    protocol: &[(ActivityProfile, f64)],
    fs_hz: f64,
    seed: u64,
) -> Result<AnnotatedSession, SynthError> {
    if protocol.is_empty() {
        return Err(SynthError::InvalidProtocol("empty protocol".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut session = AnnotatedSession {
        fs_hz,
        samples_g: Vec::new(),
        annotations: Vec::with_capacity(protocol.len()),
    };
    for (profile, duration_s) in protocol {
        if !(duration_s.is_finite() && *duration_s > 0.0) {
            return Err(SynthError::InvalidProtocol(format!("segment duration {duration_s} s")));
        }
        let n = (duration_s * fs_hz).round() as usize;
        let start = session.samples_g.len();
        session.samples_g.extend(render(profile, n, fs_hz, &mut rng)?);
        session.annotations.push(Annotation {
            start_ms: session.timestamp_ms(start),
            end_ms: session.timestamp_ms(start + n),
            label: profile.label,
        });
    }
    Ok(session)
}

/// Five minutes each of rest, walk and run.
pub fn default_protocol() -> Vec<(ActivityProfile, f64)> {
    vec![
        (ActivityProfile::rest(), 300.0),
        (ActivityProfile::walk(), 300.0),
        (ActivityProfile::run(), 300.0),
    ]
}

/// Layout of a multi-session corpus of walk/run experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusOptions {
    pub sessions: usize,
    /// Walk/run pairs spread over all sessions (earlier sessions take the remainder).
    pub pairs: usize,
    pub rest_s: f64,
    pub segment_s: f64,
    pub jitter_fraction: f64,
    /// Per-segment spread of the gait fundamental, uniform +/- this many Hz.
    pub fundamental_spread_hz: f64,
    /// Per-segment amplitude multiplier ranges for walk and run.
    pub walk_amplitude: (f64, f64),
    pub run_amplitude: (f64, f64),
    pub fs_hz: f64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            sessions: 10,
            pairs: 24,
            rest_s: 60.0,
            segment_s: 60.0,
            jitter_fraction: 0.05,
            fundamental_spread_hz: 0.2,
            walk_amplitude: (0.85, 1.15),
            run_amplitude: (0.85, 1.15),
            fs_hz: 50.0,
        }
    }
}

impl CorpusOptions {
    /// Slow runs and brisk walks: the two SMA distributions overlap.
    pub fn overlap_stressed() -> Self {
        CorpusOptions {
            walk_amplitude: (1.1, 1.8),
            run_amplitude: (0.45, 0.8),
            ..Self::default()
        }
    }

    /// No stride jitter and the default amplitudes.
    pub fn well_separated() -> Self {
        CorpusOptions {
            jitter_fraction: 0.0,
            walk_amplitude: (1.0, 1.0),
            run_amplitude: (1.0, 1.0),
            ..Self::default()
        }
    }

    fn pairs_in(&self, session: usize) -> usize {
        let base = self.pairs / self.sessions;
        base + usize::from(session < self.pairs % self.sessions)
    }
}

/// `opts.sessions` sessions, each a rest segment followed by alternating
/// walk and run segments. Session `i` is seeded with `base_seed + i`.
pub fn generate_corpus(opts: &CorpusOptions, base_seed: u64) -> Result<Vec<AnnotatedSession>, SynthError> {
    if opts.sessions == 0 {
        return Err(SynthError::InvalidProtocol("corpus needs at least one session".into()));
    }
    (0..opts.sessions)
        .map(|i| {
            let seed = base_seed + i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_C0DE);
            let mut protocol = vec![(ActivityProfile::rest(), opts.rest_s)];
            for _ in 0..opts.pairs_in(i) {
                for (base, amp) in [
                    (ActivityProfile::walk(), opts.walk_amplitude),
                    (ActivityProfile::run(), opts.run_amplitude),
                ] {
                    let k = if amp.1 > amp.0 { rng.random_range(amp.0..amp.1) } else { amp.0 };
                    let mut p = base.scaled(k);
                    p.jitter_fraction = opts.jitter_fraction;
                    if opts.fundamental_spread_hz > 0.0 {
                        p.fundamental_hz +=
                            rng.random_range(-opts.fundamental_spread_hz..opts.fundamental_spread_hz);
                    }
                    protocol.push((p, opts.segment_s));
                }
            }
            generate_session(&protocol, opts.fs_hz, seed)
        })
        .collect()
}
