//! End-to-end per-node processing: calibration, despiking, gravity removal,
//! features and classification, plus the two-stage network listener.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::sync_channel;
use std::sync::Arc;
use std::thread;

use crate::calibration::{apply_calibration, CalibrationModel};
use crate::classifier::{ActivityLabel, ClassifierConfig};
use crate::dsp::{hpf_coefficients, MovingAverage, SosFilter};
use crate::eval::{evaluate, Annotation, EvalOptions, EvalReport, LabeledWindow};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureVector};
use crate::synth::AnnotatedSession;
use crate::wire::{DatagramListener, RawSampleStream, ReorderStats, Reorderer, SensorPacket, Units};
use crate::Error;

/// Capacity of the queue between the ingestion and classification stages.
pub const QUEUE_DEPTH: usize = 1024;

/// Per-sample front end: millivolts (or g) in, gravity-free g out.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    calibration: Option<CalibrationModel>,
    ma: [MovingAverage; 3],
    hpf: [SosFilter; 3],
    primed: bool,
}

impl Preprocessor {
    /// `calibration` is `None` when the input is already in g.
    pub fn new(calibration: Option<CalibrationModel>, ma_window: usize, fs_hz: f64) -> Result<Self, Error> {
        if let Some(c) = &calibration {
            c.validate()?;
        }
        let ma = MovingAverage::new(ma_window)?;
        let hpf = hpf_coefficients(fs_hz)?;
        Ok(Preprocessor {
            calibration,
            ma: [ma.clone(), ma.clone(), ma],
            hpf: [hpf.clone(), hpf.clone(), hpf],
            primed: false,
        })
    }

    pub fn process(&mut self, raw: [f64; 3]) -> [f64; 3] {
        let g = match &self.calibration {
            Some(c) => apply_calibration(c, raw),
            None => raw,
        };
        let smooth: [f64; 3] = std::array::from_fn(|k| self.ma[k].process(g[k]));
        if !self.primed {
            // start as if the first reading had been held forever, so the
            // gravity step does not ring through the high-pass
            for (f, &x) in self.hpf.iter_mut().zip(&smooth) {
                f.prime(x);
            }
            self.primed = true;
        }
        std::array::from_fn(|k| self.hpf[k].process(smooth[k]))
    }

    pub fn reset(&mut self) {
        self.ma.iter_mut().for_each(MovingAverage::reset);
        self.hpf.iter_mut().for_each(SosFilter::reset);
        self.primed = false;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fs_hz: f64,
    pub input_units: Units,
    pub calibration: CalibrationModel,
    pub classifier: ClassifierConfig,
    pub features: FeatureConfig,
    pub ma_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fs_hz: 50.0,
            input_units: Units::Mv,
            calibration: CalibrationModel::nominal(),
            classifier: ClassifierConfig::default(),
            features: FeatureConfig::default(),
            ma_window: 3,
        }
    }
}

/// One classified decision window `[window_start_ms, window_end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub window_start_ms: u64,
    pub window_end_ms: u64,
    pub label: ActivityLabel,
    pub features: FeatureVector,
}

impl From<&Decision> for LabeledWindow {
    fn from(d: &Decision) -> Self {
        LabeledWindow {
            start_ms: d.window_start_ms,
            end_ms: d.window_end_ms,
            label: d.label,
            fm_hz: d.features.fm_hz,
        }
    }
}

/// Streaming classifier for a single node.
pub struct Pipeline {
    pre: Preprocessor,
    fx: FeatureExtractor,
    classifier: ClassifierConfig,
    fs_hz: f64,
}

impl Pipeline {
    pub fn new(cfg: &PipelineConfig) -> Result<Self, Error> {
        cfg.classifier.validate(cfg.fs_hz)?;
        if (cfg.features.fs_hz - cfg.fs_hz).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "feature rate {} Hz differs from pipeline rate {} Hz",
                cfg.features.fs_hz, cfg.fs_hz
            )));
        }
        let calibration = match cfg.input_units {
            Units::Mv => Some(cfg.calibration),
            Units::G => None,
        };
        Ok(Pipeline {
            pre: Preprocessor::new(calibration, cfg.ma_window, cfg.fs_hz)?,
            fx: FeatureExtractor::new(cfg.features)?,
            classifier: cfg.classifier,
            fs_hz: cfg.fs_hz,
        })
    }

    pub fn push(&mut self, timestamp_ms: u64, raw: [f64; 3]) -> Option<Decision> {
        let g = self.pre.process(raw);
        let f = self.fx.push(timestamp_ms, g)?;
        Some(self.decide(f))
    }

    /// Classifies the trailing partial window, if any.
    pub fn finish(&mut self) -> Option<Decision> {
        let f = self.fx.finish()?;
        Some(self.decide(f))
    }

    fn decide(&self, f: FeatureVector) -> Decision {
        let span_ms = (f.sample_count as f64 * 1000.0 / self.fs_hz).round() as u64;
        Decision {
            window_start_ms: f.window_start_ms,
            window_end_ms: f.window_start_ms + span_ms,
            label: self.classifier.decide(f.sma_g, f.fm_hz),
            features: f,
        }
    }
}

/// Runs every node of `stream` through its own pipeline. Output is grouped by
/// node id, each node's decisions in time order. Trailing partial windows are
/// dropped.
pub fn run_stream(stream: &RawSampleStream, cfg: &PipelineConfig) -> Result<Vec<(u16, Decision)>, Error> {
    let cfg = PipelineConfig {
        input_units: stream.units,
        ..cfg.clone()
    };
    let mut nodes: BTreeMap<u16, (Pipeline, Vec<Decision>)> = BTreeMap::new();
    for s in &stream.samples {
        let (p, out) = match nodes.entry(s.node_id) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert((Pipeline::new(&cfg)?, Vec::new())),
        };
        out.extend(p.push(u64::from(s.timestamp_ms), s.axes));
    }
    Ok(nodes
        .into_iter()
        .flat_map(|(id, (_, ds))| ds.into_iter().map(move |d| (id, d)))
        .collect())
}

/// Classifies a synthetic session fed in g.
pub fn classify_session(session: &AnnotatedSession, cfg: &PipelineConfig) -> Result<Vec<Decision>, Error> {
    Ok(run_stream(&session.to_g_stream(), cfg)?
        .into_iter()
        .map(|(_, d)| d)
        .collect())
}

/// Feature vectors of the windows lying wholly inside an annotation, paired
/// with its label. The first `warmup_windows` of every annotated segment are
/// left out, since their spectral buffer still holds the previous activity.
pub fn annotated_features(
    decisions: &[Decision],
    annotations: &[Annotation],
    warmup_windows: usize,
) -> Vec<(FeatureVector, ActivityLabel)> {
    let mut seen = vec![0usize; annotations.len()];
    let mut out = Vec::new();
    for d in decisions {
        let inside = annotations
            .iter()
            .position(|a| d.window_start_ms >= a.start_ms && d.window_end_ms <= a.end_ms);
        if let Some(i) = inside {
            seen[i] += 1;
            if seen[i] > warmup_windows {
                out.push((d.features, annotations[i].label));
            }
        }
    }
    out
}

/// Training set for [`crate::classifier::fit_thresholds`] from synthetic sessions.
pub fn training_set(
    sessions: &[AnnotatedSession],
    cfg: &PipelineConfig,
    warmup_windows: usize,
) -> Result<Vec<(FeatureVector, ActivityLabel)>, Error> {
    let mut out = Vec::new();
    for s in sessions {
        let decisions = classify_session(s, cfg)?;
        out.extend(annotated_features(&decisions, &s.annotations, warmup_windows));
    }
    Ok(out)
}

/// Classifies every session and scores them together. Sessions are laid end
/// to end on one time axis, so a segment never borrows windows from another
/// session.
pub fn evaluate_sessions(
    sessions: &[AnnotatedSession],
    cfg: &PipelineConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, Error> {
    let mut windows = Vec::new();
    let mut annotations = Vec::new();
    let mut offset = 0;
    for s in sessions {
        windows.extend(classify_session(s, cfg)?.iter().map(|d| {
            let w = LabeledWindow::from(d);
            LabeledWindow {
                start_ms: w.start_ms + offset,
                end_ms: w.end_ms + offset,
                ..w
            }
        }));
        annotations.extend(s.annotations.iter().map(|a| Annotation {
            start_ms: a.start_ms + offset,
            end_ms: a.end_ms + offset,
            ..*a
        }));
        offset += s.duration_ms();
    }
    Ok(evaluate(&windows, &annotations, opts)?)
}

#[derive(Debug, Clone, Default)]
pub struct ListenOptions {
    /// Stop after this many frames have been received (valid or not).
    pub max_frames: Option<u64>,
    /// Checked between datagrams; set it to end the session.
    pub stop: Arc<AtomicBool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ListenSummary {
    pub frames: u64,
    pub decisions: u64,
    pub reorder: ReorderStats,
}

/// Receives frames on one thread, reorders them per node and hands them
/// through a bounded queue to the calling thread, which runs a pipeline per
/// node and reports each decision to `sink` as `(node_id, decision)`.
///
/// Input is millivolt frames, calibrated with `cfg.calibration`.
pub fn listen<F>(
    mut listener: DatagramListener,
    cfg: &PipelineConfig,
    opts: &ListenOptions,
    mut sink: F,
) -> Result<ListenSummary, Error>
where
    F: FnMut(u16, &Decision),
{
    let cfg = PipelineConfig {
        input_units: Units::Mv,
        ..cfg.clone()
    };
    // fail before spawning anything
    Pipeline::new(&cfg)?;

    let (tx, rx) = sync_channel::<SensorPacket>(QUEUE_DEPTH);
    let stop = Arc::clone(&opts.stop);
    let max_frames = opts.max_frames;
    let ingest = thread::spawn(move || {
        let mut reorder = Reorderer::new();
        let mut frames = 0u64;
        let send_all = |ps: Vec<SensorPacket>| ps.into_iter().all(|p| tx.send(p).is_ok());
        while !stop.load(Ordering::Relaxed) && max_frames.is_none_or(|m| frames < m) {
            match listener.recv() {
                Ok(None) => continue,
                Ok(Some(p)) => {
                    frames += 1;
                    if !send_all(reorder.push(p)) {
                        break;
                    }
                }
                Err(e) => {
                    frames += 1;
                    reorder.note_corrupt();
                    log::debug!("dropped frame: {e}");
                }
            }
        }
        send_all(reorder.flush());
        (frames, reorder.stats())
    });

    let mut nodes: BTreeMap<u16, Pipeline> = BTreeMap::new();
    let mut decisions = 0u64;
    for p in rx {
        let pipeline = match nodes.entry(p.node_id) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(Pipeline::new(&cfg)?),
        };
        if let Some(d) = pipeline.push(u64::from(p.timestamp_ms), p.axes_mv().map(f64::from)) {
            decisions += 1;
            sink(p.node_id, &d);
        }
    }
    let (frames, reorder) = ingest
        .join()
        .map_err(|_| Error::Config("ingestion thread panicked".into()))?;
    Ok(ListenSummary {
        frames,
        decisions,
        reorder,
    })
}
