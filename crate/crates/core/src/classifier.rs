//! Hierarchical threshold classifier.
//!
//! ```text
//! sma < th1                         -> Rest
//! sma > th2 * (1 + delta)           -> Run
//! sma < th2 * (1 - delta)           -> Walk
//! otherwise (ambiguity band):
//!     fm >= fm_threshold            -> Run
//!     fm <  fm_threshold            -> Walk
//!     fm missing                    -> Unknown
//! ```
//!
//! With `delta = 0` the band is a single point and the tree reduces to two
//! SMA thresholds.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::table::{for_each_row, parse_field, TableError};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("MissingClass: no training example labelled {0}")]
    MissingClass(ActivityLabel),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityLabel {
    Rest,
    Walk,
    Run,
    Unknown,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 4] = [
        ActivityLabel::Rest,
        ActivityLabel::Walk,
        ActivityLabel::Run,
        ActivityLabel::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityLabel::Rest => "rest",
            ActivityLabel::Walk => "walk",
            ActivityLabel::Run => "run",
            ActivityLabel::Unknown => "unknown",
        }
    }

    pub fn is_movement(self) -> bool {
        matches!(self, ActivityLabel::Walk | ActivityLabel::Run)
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown activity label '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub th1_sma_g: f64,
    pub th2_sma_g: f64,
    pub ambiguity_fraction: f64,
    pub fm_threshold_hz: f64,
    #[serde(default = "one_second")]
    pub window_s: f64,
}

fn one_second() -> f64 {
    1.0
}

const SHIPPED_CONFIG: &str = include_str!("../data/default_classifier.json");

impl Default for ClassifierConfig {
    /// Thresholds fitted on the bundled synthetic training corpus; see
    /// `data/default_classifier.json`.
    fn default() -> Self {
        serde_json::from_str(SHIPPED_CONFIG).expect("shipped classifier config parses")
    }
}

impl ClassifierConfig {
    pub fn validate(&self, fs_hz: f64) -> Result<(), ClassifierError> {
        let bad = |m: String| Err(ClassifierError::InvalidConfig(m));
        let finite = [
            self.th1_sma_g,
            self.th2_sma_g,
            self.ambiguity_fraction,
            self.fm_threshold_hz,
            self.window_s,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite field".into());
        }
        if self.th1_sma_g <= 0.0 {
            return bad(format!("th1 {} must be positive", self.th1_sma_g));
        }
        if self.th1_sma_g >= self.th2_sma_g {
            return bad(format!(
                "th1 {} must be below th2 {}",
                self.th1_sma_g, self.th2_sma_g
            ));
        }
        if !(0.0..1.0).contains(&self.ambiguity_fraction) {
            return bad(format!(
                "ambiguity fraction {} outside [0, 1)",
                self.ambiguity_fraction
            ));
        }
        if !(self.fm_threshold_hz > 0.0 && self.fm_threshold_hz < fs_hz / 2.0) {
            return bad(format!(
                "fm threshold {} Hz outside (0, {})",
                self.fm_threshold_hz,
                fs_hz / 2.0
            ));
        }
        if self.window_s <= 0.0 {
            return bad(format!("window {} s", self.window_s));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ClassifierError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates against a 50 Hz Nyquist limit. Unknown keys (such
    /// as a provenance note) are ignored.
    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let cfg: ClassifierConfig = serde_json::from_str(text)?;
        cfg.validate(50.0)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn band(&self) -> (f64, f64) {
        (
            self.th2_sma_g * (1.0 - self.ambiguity_fraction),
            self.th2_sma_g * (1.0 + self.ambiguity_fraction),
        )
    }

    /// Decision rule on raw feature values; the caller guarantees a valid config.
    #[inline]
    pub fn decide(&self, sma_g: f64, fm_hz: Option<f64>) -> ActivityLabel {
        if sma_g < self.th1_sma_g {
            return ActivityLabel::Rest;
        }
        let (low, high) = self.band();
        if sma_g > high {
            ActivityLabel::Run
        } else if sma_g < low {
            ActivityLabel::Walk
        } else {
            match fm_hz {
                Some(f) if f >= self.fm_threshold_hz => ActivityLabel::Run,
                Some(_) => ActivityLabel::Walk,
                None => ActivityLabel::Unknown,
            }
        }
    }
}

pub fn classify_window(
    f: &FeatureVector,
    cfg: &ClassifierConfig,
) -> Result<ActivityLabel, ClassifierError> {
    cfg.validate(50.0)?;
    Ok(cfg.decide(f.sma_g, f.fm_hz))
}

/// One label per feature vector, no smoothing across windows.
pub fn stream_classify(
    features: &[FeatureVector],
    cfg: &ClassifierConfig,
) -> Result<Vec<(u64, ActivityLabel)>, ClassifierError> {
    cfg.validate(50.0)?;
    Ok(features
        .iter()
        .map(|f| (f.window_start_ms, cfg.decide(f.sma_g, f.fm_hz)))
        .collect())
}

/// `window_start_ms,label`
pub fn write_labels_csv<W: Write>(mut out: W, labels: &[(u64, ActivityLabel)]) -> std::io::Result<()> {
    writeln!(out, "window_start_ms,label")?;
    for (t, l) in labels {
        writeln!(out, "{t},{l}")?;
    }
    out.flush()
}

pub fn read_labels_csv<R: Read>(input: R) -> Result<Vec<(u64, ActivityLabel)>, TableError> {
    let mut out = Vec::new();
    for_each_row(input, &["window_start_ms", "label"], |line, f| {
        let label = f[1]
            .parse()
            .map_err(|message| TableError::UnparsableRow { line, message })?;
        out.push((parse_field(line, "window_start_ms", f[0])?, label));
        Ok(())
    })?;
    Ok(out)
}

const TH2_STEPS: usize = 64;
const DELTA_STEP: f64 = 0.02;
const DELTA_MAX: f64 = 0.6;

#[derive(Clone, Copy)]
struct Candidate {
    correct: usize,
    delta: f64,
    fm_margin: f64,
    th2_offset: f64,
    th2: f64,
    fm_threshold: f64,
}

impl Candidate {
    /// More correct, then smaller delta, then a wider f_m gap, then th2 nearer
    /// the centre of the class medians.
    fn beats(&self, other: &Candidate) -> bool {
        if self.correct != other.correct {
            return self.correct > other.correct;
        }
        if (self.delta - other.delta).abs() > 1e-12 {
            return self.delta < other.delta;
        }
        if (self.fm_margin - other.fm_margin).abs() > 1e-12 {
            return self.fm_margin > other.fm_margin;
        }
        self.th2_offset < other.th2_offset
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Chooses th1 by exhaustive search over midpoints between adjacent SMA
/// values, maximising rest/movement accuracy and then the distance to the
/// nearest training point.
fn fit_th1(rest: &[f64], movement: &[f64]) -> f64 {
    let mut points: Vec<(f64, bool)> = rest
        .iter()
        .map(|&v| (v, false))
        .chain(movement.iter().map(|&v| (v, true)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    // threshold between points[j-1] and points[j]: rest below, movement at/above
    let total_move = movement.len();
    let mut rest_below = 0usize;
    let mut move_below = 0usize;
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 1..points.len() {
        if points[j - 1].1 {
            move_below += 1;
        } else {
            rest_below += 1;
        }
        let (lo, hi) = (points[j - 1].0, points[j].0);
        if hi <= lo {
            continue;
        }
        let correct = rest_below + (total_move - move_below);
        let margin = (hi - lo) / 2.0;
        let th = lo + margin;
        let better = match best {
            None => true,
            Some((c, m, _)) => correct > c || (correct == c && margin > m),
        };
        if better {
            best = Some((correct, margin, th));
        }
    }
    match best {
        Some((_, _, th)) if th > 0.0 => th,
        // every SMA identical or non-positive
        _ => points.last().map_or(0.1, |p| p.0.abs().max(1e-6) * 1.5),
    }
}

/// Fits Th1, Th2, the ambiguity fraction and the f_m threshold to labelled
/// windows.
///
/// Th1 is fitted on rest vs movement alone. The remaining three parameters
/// come from a grid over Th2 (64 points across the movement SMA range above
/// Th1) and delta (0 to 0.6 in steps of 0.02); for each pair the f_m
/// threshold is swept exactly over the gaps between the band members' f_m
/// values. The objective is training accuracy, ties going to the smaller
/// delta and then to the wider f_m gap.
pub fn fit_thresholds(
    labeled: &[(FeatureVector, ActivityLabel)],
) -> Result<ClassifierConfig, ClassifierError> {
    for class in [ActivityLabel::Rest, ActivityLabel::Walk, ActivityLabel::Run] {
        if !labeled.iter().any(|(_, l)| *l == class) {
            return Err(ClassifierError::MissingClass(class));
        }
    }
    let rest: Vec<f64> = labeled
        .iter()
        .filter(|(_, l)| *l == ActivityLabel::Rest)
        .map(|(f, _)| f.sma_g)
        .collect();
    let movement: Vec<f64> = labeled
        .iter()
        .filter(|(_, l)| l.is_movement())
        .map(|(f, _)| f.sma_g)
        .collect();
    let th1 = fit_th1(&rest, &movement);

    // movement windows that survive the rest gate, ordered by f_m (missing last)
    let mut active: Vec<(f64, Option<f64>, bool)> = labeled
        .iter()
        .filter(|(f, l)| l.is_movement() && f.sma_g >= th1)
        .map(|(f, l)| (f.sma_g, f.fm_hz, *l == ActivityLabel::Run))
        .collect();
    active.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });

    let fm_of = |run: bool| {
        let mut v: Vec<f64> = labeled
            .iter()
            .filter(|(_, l)| l.is_movement() && (*l == ActivityLabel::Run) == run)
            .filter_map(|(f, _)| f.fm_hz)
            .collect();
        if v.is_empty() {
            None
        } else {
            Some(median(&mut v))
        }
    };
    let fm_default = match (fm_of(false), fm_of(true)) {
        (Some(w), Some(r)) => 0.5 * (w + r),
        _ => 3.3,
    };
    let sma_of = |run: bool| {
        let mut v: Vec<f64> = active
            .iter()
            .filter(|a| a.2 == run)
            .map(|a| a.0)
            .collect();
        if v.is_empty() {
            None
        } else {
            Some(median(&mut v))
        }
    };
    let th2_centre = match (sma_of(false), sma_of(true)) {
        (Some(w), Some(r)) => 0.5 * (w + r),
        _ => th1 * 2.0,
    };

    let (sma_lo, sma_hi) = active.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, a| {
        (acc.0.min(a.0), acc.1.max(a.0))
    });
    let mut th2_grid: Vec<f64> = if active.is_empty() || sma_hi <= sma_lo {
        vec![th2_centre]
    } else {
        (0..=TH2_STEPS)
            .map(|i| sma_lo + (sma_hi - sma_lo) * i as f64 / TH2_STEPS as f64)
            .collect()
    };
    th2_grid.push(th2_centre);
    th2_grid.retain(|&t| t > th1);
    if th2_grid.is_empty() {
        th2_grid.push(th1 * 1.5);
    }
    let delta_steps = (DELTA_MAX / DELTA_STEP).round() as usize;

    let mut best: Option<Candidate> = None;
    let mut band: Vec<(f64, bool)> = Vec::with_capacity(active.len());
    for &th2 in &th2_grid {
        for d in 0..=delta_steps {
            let delta = d as f64 * DELTA_STEP;
            let (low, high) = (th2 * (1.0 - delta), th2 * (1.0 + delta));
            let mut correct_outside = 0usize;
            band.clear();
            for &(sma, fm, is_run) in &active {
                if sma > high {
                    correct_outside += is_run as usize;
                } else if sma < low {
                    correct_outside += !is_run as usize;
                } else if let Some(f) = fm {
                    band.push((f, is_run));
                }
                // band members without f_m come out Unknown: never correct
            }
            let (band_correct, fm_threshold, fm_margin) = sweep_fm(&band, fm_default);
            let cand = Candidate {
                correct: correct_outside + band_correct,
                delta,
                fm_margin,
                th2_offset: (th2 - th2_centre).abs(),
                th2,
                fm_threshold,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    let best = best.expect("grid is non-empty");
    let cfg = ClassifierConfig {
        th1_sma_g: th1,
        th2_sma_g: best.th2,
        ambiguity_fraction: best.delta,
        fm_threshold_hz: best.fm_threshold.clamp(0.05, 24.95),
        window_s: 1.0,
    };
    cfg.validate(50.0)?;
    Ok(cfg)
}

/// Best "Run iff fm >= t" split of band members sorted by f_m. Returns
/// (correct, threshold, half-gap around the threshold).
fn sweep_fm(band: &[(f64, bool)], fallback: f64) -> (usize, f64, f64) {
    if band.is_empty() {
        return (0, fallback, 0.0);
    }
    let total_run = band.iter().filter(|b| b.1).count();
    // j = 0: everything Run
    let mut best = (total_run, fallback.min(band[0].0 - 0.25).max(0.05), 0.25);
    let mut walk_below = 0usize;
    let mut run_below = 0usize;
    for j in 1..=band.len() {
        if band[j - 1].1 {
            run_below += 1;
        } else {
            walk_below += 1;
        }
        let correct = walk_below + (total_run - run_below);
        let (threshold, margin) = if j == band.len() {
            let t = fallback.max(band[j - 1].0 + 0.25);
            (t, 0.25)
        } else {
            let (lo, hi) = (band[j - 1].0, band[j].0);
            if hi <= lo {
                continue;
            }
            (0.5 * (lo + hi), 0.5 * (hi - lo))
        };
        if correct > best.0 || (correct == best.0 && margin > best.2) {
            best = (correct, threshold, margin);
        }
    }
    best
}
