//! Scoring labelled decision windows against an annotation track.
//!
//! Window level: a 4x4 confusion matrix (truth rows, prediction columns).
//! Segment level: each annotated interval counts as one experiment and is
//! detected when the plurality label of its windows equals the truth. A tie
//! for first place counts as not detected.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ActivityLabel;
use crate::table::{for_each_row, parse_field, TableError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("NoOverlap: no decision window falls inside an annotation interval")]
    NoOverlap,
    #[error("InvalidAnnotation: {0}")]
    InvalidAnnotation(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Ground-truth interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: ActivityLabel,
}

/// One classified decision window `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledWindow {
    pub start_ms: u64,
    pub end_ms: u64,
    pub label: ActivityLabel,
    pub fm_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// Windows at the start of every segment left out of all statistics.
    pub warmup_windows_per_segment: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    pub annotation: Annotation,
    pub windows: usize,
    pub predicted: Option<ActivityLabel>,
    /// Median of the windows' median frequencies.
    pub fm_hz: Option<f64>,
}

impl SegmentResult {
    pub fn detected(&self) -> bool {
        self.predicted == Some(self.annotation.label)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActivityRow {
    pub n_t: usize,
    pub d_t: usize,
    pub fm_min_hz: Option<f64>,
    pub fm_max_hz: Option<f64>,
}

impl ActivityRow {
    pub fn detection_rate(&self) -> Option<f64> {
        (self.n_t > 0).then(|| self.d_t as f64 / self.n_t as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    /// `confusion[truth][predicted]`, indexed by [`ActivityLabel::index`].
    pub confusion: [[usize; 4]; 4],
    pub dropped_straddling: usize,
    pub dropped_unannotated: usize,
    pub skipped_warmup: usize,
    pub rest: ActivityRow,
    pub walk: ActivityRow,
    pub run: ActivityRow,
    pub segments: Vec<SegmentResult>,
    pub rest_movement_segments: (usize, usize),
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..4).map(|i| self.confusion[i][i]).sum()
    }

    /// trace / total; `None` when there were no scored windows.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    /// Window-level accuracy of the binary rest vs movement split. Unknown
    /// only arises above Th1, so it counts as movement.
    pub fn rest_movement_window_accuracy(&self) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let rest = ActivityLabel::Rest.index();
        let mut correct = 0;
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                if (t == rest) == (p == rest) {
                    correct += n;
                }
            }
        }
        Some(correct as f64 / total as f64)
    }

    pub fn rest_movement_segment_accuracy(&self) -> Option<f64> {
        let (correct, total) = self.rest_movement_segments;
        (total > 0).then(|| correct as f64 / total as f64)
    }

    pub fn walk_run(&self) -> ActivityRow {
        ActivityRow {
            n_t: self.walk.n_t + self.run.n_t,
            d_t: self.walk.d_t + self.run.d_t,
            fm_min_hz: None,
            fm_max_hz: None,
        }
    }

    pub fn row(&self, label: ActivityLabel) -> Option<&ActivityRow> {
        match label {
            ActivityLabel::Rest => Some(&self.rest),
            ActivityLabel::Walk => Some(&self.walk),
            ActivityLabel::Run => Some(&self.run),
            ActivityLabel::Unknown => None,
        }
    }

    fn row_mut(&mut self, label: ActivityLabel) -> Option<&mut ActivityRow> {
        match label {
            ActivityLabel::Rest => Some(&mut self.rest),
            ActivityLabel::Walk => Some(&mut self.walk),
            ActivityLabel::Run => Some(&mut self.run),
            ActivityLabel::Unknown => None,
        }
    }
}

fn validate_annotations(annotations: &[Annotation]) -> Result<(), EvalError> {
    for a in annotations {
        if a.end_ms <= a.start_ms {
            return Err(EvalError::InvalidAnnotation(format!(
                "interval [{}, {}) is empty",
                a.start_ms, a.end_ms
            )));
        }
        if a.label == ActivityLabel::Unknown {
            return Err(EvalError::InvalidAnnotation(format!(
                "interval [{}, {}) is labelled unknown",
                a.start_ms, a.end_ms
            )));
        }
    }
    let mut sorted: Vec<&Annotation> = annotations.iter().collect();
    sorted.sort_by_key(|a| a.start_ms);
    for pair in sorted.windows(2) {
        if pair[1].start_ms < pair[0].end_ms {
            return Err(EvalError::InvalidAnnotation(format!(
                "intervals starting at {} and {} overlap",
                pair[0].start_ms, pair[1].start_ms
            )));
        }
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Plurality label, `None` on an empty set or a tie for first.
fn plurality(counts: &[usize; 4]) -> Option<ActivityLabel> {
    let max = *counts.iter().max()?;
    if max == 0 || counts.iter().filter(|&&c| c == max).count() > 1 {
        return None;
    }
    ActivityLabel::ALL.into_iter().find(|l| counts[l.index()] == max)
}

pub fn evaluate(
    decisions: &[LabeledWindow],
    annotations: &[Annotation],
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    validate_annotations(annotations)?;
    let mut report = EvalReport::default();

    // windows per annotation, in time order
    let mut per_segment: Vec<Vec<&LabeledWindow>> = vec![Vec::new(); annotations.len()];
    for w in decisions {
        let inside = annotations
            .iter()
            .position(|a| w.start_ms >= a.start_ms && w.end_ms <= a.end_ms);
        match inside {
            Some(i) => per_segment[i].push(w),
            None => {
                let touches = annotations
                    .iter()
                    .any(|a| w.start_ms < a.end_ms && w.end_ms > a.start_ms);
                if touches {
                    report.dropped_straddling += 1;
                } else {
                    report.dropped_unannotated += 1;
                }
            }
        }
    }
    if !decisions.is_empty() && per_segment.iter().all(Vec::is_empty) {
        return Err(EvalError::NoOverlap);
    }

    let mut rm_correct = 0;
    let mut rm_total = 0;
    for (annotation, windows) in annotations.iter().zip(per_segment.iter_mut()) {
        windows.sort_by_key(|w| (w.start_ms, w.end_ms));
        let skip = opts.warmup_windows_per_segment.min(windows.len());
        report.skipped_warmup += skip;
        let scored = &windows[skip..];

        let truth = annotation.label;
        let mut counts = [0usize; 4];
        for w in scored {
            report.confusion[truth.index()][w.label.index()] += 1;
            counts[w.label.index()] += 1;
        }
        let fm_hz = median(scored.iter().filter_map(|w| w.fm_hz).collect());
        let predicted = plurality(&counts);
        let result = SegmentResult {
            annotation: *annotation,
            windows: scored.len(),
            predicted,
            fm_hz,
        };
        if !scored.is_empty() {
            let rest_windows = counts[ActivityLabel::Rest.index()];
            let moving_windows = scored.len() - rest_windows;
            rm_total += 1;
            // an even split decides nothing
            if rest_windows != moving_windows {
                let says_rest = rest_windows > moving_windows;
                rm_correct += usize::from(says_rest == (truth == ActivityLabel::Rest));
            }
        }
        if let Some(row) = report.row_mut(truth) {
            row.n_t += 1;
            row.d_t += usize::from(result.detected());
            if let Some(f) = fm_hz {
                row.fm_min_hz = Some(row.fm_min_hz.map_or(f, |m| m.min(f)));
                row.fm_max_hz = Some(row.fm_max_hz.map_or(f, |m| m.max(f)));
            }
        }
        report.segments.push(result);
    }
    report.rest_movement_segments = (rm_correct, rm_total);
    Ok(report)
}

pub const TABLE_TITLE: &str = "PERFORMANCE RESULTS OF WALKING & RUNNING CLASSIFICATION";

/// Up to two decimals with trailing zeros removed: 2.30 -> "2.3", 5.00 -> "5".
fn format_hz(v: Option<f64>) -> String {
    match v {
        None => "-".to_string(),
        Some(f) => {
            let s = format!("{f:.2}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" {
                "0".to_string()
            } else {
                s.to_string()
            }
        }
    }
}

/// Walk / Run / Walk+Run performance table, tab separated, plus a CSV twin.
///
/// Text layout (every line ends in `\n`):
///
/// ```text
/// PERFORMANCE RESULTS OF WALKING & RUNNING CLASSIFICATION
/// Activity<TAB>N_t<TAB>D_t<TAB>f_m Min (Hz)<TAB>f_m Max (Hz)
/// Walk<TAB>24<TAB>20<TAB>2.3<TAB>3.51
/// Run<TAB>24<TAB>19<TAB>3.12<TAB>5
/// Walk+Run<TAB>48<TAB>39<TAB>-<TAB>-
/// ```
///
/// Frequencies print with at most two decimals and no trailing zeros; a
/// missing value prints as `-` (empty in the CSV).
pub fn report_table(report: &EvalReport) -> (String, String) {
    let combined = report.walk_run();
    let rows = [
        ("Walk", "walk", &report.walk),
        ("Run", "run", &report.run),
        ("Walk+Run", "walk+run", &combined),
    ];
    let mut text = String::new();
    text.push_str(TABLE_TITLE);
    text.push('\n');
    text.push_str("Activity\tN_t\tD_t\tf_m Min (Hz)\tf_m Max (Hz)\n");
    let mut csv = String::from("activity,n_t,d_t,fm_min_hz,fm_max_hz\n");
    for (name, key, row) in rows {
        let (lo, hi) = (format_hz(row.fm_min_hz), format_hz(row.fm_max_hz));
        text.push_str(&format!("{name}\t{}\t{}\t{lo}\t{hi}\n", row.n_t, row.d_t));
        let blank = |s: String| if s == "-" { String::new() } else { s };
        csv.push_str(&format!("{key},{},{},{},{}\n", row.n_t, row.d_t, blank(lo), blank(hi)));
    }
    (text, csv)
}

/// Table plus the window-level summary lines.
pub fn report_text(report: &EvalReport) -> String {
    let rate = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
    let (mut text, _) = report_table(report);
    text.push('\n');
    text.push_str(&format!(
        "windows scored: {} (straddling dropped: {}, unannotated dropped: {}, warm-up skipped: {})\n",
        report.total(),
        report.dropped_straddling,
        report.dropped_unannotated,
        report.skipped_warmup
    ));
    text.push_str(&format!("window accuracy: {}\n", rate(report.accuracy())));
    text.push_str(&format!(
        "rest-vs-movement accuracy (windows): {}\n",
        rate(report.rest_movement_window_accuracy())
    ));
    text.push_str(&format!(
        "rest-vs-movement accuracy (segments): {}\n",
        rate(report.rest_movement_segment_accuracy())
    ));
    text.push_str(&format!(
        "walk+run detection rate: {}\n",
        rate(report.walk_run().detection_rate())
    ));
    text.push_str("confusion (rows truth, columns predicted): rest walk run unknown\n");
    for label in ActivityLabel::ALL {
        let row = &report.confusion[label.index()];
        text.push_str(&format!(
            "{:<8}{} {} {} {}\n",
            label.as_str(),
            row[0],
            row[1],
            row[2],
            row[3]
        ));
    }
    text
}

pub fn write_annotations_csv<W: Write>(mut out: W, annotations: &[Annotation]) -> std::io::Result<()> {
    writeln!(out, "start_ms,end_ms,label")?;
    for a in annotations {
        writeln!(out, "{},{},{}", a.start_ms, a.end_ms, a.label)?;
    }
    out.flush()
}

pub fn read_annotations_csv<R: Read>(input: R) -> Result<Vec<Annotation>, EvalError> {
    let mut out = Vec::new();
    for_each_row(input, &["start_ms", "end_ms", "label"], |line, f| {
        let start_ms = parse_field(line, "start_ms", f[0])?;
        let end_ms = parse_field(line, "end_ms", f[1])?;
        let label = f[2]
            .parse()
            .map_err(|message| TableError::UnparsableRow { line, message })?;
        out.push(Annotation {
            start_ms,
            end_ms,
            label,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>, EvalError> {
    read_annotations_csv(std::fs::File::open(path)?)
}
