//! Two-posture linear calibration, millivolts to g.
//!
//! The device is held still upright (+1 g on the gravity axis) and then
//! inverted (-1 g). Per axis, with `v+`/`v-` the mean readings of the two
//! postures, `offset = (v+ + v-) / 2` and, for the gravity axis,
//! `scale = (v+ - v-) / 2`. The other two axes sit at 0 g in both postures, so
//! they get an offset from the same midpoint and inherit the gravity axis
//! scale.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{RawSampleStream, Units};

/// Nominal accelerometer sensitivity.
pub const NOMINAL_SCALE_MV_PER_G: f64 = 200.0;
/// Mid-rail of a 3.3 V ADC.
pub const NOMINAL_OFFSET_MV: f64 = 1650.0;

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("TooShort: {window} window has {samples} samples, need at least {required}")]
    TooShort {
        window: &'static str,
        samples: usize,
        required: usize,
    },
    #[error("NotStill: {window} window {axis}-axis std {std_mv:.2} mV exceeds gate {gate_mv} mV")]
    NotStill {
        window: &'static str,
        axis: &'static str,
        std_mv: f64,
        gate_mv: f64,
    },
    #[error("DegenerateFit: upright/inverted means differ by {span_mv:.3} mV on the gravity axis")]
    DegenerateFit { span_mv: f64 },
    #[error("WrongUnits: calibration windows must be in millivolts")]
    WrongUnits,
    #[error("InvalidModel: {0}")]
    InvalidModel(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisCalibration {
    pub offset_mv: f64,
    pub scale_mv_per_g: f64,
}

impl AxisCalibration {
    #[inline]
    pub fn to_g(&self, mv: f64) -> f64 {
        (mv - self.offset_mv) / self.scale_mv_per_g
    }

    #[inline]
    pub fn to_mv(&self, g: f64) -> f64 {
        self.offset_mv + g * self.scale_mv_per_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub upright_samples: usize,
    pub inverted_samples: usize,
    pub upright_span_ms: (u32, u32),
    pub inverted_span_ms: (u32, u32),
    pub gravity_axis: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationModel {
    pub axes: [AxisCalibration; 3],
    pub fit_residual_mv: [f64; 3],
    pub metadata: Option<FitMetadata>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub fs_hz: f64,
    pub min_duration_s: f64,
    pub stillness_gate_mv: f64,
    pub degenerate_span_mv: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fs_hz: 50.0,
            min_duration_s: 2.0,
            stillness_gate_mv: 15.0,
            degenerate_span_mv: 10.0,
        }
    }
}

impl CalibrationModel {
    /// Datasheet model: mid-rail offset and 200 mV/g on every axis.
    pub fn nominal() -> Self {
        let axis = AxisCalibration {
            offset_mv: NOMINAL_OFFSET_MV,
            scale_mv_per_g: NOMINAL_SCALE_MV_PER_G,
        };
        CalibrationModel {
            axes: [axis; 3],
            fit_residual_mv: [0.0; 3],
            metadata: None,
        }
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        for (k, a) in self.axes.iter().enumerate() {
            if !(a.scale_mv_per_g.is_finite() && a.scale_mv_per_g > 0.0) {
                return Err(CalibrationError::InvalidModel(format!(
                    "{}-axis scale {} is not positive",
                    AXIS_NAMES[k], a.scale_mv_per_g
                )));
            }
            if !a.offset_mv.is_finite() {
                return Err(CalibrationError::InvalidModel(format!(
                    "{}-axis offset is not finite",
                    AXIS_NAMES[k]
                )));
            }
            let r = self.fit_residual_mv[k];
            if !(r.is_finite() && r >= 0.0) {
                return Err(CalibrationError::InvalidModel(format!(
                    "{}-axis residual {r} is not a finite non-negative value",
                    AXIS_NAMES[k]
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, CalibrationError> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let model = CalibrationModel::from(doc);
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CalibrationError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct AxisDoc {
    offset_mv: f64,
    scale_mv_per_g: f64,
    fit_residual_mv: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    x: AxisDoc,
    y: AxisDoc,
    z: AxisDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<FitMetadata>,
}

impl From<&CalibrationModel> for ModelDoc {
    fn from(m: &CalibrationModel) -> Self {
        let axis = |k: usize| AxisDoc {
            offset_mv: m.axes[k].offset_mv,
            scale_mv_per_g: m.axes[k].scale_mv_per_g,
            fit_residual_mv: m.fit_residual_mv[k],
        };
        ModelDoc {
            x: axis(0),
            y: axis(1),
            z: axis(2),
            metadata: m.metadata,
        }
    }
}

impl From<ModelDoc> for CalibrationModel {
    fn from(d: ModelDoc) -> Self {
        let docs = [d.x, d.y, d.z];
        CalibrationModel {
            axes: docs.each_ref().map(|a| AxisCalibration {
                offset_mv: a.offset_mv,
                scale_mv_per_g: a.scale_mv_per_g,
            }),
            fit_residual_mv: docs.each_ref().map(|a| a.fit_residual_mv),
            metadata: d.metadata,
        }
    }
}

fn window_means(
    name: &'static str,
    w: &RawSampleStream,
    opts: &FitOptions,
) -> Result<[f64; 3], CalibrationError> {
    if w.units != Units::Mv {
        return Err(CalibrationError::WrongUnits);
    }
    let required = ((opts.min_duration_s * opts.fs_hz).ceil() as usize).max(2);
    let n = w.len();
    if n < required {
        return Err(CalibrationError::TooShort {
            window: name,
            samples: n,
            required,
        });
    }
    let mut mean = [0.0; 3];
    for k in 0..3 {
        let m = w.samples.iter().map(|s| s.axes[k]).sum::<f64>() / n as f64;
        let var = w.samples.iter().map(|s| (s.axes[k] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        mean[k] = m;
        let std = var.sqrt();
        if std > opts.stillness_gate_mv {
            return Err(CalibrationError::NotStill {
                window: name,
                axis: AXIS_NAMES[k],
                std_mv: std,
                gate_mv: opts.stillness_gate_mv,
            });
        }
    }
    Ok(mean)
}

/// Fits the model from a still upright window and a still inverted window.
/// The gravity axis is the one whose mean moves most between the postures.
pub fn fit_calibration(
    upright: &RawSampleStream,
    inverted: &RawSampleStream,
    opts: &FitOptions,
) -> Result<CalibrationModel, CalibrationError> {
    let up = window_means("upright", upright, opts)?;
    let down = window_means("inverted", inverted, opts)?;

    let span = |k: usize| up[k] - down[k];
    let gravity_axis = (0..3)
        .max_by(|&a, &b| span(a).abs().total_cmp(&span(b).abs()))
        .expect("three axes");
    let gravity_span = span(gravity_axis);
    if gravity_span.abs() < opts.degenerate_span_mv {
        return Err(CalibrationError::DegenerateFit {
            span_mv: gravity_span.abs(),
        });
    }
    let scale = gravity_span / 2.0;
    if scale <= 0.0 {
        // inverted reads higher than upright: postures swapped or axis mounted upside down
        return Err(CalibrationError::InvalidModel(format!(
            "gravity axis {} reads lower upright than inverted",
            AXIS_NAMES[gravity_axis]
        )));
    }

    let axes: [AxisCalibration; 3] = std::array::from_fn(|k| AxisCalibration {
        offset_mv: (up[k] + down[k]) / 2.0,
        scale_mv_per_g: scale,
    });

    let mut fit_residual_mv = [0.0; 3];
    for k in 0..3 {
        let (pred_up, pred_down) = if k == gravity_axis {
            (axes[k].to_mv(1.0), axes[k].to_mv(-1.0))
        } else {
            (axes[k].offset_mv, axes[k].offset_mv)
        };
        let sq: f64 = upright
            .samples
            .iter()
            .map(|s| (s.axes[k] - pred_up).powi(2))
            .chain(inverted.samples.iter().map(|s| (s.axes[k] - pred_down).powi(2)))
            .sum();
        fit_residual_mv[k] = (sq / (upright.len() + inverted.len()) as f64).sqrt();
    }

    let span_of = |w: &RawSampleStream| {
        (
            w.samples.first().map_or(0, |s| s.timestamp_ms),
            w.samples.last().map_or(0, |s| s.timestamp_ms),
        )
    };
    let model = CalibrationModel {
        axes,
        fit_residual_mv,
        metadata: Some(FitMetadata {
            upright_samples: upright.len(),
            inverted_samples: inverted.len(),
            upright_span_ms: span_of(upright),
            inverted_span_ms: span_of(inverted),
            gravity_axis,
        }),
    };
    model.validate()?;
    Ok(model)
}

#[inline]
pub fn apply_calibration(model: &CalibrationModel, mv: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| model.axes[k].to_g(mv[k]))
}
