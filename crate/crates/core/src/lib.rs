//! Accelerometer activity classification.
//!
//! Millivolt samples from a triaxial accelerometer node are calibrated to g,
//! despiked with a 3-point moving average and high-passed to strip gravity.
//! Every second the pipeline takes the signal magnitude area (SMA) of the
//! three axes and the median frequency of a Welch PSD of the z axis, and a
//! two-threshold tree labels the second Rest, Walk or Run.

pub mod calibration;
pub mod classifier;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod synth;
pub mod table;
pub mod wire;

use thiserror::Error;

/// Any error raised by the library, tagged with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wire: {0}")]
    Wire(#[from] wire::WireError),
    #[error("calibration: {0}")]
    Calibration(#[from] calibration::CalibrationError),
    #[error("dsp: {0}")]
    Dsp(#[from] dsp::DspError),
    #[error("features: {0}")]
    Features(#[from] features::FeatureError),
    #[error("classifier: {0}")]
    Classifier(#[from] classifier::ClassifierError),
    #[error("eval: {0}")]
    Eval(#[from] eval::EvalError),
    #[error("synth: {0}")]
    Synth(#[from] synth::SynthError),
    #[error("table: {0}")]
    Table(#[from] table::TableError),
    #[error("pipeline: {0}")]
    Config(String),
}
