//! Post-hoc calibration of classifier logits: temperature, class-wise
//! temperature and vector scaling, calibration metrics, synthetic
//! constructions, and the file formats used by the `calibkit` tool.

pub mod calibrate;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod prediction;
pub mod report;
pub mod softmax;
pub mod sweep;
pub mod synthetic;

pub use calibrate::{fit, fit_cts, fit_ts, fit_vs, FitConfig, FitResult, Method};
pub use dataset::{ClassSlice, LogitDataset};
pub use error::{CalibError, Result};
pub use metrics::{evaluate, BinningConfig, MetricsReport, ReliabilityRow};
pub use model::{CalibrationModel, ModelDocument};
pub use prediction::{predict, Prediction, PredictionSet};
pub use report::EvaluationReport;
pub use sweep::{run_sweep, SweepAxis, SweepConfig, SweepRow};
