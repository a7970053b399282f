//! JSON evaluation report: fit on validation, evaluate on test, before and
//! after calibration. All metrics are fractions.

use serde::{Deserialize, Serialize};

use crate::calibrate::{accuracy_delta, FitConfig, FitResult, Method};
use crate::dataset::LogitDataset;
use crate::error::{CalibError, Result};
use crate::metrics::{evaluate, BinningConfig};
use crate::model::{CalibrationModel, GammaValue, ModelDocument};
use crate::prediction::predict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub count: usize,
    pub ece_before: Option<f64>,
    pub ece_after: Option<f64>,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub gamma: GammaValue,
    pub min_class_samples: usize,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub model: ModelDocument,
    pub bins: usize,
    pub num_classes: usize,
    pub val_records: usize,
    pub test_records: usize,
    pub val_nll: f64,
    pub iterations: usize,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub changed_records: usize,
    pub ece_before: f64,
    pub ece_after: f64,
    pub max_ece_before: f64,
    pub max_ece_after: f64,
    pub avg_ece_before: f64,
    pub avg_ece_after: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    pub per_class: Vec<ClassReport>,
    pub warnings: Vec<String>,
    pub config: ConfigEcho,
}

impl EvaluationReport {
    /// Evaluates a fitted model on `test`.
    pub fn build(
        method: Method,
        fit: &FitResult,
        val: &LogitDataset,
        test: &LogitDataset,
        binning: BinningConfig,
        cfg: &FitConfig,
        seed: Option<u64>,
    ) -> Result<Self> {
        if val.num_classes() != test.num_classes() {
            return Err(CalibError::DimensionMismatch {
                expected: val.num_classes(),
                found: test.num_classes(),
            });
        }
        let k = test.num_classes();
        let before = evaluate(test, &CalibrationModel::Identity, binning)?;
        let after = evaluate(test, &fit.model, binning)?;
        let (_, changed_records) = accuracy_delta(
            &predict(test, &CalibrationModel::Identity)?,
            &predict(test, &fit.model)?,
        )?;
        let per_class = before
            .per_class
            .iter()
            .zip(&after.per_class)
            .map(|(b, a)| ClassReport {
                class: a.class,
                count: a.count,
                ece_before: b.ece,
                ece_after: a.ece,
                mean_confidence: a.mean_confidence,
                accuracy: a.accuracy,
            })
            .collect();
        let mut warnings = fit.warnings.clone();
        if !after.never_predicted.is_empty() {
            warnings.push(format!(
                "classes {:?} are never predicted on the test set and are excluded from max-ECE and Avg-ECE",
                after.never_predicted
            ));
        }
        Ok(Self {
            method: method.as_str().to_string(),
            model: ModelDocument::from_model(&fit.model, k),
            bins: binning.num_bins(),
            num_classes: k,
            val_records: val.len(),
            test_records: test.len(),
            val_nll: fit.val_nll,
            iterations: fit.iterations,
            accuracy_before: before.accuracy,
            accuracy_after: after.accuracy,
            changed_records,
            ece_before: before.ece,
            ece_after: after.ece,
            max_ece_before: before.max_ece,
            max_ece_after: after.max_ece,
            avg_ece_before: before.avg_ece,
            avg_ece_after: after.avg_ece,
            nll_before: before.nll,
            nll_after: after.nll,
            per_class,
            warnings,
            config: ConfigEcho {
                alpha_lo: cfg.alpha_lo,
                alpha_hi: cfg.alpha_hi,
                gamma: GammaValue::from_f64(cfg.gamma),
                min_class_samples: cfg.min_class_samples,
                tolerance: cfg.tolerance,
                seed,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Headline metrics as a small table, in fractions or percent.
    pub fn summary_table(&self, percent: bool) -> String {
        let (scale, unit) = if percent { (100.0, " (%)") } else { (1.0, "") };
        let row = |name: &str, acc: f64, ece: f64, max: f64, avg: f64, nll: f64| {
            format!(
                "{name:<14}{:>12.4}{:>12.4}{:>12.4}{:>12.4}{:>10.4}\n",
                acc * scale,
                ece * scale,
                max * scale,
                avg * scale,
                nll
            )
        };
        let mut out = format!(
            "{:<14}{:>12}{:>12}{:>12}{:>12}{:>10}\n",
            "",
            format!("Acc.{unit}"),
            format!("ECE{unit}"),
            format!("max-ECE{unit}"),
            format!("Avg-ECE{unit}"),
            "NLL"
        );
        out += &row(
            "uncalibrated",
            self.accuracy_before,
            self.ece_before,
            self.max_ece_before,
            self.avg_ece_before,
            self.nll_before,
        );
        out += &row(
            &self.method,
            self.accuracy_after,
            self.ece_after,
            self.max_ece_after,
            self.avg_ece_after,
            self.nll_after,
        );
        out
    }
}
