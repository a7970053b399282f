//! Python bindings: datasets, calibrator fitting, metrics and the synthetic
//! generators.

use calibkit_core::calibrate::{fit as fit_method, FitConfig, Method};
use calibkit_core::metrics::{bin_stats, evaluate as evaluate_model, reliability_rows, BinningConfig};
use calibkit_core::model::ModelDocument;
use calibkit_core::synthetic::{self, HeteroLogitSpec, Theorem1Spec};
use calibkit_core::{io, prediction, softmax as sm, CalibError};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Predictions = (Vec<Vec<f64>>, Vec<usize>, Vec<f64>);
type ReliabilityRow = (f64, f64, usize, Option<f64>, Option<f64>);

fn to_py(err: CalibError) -> PyErr {
    match err {
        CalibError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Logit records with integer labels.
#[pyclass(name = "LogitDataset", module = "calibkit", frozen)]
pub struct PyLogitDataset {
    inner: calibkit_core::LogitDataset,
}

#[pymethods]
impl PyLogitDataset {
    #[new]
    fn new(num_classes: usize, logits: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<Self> {
        calibkit_core::LogitDataset::new(num_classes, logits, labels)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        io::read_logit_csv(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        io::write_logit_csv(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    fn logits(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.len() {
            return Err(PyValueError::new_err(format!("record {index} out of range")));
        }
        Ok(self.inner.logits(index).to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("LogitDataset(num_classes={}, records={})", self.inner.num_classes(), self.inner.len())
    }
}

/// A fitted calibrator.
#[pyclass(name = "CalibrationModel", module = "calibkit", frozen)]
pub struct PyCalibrationModel {
    inner: calibkit_core::CalibrationModel,
    num_classes: usize,
}

#[pymethods]
impl PyCalibrationModel {
    #[staticmethod]
    fn identity(num_classes: usize) -> Self {
        Self {
            inner: calibkit_core::CalibrationModel::Identity,
            num_classes,
        }
    }

    #[staticmethod]
    fn temperature(alpha: f64, num_classes: usize) -> PyResult<Self> {
        let inner = calibkit_core::CalibrationModel::Temperature { alpha };
        inner.validate(num_classes).map_err(to_py)?;
        Ok(Self { inner, num_classes })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = ModelDocument::from_json(text).map_err(to_py)?;
        let inner = doc.to_model().map_err(to_py)?;
        Ok(Self {
            inner,
            num_classes: doc.num_classes,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        ModelDocument::from_model(&self.inner, self.num_classes).to_json().map_err(to_py)
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method_name()
    }

    /// Calibrated probabilities; routing uses the argmax of the raw logits.
    fn apply(&self, logits: Vec<f64>) -> PyResult<Vec<f64>> {
        if logits.len() != self.num_classes {
            return Err(PyValueError::new_err(format!(
                "expected {} logits, got {}",
                self.num_classes,
                logits.len()
            )));
        }
        let predicted = sm::argmax_tiebreak(&logits);
        self.inner.apply(&logits, predicted).map_err(to_py)
    }

    /// `(probabilities, predicted classes, confidences)` for every record.
    fn predict(&self, dataset: &PyLogitDataset) -> PyResult<Predictions> {
        let preds = prediction::predict(&dataset.inner, &self.inner).map_err(to_py)?;
        Ok((
            preds.iter().map(|p| p.probs.clone()).collect(),
            preds.iter().map(|p| p.predicted).collect(),
            preds.iter().map(|p| p.confidence).collect(),
        ))
    }

    fn __repr__(&self) -> String {
        format!("CalibrationModel({:?})", self.inner)
    }
}

fn model_or_identity(model: Option<&PyCalibrationModel>) -> calibkit_core::CalibrationModel {
    model.map_or(calibkit_core::CalibrationModel::Identity, |m| m.inner.clone())
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    sm::softmax(&logits).map_err(to_py)
}

/// Fits `method` (none, ts, cts, vs) on a validation set.
#[pyfunction]
#[pyo3(signature = (dataset, method, gamma = f64::INFINITY, alpha_lo = 0.01, alpha_hi = 100.0, min_class_samples = 10))]
fn fit(
    dataset: &PyLogitDataset,
    method: &str,
    gamma: f64,
    alpha_lo: f64,
    alpha_hi: f64,
    min_class_samples: usize,
) -> PyResult<PyCalibrationModel> {
    let method: Method = method.parse().map_err(to_py)?;
    let cfg = FitConfig {
        alpha_lo,
        alpha_hi,
        gamma,
        min_class_samples,
        ..FitConfig::default()
    };
    let result = fit_method(method, &dataset.inner, &cfg).map_err(to_py)?;
    Ok(PyCalibrationModel {
        inner: result.model,
        num_classes: dataset.inner.num_classes(),
    })
}

/// Accuracy, ECE, max-ECE, Avg-ECE, NLL and per-class ECE (None for classes
/// that are never predicted).
#[pyfunction]
#[pyo3(signature = (dataset, model = None, bins = 15))]
fn evaluate<'py>(
    py: Python<'py>,
    dataset: &PyLogitDataset,
    model: Option<&PyCalibrationModel>,
    bins: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let binning = BinningConfig::new(bins).map_err(to_py)?;
    let report = evaluate_model(&dataset.inner, &model_or_identity(model), binning).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("accuracy", report.accuracy)?;
    out.set_item("ece", report.ece)?;
    out.set_item("max_ece", report.max_ece)?;
    out.set_item("avg_ece", report.avg_ece)?;
    out.set_item("nll", report.nll)?;
    out.set_item("class_ece", report.per_class.iter().map(|c| c.ece).collect::<Vec<_>>())?;
    out.set_item("never_predicted", report.never_predicted)?;
    Ok(out)
}

/// Rows of `(bin_low, bin_high, count, mean_confidence, mean_accuracy)`.
#[pyfunction]
#[pyo3(signature = (dataset, model = None, bins = 15))]
fn reliability(
    dataset: &PyLogitDataset,
    model: Option<&PyCalibrationModel>,
    bins: usize,
) -> PyResult<Vec<ReliabilityRow>> {
    let binning = BinningConfig::new(bins).map_err(to_py)?;
    let preds = prediction::predict(&dataset.inner, &model_or_identity(model)).map_err(to_py)?;
    Ok(reliability_rows(&bin_stats(&preds, binning))
        .into_iter()
        .map(|r| (r.bin_low, r.bin_high, r.count, r.mean_confidence, r.mean_accuracy))
        .collect())
}

/// Population minimizer `(alpha, beta, a, b)` on the noisy two-atom model.
#[pyfunction]
fn lemma2_closed_form(p_plus: f64, p_minus: f64) -> PyResult<(f64, f64, f64, f64)> {
    let s = synthetic::lemma2_closed_form(p_plus, p_minus).map_err(to_py)?;
    Ok((s.alpha, s.beta, s.a, s.b))
}

/// Heterogeneous logits as `(train, val, test)`. `scales` and `noise` hold
/// one value per class.
#[pyfunction]
#[pyo3(signature = (scales, noise, per_class, margin, seed, train_fraction = 0.0, val_fraction = 0.5))]
fn gen_hetero(
    scales: Vec<f64>,
    noise: Vec<f64>,
    per_class: usize,
    margin: f64,
    seed: u64,
    train_fraction: f64,
    val_fraction: f64,
) -> PyResult<(PyLogitDataset, PyLogitDataset, PyLogitDataset)> {
    let k = scales.len();
    let spec = HeteroLogitSpec {
        num_classes: k,
        scales,
        noise,
        counts: vec![per_class; k],
        margin,
        seed,
        train_fraction,
        val_fraction,
    };
    let s = synthetic::gen_hetero_logits(&spec).map_err(to_py)?;
    let wrap = |inner| PyLogitDataset { inner };
    Ok((wrap(s.train), wrap(s.val), wrap(s.test)))
}

/// Per-trial results of the three-atom experiment as dictionaries.
#[pyfunction]
#[pyo3(signature = (n, epsilon, trials, seed, large_multiplier = 50))]
fn theorem1_experiment<'py>(
    py: Python<'py>,
    n: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
    large_multiplier: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut spec = Theorem1Spec::new(n, epsilon).map_err(to_py)?;
    spec.large_multiplier = large_multiplier;
    let rows = py
        .detach(|| synthetic::theorem1_experiment(&spec, trials, seed))
        .map_err(to_py)?;
    rows.into_iter()
        .map(|t| {
            let d = PyDict::new(py);
            d.set_item("trial", t.trial)?;
            d.set_item("scenario", t.scenario.as_str())?;
            d.set_item("sample_size", t.sample_size)?;
            d.set_item("rare_atom_present", t.rare_atom_present)?;
            d.set_item("min_confidence", t.min_confidence)?;
            d.set_item("accuracy", t.accuracy)?;
            d.set_item("weight_norm", t.weight_norm)?;
            Ok(d)
        })
        .collect()
}

/// Post-hoc calibration of classifier logits.
#[pymodule]
fn calibkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLogitDataset>()?;
    m.add_class::<PyCalibrationModel>()?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(reliability, m)?)?;
    m.add_function(wrap_pyfunction!(lemma2_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(gen_hetero, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_experiment, m)?)?;
    Ok(())
}
