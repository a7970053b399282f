//! Binned calibration metrics: ECE, per-class ECE, max-ECE, Avg-ECE, NLL,
//! and reliability-diagram rows.
//!
//! Bins are equal-width over `[0, 1]`: the first is `[0, 1/M]`, bin `i > 0`
//! is `(i/M, (i+1)/M]`. Per-class quantities use the *predicted* class.

use serde::{Deserialize, Serialize};

use crate::dataset::{split_by_predicted, ClassSlice, LogitDataset};
use crate::error::{CalibError, Result};
use crate::model::CalibrationModel;
use crate::prediction::{predict, PredictionSet};
use crate::softmax::{argmax_tiebreak, log_sum_exp};

pub const DEFAULT_NUM_BINS: usize = 15;

/// Smallest log-probability used when NLL is computed from stored
/// probabilities that underflowed to zero.
pub const LOG_PROB_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningConfig {
    num_bins: usize,
}

impl BinningConfig {
    pub fn new(num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(CalibError::Config("number of bins must be at least 1".into()));
        }
        Ok(Self { num_bins })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    /// Upper edge of bin `i` (0-based); the lower edge is `edge(i - 1)`.
    pub fn edge(&self, i: usize) -> f64 {
        i as f64 / self.num_bins as f64
    }

    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        (self.edge(bin), self.edge(bin + 1))
    }

    /// Bin holding confidence `c`. Values outside `[0, 1]` are clamped.
    pub fn bin_of(&self, c: f64) -> usize {
        let m = self.num_bins;
        if c <= self.edge(1) {
            return 0;
        }
        if c >= 1.0 {
            return m - 1;
        }
        let mut i = ((c * m as f64).ceil() as usize).clamp(1, m) - 1;
        // settle rounding at the edges against the exact edge values
        while i > 0 && c <= self.edge(i) {
            i -= 1;
        }
        while i + 1 < m && c > self.edge(i + 1) {
            i += 1;
        }
        i
    }
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            num_bins: DEFAULT_NUM_BINS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinAccumulator {
    pub count: usize,
    pub confidence_sum: f64,
    pub correct: usize,
}

impl BinAccumulator {
    pub fn mean_confidence(&self) -> Option<f64> {
        (self.count > 0).then(|| self.confidence_sum / self.count as f64)
    }

    pub fn mean_accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

/// Per-bin reliability aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedStats {
    pub binning: BinningConfig,
    pub bins: Vec<BinAccumulator>,
    pub total: usize,
}

pub fn bin_stats(preds: &PredictionSet, binning: BinningConfig) -> BinnedStats {
    bin_records(preds.iter().map(|p| (p.confidence, p.correct)), binning)
}

/// Bins `(confidence, correct)` pairs.
pub fn bin_records(records: impl IntoIterator<Item = (f64, bool)>, binning: BinningConfig) -> BinnedStats {
    let mut bins = vec![BinAccumulator::default(); binning.num_bins()];
    let mut total = 0;
    for (c, correct) in records {
        let b = &mut bins[binning.bin_of(c)];
        b.count += 1;
        b.confidence_sum += c;
        b.correct += usize::from(correct);
        total += 1;
    }
    BinnedStats { binning, bins, total }
}

/// `Σ_i (n_i / N) |acc_i - conf_i|`.
pub fn ece(stats: &BinnedStats) -> Result<f64> {
    if stats.total == 0 {
        return Err(CalibError::EmptyDataset("ECE of an empty prediction set".into()));
    }
    let n = stats.total as f64;
    Ok(stats
        .bins
        .iter()
        .filter_map(|b| {
            let gap = (b.mean_accuracy()? - b.mean_confidence()?).abs();
            Some(b.count as f64 / n * gap)
        })
        .sum())
}

/// ECE restricted to each slice. `None` marks a class that was never predicted.
pub fn class_ece(preds: &PredictionSet, slices: &[ClassSlice], binning: BinningConfig) -> Vec<Option<f64>> {
    slices
        .iter()
        .map(|s| {
            if s.is_empty() {
                return None;
            }
            let stats = bin_records(
                s.indices.iter().map(|&i| {
                    let p = preds.get(i);
                    (p.confidence, p.correct)
                }),
                binning,
            );
            ece(&stats).ok()
        })
        .collect()
}

fn present(class_eces: &[Option<f64>]) -> Result<impl Iterator<Item = f64> + '_> {
    if class_eces.iter().all(Option::is_none) {
        return Err(CalibError::EmptyDataset("no class has predicted samples".into()));
    }
    Ok(class_eces.iter().flatten().copied())
}

/// Worst per-class ECE over classes with predictions.
pub fn max_ece(class_eces: &[Option<f64>]) -> Result<f64> {
    Ok(present(class_eces)?.fold(f64::NEG_INFINITY, f64::max))
}

/// Unweighted mean per-class ECE over classes with predictions.
pub fn avg_ece(class_eces: &[Option<f64>]) -> Result<f64> {
    let vals: Vec<f64> = present(class_eces)?.collect();
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean negative log-probability of the true label from stored probabilities.
pub fn nll(preds: &PredictionSet) -> Result<f64> {
    if preds.is_empty() {
        return Err(CalibError::EmptyDataset("NLL of an empty prediction set".into()));
    }
    let total: f64 = preds
        .iter()
        .map(|p| -p.probs[p.label].ln().max(LOG_PROB_FLOOR))
        .sum();
    Ok(total / preds.len() as f64)
}

/// Per-record NLL of the true label under `model`, computed with log-sum-exp.
pub fn record_nll(model: &CalibrationModel, logits: &[f64], label: usize) -> f64 {
    let raw = argmax_tiebreak(logits);
    let u = model.transform_logits(logits, raw);
    log_sum_exp(&u) - u[label]
}

/// Mean NLL of `dataset` under `model`, in log space.
pub fn nll_logits(dataset: &LogitDataset, model: &CalibrationModel) -> Result<f64> {
    if dataset.is_empty() {
        return Err(CalibError::EmptyDataset("NLL of an empty dataset".into()));
    }
    model.validate(dataset.num_classes())?;
    let total: f64 = dataset.records().map(|(z, y)| record_nll(model, z, y)).sum();
    Ok(total / dataset.len() as f64)
}

/// One reliability-diagram row. Mean fields are `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub mean_accuracy: Option<f64>,
}

pub fn reliability_rows(stats: &BinnedStats) -> Vec<ReliabilityRow> {
    stats
        .bins
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = stats.binning.bounds(i);
            ReliabilityRow {
                bin_low: lo,
                bin_high: hi,
                count: b.count,
                mean_confidence: b.mean_confidence(),
                mean_accuracy: b.mean_accuracy(),
            }
        })
        .collect()
}

pub const RELIABILITY_HEADER: &str = "bin_low,bin_high,count,mean_confidence,mean_accuracy";

/// Reliability rows as CSV; empty means are written as empty fields.
pub fn reliability_csv(rows: &[ReliabilityRow]) -> String {
    let mut out = String::from(RELIABILITY_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format_sig(x, 9)).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig(r.bin_low, 9),
            format_sig(r.bin_high, 9),
            r.count,
            opt(r.mean_confidence),
            opt(r.mean_accuracy)
        ));
    }
    out
}

/// Formats `v` with `digits` significant digits, `%g` style.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Metrics for one predicted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub count: usize,
    pub ece: Option<f64>,
    pub accuracy: Option<f64>,
    pub mean_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub ece: f64,
    pub max_ece: f64,
    pub avg_ece: f64,
    pub nll: f64,
    pub per_class: Vec<ClassMetrics>,
    pub bins: BinnedStats,
    /// Classes that were never predicted; excluded from max/avg ECE.
    pub never_predicted: Vec<usize>,
}

impl MetricsReport {
    /// Builds the report from predictions and an already computed NLL.
    pub fn from_predictions(preds: &PredictionSet, nll: f64, binning: BinningConfig) -> Result<Self> {
        if preds.is_empty() {
            return Err(CalibError::EmptyDataset("cannot evaluate an empty prediction set".into()));
        }
        let bins = bin_stats(preds, binning);
        let slices = split_by_predicted(preds);
        let class_eces = class_ece(preds, &slices, binning);
        let per_class = slices
            .iter()
            .zip(&class_eces)
            .map(|(s, e)| {
                let n = s.len() as f64;
                let mean = |f: &dyn Fn(usize) -> f64| {
                    (!s.is_empty()).then(|| s.indices.iter().map(|&i| f(i)).sum::<f64>() / n)
                };
                ClassMetrics {
                    class: s.class,
                    count: s.len(),
                    ece: *e,
                    accuracy: mean(&|i| f64::from(u8::from(preds.get(i).correct))),
                    mean_confidence: mean(&|i| preds.get(i).confidence),
                }
            })
            .collect();
        Ok(Self {
            accuracy: preds.accuracy(),
            ece: ece(&bins)?,
            max_ece: max_ece(&class_eces)?,
            avg_ece: avg_ece(&class_eces)?,
            nll,
            per_class,
            bins,
            never_predicted: slices.iter().filter(|s| s.is_empty()).map(|s| s.class).collect(),
        })
    }
}

/// Predicts with `model` and computes every metric; NLL is taken in log space.
pub fn evaluate(dataset: &LogitDataset, model: &CalibrationModel, binning: BinningConfig) -> Result<MetricsReport> {
    let preds = predict(dataset, model)?;
    let nll = nll_logits(dataset, model)?;
    MetricsReport::from_predictions(&preds, nll, binning)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(conf: f64, correct: bool, m: usize) -> BinnedStats {
        bin_records([(conf, correct)], BinningConfig::new(m).unwrap())
    }

    #[test]
    fn confidence_one_lands_in_last_bin() {
        let s = single(1.0, true, 10);
        assert_eq!(s.bins[9].count, 1);
        assert_eq!(s.bins[9].mean_confidence(), Some(1.0));
        assert_eq!(s.bins[9].mean_accuracy(), Some(1.0));
        assert!(s.bins[..9].iter().all(|b| b.count == 0));
    }

    #[test]
    fn edges_are_right_closed() {
        let b = BinningConfig::new(10).unwrap();
        assert_eq!(b.bin_of(0.0), 0);
        assert_eq!(b.bin_of(0.1), 0);
        assert_eq!(b.bin_of(0.6), 5);
        assert_eq!(b.bin_of(0.6000000001), 6);
        assert_eq!(b.bin_of(0.3), 2);
        let b5 = BinningConfig::new(5).unwrap();
        assert_eq!(b5.bin_of(0.4), 1);
        assert_eq!(b5.bin_of(0.6), 2);
    }

    #[test]
    fn two_records_same_bin() {
        let s = bin_records([(0.55, true), (0.58, true)], BinningConfig::new(10).unwrap());
        let b = &s.bins[5];
        assert_eq!(b.count, 2);
        assert!((b.mean_confidence().unwrap() - 0.565).abs() < 1e-15);
        assert_eq!(b.mean_accuracy(), Some(1.0));
        assert_eq!(s.binning.bounds(5), (0.5, 0.6));
    }

    #[test]
    fn zero_bins_rejected() {
        assert!(matches!(BinningConfig::new(0), Err(CalibError::Config(_))));
    }

    #[test]
    fn empty_inputs() {
        let s = bin_records(std::iter::empty(), BinningConfig::default());
        assert_eq!(s.total, 0);
        assert_eq!(s.bins.len(), DEFAULT_NUM_BINS);
        assert!(matches!(ece(&s), Err(CalibError::EmptyDataset(_))));
        assert!(max_ece(&[None, None]).is_err());
        assert!(avg_ece(&[]).is_err());
    }

    #[test]
    fn perfectly_calibrated_bins_have_zero_ece() {
        // bin (0.7, 0.8]: ten records at 0.75 with 7.5 correct is impossible,
        // so use 0.8 with 8/10 correct and 0.5 with 1/2 correct.
        let mut recs: Vec<(f64, bool)> = (0..10).map(|i| (0.8, i < 8)).collect();
        recs.extend([(0.5, true), (0.5, false)]);
        let s = bin_records(recs, BinningConfig::new(10).unwrap());
        assert!(ece(&s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn max_and_avg() {
        assert_eq!(max_ece(&[Some(0.02), Some(0.02)]).unwrap(), 0.02);
        assert_eq!(avg_ece(&[Some(0.08), Some(0.08)]).unwrap(), 0.08);
        assert_eq!(avg_ece(&[Some(0.0), Some(0.04)]).unwrap(), 0.02);
        assert_eq!(avg_ece(&[Some(0.0), None, Some(0.04)]).unwrap(), 0.02);
        assert_eq!(max_ece(&[None, Some(0.01)]).unwrap(), 0.01);
    }

    #[test]
    fn nll_cases() {
        let uniform = PredictionSet::from_probs(4, vec![vec![0.25; 4]; 3], &[0, 1, 3]).unwrap();
        assert!((nll(&uniform).unwrap() - 4f64.ln()).abs() < 1e-15);
        let perfect = PredictionSet::from_probs(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1]).unwrap();
        assert_eq!(nll(&perfect).unwrap(), 0.0);
        let ds = LogitDataset::new(2, vec![vec![2.0, 0.0]], vec![0]).unwrap();
        // -log(sigmoid(2)) to 20 digits
        let v = nll_logits(&ds, &CalibrationModel::Identity).unwrap();
        assert!((v - 0.12692801104297249644).abs() < 1e-15);
    }

    #[test]
    fn nll_floor_keeps_underflow_finite() {
        let p = PredictionSet::from_probs(2, vec![vec![1.0, 0.0]], &[1]).unwrap();
        assert_eq!(nll(&p).unwrap(), -LOG_PROB_FLOOR);
        let ds = LogitDataset::new(2, vec![vec![5000.0, -5000.0]], vec![1]).unwrap();
        assert_eq!(nll_logits(&ds, &CalibrationModel::Identity).unwrap(), 10000.0);
    }

    #[test]
    fn reliability_rows_and_csv() {
        let s = bin_records([(0.55, true), (0.58, false)], BinningConfig::new(4).unwrap());
        let rows = reliability_rows(&s);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].count, 0);
        assert_eq!(rows[0].mean_confidence, None);
        let csv = reliability_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RELIABILITY_HEADER);
        assert_eq!(lines[1], "0,0.25,0,,");
        assert_eq!(lines[3], "0.5,0.75,2,0.565,0.5");
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.565, 9), "0.565");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(format_sig(123456789.0, 9), "123456789");
        assert_eq!(format_sig(1.5e-7, 9), "1.5e-7");
        assert_eq!(format_sig(1.0, 9), "1");
    }
}
