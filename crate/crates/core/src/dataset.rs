//! Logit datasets and class-wise splitting by predicted label.

use crate::error::{CalibError, Result};
use crate::prediction::PredictionSet;

/// `N` records of `K` raw logits plus a true label in `0..K`.
///
/// Logits are stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitDataset {
    num_classes: usize,
    logits: Vec<f64>,
    labels: Vec<usize>,
}

impl LogitDataset {
    /// Builds a dataset from per-record logit rows.
    pub fn new(num_classes: usize, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(CalibError::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut flat = Vec::with_capacity(rows.len() * num_classes);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_classes {
                return Err(CalibError::InvalidInput(format!(
                    "record {i} has {} logits, expected {num_classes}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(num_classes, flat, labels)
    }

    /// Builds a dataset from a row-major logit buffer of length `N * K`.
    pub fn from_flat(num_classes: usize, logits: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if num_classes < 2 {
            return Err(CalibError::InvalidInput(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if logits.len() != labels.len() * num_classes {
            return Err(CalibError::DimensionMismatch {
                expected: labels.len() * num_classes,
                found: logits.len(),
            });
        }
        if let Some(pos) = logits.iter().position(|v| !v.is_finite()) {
            return Err(CalibError::InvalidInput(format!(
                "record {} has a non-finite logit",
                pos / num_classes
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y >= num_classes) {
            return Err(CalibError::InvalidInput(format!(
                "record {i} has label {} outside 0..{num_classes}",
                labels[i]
            )));
        }
        Ok(Self {
            num_classes,
            logits,
            labels,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn logits(&self, i: usize) -> &[f64] {
        &self.logits[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Iterates `(logits, label)` pairs in record order.
    pub fn records(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.logits
            .chunks_exact(self.num_classes)
            .zip(self.labels.iter().copied())
    }

    /// Copy of the dataset with every logit multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_flat(
            self.num_classes,
            self.logits.iter().map(|z| z * factor).collect(),
            self.labels.clone(),
        )
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut logits = Vec::with_capacity(indices.len() * self.num_classes);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            logits.extend_from_slice(self.logits(i));
            labels.push(self.labels[i]);
        }
        Self {
            num_classes: self.num_classes,
            logits,
            labels,
        }
    }

    /// Concatenates datasets with the same class count.
    pub fn concat(parts: &[&LogitDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| CalibError::EmptyDataset("nothing to concatenate".into()))?;
        let k = first.num_classes;
        let mut logits = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.num_classes != k {
                return Err(CalibError::DimensionMismatch {
                    expected: k,
                    found: p.num_classes,
                });
            }
            logits.extend_from_slice(&p.logits);
            labels.extend_from_slice(&p.labels);
        }
        Ok(Self {
            num_classes: k,
            logits,
            labels,
        })
    }

    /// Uncalibrated prediction (argmax of raw logits) for every record.
    pub fn raw_predictions(&self) -> Vec<usize> {
        self.logits
            .chunks_exact(self.num_classes)
            .map(crate::softmax::argmax_tiebreak)
            .collect()
    }
}

/// Records whose predicted label is `class`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSlice {
    pub class: usize,
    pub indices: Vec<usize>,
}

impl ClassSlice {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// Groups record indices by predicted label. Always returns `K` slices.
pub fn split_by_predicted(preds: &PredictionSet) -> Vec<ClassSlice> {
    group_by_class(preds.num_classes(), preds.iter().map(|p| p.predicted))
}

/// Groups positions of `classes` into `num_classes` slices.
pub fn group_by_class(num_classes: usize, classes: impl IntoIterator<Item = usize>) -> Vec<ClassSlice> {
    let mut slices: Vec<ClassSlice> = (0..num_classes)
        .map(|class| ClassSlice {
            class,
            indices: Vec::new(),
        })
        .collect();
    for (i, c) in classes.into_iter().enumerate() {
        slices[c].indices.push(i);
    }
    slices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CalibrationModel;
    use crate::prediction::predict;

    fn preds_for(classes: &[usize], k: usize) -> PredictionSet {
        let rows = classes
            .iter()
            .map(|&c| {
                let mut z = vec![0.0; k];
                z[c] = 1.0;
                z
            })
            .collect();
        let ds = LogitDataset::new(k, rows, vec![0; classes.len()]).unwrap();
        predict(&ds, &CalibrationModel::Identity).unwrap()
    }

    #[test]
    fn split_groups_by_prediction() {
        let slices = split_by_predicted(&preds_for(&[0, 1, 0], 2));
        assert_eq!(slices[0].indices, vec![0, 2]);
        assert_eq!(slices[1].indices, vec![1]);
    }

    #[test]
    fn degenerate_partition() {
        let slices = split_by_predicted(&preds_for(&[3, 3, 3, 3], 5));
        assert_eq!(slices.len(), 5);
        assert_eq!(slices[3].indices, vec![0, 1, 2, 3]);
        assert!(slices.iter().filter(|s| s.class != 3).all(ClassSlice::is_empty));
    }

    #[test]
    fn rejects_single_class() {
        assert!(LogitDataset::new(1, vec![vec![0.0]], vec![0]).is_err());
    }

    #[test]
    fn rejects_bad_records() {
        assert!(LogitDataset::new(2, vec![vec![0.0, 1.0, 2.0]], vec![0]).is_err());
        assert!(LogitDataset::new(2, vec![vec![0.0, f64::NAN]], vec![0]).is_err());
        assert!(LogitDataset::new(2, vec![vec![0.0, 1.0]], vec![2]).is_err());
        assert!(LogitDataset::new(2, vec![vec![0.0, 1.0]], vec![]).is_err());
    }

    #[test]
    fn empty_dataset_is_allowed() {
        let ds = LogitDataset::new(3, vec![], vec![]).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.num_classes(), 3);
    }
}
