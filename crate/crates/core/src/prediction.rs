use crate::dataset::LogitDataset;
use crate::error::{CalibError, Result};
use crate::model::CalibrationModel;
use crate::softmax::{argmax_tiebreak, softmax_unchecked};

/// Calibrated output for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub predicted: usize,
    pub confidence: f64,
    pub label: usize,
    pub correct: bool,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>, label: usize) -> Self {
        let predicted = argmax_tiebreak(&probs);
        let confidence = probs[predicted];
        Self {
            probs,
            predicted,
            confidence,
            label,
            correct: predicted == label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    num_classes: usize,
    predictions: Vec<Prediction>,
}

impl PredictionSet {
    /// Builds a set from explicit probability rows. Rows must be valid
    /// probability vectors of length `num_classes`.
    pub fn from_probs(num_classes: usize, rows: Vec<Vec<f64>>, labels: &[usize]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(CalibError::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut predictions = Vec::with_capacity(rows.len());
        for (i, (row, &label)) in rows.into_iter().zip(labels).enumerate() {
            if row.len() != num_classes || label >= num_classes {
                return Err(CalibError::InvalidInput(format!("record {i} does not match K = {num_classes}")));
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
                return Err(CalibError::InvalidInput(format!("record {i} is not a probability vector")));
            }
            predictions.push(Prediction::from_probs(row, label));
        }
        Ok(Self {
            num_classes,
            predictions,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn get(&self, i: usize) -> &Prediction {
        &self.predictions[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Prediction> {
        self.predictions.iter()
    }

    /// Fraction of correct predictions; 0 for an empty set.
    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            return 0.0;
        }
        self.predictions.iter().filter(|p| p.correct).count() as f64 / self.predictions.len() as f64
    }

    /// Predictions at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            num_classes: self.num_classes,
            predictions: indices.iter().map(|&i| self.predictions[i].clone()).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a PredictionSet {
    type Item = &'a Prediction;
    type IntoIter = std::slice::Iter<'a, Prediction>;

    fn into_iter(self) -> Self::IntoIter {
        self.predictions.iter()
    }
}

/// Applies `model` to every record. Class-wise models are routed by the
/// argmax of the uncalibrated logits.
pub fn predict(dataset: &LogitDataset, model: &CalibrationModel) -> Result<PredictionSet> {
    model.validate(dataset.num_classes())?;
    let predictions = dataset
        .records()
        .map(|(z, label)| {
            let raw = argmax_tiebreak(z);
            Prediction::from_probs(softmax_unchecked(&model.transform_logits(z, raw)), label)
        })
        .collect();
    Ok(PredictionSet {
        num_classes: dataset.num_classes(),
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_binary_prediction() {
        let ds = LogitDataset::new(2, vec![vec![2.0, 0.0]], vec![0]).unwrap();
        let p = predict(&ds, &CalibrationModel::Identity).unwrap();
        let r = p.get(0);
        assert_eq!(r.predicted, 0);
        assert!(r.correct);
        // sigmoid(2) = 1 / (1 + e^-2)
        assert!((r.confidence - 0.880797077977882444).abs() < 1e-15);
    }

    #[test]
    fn large_temperature_saturates_confidence() {
        let ds = LogitDataset::new(3, vec![vec![0.2, 0.5, 0.1]], vec![1]).unwrap();
        let p = predict(&ds, &CalibrationModel::Temperature { alpha: 1e4 }).unwrap();
        assert!(p.get(0).confidence > 1.0 - 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ds = LogitDataset::new(2, vec![vec![2.0, 0.0]], vec![0]).unwrap();
        let m = CalibrationModel::Vector {
            a: vec![1.0; 3],
            b: vec![0.0; 3],
        };
        assert!(matches!(predict(&ds, &m), Err(CalibError::DimensionMismatch { .. })));
    }

    #[test]
    fn from_probs_validates() {
        assert!(PredictionSet::from_probs(2, vec![vec![0.6, 0.6]], &[0]).is_err());
        let ok = PredictionSet::from_probs(3, vec![vec![0.4, 0.3, 0.3]], &[0]).unwrap();
        assert_eq!(ok.get(0).confidence, 0.4);
        assert!(ok.get(0).correct);
    }
}
