use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::logistic::LinearBinaryClassifier;
use super::{seeded_rng, sigmoid, softplus};
use crate::error::{CalibError, Result};

/// Two-atom binary distribution over `{v, -v}`. Given `X = v` the label is 1
/// with probability `1 - p_plus`; given `X = -v` it is 0 with probability
/// `1 - p_minus`. Test data uses `p_test` on both atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyBinarySpec {
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_test: f64,
    pub direction: Vec<f64>,
}

impl NoisyBinarySpec {
    pub fn new(p_plus: f64, p_minus: f64, p_test: f64, direction: Vec<f64>) -> Result<Self> {
        for (name, p) in [("p_plus", p_plus), ("p_minus", p_minus), ("p_test", p_test)] {
            if !(0.0..0.5).contains(&p) {
                return Err(CalibError::Config(format!("{name} must lie in [0, 0.5), got {p}")));
            }
        }
        if direction.is_empty() {
            return Err(CalibError::Config("direction must have dimension >= 1".into()));
        }
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(CalibError::Config(format!("direction must have unit norm, got {norm}")));
        }
        Ok(Self {
            p_plus,
            p_minus,
            p_test,
            direction,
        })
    }

    /// Spec with `v = e_1` in dimension `dim`.
    pub fn axis(p_plus: f64, p_minus: f64, p_test: f64, dim: usize) -> Result<Self> {
        let mut v = vec![0.0; dim.max(1)];
        v[0] = 1.0;
        Self::new(p_plus, p_minus, p_test, v)
    }

    /// The same atoms with test-time noise on both sides.
    pub fn test_distribution(&self) -> Self {
        Self {
            p_plus: self.p_test,
            p_minus: self.p_test,
            ..self.clone()
        }
    }
}

/// Binary dataset with row-major features and 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

impl BinaryDataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], y: u8) {
        debug_assert_eq!(x.len(), self.dim);
        self.features.extend_from_slice(x);
        self.labels.push(y);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn records(&self) -> impl Iterator<Item = (&[f64], u8)> + '_ {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    /// Fraction of records the classifier labels correctly.
    pub fn accuracy_of(&self, clf: &LinearBinaryClassifier) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.records().filter(|(x, y)| clf.decide(x) == *y).count() as f64 / self.len() as f64
    }
}

/// Draws `n` records from the noisy two-atom distribution.
pub fn sample_dnoisy(spec: &NoisyBinarySpec, n: usize, seed: u64) -> BinaryDataset {
    let mut rng = seeded_rng(seed);
    let neg: Vec<f64> = spec.direction.iter().map(|x| -x).collect();
    let mut ds = BinaryDataset::new(spec.direction.len());
    ds.features.reserve(n * ds.dim);
    ds.labels.reserve(n);
    for _ in 0..n {
        if rng.random_bool(0.5) {
            let y = u8::from(!rng.random_bool(spec.p_plus));
            ds.push(&spec.direction, y);
        } else {
            let y = u8::from(rng.random_bool(spec.p_minus));
            ds.push(&neg, y);
        }
    }
    ds
}

/// Population NLL minimizer for the noisy two-atom model, expressed along
/// `v`: `f(x v) = sigmoid(a x + b)`, with `alpha = a + b`, `beta = a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Solution {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

impl Lemma2Solution {
    pub fn classifier(&self, direction: &[f64]) -> LinearBinaryClassifier {
        LinearBinaryClassifier {
            weights: direction.iter().map(|v| self.a * v).collect(),
            intercept: self.b,
        }
    }
}

/// `alpha = log((1 - p_plus) / p_plus)`, `beta = log((1 - p_minus) / p_minus)`.
pub fn lemma2_closed_form(p_plus: f64, p_minus: f64) -> Result<Lemma2Solution> {
    for (name, p) in [("p_plus", p_plus), ("p_minus", p_minus)] {
        if p == 0.0 {
            return Err(CalibError::DegenerateNoise(format!(
                "{name} = 0 makes the optimal logit infinite"
            )));
        }
        if !(p > 0.0 && p < 0.5) {
            return Err(CalibError::Config(format!("{name} must lie in (0, 0.5), got {p}")));
        }
    }
    let alpha = ((1.0 - p_plus) / p_plus).ln();
    let beta = ((1.0 - p_minus) / p_minus).ln();
    Ok(Lemma2Solution {
        alpha,
        beta,
        a: 0.5 * (alpha + beta),
        b: 0.5 * (alpha - beta),
    })
}

/// Twice the population NLL in the decoupled coordinates:
/// `(1-p+) sp(-alpha) + p+ sp(alpha) + (1-p-) sp(-beta) + p- sp(beta)`.
pub fn lemma2_population_loss(alpha: f64, beta: f64, p_plus: f64, p_minus: f64) -> f64 {
    (1.0 - p_plus) * softplus(-alpha) + p_plus * softplus(alpha) + (1.0 - p_minus) * softplus(-beta)
        + p_minus * softplus(beta)
}

/// Partial derivatives of [`lemma2_population_loss`] in `(alpha, beta)`.
pub fn lemma2_population_loss_grad(alpha: f64, beta: f64, p_plus: f64, p_minus: f64) -> (f64, f64) {
    (
        -(1.0 - p_plus) * sigmoid(-alpha) + p_plus * sigmoid(alpha),
        -(1.0 - p_minus) * sigmoid(-beta) + p_minus * sigmoid(beta),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    /// Confidence on `v`.
    pub conf_plus: f64,
    /// Confidence on `-v`.
    pub conf_minus: f64,
    /// Accuracy under the test distribution.
    pub accuracy: f64,
}

/// Exact confidence on each atom and test accuracy under
/// `D_noisy(p_test, p_test)`.
pub fn population_confidence_accuracy(clf: &LinearBinaryClassifier, spec: &NoisyBinarySpec) -> PopulationStats {
    let neg: Vec<f64> = spec.direction.iter().map(|x| -x).collect();
    // at v the label is 1 w.p. 1 - p_test; at -v it is 0 w.p. 1 - p_test
    let hit = |decision_matches_majority: bool| {
        if decision_matches_majority {
            1.0 - spec.p_test
        } else {
            spec.p_test
        }
    };
    let acc_plus = hit(clf.decide(&spec.direction) == 1);
    let acc_minus = hit(clf.decide(&neg) == 0);
    let accuracy = if acc_plus == acc_minus {
        acc_plus
    } else {
        0.5 * (acc_plus + acc_minus)
    };
    PopulationStats {
        conf_plus: clf.confidence(&spec.direction),
        conf_minus: clf.confidence(&neg),
        accuracy,
    }
}
