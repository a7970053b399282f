use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::noisy::BinaryDataset;
use super::{sigmoid, softplus};
use crate::error::{CalibError, Result};
use crate::optim::{projected_gd, DescentSettings, GradientProblem, StepPolicy, Stopping};

/// `f(x) = sigmoid(w·x + b)`. Predicts 1 when `f(x) >= 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBinaryClassifier {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearBinaryClassifier {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.intercept
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn decide(&self, x: &[f64]) -> u8 {
        u8::from(self.logit(x) >= 0.0)
    }

    /// Probability of the decided class, computed from the logit's magnitude
    /// so that values near 1 keep full precision.
    pub fn confidence(&self, x: &[f64]) -> f64 {
        let t = self.logit(x);
        if t >= 0.0 {
            sigmoid(t)
        } else {
            sigmoid(-t)
        }
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSettings {
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            initial_step: 1.0,
        }
    }
}

/// Distinct feature rows with their positive and negative label counts.
struct Atoms {
    dim: usize,
    points: Vec<f64>,
    positives: Vec<f64>,
    negatives: Vec<f64>,
    total: f64,
}

impl Atoms {
    fn from_dataset(ds: &BinaryDataset) -> Self {
        let mut map: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
        for (x, y) in ds.records() {
            let key = x.iter().map(|v| v.to_bits()).collect();
            let e = map.entry(key).or_default();
            if y == 1 {
                e.0 += 1.0;
            } else {
                e.1 += 1.0;
            }
        }
        let mut atoms = Self {
            dim: ds.dim,
            points: Vec::with_capacity(map.len() * ds.dim),
            positives: Vec::with_capacity(map.len()),
            negatives: Vec::with_capacity(map.len()),
            total: ds.len() as f64,
        };
        for (key, (pos, neg)) in map {
            atoms.points.extend(key.into_iter().map(f64::from_bits));
            atoms.positives.push(pos);
            atoms.negatives.push(neg);
        }
        atoms
    }

    fn margins<'a>(&'a self, params: &'a [f64]) -> impl Iterator<Item = (usize, f64)> + 'a {
        let (w, b) = params.split_at(self.dim);
        let b = b[0];
        self.points
            .chunks_exact(self.dim)
            .enumerate()
            .map(move |(i, x)| (i, w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b))
    }

    fn loss(&self, params: &[f64]) -> f64 {
        self.margins(params)
            .map(|(i, t)| self.positives[i] * softplus(-t) + self.negatives[i] * softplus(t))
            .sum::<f64>()
            / self.total
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim + 1];
        for (i, t) in self.margins(params) {
            let r = (-self.positives[i] * sigmoid(-t) + self.negatives[i] * sigmoid(t)) / self.total;
            let x = &self.points[i * self.dim..(i + 1) * self.dim];
            for (gj, xj) in g.iter_mut().zip(x) {
                *gj += r * xj;
            }
            g[self.dim] += r;
        }
        g
    }
}

/// Empirical binary NLL minimization over `‖w‖₂ <= radius` with a free
/// intercept, by projected gradient descent from `w = 0, b = 0`. The
/// projection rescales `w` radially onto the ball. `tolerance` is the
/// relative loss improvement at which descent stops.
pub fn fit_constrained_logistic(ds: &BinaryDataset, radius: f64, tolerance: f64) -> Result<LinearBinaryClassifier> {
    fit_logistic_with(ds, radius, tolerance, LogisticSettings::default())
}

pub fn fit_logistic_with(
    ds: &BinaryDataset,
    radius: f64,
    tolerance: f64,
    settings: LogisticSettings,
) -> Result<LinearBinaryClassifier> {
    if ds.is_empty() {
        return Err(CalibError::EmptyDataset("cannot fit a classifier on no data".into()));
    }
    if !(radius > 0.0) {
        return Err(CalibError::Config(format!("radius must be positive, got {radius}")));
    }
    if !(tolerance > 0.0) {
        return Err(CalibError::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let atoms = Atoms::from_dataset(ds);
    let dim = atoms.dim;
    let problem = GradientProblem {
        objective: |p: &[f64]| atoms.loss(p),
        gradient: |p: &[f64]| atoms.gradient(p),
        projection: |p: &mut [f64]| {
            let norm = p[..dim].iter().map(|w| w * w).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                p[..dim].iter_mut().for_each(|w| *w *= s);
            }
        },
        initial: vec![0.0; dim + 1],
        settings: DescentSettings {
            initial_step: settings.initial_step,
            max_iterations: settings.max_iterations,
            max_halvings: 60,
            step_policy: StepPolicy::Adaptive { growth: 2.0 },
            stopping: Stopping::Relative(tolerance),
        },
    };
    let result = projected_gd(&problem)?;
    Ok(LinearBinaryClassifier {
        weights: result.params[..dim].to_vec(),
        intercept: result.params[dim],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms(pos: usize, neg: usize) -> BinaryDataset {
        let mut ds = BinaryDataset::new(2);
        for _ in 0..pos {
            ds.push(&[0.0, 1.0], 1);
        }
        for _ in 0..neg {
            ds.push(&[0.0, -1.0], 0);
        }
        ds
    }

    #[test]
    fn separable_data_saturates_small_radius() {
        let clf = fit_constrained_logistic(&two_atoms(30, 20), 1.0, 1e-12).unwrap();
        assert!((clf.weight_norm() - 1.0).abs() < 1e-9, "{}", clf.weight_norm());
        // reduced problem: a = 1 along v, b minimizes 30 sp(-(1+b)) + 20 sp(1-b) ... checked by grid
        let reduced = |b: f64| 30.0 * softplus(-(1.0 + b)) + 20.0 * softplus(-(1.0 - b));
        let grid_b = (-4000..=4000)
            .map(|i| i as f64 * 1e-3)
            .min_by(|x, y| reduced(*x).total_cmp(&reduced(*y)))
            .unwrap();
        assert!((clf.intercept - grid_b).abs() < 2e-3, "{} vs {grid_b}", clf.intercept);
        assert_eq!(clf.weights[0], 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let ds = two_atoms(1, 1);
        assert!(fit_constrained_logistic(&BinaryDataset::new(2), 1.0, 1e-9).is_err());
        assert!(fit_constrained_logistic(&ds, 0.0, 1e-9).is_err());
        assert!(fit_constrained_logistic(&ds, 1.0, 0.0).is_err());
    }

    #[test]
    fn confidence_is_symmetric() {
        let clf = LinearBinaryClassifier {
            weights: vec![2.0],
            intercept: 0.0,
        };
        assert_eq!(clf.confidence(&[1.0]), clf.confidence(&[-1.0]));
        assert_eq!(clf.decide(&[1.0]), 1);
        assert_eq!(clf.decide(&[-1.0]), 0);
        assert_eq!(clf.decide(&[0.0]), 1);
    }
}
