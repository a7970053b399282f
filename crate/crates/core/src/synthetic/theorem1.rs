//! Three-atom construction in which a small training set misses a rare
//! atom: both small- and large-sample logistic fits become near-certain,
//! but only the large-sample fit is always right.
//!
//! Atoms live in `span{u, v}` with `u = e_1`, `v = e_2`,
//! `v' = (u + v) / √2`; labels are `Y(v) = 1`, `Y(v') = 0`, `Y(-v) = 0`
//! with masses `1/2`, `1/N`, `1/2 - 1/N` and `N = 20 n`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{fit_constrained_logistic, LinearBinaryClassifier};
use super::noisy::BinaryDataset;
use super::seeded_rng;
use crate::error::{CalibError, Result};

const FIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Spec {
    /// Small-sample budget `n`.
    pub n: usize,
    pub epsilon: f64,
    /// Size of the large sample as a multiple of `n`.
    pub large_multiplier: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// `n` training records.
    S1,
    /// `large_multiplier * n` training records.
    S2,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Trial {
    pub trial: usize,
    pub scenario: Scenario,
    pub sample_size: usize,
    /// Whether the rare atom `v'` occurs in the training sample.
    pub rare_atom_present: bool,
    /// At least a third of the sample is `v` and at least a third is `-v`.
    pub balanced: bool,
    pub min_confidence: f64,
    pub accuracy: f64,
    pub weight_norm: f64,
    pub cosine_to_v: f64,
    pub intercept: f64,
}

impl Theorem1Spec {
    /// Default large sample: `50 n`.
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        let spec = Self {
            n,
            epsilon,
            large_multiplier: 50,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(CalibError::Config(format!("n must be >= 10, got {}", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(CalibError::Config(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon)));
        }
        if self.large_multiplier == 0 {
            return Err(CalibError::Config("large_multiplier must be positive".into()));
        }
        Ok(())
    }

    /// `N = 20 n`.
    pub fn rare_denominator(&self) -> usize {
        20 * self.n
    }

    /// `R = 6 log(50 n + 1/epsilon)`.
    pub fn radius(&self) -> f64 {
        6.0 * (50.0 * self.n as f64 + 1.0 / self.epsilon).ln()
    }

    pub fn u(&self) -> [f64; 2] {
        [1.0, 0.0]
    }

    pub fn v(&self) -> [f64; 2] {
        [0.0, 1.0]
    }

    pub fn v_prime(&self) -> [f64; 2] {
        [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]
    }

    /// `(point, probability, label)` for `v`, `v'`, `-v`.
    pub fn atoms(&self) -> [([f64; 2], f64, u8); 3] {
        let rare = 1.0 / self.rare_denominator() as f64;
        [
            (self.v(), 0.5, 1),
            (self.v_prime(), rare, 0),
            ([0.0, -1.0], 0.5 - rare, 0),
        ]
    }

    /// Draws `size` records; returns the dataset and per-atom counts.
    pub fn sample(&self, size: usize, rng: &mut super::Rng) -> (BinaryDataset, [usize; 3]) {
        let atoms = self.atoms();
        let rare = atoms[1].1;
        let mut ds = BinaryDataset::new(2);
        let mut counts = [0; 3];
        for _ in 0..size {
            let u: f64 = rng.random();
            let idx = if u < 0.5 {
                0
            } else if u < 0.5 + rare {
                1
            } else {
                2
            };
            counts[idx] += 1;
            ds.push(&atoms[idx].0, atoms[idx].2);
        }
        (ds, counts)
    }

    /// Minimum confidence over the three atoms and exact population accuracy.
    pub fn evaluate(&self, clf: &LinearBinaryClassifier) -> (f64, f64) {
        let atoms = self.atoms();
        let min_conf = atoms
            .iter()
            .map(|(x, _, _)| clf.confidence(x))
            .fold(f64::INFINITY, f64::min);
        let missed: f64 = atoms
            .iter()
            .filter(|(x, _, y)| clf.decide(x) != *y)
            .map(|(_, p, _)| p)
            .sum();
        (min_conf, 1.0 - missed)
    }

    fn run(&self, trial: usize, scenario: Scenario, seed: u64) -> Result<Theorem1Trial> {
        let mut rng = seeded_rng(seed.wrapping_add(trial as u64));
        let stream = match scenario {
            Scenario::S1 => 0,
            Scenario::S2 => 1,
        };
        rng.set_stream(stream);
        let size = match scenario {
            Scenario::S1 => self.n,
            Scenario::S2 => self.n * self.large_multiplier,
        };
        let (ds, counts) = self.sample(size, &mut rng);
        let clf = fit_constrained_logistic(&ds, self.radius(), FIT_TOLERANCE)?;
        let (min_confidence, accuracy) = self.evaluate(&clf);
        let norm = clf.weight_norm();
        let v = self.v();
        let cosine_to_v = if norm > 0.0 {
            (clf.weights[0] * v[0] + clf.weights[1] * v[1]) / norm
        } else {
            0.0
        };
        Ok(Theorem1Trial {
            trial,
            scenario,
            sample_size: size,
            rare_atom_present: counts[1] > 0,
            balanced: 3 * counts[0] >= size && 3 * counts[2] >= size,
            min_confidence,
            accuracy,
            weight_norm: norm,
            cosine_to_v,
            intercept: clf.intercept,
        })
    }
}

/// Runs `trials` independent trials of both scenarios. Trial `t` uses seed
/// `seed + t`; the two scenarios draw from separate ChaCha streams. Output is
/// ordered by trial, then scenario.
pub fn theorem1_experiment(spec: &Theorem1Spec, trials: usize, seed: u64) -> Result<Vec<Theorem1Trial>> {
    spec.validate()?;
    let runs: Result<Vec<[Theorem1Trial; 2]>> = (0..trials)
        .into_par_iter()
        .map(|t| Ok([spec.run(t, Scenario::S1, seed)?, spec.run(t, Scenario::S2, seed)?]))
        .collect();
    Ok(runs?.into_iter().flatten().collect())
}
