//! Per-class heterogeneous logits: each class has its own confidence scale,
//! label-noise rate and sample count.
//!
//! A record of class `k` draws latent scores `h_k ~ N(margin, 1)`,
//! `h_j ~ N(0, 1)` for `j != k`. For balanced classes the Bayes posterior is
//! `softmax(margin * h)`, so the emitted logits are `s_k * margin * h`:
//! `s_k = 1` is calibrated, `s_k > 1` over-confident, `s_k < 1`
//! under-confident. With probability `rho_k` the label is then replaced by a
//! uniformly drawn class.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::seeded_rng;
use crate::dataset::LogitDataset;
use crate::error::{CalibError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroLogitSpec {
    pub num_classes: usize,
    pub scales: Vec<f64>,
    pub noise: Vec<f64>,
    pub counts: Vec<usize>,
    pub margin: f64,
    pub seed: u64,
    /// Fractions of the shuffled records assigned to train and validation;
    /// the rest is test.
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl HeteroLogitSpec {
    /// Every class calibrated, noiseless, with `per_class` records.
    pub fn uniform(num_classes: usize, per_class: usize, margin: f64, seed: u64) -> Self {
        Self {
            num_classes,
            scales: vec![1.0; num_classes],
            noise: vec![0.0; num_classes],
            counts: vec![per_class; num_classes],
            margin,
            seed,
            train_fraction: 0.0,
            val_fraction: 0.5,
        }
    }

    /// First half of the classes uses `first_scale`, the rest `second_scale`.
    pub fn two_group(
        num_classes: usize,
        per_class: usize,
        first_scale: f64,
        second_scale: f64,
        margin: f64,
        seed: u64,
    ) -> Self {
        let mut spec = Self::uniform(num_classes, per_class, margin, seed);
        let half = num_classes / 2;
        for (k, s) in spec.scales.iter_mut().enumerate() {
            *s = if k < half { first_scale } else { second_scale };
        }
        spec
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes;
        if k < 2 {
            return Err(CalibError::Config(format!("num_classes must be >= 2, got {k}")));
        }
        for (name, len) in [("scales", self.scales.len()), ("noise", self.noise.len()), ("counts", self.counts.len())] {
            if len != k {
                return Err(CalibError::Config(format!("{name} has {len} entries, expected {k}")));
            }
        }
        if let Some(s) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(CalibError::Config(format!("scales must be positive, got {s}")));
        }
        if let Some(r) = self.noise.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(CalibError::Config(format!("noise rates must lie in [0, 1), got {r}")));
        }
        if self.total() == 0 {
            return Err(CalibError::Config("at least one record is required".into()));
        }
        if !self.margin.is_finite() {
            return Err(CalibError::Config("margin must be finite".into()));
        }
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t >= 0.0 && v >= 0.0 && t + v <= 1.0) {
            return Err(CalibError::Config(format!("invalid split fractions train = {t}, val = {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroSplits {
    pub train: LogitDataset,
    pub val: LogitDataset,
    pub test: LogitDataset,
}

/// Draws all records, in shuffled order.
pub fn generate_hetero(spec: &HeteroLogitSpec) -> Result<LogitDataset> {
    spec.validate()?;
    let k = spec.num_classes;
    let mut rng = seeded_rng(spec.seed);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(spec.total());
    for class in 0..k {
        let factor = spec.scales[class] * spec.margin;
        for _ in 0..spec.counts[class] {
            let logits: Vec<f64> = (0..k)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    let latent = if j == class { spec.margin + noise } else { noise };
                    factor * latent
                })
                .collect();
            let label = if spec.noise[class] > 0.0 && rng.random_bool(spec.noise[class]) {
                rng.random_range(0..k)
            } else {
                class
            };
            rows.push((logits, label));
        }
    }
    rows.shuffle(&mut rng);
    let (logits, labels): (Vec<Vec<f64>>, Vec<usize>) = rows.into_iter().unzip();
    LogitDataset::new(k, logits, labels)
}

/// Draws all records and splits them into train / validation / test.
pub fn gen_hetero_logits(spec: &HeteroLogitSpec) -> Result<HeteroSplits> {
    let all = generate_hetero(spec)?;
    let n = all.len();
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    let n_val = ((spec.val_fraction * n as f64).round() as usize).min(n - n_train);
    let idx: Vec<usize> = (0..n).collect();
    Ok(HeteroSplits {
        train: all.subset(&idx[..n_train]),
        val: all.subset(&idx[n_train..n_train + n_val]),
        test: all.subset(&idx[n_train + n_val..]),
    })
}
