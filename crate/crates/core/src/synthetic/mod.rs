//! Synthetic data and exact solvers for the noisy two-atom model, the
//! three-atom sample-size construction, and a heterogeneous logit generator.
//!
//! All randomness goes through [`seeded_rng`] (ChaCha8 seeded from a `u64`),
//! so every generator is a pure function of its spec and seed.

mod hetero;
mod logistic;
mod noisy;
mod theorem1;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use hetero::{gen_hetero_logits, generate_hetero, HeteroLogitSpec, HeteroSplits};
pub use logistic::{fit_constrained_logistic, fit_logistic_with, LinearBinaryClassifier, LogisticSettings};
pub use noisy::{
    lemma2_closed_form, lemma2_population_loss, lemma2_population_loss_grad, population_confidence_accuracy,
    sample_dnoisy, BinaryDataset, Lemma2Solution, NoisyBinarySpec, PopulationStats,
};
pub use theorem1::{theorem1_experiment, Scenario, Theorem1Spec, Theorem1Trial};

pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `1 / (1 + e^{-t})` without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}
