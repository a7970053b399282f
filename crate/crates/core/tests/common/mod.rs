#![allow(dead_code)]

use calibkit_core::LogitDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Naive softmax with max subtraction, kept separate from the library's.
pub fn reference_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn reference_nll(ds: &LogitDataset, alpha: f64, indices: Option<&[usize]>) -> f64 {
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..ds.len()).collect();
            &all
        }
    };
    idx.iter()
        .map(|&i| {
            let z: Vec<f64> = ds.logits(i).iter().map(|v| alpha * v).collect();
            -reference_softmax(&z)[ds.label(i)].ln()
        })
        .sum::<f64>()
        / idx.len() as f64
}

/// Labels drawn from softmax of the logits themselves, so the data is
/// calibrated at temperature 1.
pub fn calibrated_dataset(k: usize, n: usize, spread: f64, seed: u64) -> LogitDataset {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..k).map(|_| spread * r.sample::<f64, _>(StandardNormal)).collect();
        let p = reference_softmax(&z);
        let u: f64 = r.random();
        let mut acc = 0.0;
        let mut y = k - 1;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                y = j;
                break;
            }
        }
        rows.push(z);
        labels.push(y);
    }
    LogitDataset::new(k, rows, labels).unwrap()
}

/// Uniform logits in `[-scale, scale]` with uniformly random labels.
pub fn random_dataset(k: usize, n: usize, scale: f64, seed: u64) -> LogitDataset {
    let mut r = rng(seed);
    let rows = (0..n).map(|_| (0..k).map(|_| r.random_range(-scale..scale)).collect()).collect();
    let labels = (0..n).map(|_| r.random_range(0..k)).collect();
    LogitDataset::new(k, rows, labels).unwrap()
}

/// Grid argmin of `f` over `points` equally spaced values in `[lo, hi]`.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    for i in 0..points {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    (best.0, step)
}
