//! NLL and its analytic derivatives under temperature and vector scaling.

use crate::dataset::LogitDataset;
use crate::error::{CalibError, Result};
use crate::softmax::{log_sum_exp, softmax_unchecked};

fn for_records<'a>(
    ds: &'a LogitDataset,
    slice: Option<&'a [usize]>,
) -> Box<dyn Iterator<Item = (&'a [f64], usize)> + 'a> {
    match slice {
        Some(idx) => Box::new(idx.iter().map(move |&i| (ds.logits(i), ds.label(i)))),
        None => Box::new(ds.records()),
    }
}

fn count(ds: &LogitDataset, slice: Option<&[usize]>) -> usize {
    slice.map_or(ds.len(), <[usize]>::len)
}

/// Mean NLL under `softmax(alpha * z)`, optionally over a subset of records.
/// Returns 0 for an empty selection.
pub fn nll_temperature(ds: &LogitDataset, alpha: f64, slice: Option<&[usize]>) -> f64 {
    let n = count(ds, slice);
    if n == 0 {
        return 0.0;
    }
    let mut scaled = vec![0.0; ds.num_classes()];
    let total: f64 = for_records(ds, slice)
        .map(|(z, y)| {
            for (s, v) in scaled.iter_mut().zip(z) {
                *s = alpha * v;
            }
            log_sum_exp(&scaled) - scaled[y]
        })
        .sum();
    total / n as f64
}

/// `d/d alpha` of [`nll_temperature`]: mean of `Σ_k p_k z_k - z_y` with
/// `p = softmax(alpha * z)`.
pub fn nll_grad_temperature(ds: &LogitDataset, alpha: f64, slice: Option<&[usize]>) -> f64 {
    let n = count(ds, slice);
    if n == 0 {
        return 0.0;
    }
    let mut scaled = vec![0.0; ds.num_classes()];
    let total: f64 = for_records(ds, slice)
        .map(|(z, y)| {
            for (s, v) in scaled.iter_mut().zip(z) {
                *s = alpha * v;
            }
            let p = softmax_unchecked(&scaled);
            p.iter().zip(z).map(|(p, z)| p * z).sum::<f64>() - z[y]
        })
        .sum();
    total / n as f64
}

fn check_vector(ds: &LogitDataset, a: &[f64], b: &[f64]) -> Result<()> {
    for v in [a, b] {
        if v.len() != ds.num_classes() {
            return Err(CalibError::DimensionMismatch {
                expected: ds.num_classes(),
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Mean NLL under `softmax(a ⊙ z + b)`.
pub fn nll_vector(ds: &LogitDataset, a: &[f64], b: &[f64]) -> Result<f64> {
    check_vector(ds, a, b)?;
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut u = vec![0.0; ds.num_classes()];
    let total: f64 = ds
        .records()
        .map(|(z, y)| {
            for k in 0..u.len() {
                u[k] = a[k] * z[k] + b[k];
            }
            log_sum_exp(&u) - u[y]
        })
        .sum();
    Ok(total / ds.len() as f64)
}

/// Gradients of [`nll_vector`]: `grad_b = mean(p - onehot(y))`,
/// `grad_a = mean((p - onehot(y)) ⊙ z)`.
pub fn nll_grad_vector(ds: &LogitDataset, a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_vector(ds, a, b)?;
    let k = ds.num_classes();
    let mut grad_a = vec![0.0; k];
    let mut grad_b = vec![0.0; k];
    if ds.is_empty() {
        return Ok((grad_a, grad_b));
    }
    let mut u = vec![0.0; k];
    for (z, y) in ds.records() {
        for j in 0..k {
            u[j] = a[j] * z[j] + b[j];
        }
        let mut r = softmax_unchecked(&u);
        r[y] -= 1.0;
        for j in 0..k {
            grad_b[j] += r[j];
            grad_a[j] += r[j] * z[j];
        }
    }
    let n = ds.len() as f64;
    grad_a.iter_mut().chain(grad_b.iter_mut()).for_each(|g| *g /= n);
    Ok((grad_a, grad_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_have_zero_temperature_gradient() {
        let ds = LogitDataset::new(3, vec![vec![1.5; 3], vec![-0.2; 3]], vec![0, 2]).unwrap();
        for alpha in [0.1, 1.0, 7.0] {
            assert_eq!(nll_grad_temperature(&ds, alpha, None), 0.0);
            assert!((nll_temperature(&ds, alpha, None) - 3f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn perfectly_fit_record_contributes_nothing() {
        let ds = LogitDataset::new(2, vec![vec![800.0, -800.0]], vec![0]).unwrap();
        let (ga, gb) = nll_grad_vector(&ds, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(ga.iter().chain(&gb).all(|g| g.abs() < 1e-300));
    }

    #[test]
    fn symmetric_balanced_bias_gradient_vanishes() {
        // every record is a permutation of [2, 0, -1], each label seen once per position
        let base = [2.0, 0.0, -1.0];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for shift in 0..3 {
            let row: Vec<f64> = (0..3).map(|j| base[(j + shift) % 3]).collect();
            for y in 0..3 {
                rows.push(row.clone());
                labels.push(y);
            }
        }
        let ds = LogitDataset::new(3, rows, labels).unwrap();
        let (_, gb) = nll_grad_vector(&ds, &[1.0; 3], &[0.0; 3]).unwrap();
        // explicit average: each class sees p-values {p0,p1,p2} thrice minus 1/3 onehot mass
        assert!(gb.iter().all(|g| g.abs() < 1e-15), "{gb:?}");
    }

    #[test]
    fn slice_restricts_average() {
        let ds = LogitDataset::new(2, vec![vec![1.0, 0.0], vec![0.0, 3.0]], vec![0, 0]).unwrap();
        let only_first = nll_temperature(&ds, 1.0, Some(&[0]));
        assert!((only_first - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
        assert_eq!(nll_temperature(&ds, 1.0, Some(&[])), 0.0);
    }

    #[test]
    fn vector_dimension_mismatch() {
        let ds = LogitDataset::new(2, vec![vec![1.0, 0.0]], vec![0]).unwrap();
        assert!(nll_vector(&ds, &[1.0], &[0.0, 0.0]).is_err());
        assert!(nll_grad_vector(&ds, &[1.0, 1.0], &[0.0]).is_err());
    }
}
