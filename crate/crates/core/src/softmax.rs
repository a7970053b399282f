//! Numerically stable softmax, log-sum-exp and the argmax convention used
//! for every prediction in the crate.

use crate::error::{CalibError, Result};

/// Neumaier-compensated sum. Used wherever a reduction over exponentials
/// has to stay accurate when the terms span many orders of magnitude.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_finite(logits: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(CalibError::InvalidInput("empty logit vector".into()));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(CalibError::InvalidInput(format!(
            "non-finite logit {} at index {i}",
            logits[i]
        )));
    }
    Ok(())
}

/// `log Σ exp(z_k)`, computed with max-subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + compensated_sum(logits.iter().map(|&z| (z - m).exp())).ln()
}

/// Softmax of a finite logit vector.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    Ok(softmax_unchecked(logits))
}

/// Softmax without the finiteness check; callers guarantee finite input.
pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total = compensated_sum(out.iter().copied());
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Log-softmax of a finite logit vector.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    let lse = log_sum_exp(logits);
    Ok(logits.iter().map(|&z| z - lse).collect())
}

/// Index of the largest entry. Ties go to the lowest index.
pub fn argmax_tiebreak(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let p = softmax(&[0.0; 4]).unwrap();
        for v in p {
            assert_eq!(v, 0.25);
        }
    }

    #[test]
    fn single_entry_is_one() {
        assert_eq!(softmax(&[-3.7]).unwrap(), vec![1.0]);
    }

    #[test]
    fn known_three_class_values() {
        // e^{z_k} / Σ e^{z_j} for z = [1, 2, 3], evaluated with mpmath at 30 digits.
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let want = [0.090030573170380458, 0.24472847105479765, 0.66524095577482189];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let p = softmax(&[4700.0, 0.0, -4700.0]).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(softmax(&[0.0, f64::NAN]), Err(CalibError::InvalidInput(_))));
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
        assert!(log_softmax(&[f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_tiebreak(&[0.5, 0.5]), 0);
        assert_eq!(argmax_tiebreak(&[0.1, 0.7, 0.2]), 1);
        let third = 1.0 / 3.0;
        assert_eq!(argmax_tiebreak(&[third, third, third]), 0);
    }

    #[test]
    fn log_softmax_matches_log_of_softmax() {
        let z = [0.3, -1.2, 2.5, 0.0];
        let lp = log_softmax(&z).unwrap();
        let p = softmax(&z).unwrap();
        for (a, b) in lp.iter().zip(p) {
            assert!((a - b.ln()).abs() < 1e-14);
        }
    }
}
