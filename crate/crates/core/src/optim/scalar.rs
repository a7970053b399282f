use crate::error::{CalibError, Result};

/// Points in the coarse scan that precedes golden-section refinement.
pub const BRACKET_POINTS: usize = 64;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// A bounded one-dimensional minimization problem.
pub struct ScalarProblem<F> {
    pub objective: F,
    pub lo: f64,
    pub hi: f64,
    /// Absolute tolerance on the argument.
    pub tolerance: f64,
    pub bracket_points: usize,
}

impl<F: Fn(f64) -> f64> ScalarProblem<F> {
    pub fn new(objective: F, lo: f64, hi: f64, tolerance: f64) -> Self {
        Self {
            objective,
            lo,
            hi,
            tolerance,
            bracket_points: BRACKET_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Coarse grid scan over `[lo, hi]` followed by golden-section search inside
/// the cell pair around the best grid point. Deterministic.
pub fn minimize_scalar<F: Fn(f64) -> f64>(p: &ScalarProblem<F>) -> Result<ScalarMinimum> {
    if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
        return Err(CalibError::Config(format!(
            "invalid scalar bounds [{}, {}]",
            p.lo, p.hi
        )));
    }
    if !(p.tolerance > 0.0) {
        return Err(CalibError::Config(format!("tolerance must be positive, got {}", p.tolerance)));
    }
    if p.bracket_points < 3 {
        return Err(CalibError::Config("bracket scan needs at least 3 points".into()));
    }
    let mut evaluations = 0;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = (p.objective)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CalibError::Optimization {
                iterations: evaluations,
                message: format!("objective is {v} at x = {x}"),
            })
        }
    };

    let n = p.bracket_points;
    let step = (p.hi - p.lo) / (n - 1) as f64;
    let grid = |i: usize| if i == n - 1 { p.hi } else { p.lo + step * i as f64 };
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..n {
        let v = eval(grid(i))?;
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut best_x = grid(best_i);

    let mut a = grid(best_i.saturating_sub(1));
    let mut b = grid((best_i + 1).min(n - 1));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > p.tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = eval(mid)?;
    if fm < best_v {
        best_v = fm;
        best_x = mid;
    }
    Ok(ScalarMinimum {
        x: best_x,
        value: best_v,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let r = minimize_scalar(&ScalarProblem::new(|x| (x - 2.0).powi(2), 0.0, 10.0, 1e-6)).unwrap();
        assert!((r.x - 2.0).abs() < 1e-6, "{}", r.x);
    }

    #[test]
    fn kink() {
        let r = minimize_scalar(&ScalarProblem::new(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-6)).unwrap();
        assert!((r.x - 0.3).abs() < 1e-6, "{}", r.x);
    }

    #[test]
    fn minimum_at_bound() {
        let r = minimize_scalar(&ScalarProblem::new(|x| x, 1.0, 4.0, 1e-8)).unwrap();
        assert_eq!(r.x, 1.0);
        let r = minimize_scalar(&ScalarProblem::new(|x| -x, 1.0, 4.0, 1e-8)).unwrap();
        assert_eq!(r.x, 4.0);
    }

    #[test]
    fn tolerates_mild_multimodality() {
        // global minimum near 7.9, shallow local minimum near 1.6
        let f = |x: f64| (x - 8.0).powi(2) * 0.1 + (3.0 * x).sin();
        let r = minimize_scalar(&ScalarProblem::new(f, 0.0, 10.0, 1e-7)).unwrap();
        let grid_best = (0..=1_000_000)
            .map(|i| i as f64 * 1e-5)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert!((r.x - grid_best).abs() < 2e-5, "{} vs {grid_best}", r.x);
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(minimize_scalar(&ScalarProblem::new(|x| x, 1.0, 1.0, 1e-6)).is_err());
        assert!(minimize_scalar(&ScalarProblem::new(|x| x, 0.0, 1.0, 0.0)).is_err());
        let err = minimize_scalar(&ScalarProblem::new(|x: f64| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, 1e-6));
        assert!(matches!(err, Err(CalibError::Optimization { .. })));
    }
}
