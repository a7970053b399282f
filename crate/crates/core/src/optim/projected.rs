use crate::error::{CalibError, Result};

/// How the trial step is chosen at the start of each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Every iteration starts from the initial step.
    Restart,
    /// Start from the last accepted step times `growth`.
    Adaptive { growth: f64 },
}

/// Convergence test on the loss improvement of an accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    Absolute(f64),
    /// Improvement relative to the previous loss.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSettings {
    pub initial_step: f64,
    pub max_iterations: usize,
    /// Halvings tried per iteration before the solver declares a stall.
    pub max_halvings: usize,
    pub step_policy: StepPolicy,
    pub stopping: Stopping,
}

impl Default for DescentSettings {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            max_iterations: 2000,
            max_halvings: 40,
            step_policy: StepPolicy::Restart,
            stopping: Stopping::Absolute(1e-10),
        }
    }
}

/// Smooth objective with analytic gradient over a feasible set given by
/// `projection`, which must be idempotent.
pub struct GradientProblem<F, G, P> {
    pub objective: F,
    pub gradient: G,
    pub projection: P,
    pub initial: Vec<f64>,
    pub settings: DescentSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub params: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    /// Loss after every accepted step, starting with the initial loss.
    pub losses: Vec<f64>,
}

/// `x <- project(x - eta * grad f(x))` with step halving until the loss
/// strictly decreases.
pub fn projected_gd<F, G, P>(problem: &GradientProblem<F, G, P>) -> Result<DescentResult>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&mut [f64]),
{
    projected_gd_observed(problem, |_, _| {})
}

/// [`projected_gd`] that reports every accepted iterate and its loss.
pub fn projected_gd_observed<F, G, P>(
    problem: &GradientProblem<F, G, P>,
    mut observe: impl FnMut(&[f64], f64),
) -> Result<DescentResult>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&mut [f64]),
{
    let s = &problem.settings;
    if !(s.initial_step > 0.0) {
        return Err(CalibError::Config("initial step must be positive".into()));
    }
    let mut x = problem.initial.clone();
    (problem.projection)(&mut x);
    let mut loss = (problem.objective)(&x);
    if !loss.is_finite() {
        return Err(CalibError::Optimization {
            iterations: 0,
            message: format!("initial loss is {loss}"),
        });
    }
    observe(&x, loss);
    let mut losses = vec![loss];
    let mut eta = s.initial_step;
    let mut cand = vec![0.0; x.len()];
    let mut iterations = 0;

    while iterations < s.max_iterations {
        iterations += 1;
        let grad = (problem.gradient)(&x);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(CalibError::Optimization {
                iterations,
                message: "non-finite gradient".into(),
            });
        }
        let mut accepted = None;
        let mut non_finite_trials = 0;
        for _ in 0..=s.max_halvings {
            for ((c, xi), gi) in cand.iter_mut().zip(&x).zip(&grad) {
                *c = xi - eta * gi;
            }
            (problem.projection)(&mut cand);
            if cand == x {
                break;
            }
            let trial = (problem.objective)(&cand);
            if trial.is_nan() || trial.is_infinite() {
                non_finite_trials += 1;
            } else if trial < loss {
                accepted = Some(trial);
                break;
            }
            eta *= 0.5;
        }
        let Some(new_loss) = accepted else {
            if non_finite_trials == s.max_halvings + 1 {
                return Err(CalibError::Optimization {
                    iterations,
                    message: "loss is not finite at any trial step".into(),
                });
            }
            break;
        };
        let improvement = loss - new_loss;
        let previous = loss;
        std::mem::swap(&mut x, &mut cand);
        loss = new_loss;
        losses.push(loss);
        observe(&x, loss);
        eta = match s.step_policy {
            StepPolicy::Restart => s.initial_step,
            StepPolicy::Adaptive { growth } => (eta * growth).min(1e300),
        };
        let done = match s.stopping {
            Stopping::Absolute(tol) => improvement < tol,
            Stopping::Relative(tol) => improvement <= tol * previous.abs(),
        };
        if done {
            break;
        }
    }
    Ok(DescentResult {
        params: x,
        loss,
        iterations,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum()
    }

    fn quadratic_grad(c: Vec<f64>) -> impl Fn(&[f64]) -> Vec<f64> {
        move |x: &[f64]| x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect()
    }

    #[test]
    fn unconstrained_quadratic() {
        let c = vec![1.5, -2.0, 0.25];
        let (f, g) = (quadratic(c.clone()), quadratic_grad(c));
        let p = GradientProblem {
            objective: f,
            gradient: g,
            projection: |_: &mut [f64]| {},
            initial: vec![0.0; 3],
            settings: DescentSettings {
                stopping: Stopping::Absolute(1e-16),
                ..Default::default()
            },
        };
        let r = projected_gd(&p).unwrap();
        for (x, c) in r.params.iter().zip([1.5, -2.0, 0.25]) {
            assert!((x - c).abs() < 1e-6, "{x} vs {c}");
        }
    }

    #[test]
    fn box_constrained_quadratic() {
        let (f, g) = (quadratic(vec![1.5, -2.0, 0.25]), quadratic_grad(vec![1.5, -2.0, 0.25]));
        let p = GradientProblem {
            objective: f,
            gradient: g,
            projection: |x: &mut [f64]| x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0)),
            initial: vec![0.5; 3],
            settings: DescentSettings {
                stopping: Stopping::Absolute(1e-16),
                ..Default::default()
            },
        };
        let mut feasible = true;
        let r = projected_gd_observed(&p, |x, _| feasible &= x.iter().all(|v| (0.0..=1.0).contains(v))).unwrap();
        assert!(feasible);
        for (x, c) in r.params.iter().zip([1.0, 0.0, 0.25]) {
            assert!((x - c).abs() < 1e-6, "{x} vs {c}");
        }
    }

    #[test]
    fn losses_never_increase() {
        let (f, g) = (quadratic(vec![3.0, 3.0]), quadratic_grad(vec![3.0, 3.0]));
        let p = GradientProblem {
            objective: f,
            gradient: g,
            projection: |_: &mut [f64]| {},
            initial: vec![0.0; 2],
            settings: DescentSettings {
                initial_step: 5.0,
                ..Default::default()
            },
        };
        let r = projected_gd(&p).unwrap();
        assert!(r.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nan_loss_is_an_error() {
        let p = GradientProblem {
            objective: |_: &[f64]| f64::NAN,
            gradient: |_: &[f64]| vec![1.0],
            projection: |_: &mut [f64]| {},
            initial: vec![0.0],
            settings: DescentSettings::default(),
        };
        assert!(matches!(projected_gd(&p), Err(CalibError::Optimization { .. })));
    }

    #[test]
    fn adaptive_steps_reach_far_minimum() {
        // exp-shaped valley whose gradient is tiny far from the minimum
        let f = |x: &[f64]| (-x[0]).exp() + 1e-9 * (x[0] - 40.0).powi(2);
        let g = |x: &[f64]| vec![-(-x[0]).exp() + 2e-9 * (x[0] - 40.0)];
        let p = GradientProblem {
            objective: f,
            gradient: g,
            projection: |_: &mut [f64]| {},
            initial: vec![0.0],
            settings: DescentSettings {
                initial_step: 1.0,
                max_iterations: 10_000,
                step_policy: StepPolicy::Adaptive { growth: 2.0 },
                stopping: Stopping::Relative(1e-14),
                ..Default::default()
            },
        };
        let r = projected_gd(&p).unwrap();
        assert!(r.params[0] > 20.0, "{:?}", r.params);
    }
}
