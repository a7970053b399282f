//! Numerical solvers used by the calibrators and the synthetic fitters.

mod finite_diff;
mod gradients;
mod projected;
mod scalar;

pub use finite_diff::{central_difference, central_gradient, relative_error, FD_STEP};
pub use gradients::{nll_grad_temperature, nll_grad_vector, nll_temperature, nll_vector};
pub use projected::{projected_gd, projected_gd_observed, DescentResult, DescentSettings, GradientProblem, StepPolicy, Stopping};
pub use scalar::{minimize_scalar, ScalarMinimum, ScalarProblem, BRACKET_POINTS};
