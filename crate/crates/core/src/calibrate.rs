//! Fitting temperature scaling (TS), class-wise temperature scaling (CTS)
//! and vector scaling (VS) on a validation set by minimizing NLL.
//!
//! CTS routes every record by its *uncalibrated* predicted class and learns
//! `alpha_k` per class under `|alpha_k - alpha0| <= gamma`,
//! `alpha_lo <= alpha0 <= alpha_hi`. `gamma = 0` is plain TS and
//! `gamma = inf` decouples the classes into independent scalar fits.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{group_by_class, ClassSlice, LogitDataset};
use crate::error::{CalibError, Result};
use crate::model::CalibrationModel;
use crate::optim::{
    minimize_scalar, nll_grad_temperature, nll_grad_vector, nll_temperature, nll_vector, projected_gd,
    DescentSettings, GradientProblem, ScalarProblem,
};
use crate::prediction::{predict, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    Ts,
    Cts,
    Vs,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Ts => "ts",
            Self::Cts => "cts",
            Self::Vs => "vs",
        }
    }
}

impl FromStr for Method {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "uncalibrated" => Ok(Self::None),
            "ts" => Ok(Self::Ts),
            "cts" => Ok(Self::Cts),
            "vs" => Ok(Self::Vs),
            other => Err(CalibError::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub gamma: f64,
    /// Classes with fewer predicted validation records fall back to the
    /// shared temperature when `gamma` is infinite.
    pub min_class_samples: usize,
    /// Absolute tolerance on fitted temperatures.
    pub tolerance: f64,
    pub descent: DescentSettings,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            alpha_lo: 0.01,
            alpha_hi: 100.0,
            gamma: f64::INFINITY,
            min_class_samples: 10,
            tolerance: 1e-6,
            descent: DescentSettings::default(),
        }
    }
}

impl FitConfig {
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_lo > 0.0 && self.alpha_lo.is_finite()) {
            return Err(CalibError::Config(format!("alpha_lo must be positive, got {}", self.alpha_lo)));
        }
        if !(self.alpha_hi.is_finite() && self.alpha_hi >= self.alpha_lo) {
            return Err(CalibError::Config(format!(
                "alpha_hi = {} must be finite and >= alpha_lo = {}",
                self.alpha_hi, self.alpha_lo
            )));
        }
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(CalibError::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.tolerance > 0.0) {
            return Err(CalibError::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: CalibrationModel,
    pub val_nll: f64,
    pub iterations: usize,
    /// Classes that received the shared temperature for lack of samples.
    pub fallback_classes: Vec<usize>,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub changed_records: usize,
    pub warnings: Vec<String>,
}

/// Accuracy change and number of records whose predicted class changed.
pub fn accuracy_delta(before: &PredictionSet, after: &PredictionSet) -> Result<(f64, usize)> {
    if before.len() != after.len() {
        return Err(CalibError::DimensionMismatch {
            expected: before.len(),
            found: after.len(),
        });
    }
    let changed = before
        .iter()
        .zip(after.iter())
        .filter(|(a, b)| a.predicted != b.predicted)
        .count();
    Ok((after.accuracy() - before.accuracy(), changed))
}

fn require_data(val: &LogitDataset) -> Result<()> {
    if val.is_empty() {
        return Err(CalibError::EmptyDataset("validation set is empty".into()));
    }
    Ok(())
}

fn finish(
    val: &LogitDataset,
    model: CalibrationModel,
    iterations: usize,
    fallback_classes: Vec<usize>,
    warnings: Vec<String>,
) -> Result<FitResult> {
    let before = predict(val, &CalibrationModel::Identity)?;
    let after = predict(val, &model)?;
    let (_, changed_records) = accuracy_delta(&before, &after)?;
    let val_nll = crate::metrics::nll_logits(val, &model)?;
    Ok(FitResult {
        model,
        val_nll,
        iterations,
        fallback_classes,
        accuracy_before: before.accuracy(),
        accuracy_after: after.accuracy(),
        changed_records,
        warnings,
    })
}

fn boundary_warning(what: &str, alpha: f64, cfg: &FitConfig) -> Option<String> {
    let near = |b: f64| (alpha - b).abs() <= 10.0 * cfg.tolerance;
    (near(cfg.alpha_lo) || near(cfg.alpha_hi)).then(|| {
        format!(
            "{what} = {alpha} sits at the search boundary [{}, {}]",
            cfg.alpha_lo, cfg.alpha_hi
        )
    })
}

/// Scalar NLL minimization over `[alpha_lo, alpha_hi]` on the given records.
fn fit_temperature(val: &LogitDataset, slice: Option<&[usize]>, cfg: &FitConfig) -> Result<(f64, usize)> {
    if cfg.alpha_lo == cfg.alpha_hi {
        return Ok((cfg.alpha_lo, 0));
    }
    let problem = ScalarProblem::new(|a| nll_temperature(val, a, slice), cfg.alpha_lo, cfg.alpha_hi, cfg.tolerance);
    let m = minimize_scalar(&problem)?;
    Ok((m.x, m.evaluations))
}

/// Temperature scaling.
pub fn fit_ts(val: &LogitDataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_data(val)?;
    let (alpha, evals) = fit_temperature(val, None, cfg)?;
    let warnings = boundary_warning("alpha", alpha, cfg).into_iter().collect();
    finish(val, CalibrationModel::Temperature { alpha }, evals, Vec::new(), warnings)
}

/// Class-wise NLL objective in the coordinates `(alpha0, r_1..r_K)` with
/// `alpha_k = alpha0 + r_k`. The feasible set is a box in these coordinates:
/// `alpha0` in `[alpha_lo, alpha_hi]`, `r_k` in `[max(-gamma, alpha_lo - alpha0), gamma]`.
pub struct ClassWiseObjective<'a> {
    val: &'a LogitDataset,
    slices: Vec<ClassSlice>,
    alpha_lo: f64,
    alpha_hi: f64,
    gamma: f64,
}

impl<'a> ClassWiseObjective<'a> {
    pub fn new(val: &'a LogitDataset, cfg: &FitConfig) -> Self {
        Self {
            val,
            slices: group_by_class(val.num_classes(), val.raw_predictions()),
            alpha_lo: cfg.alpha_lo,
            alpha_hi: cfg.alpha_hi,
            gamma: cfg.gamma,
        }
    }

    pub fn slices(&self) -> &[ClassSlice] {
        &self.slices
    }

    fn weight(&self, s: &ClassSlice) -> f64 {
        s.len() as f64 / self.val.len() as f64
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        self.slices
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| self.weight(s) * nll_temperature(self.val, x[0] + x[1 + s.class], Some(&s.indices)))
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for s in self.slices.iter().filter(|s| !s.is_empty()) {
            let d = self.weight(s) * nll_grad_temperature(self.val, x[0] + x[1 + s.class], Some(&s.indices));
            g[1 + s.class] = d;
            g[0] += d;
        }
        g
    }

    pub fn project(&self, x: &mut [f64]) {
        x[0] = x[0].clamp(self.alpha_lo, self.alpha_hi);
        let lower = (-self.gamma).max(self.alpha_lo - x[0]);
        for r in &mut x[1..] {
            *r = r.clamp(lower, self.gamma);
        }
    }

    /// Whether `x` satisfies every constraint exactly.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        let lower = (-self.gamma).max(self.alpha_lo - x[0]);
        (self.alpha_lo..=self.alpha_hi).contains(&x[0]) && x[1..].iter().all(|r| (lower..=self.gamma).contains(r))
    }

    pub fn to_model(&self, x: &[f64]) -> CalibrationModel {
        CalibrationModel::ClassWiseTemperature {
            alpha0: x[0],
            alphas: x[1..].iter().map(|r| x[0] + r).collect(),
            gamma: self.gamma,
        }
    }
}

/// Class-wise temperature scaling with regularization `cfg.gamma`.
pub fn fit_cts(val: &LogitDataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_data(val)?;
    let k = val.num_classes();
    let (alpha0, ts_evals) = fit_temperature(val, None, cfg)?;
    let mut warnings: Vec<String> = boundary_warning("alpha0", alpha0, cfg).into_iter().collect();

    if cfg.gamma == 0.0 {
        let model = CalibrationModel::ClassWiseTemperature {
            alpha0,
            alphas: vec![alpha0; k],
            gamma: 0.0,
        };
        return finish(val, model, ts_evals, Vec::new(), warnings);
    }

    if cfg.gamma.is_infinite() {
        let slices = group_by_class(k, val.raw_predictions());
        let fits: Vec<Result<(f64, usize, bool)>> = slices
            .par_iter()
            .map(|s| {
                if s.len() < cfg.min_class_samples {
                    return Ok((alpha0, 0, true));
                }
                let (a, evals) = fit_temperature(val, Some(&s.indices), cfg)?;
                // the shared temperature is feasible for every slice
                let better = if nll_temperature(val, alpha0, Some(&s.indices)) < nll_temperature(val, a, Some(&s.indices)) {
                    alpha0
                } else {
                    a
                };
                Ok((better, evals, false))
            })
            .collect();
        let mut alphas = Vec::with_capacity(k);
        let mut fallback = Vec::new();
        let mut evals = ts_evals;
        for (s, fit) in slices.iter().zip(fits) {
            let (a, e, fell_back) = fit?;
            if fell_back {
                fallback.push(s.class);
            } else if let Some(w) = boundary_warning(&format!("alphas[{}]", s.class), a, cfg) {
                warnings.push(w);
            }
            alphas.push(a);
            evals += e;
        }
        if !fallback.is_empty() {
            warnings.push(format!(
                "classes {fallback:?} have fewer than {} predicted validation records and use alpha0",
                cfg.min_class_samples
            ));
        }
        let model = CalibrationModel::ClassWiseTemperature {
            alpha0,
            alphas,
            gamma: f64::INFINITY,
        };
        return finish(val, model, evals, fallback, warnings);
    }

    let objective = ClassWiseObjective::new(val, cfg);
    let mut initial = vec![0.0; k + 1];
    initial[0] = alpha0;
    let problem = GradientProblem {
        objective: |x: &[f64]| objective.loss(x),
        gradient: |x: &[f64]| objective.gradient(x),
        projection: |x: &mut [f64]| objective.project(x),
        initial,
        settings: cfg.descent,
    };
    let result = projected_gd(&problem)?;
    if result.iterations >= cfg.descent.max_iterations {
        warnings.push(format!("class-wise descent hit the iteration cap ({})", cfg.descent.max_iterations));
    }
    let model = objective.to_model(&result.params);
    finish(val, model, ts_evals + result.iterations, Vec::new(), warnings)
}

fn vs_descent(val: &LogitDataset, a0: Vec<f64>, settings: DescentSettings) -> Result<crate::optim::DescentResult> {
    let k = val.num_classes();
    let mut initial = a0;
    initial.extend(std::iter::repeat_n(0.0, k));
    let problem = GradientProblem {
        objective: |x: &[f64]| nll_vector(val, &x[..k], &x[k..]).unwrap_or(f64::NAN),
        gradient: |x: &[f64]| {
            let (mut ga, gb) = nll_grad_vector(val, &x[..k], &x[k..]).expect("dimensions checked");
            ga.extend(gb);
            ga
        },
        projection: |_: &mut [f64]| {},
        initial,
        settings,
    };
    projected_gd(&problem)
}

/// Vector scaling. Runs two starts, identity and the TS solution, and keeps
/// the lower validation NLL.
pub fn fit_vs(val: &LogitDataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_data(val)?;
    let k = val.num_classes();
    let (alpha, ts_evals) = fit_temperature(val, None, cfg)?;
    let identity = vs_descent(val, vec![1.0; k], cfg.descent)?;
    let warm = vs_descent(val, vec![alpha; k], cfg.descent)?;
    let iterations = ts_evals + identity.iterations + warm.iterations;
    let best = if warm.loss < identity.loss { warm } else { identity };
    let mut warnings = Vec::new();
    if best.iterations >= cfg.descent.max_iterations {
        warnings.push(format!("vector scaling hit the iteration cap ({})", cfg.descent.max_iterations));
    }
    let model = CalibrationModel::Vector {
        a: best.params[..k].to_vec(),
        b: best.params[k..].to_vec(),
    };
    finish(val, model, iterations, Vec::new(), warnings)
}

/// Fits `method` on `val`.
pub fn fit(method: Method, val: &LogitDataset, cfg: &FitConfig) -> Result<FitResult> {
    match method {
        Method::None => {
            cfg.validate()?;
            require_data(val)?;
            finish(val, CalibrationModel::Identity, 0, Vec::new(), Vec::new())
        }
        Method::Ts => fit_ts(val, cfg),
        Method::Cts => fit_cts(val, cfg),
        Method::Vs => fit_vs(val, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LogitDataset {
        LogitDataset::new(
            3,
            vec![
                vec![2.0, 0.5, -1.0],
                vec![0.1, 1.2, 0.3],
                vec![-0.5, 0.0, 2.2],
                vec![1.0, 0.9, 0.8],
                vec![0.3, -0.2, 0.0],
            ],
            vec![0, 1, 2, 1, 2],
        )
        .unwrap()
    }

    #[test]
    fn empty_validation_rejected() {
        let empty = LogitDataset::new(2, vec![], vec![]).unwrap();
        for m in [Method::None, Method::Ts, Method::Cts, Method::Vs] {
            assert!(matches!(fit(m, &empty, &FitConfig::default()), Err(CalibError::EmptyDataset(_))));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let ds = tiny();
        let bad_bounds = FitConfig {
            alpha_lo: 2.0,
            alpha_hi: 1.0,
            ..Default::default()
        };
        assert!(fit_ts(&ds, &bad_bounds).is_err());
        assert!(matches!(fit_cts(&ds, &FitConfig::default().with_gamma(-1.0)), Err(CalibError::Config(_))));
    }

    #[test]
    fn accuracy_delta_counts_flips() {
        let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![1.0, 0.0]).collect();
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i == 0)).collect();
        let ds = LogitDataset::new(2, rows.clone(), labels.clone()).unwrap();
        let before = predict(&ds, &CalibrationModel::Identity).unwrap();
        assert_eq!(accuracy_delta(&before, &before).unwrap(), (0.0, 0));
        let mut flipped = rows;
        flipped[0] = vec![0.0, 1.0];
        let after = predict(&LogitDataset::new(2, flipped, labels).unwrap(), &CalibrationModel::Identity).unwrap();
        let (delta, changed) = accuracy_delta(&before, &after).unwrap();
        assert!((delta - 0.01).abs() < 1e-12);
        assert_eq!(changed, 1);
        assert!(accuracy_delta(&before, &before.subset(&[0])).is_err());
    }

    #[test]
    fn temperature_methods_keep_accuracy() {
        let ds = tiny();
        for m in [Method::Ts, Method::Cts] {
            let r = fit(m, &ds, &FitConfig::default().with_gamma(0.5)).unwrap();
            assert_eq!(r.accuracy_before, r.accuracy_after);
            assert_eq!(r.changed_records, 0);
        }
    }

    #[test]
    fn tiny_slices_fall_back() {
        let ds = tiny();
        let r = fit_cts(&ds, &FitConfig::default()).unwrap();
        assert_eq!(r.fallback_classes, vec![0, 1, 2]);
        let CalibrationModel::ClassWiseTemperature { alpha0, alphas, .. } = r.model else {
            panic!("wrong variant")
        };
        assert!(alphas.iter().all(|&a| a == alpha0));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("TS".parse::<Method>().unwrap(), Method::Ts);
        assert!("platt".parse::<Method>().is_err());
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let ds = tiny();
        let cfg = FitConfig::default().with_gamma(0.3);
        let obj = ClassWiseObjective::new(&ds, &cfg);
        let mut x = vec![150.0, -4.0, 0.1, 9.0];
        obj.project(&mut x);
        assert!(obj.is_feasible(&x));
        let once = x.clone();
        obj.project(&mut x);
        assert_eq!(x, once);
        let mut low = vec![0.001, -1.0, 0.0, 0.2];
        obj.project(&mut low);
        assert_eq!(low, vec![0.01, 0.0, 0.0, 0.2]);
    }
}
