//! Parameter sweeps over the heterogeneous logit generator: for each axis
//! value and trial, generate, fit TS and CTS on validation, evaluate on test.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{fit, FitConfig, Method};
use crate::dataset::LogitDataset;
use crate::error::{CalibError, Result};
use crate::metrics::{evaluate, nll_logits, format_sig, BinningConfig};
use crate::synthetic::{gen_hetero_logits, generate_hetero, HeteroLogitSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Label-noise rate of the first half of the classes.
    Noise,
    /// Fraction of records kept for the first half of the classes.
    Size,
    /// CTS radius; the data is the base spec at every point.
    Gamma,
    /// Number of validation records; the test set is the full base draw.
    NVal,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Noise => "noise",
            SweepAxis::Size => "size",
            SweepAxis::Gamma => "gamma",
            SweepAxis::NVal => "n_val",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(SweepAxis::Noise),
            "size" => Ok(SweepAxis::Size),
            "gamma" => Ok(SweepAxis::Gamma),
            "n_val" | "nval" => Ok(SweepAxis::NVal),
            other => Err(CalibError::Config(format!(
                "unknown sweep axis {other:?} (expected noise, size, gamma or n_val)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: HeteroLogitSpec,
    pub trials: usize,
    pub binning: BinningConfig,
    pub fit: FitConfig,
    pub seed: u64,
}

/// Trial-averaged metrics for one (axis value, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub method: String,
    pub ece: f64,
    pub max_ece: f64,
    pub avg_ece: f64,
    pub nll: f64,
    pub accuracy: f64,
    pub val_nll: f64,
    /// Mean over trials of `|val_nll - nll|`.
    pub nll_gap: f64,
}

pub const SWEEP_HEADER: &str = "axis_value,method,ece,max_ece,avg_ece,nll,accuracy";

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.fit.validate()?;
        if self.values.is_empty() {
            return Err(CalibError::Config("sweep range is empty".into()));
        }
        if self.trials == 0 {
            return Err(CalibError::Config("trials must be >= 1".into()));
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::Noise => (0.0..1.0).contains(&v),
                SweepAxis::Size => v > 0.0 && v <= 1.0,
                SweepAxis::Gamma => v >= 0.0 && !v.is_nan(),
                SweepAxis::NVal => v >= 1.0 && v.is_finite() && v.fract() == 0.0,
            };
            if !ok {
                return Err(CalibError::Config(format!(
                    "invalid {} value {v}",
                    self.axis.as_str()
                )));
            }
        }
        Ok(())
    }

    /// Validation and test sets for one point and trial. The trial seed does
    /// not depend on the point, so every point sees the same random draws.
    pub fn datasets(&self, value: f64, trial: usize) -> Result<(LogitDataset, LogitDataset)> {
        let trial_seed = derive_seed(self.seed, trial as u64, 0);
        let mut spec = self.base.clone();
        spec.seed = trial_seed;
        let half = spec.num_classes / 2;
        match self.axis {
            SweepAxis::Noise => spec.noise[..half].iter_mut().for_each(|r| *r = value),
            SweepAxis::Size => spec.counts[..half]
                .iter_mut()
                .for_each(|c| *c = ((*c as f64) * value).round() as usize),
            SweepAxis::Gamma => {}
            SweepAxis::NVal => {
                let mut test_spec = spec.clone();
                test_spec.train_fraction = 0.0;
                test_spec.val_fraction = 0.0;
                let test = generate_hetero(&test_spec)?;
                let mut val_spec = spec;
                val_spec.seed = derive_seed(self.seed, trial as u64, 1);
                val_spec.counts = apportion(&val_spec.counts, value as usize);
                let val = generate_hetero(&val_spec)?;
                return Ok((val, test));
            }
        }
        let splits = gen_hetero_logits(&spec)?;
        if splits.val.is_empty() || splits.test.is_empty() {
            return Err(CalibError::EmptyDataset(
                "sweep point produced an empty validation or test split".into(),
            ));
        }
        Ok((splits.val, splits.test))
    }

    fn fit_config(&self, method: Method, value: f64) -> FitConfig {
        match (self.axis, method) {
            (SweepAxis::Gamma, Method::Cts) => self.fit.with_gamma(value),
            _ => self.fit,
        }
    }
}

/// Splits `total` records across classes in proportion to `weights`, largest
/// remainders first.
fn apportion(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&w| w as f64 * total as f64 / sum as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        (exact[j] - exact[j].floor())
            .total_cmp(&(exact[i] - exact[i].floor()))
            .then(i.cmp(&j))
    });
    let missing = total - out.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        out[i] += 1;
    }
    out
}

struct TrialOutcome {
    ece: f64,
    max_ece: f64,
    avg_ece: f64,
    nll: f64,
    accuracy: f64,
    val_nll: f64,
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let methods = [Method::Ts, Method::Cts];
    let jobs: Vec<(usize, usize)> = (0..cfg.values.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<Vec<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let value = cfg.values[p];
            let (val, test) = cfg.datasets(value, t)?;
            methods
                .iter()
                .map(|&m| {
                    let fitted = fit(m, &val, &cfg.fit_config(m, value))?;
                    let report = evaluate(&test, &fitted.model, cfg.binning)?;
                    Ok(TrialOutcome {
                        ece: report.ece,
                        max_ece: report.max_ece,
                        avg_ece: report.avg_ece,
                        nll: report.nll,
                        accuracy: report.accuracy,
                        val_nll: nll_logits(&val, &fitted.model)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.values.len() * methods.len());
    for (p, &value) in cfg.values.iter().enumerate() {
        for (mi, m) in methods.iter().enumerate() {
            let trials = &outcomes[p * cfg.trials..(p + 1) * cfg.trials];
            let mean = |f: &dyn Fn(&TrialOutcome) -> f64| {
                trials.iter().map(|o| f(&o[mi])).sum::<f64>() / cfg.trials as f64
            };
            rows.push(SweepRow {
                axis_value: value,
                method: m.as_str().to_string(),
                ece: mean(&|o| o.ece),
                max_ece: mean(&|o| o.max_ece),
                avg_ece: mean(&|o| o.avg_ece),
                nll: mean(&|o| o.nll),
                accuracy: mean(&|o| o.accuracy),
                val_nll: mean(&|o| o.val_nll),
                nll_gap: mean(&|o| (o.val_nll - o.nll).abs()),
            });
        }
    }
    rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value).then_with(|| a.method.cmp(&b.method)));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let axis = if r.axis_value.is_infinite() {
            "inf".to_string()
        } else {
            format_sig(r.axis_value, 9)
        };
        let _ = writeln!(
            out,
            "{axis},{},{},{},{},{},{}",
            r.method,
            format_sig(r.ece, 9),
            format_sig(r.max_ece, 9),
            format_sig(r.avg_ece, 9),
            format_sig(r.nll, 9),
            format_sig(r.accuracy, 9)
        );
    }
    out
}
