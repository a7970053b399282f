use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use calibkit_core::calibrate::{fit, FitConfig, Method};
use calibkit_core::io::{binary_csv_string, logit_csv_string, read_logit_csv, theorem1_csv_string};
use calibkit_core::metrics::{bin_stats, reliability_csv, reliability_rows, BinningConfig};
use calibkit_core::model::{parse_gamma, ModelDocument};
use calibkit_core::prediction::predict;
use calibkit_core::report::EvaluationReport;
use calibkit_core::sweep::{run_sweep, sweep_csv, SweepAxis, SweepConfig};
use calibkit_core::synthetic::{
    gen_hetero_logits, sample_dnoisy, theorem1_experiment, HeteroLogitSpec, NoisyBinarySpec, Scenario, Theorem1Spec,
};
use calibkit_core::{CalibError, LogitDataset};
use serde_json::json;

use crate::{CalibrateArgs, FitArgs, Failure, HeteroSpecArgs, ReliabilityArgs, SweepArgs, SynthArgs, SynthKind};

fn read_dataset(path: &Path) -> Result<LogitDataset, Failure> {
    read_logit_csv(path).map_err(|e| Failure::from_core(e, Some(path)))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(CalibError::from)?;
    text.push('\n');
    write(path, &text)
}

/// `<stem><suffix>`, e.g. `out/data` + `_val.csv`.
fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(stem.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

fn fit_config(args: &FitArgs) -> Result<(FitConfig, BinningConfig), Failure> {
    let cfg = FitConfig {
        alpha_lo: args.alpha_lo,
        alpha_hi: args.alpha_hi,
        gamma: parse_gamma(&args.gamma)?,
        min_class_samples: args.min_class_samples,
        ..FitConfig::default()
    };
    cfg.validate()?;
    Ok((cfg, BinningConfig::new(args.bins)?))
}

pub fn calibrate(args: &CalibrateArgs) -> Result<(), Failure> {
    let method: Method = args.method.parse()?;
    let (cfg, binning) = fit_config(&args.fit)?;
    let val = read_dataset(&args.val)?;
    let test = read_dataset(&args.test)?;
    if val.num_classes() != test.num_classes() {
        return Err(Failure {
            code: 3,
            message: format!(
                "{} has {} classes but {} has {}",
                args.val.display(),
                val.num_classes(),
                args.test.display(),
                test.num_classes()
            ),
        });
    }
    let fitted = fit(method, &val, &cfg)?;
    let report = EvaluationReport::build(method, &fitted, &val, &test, binning, &cfg, args.seed)?;
    write(&args.report, &(report.to_json()? + "\n"))?;
    if let Some(path) = &args.model {
        let doc = ModelDocument::from_model(&fitted.model, val.num_classes());
        write(path, &(doc.to_json()? + "\n"))?;
    }
    print!("{}", report.summary_table(args.percent));
    for w in &report.warnings {
        eprintln!("calibkit: warning: {w}");
    }
    Ok(())
}

pub fn reliability(args: &ReliabilityArgs) -> Result<(), Failure> {
    let binning = BinningConfig::new(args.bins)?;
    let ds = read_dataset(&args.input)?;
    let model = match &args.model {
        None => calibkit_core::CalibrationModel::Identity,
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let doc = ModelDocument::from_json(&text).map_err(|e| Failure::from_core(e, Some(path)))?;
            if doc.num_classes != ds.num_classes() {
                return Err(Failure {
                    code: 3,
                    message: format!(
                        "{} is fitted for {} classes but {} has {}",
                        path.display(),
                        doc.num_classes,
                        args.input.display(),
                        ds.num_classes()
                    ),
                });
            }
            doc.to_model().map_err(|e| Failure::from_core(e, Some(path)))?
        }
    };
    let preds = predict(&ds, &model)?;
    let rows = reliability_rows(&bin_stats(&preds, binning));
    write(&args.out, &reliability_csv(&rows))
}

fn hetero_spec(args: &HeteroSpecArgs, seed: u64) -> Result<HeteroLogitSpec, Failure> {
    let k = args.classes;
    let broadcast = |name: &str, values: &[f64]| -> Result<Vec<f64>, Failure> {
        match values.len() {
            1 => Ok(vec![values[0]; k]),
            2 => Ok((0..k).map(|c| if c < k / 2 { values[0] } else { values[1] }).collect()),
            n if n == k => Ok(values.to_vec()),
            n => Err(Failure::input(format!(
                "--{name} takes 1, 2 or {k} values, got {n}"
            ))),
        }
    };
    let spec = HeteroLogitSpec {
        num_classes: k,
        scales: broadcast("scales", &args.scales)?,
        noise: broadcast("noise", &args.noise)?,
        counts: vec![args.per_class; k],
        margin: args.margin,
        seed,
        train_fraction: args.train_fraction,
        val_fraction: args.val_fraction,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn synth(args: &SynthArgs) -> Result<(), Failure> {
    match &args.kind {
        SynthKind::Dnoisy(a) => {
            let spec = NoisyBinarySpec::axis(a.p_plus, a.p_minus, a.p_test.unwrap_or(0.0), a.dim)?;
            let ds = sample_dnoisy(&spec, a.n, a.seed);
            let csv = with_suffix(&a.out, ".csv");
            write(&csv, &binary_csv_string(&ds))?;
            write_json(
                &with_suffix(&a.out, ".json"),
                &json!({
                    "kind": "dnoisy",
                    "seed": a.seed,
                    "n": a.n,
                    "spec": spec,
                    "files": { "data": file_name(&csv) },
                }),
            )
        }
        SynthKind::Theorem1(a) => {
            let mut spec = Theorem1Spec::new(a.n, a.epsilon)?;
            spec.large_multiplier = a.large_multiplier;
            spec.validate()?;
            let trials = theorem1_experiment(&spec, a.trials, a.seed)?;
            let csv = with_suffix(&a.out, ".csv");
            write(&csv, &theorem1_csv_string(&trials))?;
            let rate = |pred: &dyn Fn(&calibkit_core::synthetic::Theorem1Trial) -> bool, s: Scenario, rare: Option<bool>| {
                let pool: Vec<_> = trials
                    .iter()
                    .filter(|t| t.scenario == s && rare.is_none_or(|r| t.rare_atom_present == r))
                    .collect();
                let hits = pool.iter().filter(|t| pred(t)).count();
                json!({ "trials": pool.len(), "passed": hits })
            };
            let miss = 1.0 - 1.0 / spec.rare_denominator() as f64;
            let conf = 1.0 - spec.epsilon;
            write_json(
                &with_suffix(&a.out, ".json"),
                &json!({
                    "kind": "theorem1",
                    "seed": a.seed,
                    "trials": a.trials,
                    "spec": spec,
                    "radius": spec.radius(),
                    "summary": {
                        "s1_without_rare_atom": rate(&|t| t.min_confidence >= conf && t.accuracy <= miss, Scenario::S1, Some(false)),
                        "s2": rate(&|t| t.min_confidence >= conf && t.accuracy == 1.0, Scenario::S2, None),
                    },
                    "files": { "trials": file_name(&csv) },
                }),
            )
        }
        SynthKind::Hetero(a) => {
            let spec = hetero_spec(&a.spec, a.seed)?;
            let splits = gen_hetero_logits(&spec)?;
            let mut files = serde_json::Map::new();
            for (name, ds) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
                let path = with_suffix(&a.out, &format!("_{name}.csv"));
                write(&path, &logit_csv_string(ds))?;
                files.insert(name.into(), json!({ "path": file_name(&path), "records": ds.len() }));
            }
            write_json(
                &with_suffix(&a.out, ".json"),
                &json!({ "kind": "hetero", "seed": a.seed, "spec": spec, "files": files }),
            )
        }
    }
}

/// Comma-separated values (`inf` allowed) or an inclusive `start:stop:step`.
fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = |what: &str| Failure::input(format!("invalid --range {s:?}: {what}"));
    if let Some((start, rest)) = s.split_once(':') {
        let (stop, step) = rest.split_once(':').ok_or_else(|| bad("expected start:stop:step"))?;
        let num = |t: &str| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(t));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= 0.0 || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    s.split(',')
        .map(|t| parse_gamma(t.trim()).map_err(|_| bad(t)))
        .collect()
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let axis: SweepAxis = args.axis.parse()?;
    let (fit, binning) = fit_config(&args.fit)?;
    let cfg = SweepConfig {
        axis,
        values: parse_range(&args.range)?,
        base: hetero_spec(&args.spec, args.seed)?,
        trials: args.trials,
        binning,
        fit,
        seed: args.seed,
    };
    let rows = run_sweep(&cfg)?;
    write(&args.out, &sweep_csv(&rows))
}
