//! Calibration maps and their JSON form.
//!
//! Temperatures multiply the logits: `softmax(alpha * z)`, so `alpha < 1`
//! softens predictions and `alpha > 1` sharpens them. This is the inverse of
//! the common "divide by T" convention (`alpha = 1 / T`).

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::softmax::softmax_unchecked;

/// A fitted post-hoc calibrator.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationModel {
    Identity,
    /// One shared multiplier on all logits.
    Temperature { alpha: f64 },
    /// One multiplier per predicted class, tied to `alpha0` within `gamma`.
    /// `gamma` is `f64::INFINITY` for fully decoupled classes.
    ClassWiseTemperature {
        alpha0: f64,
        alphas: Vec<f64>,
        gamma: f64,
    },
    /// Per-class affine map of the logits: `a ⊙ z + b`.
    Vector { a: Vec<f64>, b: Vec<f64> },
}

/// Slack allowed on `|alpha_k - alpha0| <= gamma` when checking a model that
/// was built outside the solver (floating-point re-centering).
fn gamma_slack(alpha0: f64, gamma: f64) -> f64 {
    8.0 * f64::EPSILON * alpha0.abs().max(gamma).max(1.0)
}

impl CalibrationModel {
    pub fn method_name(&self) -> &'static str {
        match self {
            Self::Identity => "none",
            Self::Temperature { .. } => "ts",
            Self::ClassWiseTemperature { .. } => "cts",
            Self::Vector { .. } => "vs",
        }
    }

    /// Checks parameter invariants against a class count.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CalibError::InvalidModel(format!(
                    "{name} must be a positive finite temperature, got {v}"
                )))
            }
        };
        match self {
            Self::Identity => Ok(()),
            Self::Temperature { alpha } => positive("alpha", *alpha),
            Self::ClassWiseTemperature {
                alpha0,
                alphas,
                gamma,
            } => {
                positive("alpha0", *alpha0)?;
                if alphas.len() != num_classes {
                    return Err(CalibError::DimensionMismatch {
                        expected: num_classes,
                        found: alphas.len(),
                    });
                }
                if gamma.is_nan() || *gamma < 0.0 {
                    return Err(CalibError::InvalidModel(format!(
                        "gamma must be non-negative, got {gamma}"
                    )));
                }
                for (k, &a) in alphas.iter().enumerate() {
                    positive(&format!("alphas[{k}]"), a)?;
                    if gamma.is_finite() && (a - alpha0).abs() > gamma + gamma_slack(*alpha0, *gamma) {
                        return Err(CalibError::InvalidModel(format!(
                            "alphas[{k}] = {a} is farther than gamma = {gamma} from alpha0 = {alpha0}"
                        )));
                    }
                }
                Ok(())
            }
            Self::Vector { a, b } => {
                for v in [a, b] {
                    if v.len() != num_classes {
                        return Err(CalibError::DimensionMismatch {
                            expected: num_classes,
                            found: v.len(),
                        });
                    }
                }
                if a.iter().chain(b).any(|v| !v.is_finite()) {
                    return Err(CalibError::InvalidModel("vector scaling parameters must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Calibrated logits for one record. `predicted` is the argmax of the
    /// uncalibrated logits and selects the class-wise temperature.
    pub fn transform_logits(&self, logits: &[f64], predicted: usize) -> Vec<f64> {
        match self {
            Self::Identity => logits.to_vec(),
            Self::Temperature { alpha } => logits.iter().map(|z| alpha * z).collect(),
            Self::ClassWiseTemperature { alphas, .. } => {
                let alpha = alphas[predicted];
                logits.iter().map(|z| alpha * z).collect()
            }
            Self::Vector { a, b } => logits
                .iter()
                .zip(a.iter().zip(b))
                .map(|(z, (a, b))| a * z + b)
                .collect(),
        }
    }

    /// Calibrated probability vector for one record.
    pub fn apply(&self, logits: &[f64], predicted: usize) -> Result<Vec<f64>> {
        self.validate(logits.len())?;
        if predicted >= logits.len() {
            return Err(CalibError::InvalidInput(format!(
                "predicted class {predicted} outside 0..{}",
                logits.len()
            )));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::InvalidInput("non-finite logit".into()));
        }
        Ok(softmax_unchecked(&self.transform_logits(logits, predicted)))
    }

    /// Whether the map can never change the argmax.
    pub fn preserves_argmax(&self) -> bool {
        !matches!(self, Self::Vector { .. })
    }
}

/// `gamma` in JSON: a number, or the string `"inf"` for the decoupled case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaValue {
    Finite(f64),
    Named(String),
}

impl GammaValue {
    pub fn from_f64(g: f64) -> Self {
        if g.is_infinite() {
            Self::Named("inf".into())
        } else {
            Self::Finite(g)
        }
    }

    pub fn to_f64(&self) -> Result<f64> {
        match self {
            Self::Finite(g) => Ok(*g),
            Self::Named(s) => parse_gamma(s),
        }
    }
}

/// Parses a Γ value: a non-negative number or `inf`.
pub fn parse_gamma(s: &str) -> Result<f64> {
    let t = s.trim();
    let g = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => f64::INFINITY,
        _ => t
            .parse::<f64>()
            .map_err(|_| CalibError::Config(format!("invalid gamma {s:?}")))?,
    };
    if g.is_nan() || g < 0.0 {
        return Err(CalibError::Config(format!("gamma must be >= 0, got {s}")));
    }
    Ok(g)
}

/// Serialized calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    pub num_classes: usize,
}

impl ModelDocument {
    pub fn from_model(model: &CalibrationModel, num_classes: usize) -> Self {
        let mut doc = Self {
            method: model.method_name().to_string(),
            alpha: None,
            alpha0: None,
            alphas: None,
            gamma: None,
            a: None,
            b: None,
            num_classes,
        };
        match model {
            CalibrationModel::Identity => {}
            CalibrationModel::Temperature { alpha } => doc.alpha = Some(*alpha),
            CalibrationModel::ClassWiseTemperature {
                alpha0,
                alphas,
                gamma,
            } => {
                doc.alpha0 = Some(*alpha0);
                doc.alphas = Some(alphas.clone());
                doc.gamma = Some(GammaValue::from_f64(*gamma));
            }
            CalibrationModel::Vector { a, b } => {
                doc.a = Some(a.clone());
                doc.b = Some(b.clone());
            }
        }
        doc
    }

    /// Rebuilds and validates the model.
    pub fn to_model(&self) -> Result<CalibrationModel> {
        fn need<T: Clone>(v: &Option<T>, field: &str, method: &str) -> Result<T> {
            v.clone().ok_or_else(|| {
                CalibError::InvalidModel(format!("method {method:?} requires field {field:?}"))
            })
        }
        let m = self.method.as_str();
        let model = match m {
            "none" => CalibrationModel::Identity,
            "ts" => CalibrationModel::Temperature {
                alpha: need(&self.alpha, "alpha", m)?,
            },
            "cts" => CalibrationModel::ClassWiseTemperature {
                alpha0: need(&self.alpha0, "alpha0", m)?,
                alphas: need(&self.alphas, "alphas", m)?,
                gamma: need(&self.gamma, "gamma", m)?.to_f64()?,
            },
            "vs" => CalibrationModel::Vector {
                a: need(&self.a, "a", m)?,
                b: need(&self.b, "b", m)?,
            },
            other => {
                return Err(CalibError::InvalidModel(format!("unknown method {other:?}")));
            }
        };
        if self.num_classes < 2 {
            return Err(CalibError::InvalidModel("num_classes must be >= 2".into()));
        }
        model.validate(self.num_classes)?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::softmax::softmax;

    #[test]
    fn unit_temperature_is_softmax() {
        let z = [0.3, -2.0, 1.7];
        let m = CalibrationModel::Temperature { alpha: 1.0 };
        assert_eq!(m.apply(&z, 2).unwrap(), softmax(&z).unwrap());
    }

    #[test]
    fn identity_vector_scaling_is_softmax() {
        let z = [0.3, -2.0, 1.7];
        let m = CalibrationModel::Vector {
            a: vec![1.0; 3],
            b: vec![0.0; 3],
        };
        assert_eq!(m.apply(&z, 2).unwrap(), softmax(&z).unwrap());
    }

    #[test]
    fn collapsed_class_wise_equals_temperature() {
        let z = [0.3, -2.0, 1.7];
        let cts = CalibrationModel::ClassWiseTemperature {
            alpha0: 0.7,
            alphas: vec![0.7; 3],
            gamma: 0.0,
        };
        let ts = CalibrationModel::Temperature { alpha: 0.7 };
        for pred in 0..3 {
            assert_eq!(cts.apply(&z, pred).unwrap(), ts.apply(&z, pred).unwrap());
        }
    }

    #[test]
    fn class_wise_routes_by_prediction() {
        let z = [2.0, 1.0];
        let m = CalibrationModel::ClassWiseTemperature {
            alpha0: 1.0,
            alphas: vec![0.5, 3.0],
            gamma: f64::INFINITY,
        };
        let p = m.apply(&z, 0).unwrap();
        assert_eq!(p, softmax(&[1.0, 0.5]).unwrap());
    }

    #[test]
    fn rejects_nonpositive_temperature() {
        let err = CalibrationModel::Temperature { alpha: 0.0 }.apply(&[1.0, 0.0], 0);
        assert!(matches!(err, Err(CalibError::InvalidModel(_))));
        let err = CalibrationModel::Temperature { alpha: -1.0 }.apply(&[1.0, 0.0], 0);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_gamma_violation_and_shape() {
        let m = CalibrationModel::ClassWiseTemperature {
            alpha0: 1.0,
            alphas: vec![1.0, 1.5],
            gamma: 0.1,
        };
        assert!(m.validate(2).is_err());
        let v = CalibrationModel::Vector {
            a: vec![1.0; 3],
            b: vec![0.0; 3],
        };
        assert!(matches!(v.validate(2), Err(CalibError::DimensionMismatch { .. })));
    }

    #[test]
    fn document_round_trip() {
        let models = [
            CalibrationModel::Identity,
            CalibrationModel::Temperature { alpha: 0.41 },
            CalibrationModel::ClassWiseTemperature {
                alpha0: 1.0,
                alphas: vec![0.5, 2.0],
                gamma: f64::INFINITY,
            },
            CalibrationModel::ClassWiseTemperature {
                alpha0: 1.0,
                alphas: vec![0.9, 1.1],
                gamma: 0.25,
            },
            CalibrationModel::Vector {
                a: vec![1.0, 2.0],
                b: vec![0.0, -0.5],
            },
        ];
        for m in models {
            let json = ModelDocument::from_model(&m, 2).to_json().unwrap();
            let back = ModelDocument::from_json(&json).unwrap().to_model().unwrap();
            assert_eq!(back, m, "{json}");
        }
    }

    #[test]
    fn infinite_gamma_is_written_as_inf() {
        let m = CalibrationModel::ClassWiseTemperature {
            alpha0: 1.0,
            alphas: vec![0.5, 2.0],
            gamma: f64::INFINITY,
        };
        let json = ModelDocument::from_model(&m, 2).to_json().unwrap();
        assert!(json.contains("\"gamma\": \"inf\""), "{json}");
        assert!(json.contains("\"method\": \"cts\""));
    }

    #[test]
    fn loading_validates() {
        let bad = r#"{"method": "ts", "alpha": -2.0, "num_classes": 3}"#;
        assert!(ModelDocument::from_json(bad).unwrap().to_model().is_err());
        let missing = r#"{"method": "vs", "a": [1.0, 1.0], "num_classes": 2}"#;
        assert!(ModelDocument::from_json(missing).unwrap().to_model().is_err());
        let bad_gamma = r#"{"method": "cts", "alpha0": 1.0, "alphas": [1.0, 1.0], "gamma": "lots", "num_classes": 2}"#;
        assert!(ModelDocument::from_json(bad_gamma).unwrap().to_model().is_err());
    }

    #[test]
    fn gamma_parsing() {
        assert_eq!(parse_gamma("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_gamma("0.5").unwrap(), 0.5);
        assert!(parse_gamma("-1").is_err());
        assert!(parse_gamma("nan").is_err());
    }
}
