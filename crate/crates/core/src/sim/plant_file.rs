//! JSON plant definitions.
//!
//! ```json
//! { "type": "transfer-function", "numerator": [8.0], "denominator": [1.0, 0.878, 21.5] }
//! { "type": "nonlinear", "f": { "kind": "sin-tanh", "a1": 1.0, "a2": 1.0, "l1": 1.0, "l2": 1.0 },
//!   "l1": 1.0, "l2": 1.0, "w": 1.0 }
//! ```
//!
//! `w` defaults to 1 when omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lti::TransferFunction;
use super::plant::{NonlinearPlant, Nonlinearity, Plant};
use crate::certifier::LipschitzBounds;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PlantSpec {
    TransferFunction {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
    Nonlinear {
        f: Nonlinearity,
        l1: f64,
        l2: f64,
        #[serde(default = "unit_gain")]
        w: f64,
    },
}

fn unit_gain() -> f64 {
    1.0
}

impl PlantSpec {
    pub fn from_tf(tf: &TransferFunction) -> Self {
        PlantSpec::TransferFunction {
            numerator: tf.numerator().to_vec(),
            denominator: tf.denominator().to_vec(),
        }
    }

    pub fn build(&self) -> Result<Plant> {
        match self {
            PlantSpec::TransferFunction {
                numerator,
                denominator,
            } => {
                let tf = TransferFunction::new(numerator.clone(), denominator.clone())?;
                Ok(Plant::from_tf(&tf))
            }
            PlantSpec::Nonlinear { f, l1, l2, w } => {
                let bounds = LipschitzBounds::new(*l1, *l2)?;
                Ok(Plant::Nonlinear(NonlinearPlant::new(*f, bounds, *w)?))
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_transfer_function() {
        let spec = PlantSpec::from_json(
            r#"{"type":"transfer-function","numerator":[8],"denominator":[1,0.878,21.5]}"#,
        )
        .unwrap();
        match spec.build().unwrap() {
            Plant::Linear(ss) => assert_eq!(ss.order(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_nonlinear_with_default_gain() {
        let spec = PlantSpec::from_json(
            r#"{"type":"nonlinear","f":{"kind":"sin-tanh","a1":1,"a2":-1,"l1":1,"l2":1},"l1":1,"l2":1}"#,
        )
        .unwrap();
        match spec.build().unwrap() {
            Plant::Nonlinear(p) => assert_eq!(p.w, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_proper_file() {
        let spec = PlantSpec::from_json(
            r#"{"type":"transfer-function","numerator":[1,0,0],"denominator":[1,1]}"#,
        )
        .unwrap();
        assert!(spec.build().is_err());
    }
}
