//! Concrete model instances and the name-based registry used by the CLI.

pub mod linear_gaussian;
pub mod neuron;
pub mod ou;

use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};

pub use linear_gaussian::{kalman_loglik, LinearGaussianModel, LinearGaussianParams};
pub use neuron::{NeuronModel, NeuronParams};
pub use ou::{OUMeanFieldModel, OUMeanFieldParams};

/// A registered model plus the reference parameter vector used as ground
/// truth for data synthesis.
pub struct ModelEntry {
    pub model: Box<dyn Model>,
    pub theta_true: ParamVector,
}

pub const MODEL_NAMES: [&str; 3] = ["neuron3d", "ou-meanfield", "linear-gaussian"];

/// Build a model by registry name, applying JSON parameter overrides (partial
/// objects are fine; omitted fields keep their reference values).
pub fn build_model(name: &str, overrides: &serde_json::Value) -> Result<ModelEntry> {
    let overrides = if overrides.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        overrides.clone()
    };
    match name {
        "neuron3d" => {
            let params: NeuronParams = serde_json::from_value(overrides)
                .map_err(|e| Error::Config(format!("neuron3d overrides: {e}")))?;
            let model = NeuronModel::new(params);
            let theta_true = model.reference_theta();
            Ok(ModelEntry {
                model: Box::new(model),
                theta_true,
            })
        }
        "ou-meanfield" => {
            let params: OUMeanFieldParams = serde_json::from_value(overrides)
                .map_err(|e| Error::Config(format!("ou-meanfield overrides: {e}")))?;
            let model = OUMeanFieldModel::new(params);
            let theta_true = model.reference_theta();
            Ok(ModelEntry {
                model: Box::new(model),
                theta_true,
            })
        }
        "linear-gaussian" => {
            let params: LinearGaussianParams = serde_json::from_value(overrides)
                .map_err(|e| Error::Config(format!("linear-gaussian overrides: {e}")))?;
            let model = LinearGaussianModel::new(params);
            let theta_true = model.reference_theta();
            Ok(ModelEntry {
                model: Box::new(model),
                theta_true,
            })
        }
        other => Err(Error::Config(format!(
            "unknown model '{other}'; registered models: {}",
            MODEL_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn registry_builds_all_models() {
        for name in MODEL_NAMES {
            let entry = build_model(name, &serde_json::Value::Null).unwrap();
            assert_eq!(entry.theta_true.len(), entry.model.param_dim());
        }
    }

    #[test]
    fn registry_rejects_unknown_name() {
        assert!(matches!(
            build_model("nope", &serde_json::Value::Null),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn overrides_apply_partially() {
        let entry = build_model("ou-meanfield", &json!({"pull": 2.5})).unwrap();
        assert_eq!(entry.theta_true.values, vec![2.5]);
        let entry = build_model("linear-gaussian", &json!({"a": -1.0})).unwrap();
        assert_eq!(entry.theta_true.values, vec![-1.0]);
    }

    #[test]
    fn overrides_reject_unknown_fields() {
        assert!(matches!(
            build_model("ou-meanfield", &json!({"bogus": 1.0})),
            Err(Error::Config(_))
        ));
    }
}
