use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureSpec, ModelShape, NamedParams, PredictorError, PredictorModel, TrainConfig};

pub const MODEL_FORMAT: &str = "f0kit-predictor";
const MODEL_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    schema_version: u64,
    shape: ModelShape,
    seed: u64,
    train_config: Option<TrainConfig>,
    feature_spec: Option<FeatureSpec>,
    params: NamedParams,
}

pub fn encode_model(model: &PredictorModel) -> String {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        schema_version: MODEL_SCHEMA_VERSION,
        shape: model.shape(),
        seed: model.seed,
        train_config: model.train_config,
        feature_spec: model.feature_spec.clone(),
        params: model.to_named(),
    };
    let mut s = serde_json::to_string(&file).expect("model serializes");
    s.push('\n');
    s
}

pub fn decode_model(text: &str) -> Result<PredictorModel, PredictorError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| PredictorError::Persist(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
        return Err(PredictorError::Persist(format!(
            "not a {MODEL_FORMAT} file"
        )));
    }
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| PredictorError::Persist("missing schema_version".into()))?;
    if version != MODEL_SCHEMA_VERSION {
        return Err(PredictorError::SchemaVersionMismatch { found: version });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| PredictorError::Persist(e.to_string()))?;
    let mut model = PredictorModel::from_named(file.shape, &file.params)?;
    model.seed = file.seed;
    model.train_config = file.train_config;
    if let Some(spec) = &file.feature_spec {
        if spec.input_dim() != file.shape.input_dim {
            return Err(PredictorError::DimensionMismatch(format!(
                "feature spec gives {} dims, shape says {}",
                spec.input_dim(),
                file.shape.input_dim
            )));
        }
    }
    model.feature_spec = file.feature_spec;
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &PredictorModel) -> Result<(), PredictorError> {
    let path = path.as_ref();
    fs::write(path, encode_model(model))
        .map_err(|e| PredictorError::Persist(format!("{}: {e}", path.display())))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PredictorModel, PredictorError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| PredictorError::Persist(format!("{}: {e}", path.display())))?;
    decode_model(&text)
}
