//! Model JSON: a readable header with base64 little-endian f64 payloads.
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "metadata": { "dataset": "...", "feature_dim": 512, "classes": 10 },
//!   "fc1": { "rows": 512, "cols": 512, "weights": "<base64>", "bias": "<base64>" },
//!   "batch_norm": { "gamma": "..", "beta": "..", "mu": "..", "sigma2": "..", "epsilon": 1e-5 },
//!   "activation": { ...fit JSON... },
//!   "fc2": { "rows": 10, "cols": 512, "weights": "..", "bias": ".." }
//! }
//! ```
//!
//! `batch_norm` is present only in unfolded models.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BatchNormParams, FoldedLinearLayer, LinearLayer, Matrix, ModelBundle, ModelMetadata, UnfoldedModel, DEFAULT_BN_EPSILON};
use crate::approx::PolyApprox;
use crate::error::{CoreError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
struct F64Array(Vec<f64>);

impl Serialize for F64Array {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = self.0.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }
}

impl<'de> Deserialize<'de> for F64Array {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text.as_bytes()).map_err(|e| D::Error::custom(format!("invalid base64: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(D::Error::custom(format!("{} bytes is not a whole number of f64 values", bytes.len())));
        }
        Ok(F64Array(
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        ))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataJson {
    dataset: String,
    feature_dim: usize,
    classes: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerJson {
    rows: usize,
    cols: usize,
    weights: F64Array,
    bias: F64Array,
}

fn default_epsilon() -> f64 {
    DEFAULT_BN_EPSILON
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchNormJson {
    gamma: F64Array,
    beta: F64Array,
    mu: F64Array,
    sigma2: F64Array,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    schema_version: u32,
    metadata: MetadataJson,
    fc1: LayerJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch_norm: Option<BatchNormJson>,
    activation: PolyApprox,
    fc2: LayerJson,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<serde_json::Value>,
}

/// Either kind of model file.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelFile {
    Folded(ModelBundle),
    Unfolded(UnfoldedModel),
}

impl ModelFile {
    /// Folds if needed.
    pub fn into_bundle(self) -> Result<ModelBundle> {
        match self {
            Self::Folded(b) => Ok(b),
            Self::Unfolded(u) => u.fold(),
        }
    }
}

fn layer_json(l: &LinearLayer) -> LayerJson {
    LayerJson {
        rows: l.output_dim(),
        cols: l.input_dim(),
        weights: F64Array(l.weights().data().to_vec()),
        bias: F64Array(l.bias().to_vec()),
    }
}

fn metadata_json(m: &ModelMetadata) -> MetadataJson {
    MetadataJson {
        dataset: m.dataset.clone(),
        feature_dim: m.feature_dim,
        classes: m.classes,
    }
}

fn to_text(m: &ModelJson) -> String {
    serde_json::to_string_pretty(m).expect("plain data serializes")
}

pub(super) fn bundle_to_json(b: &ModelBundle) -> String {
    to_text(&ModelJson {
        schema_version: SCHEMA_VERSION,
        metadata: metadata_json(&b.metadata),
        fc1: layer_json(b.fc1.layer()),
        batch_norm: None,
        activation: b.activation.clone(),
        fc2: layer_json(&b.fc2),
    })
}

fn unfolded_to_json(u: &UnfoldedModel) -> String {
    let bn = &u.bn1;
    to_text(&ModelJson {
        schema_version: SCHEMA_VERSION,
        metadata: metadata_json(&u.metadata),
        fc1: layer_json(&u.fc1),
        batch_norm: Some(BatchNormJson {
            gamma: F64Array(bn.gamma.clone()),
            beta: F64Array(bn.beta.clone()),
            mu: F64Array(bn.mu.clone()),
            sigma2: F64Array(bn.sigma2.clone()),
            epsilon: bn.epsilon,
        }),
        activation: u.activation.clone(),
        fc2: layer_json(&u.fc2),
    })
}

/// Prefixes a validation error with the field it concerns.
fn at(field: &str, location: &str) -> impl Fn(CoreError) -> CoreError {
    let prefix = format!("{location}: {field}");
    move |e| match e {
        CoreError::Shape(m) => CoreError::Shape(format!("{prefix}: {m}")),
        CoreError::Validation(m) => CoreError::Validation(format!("{prefix}: {m}")),
        CoreError::Domain(m) => CoreError::Domain(format!("{prefix}: {m}")),
        other => other,
    }
}

fn build_layer(j: LayerJson, field: &str, location: &str) -> Result<LinearLayer> {
    let m = Matrix::new(j.rows, j.cols, j.weights.0).map_err(at(&format!("{field}.weights"), location))?;
    LinearLayer::new(m, j.bias.0).map_err(at(field, location))
}

/// Parses model JSON text; `location` names the source in errors.
pub fn parse_model(text: &str, location: &str) -> Result<ModelFile> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| CoreError::parse(location, e))?;
    match probe.schema_version {
        None => return Err(CoreError::parse(format!("{location} at schema_version"), "missing field")),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
            return Err(CoreError::parse(
                format!("{location} at schema_version"),
                format!("unsupported schema version {v} (supported: {SCHEMA_VERSION})"),
            ))
        }
        Some(_) => {}
    }
    let de = &mut serde_json::Deserializer::from_str(text);
    let j: ModelJson = serde_path_to_error::deserialize(de).map_err(|e| CoreError::parse(format!("{location} at {}", e.path()), e.inner()))?;
    let metadata = ModelMetadata {
        dataset: j.metadata.dataset,
        feature_dim: j.metadata.feature_dim,
        classes: j.metadata.classes,
    };
    j.activation.validate().map_err(at("activation", location))?;
    let fc1 = build_layer(j.fc1, "fc1", location)?;
    let fc2 = build_layer(j.fc2, "fc2", location)?;
    let file = match j.batch_norm {
        None => ModelFile::Folded(ModelBundle {
            metadata,
            fc1: FoldedLinearLayer::from_folded(fc1),
            activation: j.activation,
            fc2,
        }),
        Some(bn) => {
            let bn1 = BatchNormParams {
                gamma: bn.gamma.0,
                beta: bn.beta.0,
                mu: bn.mu.0,
                sigma2: bn.sigma2.0,
                epsilon: bn.epsilon,
            };
            bn1.validate().map_err(at("batch_norm", location))?;
            if bn1.len() != fc1.output_dim() {
                return Err(CoreError::Shape(format!(
                    "{location}: batch_norm has {} channels but fc1 has {} outputs",
                    bn1.len(),
                    fc1.output_dim()
                )));
            }
            ModelFile::Unfolded(UnfoldedModel {
                metadata,
                fc1,
                bn1,
                activation: j.activation,
                fc2,
            })
        }
    };
    match &file {
        ModelFile::Folded(b) => b.validate(),
        ModelFile::Unfolded(u) => ModelBundle {
            metadata: u.metadata.clone(),
            fc1: FoldedLinearLayer::from_folded(u.fc1.clone()),
            activation: u.activation.clone(),
            fc2: u.fc2.clone(),
        }
        .validate(),
    }
    .map_err(|e| match e {
        CoreError::Shape(m) => CoreError::Shape(format!("{location}: {m}")),
        CoreError::Validation(m) => CoreError::Validation(format!("{location}: {m}")),
        other => other,
    })?;
    Ok(file)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

/// Loads a model file of either kind.
pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    parse_model(&read(path)?, &path.display().to_string())
}

/// Loads a folded bundle. Unfolded files are rejected; fold them first.
pub fn load_model(path: &Path) -> Result<ModelBundle> {
    match load_model_file(path)? {
        ModelFile::Folded(b) => Ok(b),
        ModelFile::Unfolded(_) => Err(CoreError::Validation(format!(
            "{}: model still has a batch_norm block; fold it first",
            path.display()
        ))),
    }
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    write(path, &bundle_to_json(bundle))
}

pub fn save_unfolded(model: &UnfoldedModel, path: &Path) -> Result<()> {
    write(path, &unfolded_to_json(model))
}

impl ModelBundle {
    pub fn to_json(&self) -> String {
        bundle_to_json(self)
    }
}

impl UnfoldedModel {
    pub fn to_json(&self) -> String {
        unfolded_to_json(self)
    }
}
