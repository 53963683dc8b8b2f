//! Dense layers, batch-norm folding and the model bundle consumed by the
//! encrypted pipeline.

mod features;
mod fixture;
mod format;

pub use features::{load_features, parse_features, save_features, write_features, FeatureSet};
pub use fixture::{synthesize_fixture, synthesize_unfolded, FixtureConfig};
pub use format::{load_model, load_model_file, parse_model, save_model, save_unfolded, ModelFile, SCHEMA_VERSION};

use crate::approx::PolyApprox;
use crate::error::{CoreError, Result};

/// Framework default used when a model file omits `epsilon`.
pub const DEFAULT_BN_EPSILON: f64 = 1e-5;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CoreError::Shape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(CoreError::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.cols + k]
    }
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CoreError::Validation(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}

/// `z = W x + b` with `W` of shape h x d.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer {
    weights: Matrix,
    bias: Vec<f64>,
}

impl LinearLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(CoreError::Shape(format!(
                "bias has {} entries but the weight matrix has {} rows",
                bias.len(),
                weights.rows()
            )));
        }
        check_finite("weights", weights.data())?;
        check_finite("bias", &bias)?;
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(CoreError::Shape(format!(
                "layer expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok((0..self.output_dim())
            .map(|j| self.weights.row(j).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[j])
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// Running mean.
    pub mu: Vec<f64>,
    /// Running variance.
    pub sigma2: Vec<f64>,
    pub epsilon: f64,
}

impl BatchNormParams {
    /// Checks lengths, finiteness and `sigma2 + epsilon > 0`.
    pub fn validate(&self) -> Result<()> {
        let h = self.gamma.len();
        for (name, v) in [("beta", &self.beta), ("mu", &self.mu), ("sigma2", &self.sigma2)] {
            if v.len() != h {
                return Err(CoreError::Shape(format!("batch norm {name} has {} entries, gamma has {h}", v.len())));
            }
        }
        for (name, v) in [("gamma", &self.gamma), ("beta", &self.beta), ("mu", &self.mu), ("sigma2", &self.sigma2)] {
            check_finite(name, v)?;
        }
        if !self.epsilon.is_finite() {
            return Err(CoreError::Validation("batch norm epsilon is not finite".into()));
        }
        if let Some(j) = self.sigma2.iter().position(|&s| !(s + self.epsilon > 0.0)) {
            return Err(CoreError::Domain(format!(
                "sigma2[{j}] + epsilon = {} is not positive",
                self.sigma2[j] + self.epsilon
            )));
        }
        Ok(())
    }

    /// Parameters that leave their input untouched.
    pub fn identity(sigma2: Vec<f64>, epsilon: f64) -> Self {
        let h = sigma2.len();
        Self {
            gamma: sigma2.iter().map(|s| (s + epsilon).sqrt()).collect(),
            beta: vec![0.0; h],
            mu: vec![0.0; h],
            sigma2,
            epsilon,
        }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// `gamma * (z - mu) / sqrt(sigma2 + eps) + beta`, elementwise.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| self.gamma[j] * (v - self.mu[j]) / (self.sigma2[j] + self.epsilon).sqrt() + self.beta[j])
            .collect()
    }
}

/// A linear layer with batch norm absorbed into it.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedLinearLayer(LinearLayer);

impl FoldedLinearLayer {
    /// Wraps parameters that are already folded, e.g. read back from disk.
    pub fn from_folded(layer: LinearLayer) -> Self {
        Self(layer)
    }

    pub fn layer(&self) -> &LinearLayer {
        &self.0
    }

    pub fn weights(&self) -> &Matrix {
        self.0.weights()
    }

    pub fn bias(&self) -> &[f64] {
        self.0.bias()
    }

    pub fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.0.output_dim()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(x)
    }
}

/// Folds `bn` into `layer`: `W'_j = s_j W_j`, `b'_j = s_j (b_j - mu_j) + beta_j`
/// with `s_j = gamma_j / sqrt(sigma2_j + eps)`.
pub fn fold_bn(layer: &LinearLayer, bn: &BatchNormParams) -> Result<FoldedLinearLayer> {
    if bn.len() != layer.output_dim() {
        return Err(CoreError::Shape(format!(
            "batch norm has {} channels but the layer has {} outputs",
            bn.len(),
            layer.output_dim()
        )));
    }
    bn.validate()?;
    let (h, d) = (layer.output_dim(), layer.input_dim());
    let mut w = Vec::with_capacity(h * d);
    let mut b = Vec::with_capacity(h);
    for j in 0..h {
        let s = bn.gamma[j] / (bn.sigma2[j] + bn.epsilon).sqrt();
        w.extend(layer.weights().row(j).iter().map(|v| s * v));
        b.push(s * (layer.bias()[j] - bn.mu[j]) + bn.beta[j]);
    }
    let folded = LinearLayer::new(Matrix::new(h, d, w)?, b)
        .map_err(|e| CoreError::Numerical(format!("folding produced invalid parameters: {e}")))?;
    Ok(FoldedLinearLayer(folded))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelMetadata {
    pub dataset: String,
    pub feature_dim: usize,
    pub classes: usize,
}

/// Intermediates of one plaintext forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    /// FC1 outputs.
    pub z: Vec<f64>,
    /// Activations after clamping and the polynomial.
    pub a: Vec<f64>,
    pub logits: Vec<f64>,
    pub class: usize,
}

/// FC1 (BN folded) -> polynomial activation -> FC2.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub metadata: ModelMetadata,
    pub fc1: FoldedLinearLayer,
    pub activation: PolyApprox,
    pub fc2: LinearLayer,
}

/// Pre-activations are expected to stay in this range.
const EXPECTED_PREACTIVATION: (f64, f64) = (-3.0, 3.0);

impl ModelBundle {
    pub fn new(metadata: ModelMetadata, fc1: FoldedLinearLayer, activation: PolyApprox, fc2: LinearLayer) -> Result<Self> {
        let b = Self {
            metadata,
            fc1,
            activation,
            fc2,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.metadata;
        if self.fc1.input_dim() != m.feature_dim {
            return Err(CoreError::Shape(format!(
                "fc1 input dimension {} does not match feature_dim {}",
                self.fc1.input_dim(),
                m.feature_dim
            )));
        }
        if self.fc1.output_dim() != self.fc2.input_dim() {
            return Err(CoreError::Shape(format!(
                "fc1 output dimension {} does not match fc2 input dimension {}",
                self.fc1.output_dim(),
                self.fc2.input_dim()
            )));
        }
        if self.fc2.output_dim() != m.classes {
            return Err(CoreError::Shape(format!(
                "fc2 output dimension {} does not match class count {}",
                self.fc2.output_dim(),
                m.classes
            )));
        }
        if m.classes < 2 {
            return Err(CoreError::Validation(format!("need at least 2 classes, got {}", m.classes)));
        }
        self.activation.validate()?;
        let (lo, hi) = self.activation.domain;
        if lo > EXPECTED_PREACTIVATION.0 || hi < EXPECTED_PREACTIVATION.1 {
            return Err(CoreError::Validation(format!(
                "activation domain [{lo}, {hi}] does not cover the pre-activation range [-3, 3]"
            )));
        }
        Ok(())
    }

    pub fn hidden_dim(&self) -> usize {
        self.fc1.output_dim()
    }

    /// Exact double-precision forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let z = self.fc1.apply(x)?;
        let a: Vec<f64> = z.iter().map(|&v| self.activation.eval_clamped(v)).collect();
        let logits = self.fc2.apply(&a)?;
        let class = argmax(&logits);
        Ok(Forward { z, a, logits, class })
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(format::bundle_to_json(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A bundle whose FC1 still carries a separate batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct UnfoldedModel {
    pub metadata: ModelMetadata,
    pub fc1: LinearLayer,
    pub bn1: BatchNormParams,
    pub activation: PolyApprox,
    pub fc2: LinearLayer,
}

impl UnfoldedModel {
    pub fn fold(&self) -> Result<ModelBundle> {
        let fc1 = fold_bn(&self.fc1, &self.bn1)?;
        ModelBundle::new(self.metadata.clone(), fc1, self.activation.clone(), self.fc2.clone())
    }

    /// Reference path: `BN(W x + b)` evaluated without folding.
    pub fn fc1_bn(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.bn1.apply(&self.fc1.apply(x)?))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 5.0, -2.0]), 1);
        assert_eq!(argmax(&[3.0, 3.0]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn matrix_shape_checks() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        let m = Matrix::from_fn(2, 3, |j, k| (10 * j + k) as f64);
        assert_eq!(m.row(1), &[10.0, 11.0, 12.0]);
        assert_eq!(m.get(0, 2), 2.0);
    }
}
