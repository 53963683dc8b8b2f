//! Hybrid encrypted inference.
//!
//! The server evaluates both linear layers on ciphertexts with plaintext
//! weights. Between them the client decrypts the pre-activations, applies the
//! polynomial in the clear and re-encrypts, which restores the full modulus
//! chain. Server-side types are built from [`EvaluationKeys`] only and never
//! see a [`SecretKey`](polyhe_ckks::SecretKey).

mod batch;

pub use batch::{
    run_batch, run_plaintext, stage_table, BatchOptions, InferenceReport, LatencyBreakdown, LatencySummary,
    Mode, RunConfig, SampleRecord, StageRow, StageStats,
};

use std::sync::Arc;

use polyhe_ckks::{keygen, Ciphertext, CkksContext, CkksParams, Decryptor, Encryptor, EvaluationKeys, Evaluator, KeySet, Plaintext, PublicKey};

use crate::approx::PolyApprox;
use crate::error::{CoreError, Result};
use crate::model::{argmax, Forward, LinearLayer, ModelBundle};

/// Largest imaginary part tolerated in a decrypted real value.
pub const PRECISION_LIMIT: f64 = 0.1;

/// The key holder: encrypts inputs, runs the activation step and reads
/// predictions.
pub struct ClientContext {
    ctx: Arc<CkksContext>,
    keys: KeySet,
    decryptor: Decryptor,
    activation: PolyApprox,
}

impl ClientContext {
    /// Generates a fresh key set from `seed`.
    pub fn new(params: CkksParams, activation: PolyApprox, seed: u64) -> Result<Self> {
        let ctx = CkksContext::new(params)?;
        let keys = keygen(&ctx, seed);
        Ok(Self::from_keys(ctx, keys, activation))
    }

    pub fn from_keys(ctx: Arc<CkksContext>, keys: KeySet, activation: PolyApprox) -> Self {
        let decryptor = Decryptor::new(ctx.clone(), keys.secret_key());
        Self {
            ctx,
            keys,
            decryptor,
            activation,
        }
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn params(&self) -> &CkksParams {
        self.ctx.params()
    }

    pub fn activation(&self) -> &PolyApprox {
        &self.activation
    }

    pub fn keys(&self) -> &KeySet {
        &self.keys
    }

    /// Public material to hand to the server.
    pub fn evaluation_keys(&self) -> &EvaluationKeys {
        self.keys.evaluation_keys()
    }

    pub fn public_key(&self) -> &PublicKey {
        self.keys.public_key()
    }

    /// An encryptor on its own randomness stream.
    pub fn encryptor(&self, seed: u64) -> Encryptor {
        Encryptor::new(self.ctx.clone(), self.keys.public_key(), seed)
    }

    pub fn encrypt_input(&self, enc: &Encryptor, x: &[f64]) -> Result<Ciphertext> {
        Ok(enc.encrypt_values(x)?)
    }

    /// Decrypts slot 0 of each ciphertext. The imaginary part of a real
    /// message is pure noise, so it serves as the per-slot error estimate.
    pub fn decrypt_scalars(&self, cts: &[Ciphertext]) -> Result<Vec<f64>> {
        cts.iter()
            .enumerate()
            .map(|(j, ct)| {
                let v = self.ctx.decode_complex(&self.decryptor.decrypt(ct))[0];
                if !(v.re.is_finite() && v.im.abs() <= PRECISION_LIMIT) {
                    return Err(CoreError::Precision(format!(
                        "value {j} decrypted as {} with error estimate {:e}",
                        v.re,
                        v.im.abs()
                    )));
                }
                Ok(v.re)
            })
            .collect()
    }

    /// Decrypts the first `len` slots of a packed ciphertext.
    pub fn decrypt_vector(&self, ct: &Ciphertext, len: usize) -> Vec<f64> {
        let mut v = self.decryptor.decrypt_values(ct);
        v.truncate(len);
        v
    }
}

/// Layer weights pre-encoded as plaintexts at one level.
pub struct EncodedLayer {
    rows: Vec<Plaintext>,
    layer: LinearLayer,
    input_dim: usize,
    level: usize,
    scale: f64,
}

impl EncodedLayer {
    /// Encodes every weight row at the top level and default scale.
    pub fn encode(ctx: &CkksContext, layer: &LinearLayer) -> Result<Self> {
        let (level, scale) = (ctx.top_level(), ctx.params().scale());
        check_fits(ctx, layer.input_dim())?;
        let rows = (0..layer.output_dim())
            .map(|j| ctx.encode(layer.weights().row(j), scale, level))
            .collect::<polyhe_ckks::Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            layer: layer.clone(),
            input_dim: layer.input_dim(),
            level,
            scale,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
}

fn check_fits(ctx: &CkksContext, d: usize) -> Result<()> {
    if d.next_power_of_two() > ctx.slots() {
        return Err(CoreError::Shape(format!(
            "input dimension {d} does not fit in {} slots",
            ctx.slots()
        )));
    }
    Ok(())
}

/// `<ct, w_j> + b_j` for every row, one ciphertext per output with the value in
/// slot 0. Consumes one level.
pub fn encrypted_layer(eval: &Evaluator, ct: &Ciphertext, layer: &EncodedLayer) -> Result<Vec<Ciphertext>> {
    if ct.level() == 0 {
        return Err(polyhe_ckks::CkksError::DepthExhausted("dense layer needs one level".into()).into());
    }
    let width = layer.input_dim.next_power_of_two();
    let cached = ct.level() == layer.level && ct.scale() == layer.scale;
    layer
        .rows
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let product = if cached {
                eval.mul_plain(ct, row)?
            } else {
                // Encode again at the ciphertext's level and scale.
                eval.mul_values(ct, layer.layer.weights().row(j))?
            };
            let sum = eval.sum_slots(&product, width)?;
            Ok(eval.add_const(&sum, layer.layer.bias()[j])?)
        })
        .collect()
}

/// FC1 on an encrypted feature vector (encodes the weights on the fly).
pub fn encrypted_fc(eval: &Evaluator, ct_x: &Ciphertext, layer: &crate::model::FoldedLinearLayer) -> Result<Vec<Ciphertext>> {
    encrypted_layer(eval, ct_x, &EncodedLayer::encode(eval.context(), layer.layer())?)
}

/// FC2 on the packed activations (encodes the weights on the fly).
pub fn encrypted_logits(eval: &Evaluator, ct_a: &Ciphertext, fc2: &LinearLayer) -> Result<Vec<Ciphertext>> {
    encrypted_layer(eval, ct_a, &EncodedLayer::encode(eval.context(), fc2)?)
}

/// Client step between the layers: decrypt each pre-activation, clamp to the
/// activation domain, evaluate the polynomial, and re-encrypt all values packed
/// into one fresh ciphertext.
pub fn hybrid_activation(ct_z: &[Ciphertext], client: &ClientContext, enc: &Encryptor) -> Result<Ciphertext> {
    let z = client.decrypt_scalars(ct_z)?;
    let a: Vec<f64> = z.iter().map(|&v| client.activation.eval_clamped(v)).collect();
    check_fits(&client.ctx, a.len())?;
    Ok(enc.encrypt_values(&a)?)
}

/// Decrypted logits.
pub fn decrypt_logits(ct_logits: &[Ciphertext], client: &ClientContext) -> Result<Vec<f64>> {
    client.decrypt_scalars(ct_logits)
}

/// Argmax of the decrypted logits; ties go to the lowest class index.
pub fn predict(ct_logits: &[Ciphertext], client: &ClientContext) -> Result<usize> {
    Ok(argmax(&decrypt_logits(ct_logits, client)?))
}

/// The same pipeline in double precision.
pub fn plaintext_oracle(x: &[f64], bundle: &ModelBundle) -> Result<Forward> {
    bundle.forward(x)
}

/// The evaluating party: evaluation keys and pre-encoded weights, nothing secret.
pub struct Server {
    ctx: Arc<CkksContext>,
    keys: EvaluationKeys,
    fc1: EncodedLayer,
    fc2: EncodedLayer,
}

impl Server {
    pub fn new(ctx: Arc<CkksContext>, keys: EvaluationKeys, bundle: &ModelBundle) -> Result<Self> {
        let fc1 = EncodedLayer::encode(&ctx, bundle.fc1.layer())?;
        let fc2 = EncodedLayer::encode(&ctx, &bundle.fc2)?;
        check_fits(&ctx, bundle.hidden_dim())?;
        Ok(Self { ctx, keys, fc1, fc2 })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(&self.ctx, &self.keys)
    }

    pub fn fc1(&self, ct_x: &Ciphertext) -> Result<Vec<Ciphertext>> {
        encrypted_layer(&self.evaluator(), ct_x, &self.fc1)
    }

    pub fn fc2(&self, ct_a: &Ciphertext) -> Result<Vec<Ciphertext>> {
        encrypted_layer(&self.evaluator(), ct_a, &self.fc2)
    }
}

/// Result of one encrypted sample, stage by stage.
#[derive(Clone, Debug)]
pub struct EncryptedForward {
    pub z: Vec<f64>,
    pub logits: Vec<f64>,
    pub class: usize,
}

/// Runs one sample through the full encrypted path and also decrypts the FC1
/// outputs, for stage-wise comparison in tests. Not timed.
pub fn encrypted_forward(client: &ClientContext, server: &Server, x: &[f64], seed: u64) -> Result<EncryptedForward> {
    let enc = client.encryptor(seed);
    let ct_x = client.encrypt_input(&enc, x)?;
    let ct_z = server.fc1(&ct_x)?;
    let z = client.decrypt_scalars(&ct_z)?;
    let ct_a = hybrid_activation(&ct_z, client, &enc)?;
    let ct_l = server.fc2(&ct_a)?;
    let logits = decrypt_logits(&ct_l, client)?;
    let class = argmax(&logits);
    Ok(EncryptedForward { z, logits, class })
}
