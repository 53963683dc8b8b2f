//! Deterministic synthetic models and features for testing without a trained
//! network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{argmax, BatchNormParams, FeatureSet, LinearLayer, Matrix, ModelBundle, ModelMetadata, UnfoldedModel, DEFAULT_BN_EPSILON};
use crate::approx::PolyApprox;
use crate::error::Result;

/// Samples used to set batch-norm statistics and balance the classes.
const CALIBRATION_SAMPLES: usize = 1024;
const LABEL_FLIP_RATE: f64 = 0.05;
/// Scale of the FC2 weights; spreads logits so most samples have a clear winner.
const LOGIT_GAIN: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixtureConfig {
    pub seed: u64,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
    pub samples: usize,
}

impl FixtureConfig {
    /// Seed 42, 512 features, 512 hidden units, 10 classes.
    pub fn paper_shaped(samples: usize) -> Self {
        Self {
            seed: 42,
            feature_dim: 512,
            hidden_dim: 512,
            classes: 10,
            samples,
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut *rng)).collect()
}

/// Unfolded model plus features. The model depends only on the seed and
/// shapes, not on the sample count.
///
/// Features are standard normal. The batch-norm statistics are the empirical
/// FC1 moments on a calibration draw, with gamma in [0.6, 1] and beta in
/// [-0.3, 0.3], so folded pre-activations are roughly N(beta, gamma^2). FC2
/// biases are tuned on the calibration draw until every class wins a fair
/// share. Labels are the plaintext prediction with 5% flipped to another class.
pub fn synthesize_unfolded(cfg: FixtureConfig) -> Result<(UnfoldedModel, FeatureSet)> {
    let FixtureConfig {
        seed,
        feature_dim: d,
        hidden_dim: h,
        classes,
        samples,
    } = cfg;
    let mut rng = stream(seed, 0);
    let w1 = Matrix::new(h, d, gaussian(&mut rng, h * d, 2.0 / (d as f64).sqrt()))?;
    let b1 = gaussian(&mut rng, h, 0.5);
    let fc1 = LinearLayer::new(w1, b1)?;

    let mut cal_rng = stream(seed, 1);
    let cal: Vec<Vec<f64>> = (0..CALIBRATION_SAMPLES).map(|_| gaussian(&mut cal_rng, d, 1.0)).collect();
    let raw: Vec<Vec<f64>> = cal.iter().map(|x| fc1.apply(x)).collect::<Result<_>>()?;
    let n = CALIBRATION_SAMPLES as f64;
    let mu: Vec<f64> = (0..h).map(|j| raw.iter().map(|z| z[j]).sum::<f64>() / n).collect();
    let sigma2: Vec<f64> = (0..h)
        .map(|j| raw.iter().map(|z| (z[j] - mu[j]).powi(2)).sum::<f64>() / n)
        .collect();
    let bn1 = BatchNormParams {
        gamma: (0..h).map(|_| rng.random_range(0.6..=1.0)).collect(),
        beta: (0..h).map(|_| rng.random_range(-0.3..=0.3)).collect(),
        mu,
        sigma2,
        epsilon: DEFAULT_BN_EPSILON,
    };

    let activation = PolyApprox::reference_softplus();
    let w2 = Matrix::new(classes, h, gaussian(&mut rng, classes * h, LOGIT_GAIN / (h as f64).sqrt()))?;
    let acts: Vec<Vec<f64>> = raw
        .iter()
        .map(|z| bn1.apply(z).iter().map(|&v| activation.eval_clamped(v)).collect())
        .collect();
    let b2 = balance_bias(&w2, &acts, classes);
    let fc2 = LinearLayer::new(w2, b2)?;

    let model = UnfoldedModel {
        metadata: ModelMetadata {
            dataset: format!("synthetic-seed{seed}"),
            feature_dim: d,
            classes,
        },
        fc1,
        bn1,
        activation,
        fc2,
    };
    let bundle = model.fold()?;

    let mut x_rng = stream(seed, 2);
    let mut data = Vec::with_capacity(samples * d);
    for _ in 0..samples {
        data.extend(gaussian(&mut x_rng, d, 1.0));
    }
    let unlabeled = FeatureSet::new(d, data, vec![0; samples], classes)?;
    let mut flip_rng = stream(seed, 3);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = bundle.forward(unlabeled.features(i))?.class;
        let label = if flip_rng.random_bool(LABEL_FLIP_RATE) {
            (class + flip_rng.random_range(1..classes)) % classes
        } else {
            class
        };
        labels.push(label);
    }
    Ok((model, unlabeled.with_labels(labels)))
}

/// Folded fixture.
pub fn synthesize_fixture(cfg: FixtureConfig) -> Result<(ModelBundle, FeatureSet)> {
    let (model, features) = synthesize_unfolded(cfg)?;
    Ok((model.fold()?, features))
}

/// Centers the logits, then nudges biases until each class is predicted for
/// at least half of its fair share of the calibration draw.
fn balance_bias(w2: &Matrix, acts: &[Vec<f64>], classes: usize) -> Vec<f64> {
    let logits: Vec<Vec<f64>> = acts
        .iter()
        .map(|a| (0..classes).map(|k| w2.row(k).iter().zip(a).map(|(w, v)| w * v).sum()).collect())
        .collect();
    let n = acts.len() as f64;
    let mut b: Vec<f64> = (0..classes)
        .map(|k| -logits.iter().map(|l| l[k]).sum::<f64>() / n)
        .collect();
    let fair = 1.0 / classes as f64;
    for _ in 0..200 {
        let mut counts = vec![0usize; classes];
        for l in &logits {
            let shifted: Vec<f64> = l.iter().zip(&b).map(|(a, c)| a + c).collect();
            counts[argmax(&shifted)] += 1;
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        if freq.iter().all(|&f| f >= 0.5 * fair) {
            break;
        }
        for k in 0..classes {
            b[k] += 0.5 * (fair / freq[k].max(0.5 / n)).ln();
        }
    }
    b
}
