//! Batch runs, latency accounting and reports.

use std::time::Instant;

use polyhe_ckks::CkksParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decrypt_logits, hybrid_activation, ClientContext, Server};
use crate::error::{CoreError, Result};
use crate::model::{argmax, FeatureSet, ModelBundle};

/// Seconds per stage for one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub encode_encrypt_s: f64,
    /// Both dense layers.
    pub fc_s: f64,
    /// Client decrypt, polynomial and re-encrypt.
    pub activation_s: f64,
    pub decrypt_s: f64,
    pub total_s: f64,
}

impl LatencyBreakdown {
    pub fn stage_sum(&self) -> f64 {
        self.encode_encrypt_s + self.fc_s + self.activation_s + self.decrypt_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub label: usize,
    /// `None` when the sample was flagged.
    pub predicted: Option<usize>,
    pub oracle_class: usize,
    /// Gap between the two largest plaintext logits.
    pub oracle_margin: f64,
    /// Largest |encrypted - plaintext| logit difference.
    pub max_logit_error: Option<f64>,
    pub latency: LatencyBreakdown,
    /// Precision failure message for flagged samples.
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
}

impl StageStats {
    fn of(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return Self::default();
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median_s = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        // Nearest rank.
        let p95_s = v[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            mean_s: v.iter().sum::<f64>() / n as f64,
            median_s,
            p95_s,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub encode_encrypt: StageStats,
    pub fc: StageStats,
    pub activation: StageStats,
    pub decrypt: StageStats,
    pub total: StageStats,
}

impl LatencySummary {
    fn of(records: &[SampleRecord]) -> Self {
        let col = |f: fn(&LatencyBreakdown) -> f64| StageStats::of(records.iter().map(|r| f(&r.latency)).collect());
        Self {
            encode_encrypt: col(|l| l.encode_encrypt_s),
            fc: col(|l| l.fc_s),
            activation: col(|l| l.activation_s),
            decrypt: col(|l| l.decrypt_s),
            total: col(|l| l.total_s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Encrypted,
    Plaintext,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub preset: Option<String>,
    pub params: Option<CkksParams>,
    pub activation: String,
    pub activation_coeffs: Vec<f64>,
    pub model_hash: String,
    pub dataset: String,
    pub seed: u64,
    pub strict: bool,
    pub threads: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub config: RunConfig,
    /// Correct predictions over evaluated (unflagged) samples.
    pub accuracy: f64,
    pub correct: usize,
    pub evaluated: usize,
    pub flagged: usize,
    /// Accuracy of the plaintext pipeline on the same evaluated samples.
    pub oracle_accuracy: f64,
    /// Fraction of evaluated samples whose prediction equals the plaintext one.
    pub oracle_agreement: f64,
    /// Key generation and weight encoding, not part of any sample.
    pub setup_s: f64,
    pub wall_s: f64,
    pub latency: LatencySummary,
    pub per_sample: Vec<SampleRecord>,
}

impl InferenceReport {
    fn assemble(config: RunConfig, per_sample: Vec<SampleRecord>, setup_s: f64, wall_s: f64) -> Self {
        let evaluated: Vec<&SampleRecord> = per_sample.iter().filter(|r| r.predicted.is_some()).collect();
        let n = evaluated.len();
        let correct = evaluated.iter().filter(|r| r.predicted == Some(r.label)).count();
        let oracle_correct = evaluated.iter().filter(|r| r.oracle_class == r.label).count();
        let agree = evaluated.iter().filter(|r| r.predicted == Some(r.oracle_class)).count();
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let timed: Vec<SampleRecord> = evaluated.iter().map(|r| (*r).clone()).collect();
        Self {
            config,
            accuracy: frac(correct),
            correct,
            evaluated: n,
            flagged: per_sample.len() - n,
            oracle_accuracy: frac(oracle_correct),
            oracle_agreement: frac(agree),
            setup_s,
            wall_s,
            latency: LatencySummary::of(&timed),
            per_sample,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Per-sample rows: index, label, prediction, four stage timings, total.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "label", "prediction", "encode_encrypt_s", "fc_s", "activation_s", "decrypt_s", "total_s"])
            .expect("in-memory write");
        for r in &self.per_sample {
            let l = &r.latency;
            w.write_record([
                r.index.to_string(),
                r.label.to_string(),
                r.predicted.map(|p| p.to_string()).unwrap_or_default(),
                l.encode_encrypt_s.to_string(),
                l.fc_s.to_string(),
                l.activation_s.to_string(),
                l.decrypt_s.to_string(),
                l.total_s.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// One row of the stage breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: String,
    pub mean_s: f64,
    /// Percentage of the mean total.
    pub share_pct: f64,
}

/// Mean latency per stage: encode&encrypt, FC, activation, decryption, total.
pub fn stage_table(report: &InferenceReport) -> Vec<StageRow> {
    let l = &report.latency;
    let total = l.total.mean_s;
    let share = |v: f64| if total > 0.0 { 100.0 * v / total } else { 0.0 };
    [
        ("encode&encrypt", l.encode_encrypt.mean_s),
        ("FC", l.fc.mean_s),
        ("activation", l.activation.mean_s),
        ("decryption", l.decrypt.mean_s),
        ("total", total),
    ]
    .into_iter()
    .map(|(stage, mean_s)| StageRow {
        stage: stage.into(),
        mean_s,
        share_pct: share(mean_s),
    })
    .collect()
}

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub seed: u64,
    /// Abort on the first precision failure; otherwise flag the sample and
    /// leave it out of the accuracy.
    pub strict: bool,
    /// Worker threads; `None` uses the machine's parallelism.
    pub threads: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            strict: true,
            threads: None,
        }
    }
}

/// Per-sample randomness, independent of scheduling order.
fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_inputs(features: &FeatureSet, bundle: &ModelBundle) -> Result<()> {
    if features.is_empty() {
        return Err(CoreError::Argument("empty feature set".into()));
    }
    if features.dim() != bundle.metadata.feature_dim {
        return Err(CoreError::Shape(format!(
            "features have dimension {} but the model expects {}",
            features.dim(),
            bundle.metadata.feature_dim
        )));
    }
    if let Some(i) = features.labels().iter().position(|&l| l >= bundle.metadata.classes) {
        return Err(CoreError::Validation(format!(
            "sample {i} has label {} but the model has {} classes",
            features.label(i),
            bundle.metadata.classes
        )));
    }
    Ok(())
}

fn config(bundle: &ModelBundle, mode: Mode, preset: Option<&str>, params: Option<CkksParams>, opts: &BatchOptions, threads: usize, samples: usize) -> RunConfig {
    RunConfig {
        mode,
        preset: preset.map(str::to_string),
        params,
        activation: bundle.activation.activation.to_string(),
        activation_coeffs: bundle.activation.coeffs.clone(),
        model_hash: bundle.hash(),
        dataset: bundle.metadata.dataset.clone(),
        seed: opts.seed,
        strict: opts.strict,
        threads,
        samples,
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CoreError::Argument("thread count must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CoreError::Internal(format!("thread pool: {e}")))
}

fn margin(logits: &[f64]) -> f64 {
    let mut s: Vec<f64> = logits.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    if s.len() < 2 {
        f64::INFINITY
    } else {
        s[0] - s[1]
    }
}

/// Encrypted inference over every sample of `features` under a named preset.
pub fn run_batch(features: &FeatureSet, bundle: &ModelBundle, preset: &str, opts: &BatchOptions) -> Result<InferenceReport> {
    check_inputs(features, bundle)?;
    let params = CkksParams::preset(preset)?;
    let wall = Instant::now();
    let client = ClientContext::new(params.clone(), bundle.activation.clone(), opts.seed)?;
    // Only public material crosses to the server.
    let server = Server::new(client.context().clone(), client.evaluation_keys().clone(), bundle)?;
    let setup_s = wall.elapsed().as_secs_f64();

    let pool = pool(opts.threads)?;
    let threads = pool.current_num_threads();
    let outcomes: Vec<Result<SampleRecord>> = pool.install(|| {
        (0..features.len())
            .into_par_iter()
            .map(|i| run_sample(&client, &server, bundle, features, i, opts.seed))
            .collect()
    });

    let mut records = Vec::with_capacity(outcomes.len());
    for (i, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(r) => records.push(r),
            Err(CoreError::Precision(msg)) if !opts.strict => {
                let oracle = bundle.forward(features.features(i))?;
                records.push(SampleRecord {
                    index: i,
                    label: features.label(i),
                    predicted: None,
                    oracle_class: oracle.class,
                    oracle_margin: margin(&oracle.logits),
                    max_logit_error: None,
                    latency: LatencyBreakdown::default(),
                    error: Some(msg),
                });
            }
            Err(CoreError::Precision(msg)) => {
                return Err(CoreError::Precision(format!("sample {i}: {msg}")));
            }
            Err(e) => return Err(e),
        }
    }
    let cfg = config(bundle, Mode::Encrypted, Some(preset), Some(params), opts, threads, features.len());
    Ok(InferenceReport::assemble(cfg, records, setup_s, wall.elapsed().as_secs_f64()))
}

fn run_sample(client: &ClientContext, server: &Server, bundle: &ModelBundle, features: &FeatureSet, i: usize, seed: u64) -> Result<SampleRecord> {
    let x = features.features(i);
    let mut lat = LatencyBreakdown::default();
    let start = Instant::now();

    let t = Instant::now();
    let enc = client.encryptor(sample_seed(seed, i));
    let ct_x = client.encrypt_input(&enc, x)?;
    lat.encode_encrypt_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ct_z = server.fc1(&ct_x)?;
    lat.fc_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ct_a = hybrid_activation(&ct_z, client, &enc)?;
    lat.activation_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let ct_l = server.fc2(&ct_a)?;
    lat.fc_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let logits = decrypt_logits(&ct_l, client)?;
    let predicted = argmax(&logits);
    lat.decrypt_s = t.elapsed().as_secs_f64();
    lat.total_s = start.elapsed().as_secs_f64();

    let oracle = bundle.forward(x)?;
    let err = logits.iter().zip(&oracle.logits).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SampleRecord {
        index: i,
        label: features.label(i),
        predicted: Some(predicted),
        oracle_class: oracle.class,
        oracle_margin: margin(&oracle.logits),
        max_logit_error: Some(err),
        latency: lat,
        error: None,
    })
}

/// The plaintext pipeline alone; no keys are generated and nothing is encrypted.
pub fn run_plaintext(features: &FeatureSet, bundle: &ModelBundle, opts: &BatchOptions) -> Result<InferenceReport> {
    check_inputs(features, bundle)?;
    let wall = Instant::now();
    let records = (0..features.len())
        .map(|i| {
            let t = Instant::now();
            let f = bundle.forward(features.features(i))?;
            Ok(SampleRecord {
                index: i,
                label: features.label(i),
                predicted: Some(f.class),
                oracle_class: f.class,
                oracle_margin: margin(&f.logits),
                max_logit_error: None,
                latency: LatencyBreakdown {
                    total_s: t.elapsed().as_secs_f64(),
                    ..Default::default()
                },
                error: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = config(bundle, Mode::Plaintext, None, None, opts, 1, features.len());
    Ok(InferenceReport::assemble(cfg, records, 0.0, wall.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let s = StageStats::of((1..=20).map(f64::from).collect());
        assert_eq!(s.median_s, 10.5);
        assert_eq!(s.p95_s, 19.0);
        assert_eq!(s.mean_s, 10.5);
        let one = StageStats::of(vec![3.0]);
        assert_eq!((one.median_s, one.p95_s), (3.0, 3.0));
    }

    #[test]
    fn sample_seeds_differ() {
        let mut s: Vec<u64> = (0..1000).map(|i| sample_seed(42, i)).collect();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 1000);
    }
}
