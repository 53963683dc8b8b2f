use std::fs;
use std::path::Path;

use polyhe_ckks::CkksParams;
use polyhe_core::approx::{build_grid, fit_activation, lp_minimax_verify, PolyApprox, WeightScheme};
use polyhe_core::inference::{run_batch, run_plaintext, stage_table, BatchOptions, InferenceReport};
use polyhe_core::model::{
    load_features, load_model, load_model_file, save_features, save_model, save_unfolded, synthesize_fixture,
    synthesize_unfolded, FixtureConfig, ModelFile,
};
use polyhe_core::CoreError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::{BenchArgs, FitArgs, FoldArgs, GlobalArgs, InferArgs, ParamsArgs, SynthArgs, VerifyArgs};
use crate::error::{CliError, Result};

/// Largest tolerated gap between the folded and unfolded FC1 paths.
pub const FOLD_TOLERANCE: f64 = 1e-9;

/// What a command produced: the JSON result, its CSV rendering, and a short
/// human summary for stderr.
pub struct Artifact {
    pub result: Value,
    pub csv: String,
    pub summary: String,
    /// Raised after the artifact is written.
    pub failure: Option<CliError>,
}

impl Artifact {
    fn ok(result: Value, csv: String, summary: String) -> Self {
        Self {
            result,
            csv,
            summary,
            failure: None,
        }
    }
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn fit(a: &FitArgs) -> Result<Artifact> {
    let scheme: WeightScheme = a.weights.parse()?;
    let domain = (a.domain[0], a.domain[1]);
    let report = fit_activation(a.activation, a.degree, domain, &scheme, a.grid)?;
    let p = &report.approx;
    let result = json!({
        "approx": p,
        "wls_coeffs": report.wls_coeffs,
        "wls_objective": report.wls_objective,
        "powell_initial_objective": report.refine.initial_objective,
        "powell_objective": report.refine.objective,
        "powell_outer_iterations": report.refine.outer_iterations,
    });
    let mut header = vec!["activation", "degree", "domain_lo", "domain_hi", "weights", "e_max_unweighted", "e_max_weighted"];
    let names: Vec<String> = (0..p.coeffs.len()).map(|k| format!("c{k}")).collect();
    header.extend(names.iter().map(String::as_str));
    let mut row = vec![
        p.activation.to_string(),
        p.degree.to_string(),
        p.domain.0.to_string(),
        p.domain.1.to_string(),
        format!("\"{}\"", p.weights),
        p.e_max_unweighted.to_string(),
        p.e_max_weighted.to_string(),
    ];
    row.extend(p.coeffs.iter().map(f64::to_string));
    let summary = format!(
        "{:<9} degree {}  [{}, {}]  E_max {:.4}  weighted {:.4}  coeffs {:?}",
        p.activation, p.degree, p.domain.0, p.domain.1, p.e_max_unweighted, p.e_max_weighted, p.coeffs
    );
    Ok(Artifact::ok(result, csv_rows(&header, [row]), summary))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| {
        CoreError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

/// Accepts a `fit` artifact or a bare activation object.
pub fn load_fit(path: &Path) -> Result<PolyApprox> {
    let text = read(path)?;
    let location = path.display().to_string();
    let doc: Value = serde_json::from_str(&text).map_err(|e| CoreError::Parse {
        location: location.clone(),
        message: e.to_string(),
    })?;
    match doc.pointer("/result/approx") {
        Some(inner) => Ok(PolyApprox::from_json(&inner.to_string(), &format!("{location} (result.approx)"))?),
        None => Ok(PolyApprox::from_json(&text, &location)?),
    }
}

pub fn verify(a: &VerifyArgs) -> Result<Artifact> {
    let p = load_fit(&a.fit)?;
    let grid = build_grid(p.domain, &p.scheme()?, p.grid_points)?;
    let lp = lp_minimax_verify(&grid, &p.activation, p.degree)?;
    let passed = lp.passes(p.degree);
    let result = json!({
        "activation": p.activation,
        "degree": p.degree,
        "lp": lp,
        "passed": passed,
        "required_alternations": p.degree + 2,
        "fit_e_max_weighted": p.e_max_weighted,
        "fit_gap": p.e_max_weighted - lp.e_max_weighted_dense,
    });
    let csv = csv_rows(
        &["activation", "degree", "lp_e_max_weighted", "lp_e_max_weighted_dense", "alternations", "passed", "fit_e_max_weighted"],
        [vec![
            p.activation.to_string(),
            p.degree.to_string(),
            lp.e_max_weighted.to_string(),
            lp.e_max_weighted_dense.to_string(),
            lp.alternation_count.to_string(),
            passed.to_string(),
            p.e_max_weighted.to_string(),
        ]],
    );
    let summary = format!(
        "LP weighted E_max {:.6} (dense {:.6}), {} alternations, fit {:.6}: {}",
        lp.e_max_weighted,
        lp.e_max_weighted_dense,
        lp.alternation_count,
        p.e_max_weighted,
        if passed { "PASS" } else { "FAIL" }
    );
    let mut art = Artifact::ok(result, csv, summary);
    if !passed {
        art.failure = Some(CliError::Check(format!(
            "{} alternations, need {}",
            lp.alternation_count,
            p.degree + 2
        )));
    }
    Ok(art)
}

pub fn fold(a: &FoldArgs, g: &GlobalArgs) -> Result<Artifact> {
    let model = match load_model_file(&a.model)? {
        ModelFile::Unfolded(m) => m,
        ModelFile::Folded(_) => {
            return Err(CoreError::Validation(format!("{} is already folded", a.model.display())).into());
        }
    };
    let bundle = model.fold()?;
    save_model(&bundle, &a.out)?;
    // The written file must load back as a valid folded model.
    let reloaded = load_model(&a.out)?;
    if reloaded != bundle {
        return Err(CoreError::Internal("folded model changed on reload".into()).into());
    }

    let check = match a.check {
        None => Value::Null,
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let d = bundle.metadata.feature_dim;
            let mut worst = 0.0f64;
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let unfolded = model.fc1_bn(&x)?;
                let folded = bundle.fc1.apply(&x)?;
                for (u, f) in unfolded.iter().zip(&folded) {
                    worst = worst.max((u - f).abs());
                }
            }
            json!({ "samples": n, "max_discrepancy": worst, "tolerance": FOLD_TOLERANCE, "passed": worst < FOLD_TOLERANCE })
        }
    };
    let result = json!({
        "out": a.out,
        "model_hash": bundle.hash(),
        "feature_dim": bundle.metadata.feature_dim,
        "hidden_dim": bundle.hidden_dim(),
        "classes": bundle.metadata.classes,
        "check": check,
    });
    let discrepancy = check.get("max_discrepancy").and_then(Value::as_f64);
    let csv = csv_rows(
        &["out", "model_hash", "check_samples", "max_discrepancy"],
        [vec![
            a.out.display().to_string(),
            bundle.hash(),
            a.check.map_or(String::new(), |n| n.to_string()),
            discrepancy.map_or(String::new(), |v| v.to_string()),
        ]],
    );
    let mut summary = format!("folded {} -> {} ({})", a.model.display(), a.out.display(), bundle.hash());
    if let Some(v) = discrepancy {
        summary.push_str(&format!("; max fold discrepancy {v:e}"));
    }
    let mut art = Artifact::ok(result, csv, summary);
    if discrepancy.is_some_and(|v| v >= FOLD_TOLERANCE) {
        art.failure = Some(CliError::Check(format!(
            "fold discrepancy {:e} exceeds {FOLD_TOLERANCE:e}",
            discrepancy.unwrap_or_default()
        )));
    }
    Ok(art)
}

fn report_summary(r: &InferenceReport) -> String {
    format!(
        "{} samples ({} flagged): accuracy {:.4}, plaintext {:.4}, agreement {:.4}, mean {:.3} s/sample",
        r.evaluated, r.flagged, r.accuracy, r.oracle_accuracy, r.oracle_agreement, r.latency.total.mean_s
    )
}

pub fn infer(a: &InferArgs, g: &GlobalArgs) -> Result<Artifact> {
    let bundle = load_model(&a.model)?;
    let mut features = load_features(&a.features, bundle.metadata.classes)?;
    if let Some(t) = a.limit {
        features = features.truncated(t);
    }
    let opts = BatchOptions {
        seed: g.seed,
        strict: a.strict,
        threads: g.threads,
    };
    let report = if a.plaintext_oracle {
        run_plaintext(&features, &bundle, &opts)?
    } else {
        let preset = a.preset.as_deref().ok_or_else(|| CliError::Usage("--preset is required".into()))?;
        run_batch(&features, &bundle, preset, &opts)?
    };
    let summary = report_summary(&report);
    Ok(Artifact::ok(to_value(&report), report.to_csv(), summary))
}

pub fn bench(a: &BenchArgs, g: &GlobalArgs) -> Result<Artifact> {
    let mut cfg = FixtureConfig::paper_shaped(a.samples);
    cfg.seed = g.seed;
    if a.preset == "cifar100-paper" {
        cfg.classes = 100;
    }
    let (bundle, features) = synthesize_fixture(cfg)?;
    let opts = BatchOptions {
        seed: g.seed,
        strict: true,
        threads: g.threads,
    };
    let report = run_batch(&features, &bundle, &a.preset, &opts)?;
    let rows = stage_table(&report);
    let result = json!({
        "fixture": {
            "seed": cfg.seed,
            "feature_dim": cfg.feature_dim,
            "hidden_dim": cfg.hidden_dim,
            "classes": cfg.classes,
            "samples": cfg.samples,
        },
        "params": report.config.params,
        "model_hash": report.config.model_hash,
        "threads": report.config.threads,
        "stages": rows,
        "latency": report.latency,
        "accuracy": report.accuracy,
        "oracle_accuracy": report.oracle_accuracy,
        "oracle_agreement": report.oracle_agreement,
        "setup_s": report.setup_s,
        "wall_s": report.wall_s,
    });
    let csv = csv_rows(
        &["stage", "mean_s", "share_pct"],
        rows.iter().map(|r| vec![r.stage.clone(), r.mean_s.to_string(), r.share_pct.to_string()]),
    );
    let mut summary = format!("{:<15} {:>10} {:>8}\n", "stage", "mean (s)", "share");
    for r in &rows {
        summary.push_str(&format!("{:<15} {:>10.4} {:>7.1}%\n", r.stage, r.mean_s, r.share_pct));
    }
    summary.push_str(&report_summary(&report));
    Ok(Artifact::ok(result, csv, summary))
}

pub fn params(a: &ParamsArgs) -> Result<Artifact> {
    let p = CkksParams::preset(&a.preset)?;
    let total_bits: u32 = p.coeff_mod_bits.iter().sum();
    let result = json!({
        "preset": a.preset,
        "params": p,
        "slots": p.slots(),
        "data_primes": p.data_primes(),
        "top_level": p.top_level(),
        "total_modulus_bits": total_bits,
        "scale": p.scale(),
    });
    let bits: Vec<String> = p.coeff_mod_bits.iter().map(u32::to_string).collect();
    let csv = csv_rows(
        &["key", "value"],
        [
            vec!["preset".into(), a.preset.clone()],
            vec!["ring_dim".into(), p.ring_dim.to_string()],
            vec!["coeff_mod_bits".into(), format!("\"{}\"", bits.join(" "))],
            vec!["scale_log2".into(), p.scale_log2.to_string()],
            vec!["slots".into(), p.slots().to_string()],
            vec!["top_level".into(), p.top_level().to_string()],
            vec!["total_modulus_bits".into(), total_bits.to_string()],
            vec!["security_claim".into(), format!("\"{}\"", p.security_claim)],
        ],
    );
    let summary = format!(
        "{}: N={} bits [{}] scale 2^{} slots {} top level {}",
        a.preset,
        p.ring_dim,
        bits.join(","),
        p.scale_log2,
        p.slots(),
        p.top_level()
    );
    Ok(Artifact::ok(result, csv, summary))
}

pub fn synth(a: &SynthArgs, g: &GlobalArgs) -> Result<Artifact> {
    let cfg = FixtureConfig {
        seed: g.seed,
        feature_dim: a.feature_dim,
        hidden_dim: a.hidden_dim,
        classes: a.classes,
        samples: a.samples,
    };
    if a.classes < 2 || a.feature_dim == 0 || a.hidden_dim == 0 {
        return Err(CliError::Usage("synth needs positive dimensions and at least 2 classes".into()));
    }
    let (model, features) = synthesize_unfolded(cfg)?;
    save_unfolded(&model, &a.out_model)?;
    save_features(&features, &a.out_features)?;
    let hash = model.fold()?.hash();
    let result = json!({
        "model": a.out_model,
        "features": a.out_features,
        "samples": features.len(),
        "folded_hash": hash,
    });
    let csv = csv_rows(
        &["model", "features", "samples", "folded_hash"],
        [vec![
            a.out_model.display().to_string(),
            a.out_features.display().to_string(),
            features.len().to_string(),
            hash.clone(),
        ]],
    );
    let summary = format!(
        "wrote {} and {} ({} samples)",
        a.out_model.display(),
        a.out_features.display(),
        features.len()
    );
    Ok(Artifact::ok(result, csv, summary))
}
