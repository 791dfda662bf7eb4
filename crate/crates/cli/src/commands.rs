use std::fs;
use std::path::Path;

use argon::attributes::{compute_attribute_table, AttributeKind, AttributeTable};
use argon::autograd::write_atomic;
use argon::gaussianize::{apply_transform_batch, fit_power_transform, negentropy, DEFAULT_LAMBDA2_GRID};
use argon::melody::{generate_synthetic_corpus, Corpus, Provenance, Split, SynthConfig};
use argon::metrics::{density_to_csv, evaluate_model, scatter_to_csv, EvalSpec, MetricsReport, RESULTS_HEADER};
use argon::smf::ingest_directory;
use argon::vib::{log_to_csv, ModelConfig, RegularizerKind, TrainConfig, VibModel};
use argon::{Error, PowerTransform, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::ExperimentManifest;
use crate::settings::{run_name, Reg, Settings};

pub const CORPUS_FILE: &str = "corpus.txt";
pub const CORPUS_META_FILE: &str = "corpus.json";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const REPLICATE_FILE: &str = "replicate.csv";
const TRANSFORM_TOL: f64 = 1e-10;
const EVAL_BATCH: usize = 256;

/// Provenance written next to the corpus text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub provenance: Provenance,
    pub seed: u64,
    pub melodies: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

fn write_text(dir: &Path, rel: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(rel), text.as_bytes())
}

fn read_text(dir: &Path, rel: &str, what: &str) -> Result<String> {
    fs::read_to_string(dir.join(rel))
        .map_err(|e| Error::Format(format!("cannot read {what} at {}: {e}", dir.join(rel).display())))
}

fn save_corpus(dir: &Path, corpus: &Corpus, meta: &CorpusMeta) -> Result<()> {
    let mut m = ExperimentManifest::load(dir)?;
    write_text(dir, CORPUS_FILE, &corpus.to_text())?;
    write_text(dir, CORPUS_META_FILE, &(serde_json::to_string_pretty(meta)? + "\n"))?;
    m.corpus = Some(CORPUS_FILE.into());
    m.record(dir, CORPUS_FILE)?;
    m.record(dir, CORPUS_META_FILE)?;
    m.save(dir)
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    ExperimentManifest::load(dir)?;
    let meta: CorpusMeta = serde_json::from_str(&read_text(dir, CORPUS_META_FILE, "corpus metadata")?)?;
    Corpus::from_text(&read_text(dir, CORPUS_FILE, "corpus")?, meta.provenance, meta.seed)
}

pub fn load_attributes(dir: &Path, corpus: &Corpus) -> Result<AttributeTable> {
    let table = AttributeTable::from_csv(&read_text(dir, ATTRIBUTES_FILE, "attribute table")?)?;
    if table.len() != corpus.len() {
        return Err(Error::Format(format!("attribute table has {} rows, corpus has {}", table.len(), corpus.len())));
    }
    Ok(table)
}

fn transform_path(attribute: AttributeKind) -> String {
    format!("transforms/{attribute}.json")
}

pub fn load_transform(dir: &Path, attribute: AttributeKind) -> Result<PowerTransform> {
    let text = read_text(dir, &transform_path(attribute), "transform parameters (run fit-transform first)")?;
    PowerTransform::from_json(&text)
}

pub fn synth(s: &Settings) -> Result<Corpus> {
    let cfg = SynthConfig { size: s.size, ..SynthConfig::default() };
    let corpus = generate_synthetic_corpus(&cfg, s.seed)?;
    let meta = CorpusMeta {
        provenance: Provenance::Synthetic,
        seed: s.seed,
        melodies: corpus.len(),
        synth: Some(cfg),
        source: None,
        failures: Vec::new(),
    };
    save_corpus(&s.out, &corpus, &meta)?;
    log::info!("wrote {} synthetic melodies", corpus.len());
    Ok(corpus)
}

pub fn ingest(s: &Settings, src: &Path) -> Result<Corpus> {
    let summary = ingest_directory(src)?;
    for (path, why) in &summary.failures {
        log::warn!("skipped {}: {why}", path.display());
    }
    if summary.melodies.is_empty() {
        return Err(Error::Format(format!("no admissible melodies found under {}", src.display())));
    }
    let corpus = Corpus::with_random_splits(summary.melodies, Provenance::Smf, s.seed);
    let meta = CorpusMeta {
        provenance: Provenance::Smf,
        seed: s.seed,
        melodies: corpus.len(),
        synth: None,
        source: Some(src.display().to_string()),
        failures: summary.failures.iter().map(|(p, why)| format!("{}: {why}", p.display())).collect(),
    };
    save_corpus(&s.out, &corpus, &meta)?;
    log::info!("{} windows from {} files", corpus.len(), summary.files_read);
    Ok(corpus)
}

pub fn attributes(s: &Settings) -> Result<AttributeTable> {
    let corpus = load_corpus(&s.out)?;
    let table = compute_attribute_table(&corpus, &AttributeKind::ALL);
    let mut m = ExperimentManifest::load(&s.out)?;
    write_text(&s.out, ATTRIBUTES_FILE, &table.to_csv())?;
    m.attributes = Some(ATTRIBUTES_FILE.into());
    m.record(&s.out, ATTRIBUTES_FILE)?;
    m.save(&s.out)?;
    Ok(table)
}

pub fn fit_transform(s: &Settings) -> Result<PowerTransform> {
    let corpus = load_corpus(&s.out)?;
    let table = load_attributes(&s.out, &corpus)?;
    let (_, values) = table.values(s.attribute, &corpus.indices(Split::Train))?;
    let mut params = fit_power_transform(&values, &DEFAULT_LAMBDA2_GRID, TRANSFORM_TOL)?;
    params.attribute_kind = Some(s.attribute);
    let before = negentropy(&values)?;
    let after = negentropy(&apply_transform_batch(&params, &values)?)?;
    log::info!(
        "{}: lambda1 {:.4}, lambda2 {}, negentropy {before:.5} -> {after:.5}",
        s.attribute,
        params.lambda1,
        params.lambda2
    );
    let rel = transform_path(s.attribute);
    let mut m = ExperimentManifest::load(&s.out)?;
    write_text(&s.out, &rel, &(params.to_json()? + "\n"))?;
    m.transforms.insert(s.attribute.to_string(), rel.clone());
    m.record(&s.out, &rel)?;
    m.save(&s.out)?;
    Ok(params)
}

pub fn train_config(s: &Settings) -> Result<TrainConfig> {
    let regularizer = match s.reg {
        Reg::Nm => RegularizerKind::Nm,
        Reg::Pl => RegularizerKind::Pl { delta: s.delta },
        Reg::Pt => RegularizerKind::Pt { params: load_transform(&s.out, s.attribute)? },
    };
    let cfg = TrainConfig {
        iterations: s.iters,
        batch_size: s.batch,
        model: ModelConfig { latent_dim: s.latent_dim, ..ModelConfig::default() },
        attribute: s.attribute,
        regularizer,
        gamma: s.gamma,
        beta_max: s.beta_max,
        seed: s.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(s: &Settings) -> Result<()> {
    let corpus = load_corpus(&s.out)?;
    let table = load_attributes(&s.out, &corpus)?;
    let cfg = train_config(s)?;
    let name = run_name(s.attribute, s.reg, s.gamma);
    log::info!("training {name} for {} iterations", cfg.iterations);
    let total = cfg.iterations;
    let out = argon::vib::train_with_progress::<f64>(&cfg, &corpus, &table, |row| {
        if (row.step + 1) % 500 == 0 {
            log::info!("{name}: step {}/{total}, recon {:.4}, ar {:.4}", row.step + 1, row.recon, row.ar);
        }
    })?;

    let run_dir = format!("runs/{name}");
    let ckpt = format!("{run_dir}/checkpoint");
    let mut m = ExperimentManifest::load(&s.out)?;
    out.model.save(&s.out.join(&ckpt), serde_json::json!({ "stats": out.stats, "train_config": cfg }))?;
    write_text(&s.out, &format!("{run_dir}/train_log.csv"), &log_to_csv(&out.log))?;
    m.checkpoints.insert(name.clone(), ckpt.clone());
    m.train_configs.insert(name, cfg);
    m.record(&s.out, &run_dir)?;
    m.record(&s.out, &ckpt)?;
    m.save(&s.out)
}

fn load_model(dir: &Path, name: &str) -> Result<VibModel<f64>> {
    let m = ExperimentManifest::load(dir)?;
    let ckpt = m
        .checkpoints
        .get(name)
        .ok_or_else(|| Error::Format(format!("no trained model {name} in {} (run train first)", dir.display())))?;
    Ok(VibModel::load(&dir.join(ckpt))?.0)
}

fn eval_spec(s: &Settings) -> EvalSpec {
    EvalSpec {
        attribute: s.attribute,
        regularizer: s.reg.name().into(),
        gamma: s.gamma,
        seed: s.seed,
        batch_size: EVAL_BATCH,
    }
}

pub fn eval(s: &Settings) -> Result<MetricsReport> {
    let corpus = load_corpus(&s.out)?;
    let name = run_name(s.attribute, s.reg, s.gamma);
    let model = load_model(&s.out, &name)?;
    let ev = evaluate_model(&model, &corpus, &eval_spec(s))?;
    let rel = format!("results/{name}.csv");
    let mut m = ExperimentManifest::load(&s.out)?;
    write_text(&s.out, &rel, &format!("{RESULTS_HEADER}\n{}\n", ev.report.csv_row()))?;
    m.results.insert(name, rel.clone());
    m.record(&s.out, &rel)?;
    m.save(&s.out)?;
    println!("{RESULTS_HEADER}\n{}", ev.report.csv_row());
    Ok(ev.report)
}

/// Writes scatter and latent-density data for every trained run, and raw
/// against transformed attribute values for every fitted transform.
pub fn export_plots(s: &Settings) -> Result<()> {
    let corpus = load_corpus(&s.out)?;
    let m = ExperimentManifest::load(&s.out)?;
    let mut written = Vec::new();
    for (name, cfg) in &m.train_configs {
        let model = load_model(&s.out, name)?;
        let spec = EvalSpec {
            attribute: cfg.attribute,
            regularizer: cfg.regularizer.short_name().into(),
            gamma: cfg.gamma,
            seed: s.seed,
            batch_size: EVAL_BATCH,
        };
        let ev = evaluate_model(&model, &corpus, &spec)?;
        let scatter = format!("plots/{name}_scatter.csv");
        let density = format!("plots/{name}_density.csv");
        write_text(&s.out, &scatter, &scatter_to_csv(&ev.scatter))?;
        write_text(&s.out, &density, &density_to_csv(&ev.density))?;
        written.extend([scatter, density]);
    }
    if !m.transforms.is_empty() {
        let table = load_attributes(&s.out, &corpus)?;
        for attr in m.transforms.keys() {
            let kind: AttributeKind = attr.parse()?;
            let params = load_transform(&s.out, kind)?;
            let (_, raw) = table.values(kind, &corpus.indices(Split::Train))?;
            let transformed = apply_transform_batch(&params, &raw)?;
            let mut text = String::from("raw,transformed\n");
            for (a, t) in raw.iter().zip(&transformed) {
                text.push_str(&format!("{a:?},{t:?}\n"));
            }
            let rel = format!("plots/{attr}_distribution.csv");
            write_text(&s.out, &rel, &text)?;
            written.push(rel);
        }
    }
    if written.is_empty() {
        return Err(Error::Format("nothing to export: train a model or fit a transform first".into()));
    }
    for rel in &written {
        println!("{}", s.out.join(rel).display());
    }
    Ok(())
}

/// Gammas of the replication grid, weak then strong regularization.
pub const REPLICATE_GAMMAS: [f64; 2] = [1e-3, 1.0];

/// Synthesizes a corpus and trains and evaluates all six cells.
pub fn replicate(s: &Settings) -> Result<Vec<MetricsReport>> {
    synth(s)?;
    attributes(s)?;
    fit_transform(s)?;
    let mut reports = Vec::new();
    for gamma in REPLICATE_GAMMAS {
        for reg in Reg::ALL {
            let cell = Settings { reg, gamma, ..s.clone() };
            train(&cell)?;
            reports.push(eval(&cell)?);
        }
    }
    let mut table = format!("{RESULTS_HEADER}\n");
    for r in &reports {
        table.push_str(&r.csv_row());
        table.push('\n');
    }
    let mut m = ExperimentManifest::load(&s.out)?;
    write_text(&s.out, REPLICATE_FILE, &table)?;
    m.record(&s.out, REPLICATE_FILE)?;
    m.save(&s.out)?;
    println!("{}", table.trim_end());
    Ok(reports)
}
