use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attributes::{AttributeKind, AttributeTable};
use crate::autograd::{adam_step, clip_global_norm, AdamState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::melody::{transpose, Corpus, Split, TokenMelody};
use crate::scalar::Scalar;

use super::loss::{ar_loss, kld_loss, recon_loss, total_loss, AttributeStats, RegularizerKind};
use super::model::{reparameterize, ModelConfig, VibModel};
use super::schedule::{beta_rate_for, beta_schedule, lr_schedule, tf_schedule};

// Independent random streams derived from the seed.
const STREAM_INIT: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_FORCING: u64 = 3;
const STREAM_TRANSPOSE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub model: ModelConfig,
    pub attribute: AttributeKind,
    pub regularizer: RegularizerKind,
    pub gamma: f64,
    pub beta_max: f64,
    /// Per-step KL anneal rate; `None` picks the rate reaching 99% of
    /// `beta_max` at 80% of the iterations.
    pub beta_rate: Option<f64>,
    pub lr_start: f64,
    pub lr_floor: f64,
    pub lr_decay: f64,
    pub teacher_forcing_k: f64,
    pub clip_norm: f64,
    /// Random transposition by up to this many semitones, 0 to disable.
    pub max_transpose: i32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            batch_size: 64,
            model: ModelConfig::default(),
            attribute: AttributeKind::Contour,
            regularizer: RegularizerKind::Nm,
            gamma: 1.0,
            beta_max: 1e-3,
            beta_rate: None,
            lr_start: 1e-2,
            lr_floor: 1e-5,
            lr_decay: 0.9999,
            teacher_forcing_k: 500.0,
            clip_norm: 1.0,
            max_transpose: 6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.regularizer.validate()?;
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be non-negative");
        }
        if !(self.beta_max >= 0.0 && self.beta_max.is_finite()) {
            return bad("beta_max must be non-negative");
        }
        if let Some(r) = self.beta_rate {
            if !(r > 0.0 && r < 1.0) {
                return bad("beta rate must lie in (0, 1)");
            }
        }
        if !(self.lr_start > 0.0 && self.lr_floor > 0.0 && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("learning-rate schedule must be positive with decay in (0, 1]");
        }
        if !(self.teacher_forcing_k > 1.0) {
            return bad("teacher forcing constant must exceed 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip norm must be positive");
        }
        if !(0..=12).contains(&self.max_transpose) {
            return bad("transposition range must be within an octave");
        }
        Ok(())
    }

    pub fn effective_beta_rate(&self) -> f64 {
        self.beta_rate.unwrap_or_else(|| beta_rate_for(0.8 * self.iterations as f64, 0.99))
    }
}

/// One training step's record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub recon: f64,
    pub kld: f64,
    pub ar: f64,
    pub beta: f64,
    pub lr: f64,
    pub tf_prob: f64,
    pub total: f64,
}

pub const LOG_HEADER: &str = "step,recon,kld,ar,beta,lr,tf_prob,total";

/// The training log as CSV, values in shortest round-trip form.
pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            r.step, r.recon, r.kld, r.ar, r.beta, r.lr, r.tf_prob, r.total
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub model: VibModel<T>,
    pub log: Vec<LogRow>,
    pub stats: AttributeStats,
}

/// Training melodies with a defined attribute value.
fn training_set(corpus: &Corpus, table: &AttributeTable, kind: AttributeKind) -> Result<(Vec<usize>, Vec<f64>)> {
    if table.len() != corpus.len() {
        return Err(Error::InvalidConfig(format!(
            "attribute table has {} rows for {} melodies",
            table.len(),
            corpus.len()
        )));
    }
    let (idx, vals) = table.values(kind, &corpus.indices(Split::Train))?;
    if idx.len() < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: idx.len() });
    }
    Ok((idx, vals))
}

/// Trains a model with the attribute-regularized objective.
pub fn train<T: Scalar>(cfg: &TrainConfig, corpus: &Corpus, table: &AttributeTable) -> Result<TrainOutput<T>> {
    train_with_progress(cfg, corpus, table, |_| {})
}

/// [`train`], calling `progress` after every step.
pub fn train_with_progress<T: Scalar>(
    cfg: &TrainConfig,
    corpus: &Corpus,
    table: &AttributeTable,
    mut progress: impl FnMut(&LogRow),
) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    let (train_idx, train_vals) = training_set(corpus, table, cfg.attribute)?;
    let stats = AttributeStats::from_values(&train_vals)?;

    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(s);
        r
    };
    let mut rng_batch = stream(STREAM_BATCH);
    let mut rng_noise = stream(STREAM_NOISE);
    let mut rng_forcing = stream(STREAM_FORCING);
    let mut rng_transpose = stream(STREAM_TRANSPOSE);
    let init_seed = stream(STREAM_INIT).random::<u64>();

    let mut model = VibModel::<T>::new(cfg.model.clone(), init_seed)?;
    let mut adam = AdamState::new(model.params.tensors(), T::of(cfg.lr_start));
    let beta_rate = cfg.effective_beta_rate();
    let (b, d, reg) = (cfg.batch_size, cfg.model.latent_dim, cfg.model.reg_index);
    let mut log = Vec::with_capacity(cfg.iterations as usize);

    for step in 0..cfg.iterations {
        let beta = beta_schedule(step, cfg.beta_max, beta_rate);
        let lr = lr_schedule(step, cfg.lr_start, cfg.lr_floor, cfg.lr_decay);
        let tf_prob = tf_schedule(step, cfg.teacher_forcing_k);
        adam.lr = T::of(lr);

        let mut batch: Vec<TokenMelody> = Vec::with_capacity(b);
        let mut attrs = Vec::with_capacity(b);
        for _ in 0..b {
            let k = rng_batch.random_range(0..train_idx.len());
            let m = &corpus.melodies[train_idx[k]];
            let shift = if cfg.max_transpose > 0 {
                rng_transpose.random_range(-cfg.max_transpose..=cfg.max_transpose)
            } else {
                0
            };
            // every supported attribute is transposition invariant
            batch.push(transpose(m, shift).unwrap_or(*m));
            attrs.push(train_vals[k]);
        }
        let noise = Tensor::from_fn(b, d, |_, _| T::of(rng_noise.sample::<f64, _>(StandardNormal)));

        let mut tape = Tape::new();
        let p = model.bind(&mut tape);
        let lat = model.encode(&mut tape, &p, &batch)?;
        let z = reparameterize(&mut tape, lat, noise)?;
        let logits = model.decode(&mut tape, &p, z, Some(&batch), tf_prob, &mut rng_forcing)?;
        let recon = recon_loss(&mut tape, &logits, &batch)?;
        let kld = kld_loss(&mut tape, lat.means, lat.log_variances)?;
        let z_col = tape.slice_cols(z, reg, reg + 1)?;
        let ar = ar_loss(&mut tape, &cfg.regularizer, z_col, &attrs, &stats)?;
        let total = total_loss(&mut tape, recon, kld, ar, T::of(beta), T::of(cfg.gamma))?;

        let value = |v| tape.value(v).item().map(|x: T| x.to_f64_lossy());
        let row = LogRow {
            step,
            recon: value(recon)?,
            kld: value(kld)?,
            ar: value(ar)?,
            beta,
            lr,
            tf_prob,
            total: value(total)?,
        };
        if !row.total.is_finite() {
            return Err(Error::NonFinite(format!("loss at step {step}")));
        }

        let mut grads_all = tape.backward(total)?;
        let mut grads: Vec<Tensor<T>> = p.vars().iter().map(|&v| grads_all.take(v)).collect();
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at step {step}")));
        }
        clip_global_norm(&mut grads, T::of(cfg.clip_norm));
        adam_step(model.params.tensors_mut(), &grads, &mut adam)?;

        if step % 100 == 0 {
            log::debug!(
                "step {step}: recon {:.4} kld {:.4} ar {:.4} total {:.4}",
                row.recon,
                row.kld,
                row.ar,
                row.total
            );
        }
        progress(&row);
        log.push(row);
    }
    Ok(TrainOutput { model, log, stats })
}
