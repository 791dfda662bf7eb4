use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{load_checkpoint, save_checkpoint, uniform_init, Bound, GruCell, Linear, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::melody::{TokenMelody, STEPS, VOCAB};
use crate::scalar::Scalar;

/// Row of the embedding table fed to the decoder before the first step.
pub const START_TOKEN: usize = VOCAB;

/// Layer sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent_dim: usize,
    /// Latent dimension tied to the attribute.
    pub reg_index: usize,
    pub embed_dim: usize,
    /// Per direction.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { latent_dim: 16, reg_index: 0, embed_dim: 16, encoder_hidden: 32, decoder_hidden: 64 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.embed_dim == 0 || self.encoder_hidden == 0 || self.decoder_hidden == 0 {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        if self.reg_index >= self.latent_dim {
            return Err(Error::InvalidConfig(format!(
                "regularized index {} outside latent dimension {}",
                self.reg_index, self.latent_dim
            )));
        }
        Ok(())
    }
}

/// Posterior means and log-variances, `B x D` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch<T> {
    pub means: Tensor<T>,
    pub log_variances: Tensor<T>,
}

/// Tape handles for a [`LatentBatch`].
#[derive(Debug, Clone, Copy)]
pub struct LatentVars {
    pub means: Var,
    pub log_variances: Var,
}

/// Bidirectional GRU encoder and autoregressive GRU decoder.
#[derive(Debug, Clone)]
pub struct VibModel<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    embedding: ParamId,
    encoder_forward: GruCell,
    encoder_backward: GruCell,
    latent_head: Linear,
    decoder_init: Linear,
    decoder: GruCell,
    /// The latent part of the decoder input; the step input is `[token embedding, z]`.
    decoder_latent: ParamId,
    /// Per-step input bias, so the decoder knows its place in the bar.
    decoder_position: ParamId,
    output: Linear,
}

impl<T: Scalar> VibModel<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = &config;
        let embedding = store.add("embedding", uniform_init(VOCAB + 1, c.embed_dim, 1, &mut rng))?;
        let encoder_forward = GruCell::new(&mut store, "encoder.forward", c.embed_dim, c.encoder_hidden, &mut rng)?;
        let encoder_backward = GruCell::new(&mut store, "encoder.backward", c.embed_dim, c.encoder_hidden, &mut rng)?;
        let latent_head = Linear::new(&mut store, "latent", 2 * c.encoder_hidden, 2 * c.latent_dim, &mut rng)?;
        let decoder_init = Linear::new(&mut store, "decoder.init", c.latent_dim, c.decoder_hidden, &mut rng)?;
        let decoder = GruCell::new(&mut store, "decoder", c.embed_dim, c.decoder_hidden, &mut rng)?;
        let decoder_latent = store.add(
            "decoder.latent_weight",
            uniform_init(c.latent_dim, 3 * c.decoder_hidden, c.decoder_hidden, &mut rng),
        )?;
        let decoder_position = store.add(
            "decoder.position",
            uniform_init(STEPS, 3 * c.decoder_hidden, c.decoder_hidden, &mut rng),
        )?;
        let output = Linear::new(&mut store, "output", c.decoder_hidden, VOCAB, &mut rng)?;
        Ok(Self {
            config,
            params: store,
            embedding,
            encoder_forward,
            encoder_backward,
            latent_head,
            decoder_init,
            decoder,
            decoder_latent,
            decoder_position,
            output,
        })
    }

    /// Saves parameters with the layer sizes and `extra` in the manifest.
    pub fn save(&self, dir: &Path, extra: serde_json::Value) -> Result<()> {
        let meta = serde_json::json!({ "model": self.config, "extra": extra });
        save_checkpoint(dir, &self.params, meta)?;
        Ok(())
    }

    /// Loads a checkpoint written by [`VibModel::save`]; returns the `extra` metadata too.
    pub fn load(dir: &Path) -> Result<(Self, serde_json::Value)> {
        let (store, manifest) = load_checkpoint::<T>(dir)?;
        let config: ModelConfig = serde_json::from_value(manifest.metadata["model"].clone())?;
        let mut model = Self::new(config, 0)?;
        model.params.check_layout(&store)?;
        model.params = store;
        Ok((model, manifest.metadata["extra"].clone()))
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> Bound {
        self.params.bind(tape)
    }

    /// Runs both encoder directions and maps the final states to the posterior.
    pub fn encode(&self, tape: &mut Tape<T>, p: &Bound, batch: &[TokenMelody]) -> Result<LatentVars> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let b = batch.len();
        let table = p.var(self.embedding);
        let fwd_table = self.encoder_forward.project_input(tape, p, table)?;
        let bwd_table = self.encoder_backward.project_input(tape, p, table)?;
        let mut hf = tape.constant(Tensor::zeros(b, self.config.encoder_hidden));
        let mut hb = hf;
        for t in 0..STEPS {
            let tokens: Vec<usize> = batch.iter().map(|m| m.tokens()[t] as usize).collect();
            let xf = tape.gather_rows(fwd_table, &tokens)?;
            hf = self.encoder_forward.step_projected(tape, p, xf, hf)?;

            let rev: Vec<usize> = batch.iter().map(|m| m.tokens()[STEPS - 1 - t] as usize).collect();
            let xb = tape.gather_rows(bwd_table, &rev)?;
            hb = self.encoder_backward.step_projected(tape, p, xb, hb)?;
        }
        let h = tape.concat_cols(&[hf, hb])?;
        let head = self.latent_head.forward(tape, p, h)?;
        let d = self.config.latent_dim;
        Ok(LatentVars { means: tape.slice_cols(head, 0, d)?, log_variances: tape.slice_cols(head, d, 2 * d)? })
    }

    /// Decodes all 64 steps from `z`, returning one `B x 130` logit block per step.
    ///
    /// At each step and for each sequence the ground-truth previous token is
    /// fed with probability `tf_prob`, otherwise the previous argmax. Without
    /// `targets` decoding is free-running.
    pub fn decode<R: Rng>(
        &self,
        tape: &mut Tape<T>,
        p: &Bound,
        z: Var,
        targets: Option<&[TokenMelody]>,
        tf_prob: f64,
        rng: &mut R,
    ) -> Result<Vec<Var>> {
        let [b, d] = tape.shape(z);
        if d != self.config.latent_dim {
            return Err(Error::Shape(format!("latent width {d}, model expects {}", self.config.latent_dim)));
        }
        if let Some(t) = targets {
            if t.len() != b {
                return Err(Error::Shape(format!("{} targets for {b} latents", t.len())));
            }
        }
        if !(0.0..=1.0).contains(&tf_prob) {
            return Err(Error::InvalidConfig(format!("teacher forcing probability {tf_prob}")));
        }
        let table = self.decoder.project_input(tape, p, p.var(self.embedding))?;
        let latent_in = tape.matmul(z, p.var(self.decoder_latent))?;
        let position = p.var(self.decoder_position);
        let h0 = self.decoder_init.forward(tape, p, z)?;
        let mut h = tape.tanh(h0);

        let mut prev = vec![START_TOKEN; b];
        let mut logits = Vec::with_capacity(STEPS);
        for t in 0..STEPS {
            let x = tape.gather_rows(table, &prev)?;
            let x = tape.add(x, latent_in)?;
            let at = tape.gather_rows(position, &vec![t; b])?;
            let x = tape.add(x, at)?;
            h = self.decoder.step_projected(tape, p, x, h)?;
            let y = self.output.forward(tape, p, h)?;
            let values = tape.value(y);
            for (k, slot) in prev.iter_mut().enumerate() {
                let forced = rng.random::<f64>() < tf_prob;
                *slot = match targets {
                    Some(tg) if forced => tg[k].tokens()[t] as usize,
                    _ => argmax(values.row(k)),
                };
            }
            logits.push(y);
        }
        Ok(logits)
    }

    /// Posterior parameters without recording gradients.
    pub fn encode_values(&self, batch: &[TokenMelody]) -> Result<LatentBatch<T>> {
        let mut tape = Tape::new();
        let p = self.bind_constants(&mut tape);
        let lat = self.encode(&mut tape, &p, batch)?;
        Ok(LatentBatch {
            means: tape.value(lat.means).clone(),
            log_variances: tape.value(lat.log_variances).clone(),
        })
    }

    /// Greedy free-running decoding of each row of `z`.
    pub fn decode_greedy(&self, z: &Tensor<T>) -> Result<Vec<TokenMelody>> {
        let mut tape = Tape::new();
        let p = self.bind_constants(&mut tape);
        let zv = tape.constant(z.clone());
        // no randomness is consumed when teacher forcing is off
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = self.decode(&mut tape, &p, zv, None, 0.0, &mut rng)?;
        let mut out = vec![[0u8; STEPS]; z.rows()];
        for (t, y) in logits.iter().enumerate() {
            let v = tape.value(*y);
            for (r, row) in out.iter_mut().enumerate() {
                row[t] = argmax(v.row(r)) as u8;
            }
        }
        Ok(out.iter().map(|tokens| TokenMelody::from_tokens_lossy(tokens)).collect())
    }

    fn bind_constants(&self, tape: &mut Tape<T>) -> Bound {
        Bound::from_vars(self.params.tensors().iter().map(|t| tape.constant(t.clone())).collect())
    }
}

/// `mu + exp(logvar / 2) * noise`.
pub fn reparameterize<T: Scalar>(tape: &mut Tape<T>, lat: LatentVars, noise: Tensor<T>) -> Result<Var> {
    let noise = tape.constant(noise);
    let half = tape.scale(lat.log_variances, T::of(0.5));
    let sd = tape.exp(half);
    let spread = tape.mul(sd, noise)?;
    tape.add(lat.means, spread)
}

/// `reparameterize` on plain values.
pub fn reparameterize_values<T: Scalar>(lat: &LatentBatch<T>, noise: &Tensor<T>) -> Result<Tensor<T>> {
    lat.means.same_shape(noise, "reparameterize")?;
    let data = lat
        .means
        .data()
        .iter()
        .zip(lat.log_variances.data())
        .zip(noise.data())
        .map(|((&m, &lv), &e)| m + (T::of(0.5) * lv).exp() * e)
        .collect();
    Tensor::new(noise.rows(), noise.cols(), data)
}

/// Index of the largest value; the first on ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
