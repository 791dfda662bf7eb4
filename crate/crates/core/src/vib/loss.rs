use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gaussianize::{apply_transform, PowerTransformParams};
use crate::melody::TokenMelody;
use crate::scalar::Scalar;

/// Training-split mean and standard deviation of the raw attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub mean: f64,
    pub std: f64,
}

impl AttributeStats {
    /// Population moments of `values`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SampleTooSmall { need: 1, got: 0 });
        }
        let (mean, std) = crate::scalar::mean_std(values);
        let stats = Self { mean, std };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if self.std > 0.0 && self.std.is_finite() && self.mean.is_finite() {
            Ok(())
        } else {
            Err(Error::Degenerate(format!("attribute std {}", self.std)))
        }
    }

    pub fn z_score(&self, a: f64) -> f64 {
        (a - self.mean) / self.std
    }
}

/// Which attribute-regularization loss ties the attribute to the latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerKind {
    /// MAE against the attribute's z-score.
    Nm,
    /// Pairwise ordering loss `MAE(tanh(delta * Dz), sign(Da))`.
    Pl { delta: f64 },
    /// MAE against the power-transformed attribute.
    Pt { params: PowerTransformParams<f64> },
}

impl RegularizerKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            Self::Nm => "nm",
            Self::Pl { .. } => "pl",
            Self::Pt { .. } => "pt",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Pl { delta } if !(*delta > 0.0 && delta.is_finite()) => {
                Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")))
            }
            _ => Ok(()),
        }
    }
}

/// Mean token cross-entropy over batch and steps.
pub fn recon_loss<T: Scalar>(tape: &mut Tape<T>, logits: &[Var], targets: &[TokenMelody]) -> Result<Var> {
    let mut total: Option<Var> = None;
    for (t, &y) in logits.iter().enumerate() {
        let tg: Vec<usize> = targets.iter().map(|m| m.tokens()[t] as usize).collect();
        let ce = tape.softmax_cross_entropy(y, &tg)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, ce)?,
            None => ce,
        });
    }
    let total = total.ok_or_else(|| Error::Shape("no decoder steps".into()))?;
    Ok(tape.scale(total, T::one() / T::of_usize(logits.len())))
}

/// KL divergence of the diagonal posterior from the standard normal, averaged over the batch.
pub fn kld_loss<T: Scalar>(tape: &mut Tape<T>, means: Var, log_variances: Var) -> Result<Var> {
    let [b, d] = tape.shape(means);
    let mu2 = tape.mul(means, means)?;
    let var = tape.exp(log_variances);
    let s = tape.sub(log_variances, mu2)?;
    let s = tape.sub(s, var)?;
    let s = tape.sum(s);
    // -1/2 * (B*D + s) / B
    Ok(tape.affine(s, T::of(-0.5) / T::of_usize(b), T::of(-0.5) * T::of_usize(d)))
}

fn mae_to_constant<T: Scalar>(tape: &mut Tape<T>, z_col: Var, target: Vec<T>) -> Result<Var> {
    let [rows, cols] = tape.shape(z_col);
    if cols != 1 || rows != target.len() {
        return Err(Error::Shape(format!("{rows}x{cols} latent column against {} targets", target.len())));
    }
    let c = tape.constant(Tensor::column(target));
    let d = tape.sub(z_col, c)?;
    let d = tape.abs(d);
    Ok(tape.mean(d))
}

/// `mean |z - zscore(a)|`.
pub fn ar_loss_nm<T: Scalar>(tape: &mut Tape<T>, z_col: Var, a: &[f64], stats: &AttributeStats) -> Result<Var> {
    stats.validate()?;
    mae_to_constant(tape, z_col, a.iter().map(|&v| T::of(stats.z_score(v))).collect())
}

/// `mean |tanh(delta * (z_j - z_k)) - sign(a_j - a_k)|` over all ordered pairs.
pub fn ar_loss_pl<T: Scalar>(tape: &mut Tape<T>, z_col: Var, a: &[f64], delta: f64) -> Result<Var> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    let n = a.len();
    if tape.shape(z_col) != [n, 1] {
        return Err(Error::Shape(format!("latent column {:?} against {n} attributes", tape.shape(z_col))));
    }
    let dz = tape.pairwise_diff(z_col)?;
    let scaled = tape.scale(dz, T::of(delta));
    let squashed = tape.tanh(scaled);
    let signs = Tensor::from_fn(n, n, |j, k| {
        let d = a[j] - a[k];
        if d > 0.0 {
            T::one()
        } else if d < 0.0 {
            -T::one()
        } else {
            T::zero()
        }
    });
    let signs = tape.constant(signs);
    let diff = tape.sub(squashed, signs)?;
    let diff = tape.abs(diff);
    Ok(tape.mean(diff))
}

/// `mean |z - T(a)|` with a fitted power transform `T`.
pub fn ar_loss_pt<T: Scalar>(
    tape: &mut Tape<T>,
    z_col: Var,
    a: &[f64],
    params: &PowerTransformParams<f64>,
) -> Result<Var> {
    let target = a.iter().map(|&v| apply_transform(params, v).map(T::of)).collect::<Result<Vec<T>>>()?;
    mae_to_constant(tape, z_col, target)
}

/// The regularizer selected by `kind`.
pub fn ar_loss<T: Scalar>(
    tape: &mut Tape<T>,
    kind: &RegularizerKind,
    z_col: Var,
    a: &[f64],
    stats: &AttributeStats,
) -> Result<Var> {
    match kind {
        RegularizerKind::Nm => ar_loss_nm(tape, z_col, a, stats),
        RegularizerKind::Pl { delta } => ar_loss_pl(tape, z_col, a, *delta),
        RegularizerKind::Pt { params } => ar_loss_pt(tape, z_col, a, params),
    }
}

/// `recon + beta * kld + gamma * ar`. Zero weights leave their term out of the graph.
pub fn total_loss<T: Scalar>(tape: &mut Tape<T>, recon: Var, kld: Var, ar: Var, beta: T, gamma: T) -> Result<Var> {
    if beta < T::zero() || gamma < T::zero() {
        return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
    }
    let mut total = recon;
    if beta > T::zero() {
        let k = tape.scale(kld, beta);
        total = tape.add(total, k)?;
    }
    if gamma > T::zero() {
        let r = tape.scale(ar, gamma);
        total = tape.add(total, r)?;
    }
    Ok(total)
}
