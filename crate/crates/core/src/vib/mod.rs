//! Attribute-regularized variational bottleneck: a recurrent sequence
//! autoencoder whose loss adds a term tying one latent dimension to a
//! musical attribute.

mod loss;
mod model;
mod schedule;
mod train;

pub use loss::{
    ar_loss, ar_loss_nm, ar_loss_pl, ar_loss_pt, kld_loss, recon_loss, total_loss, AttributeStats, RegularizerKind,
};
pub use model::{argmax, reparameterize, reparameterize_values, LatentBatch, LatentVars, ModelConfig, VibModel, START_TOKEN};
pub use schedule::{beta_rate_for, beta_schedule, lr_schedule, tf_schedule};
pub use train::{log_to_csv, train, train_with_progress, LogRow, TrainConfig, TrainOutput, LOG_HEADER};
