//! Dense reverse-mode automatic differentiation, recurrent layers, Adam and
//! parameter checkpoints.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, clip_global_norm, AdamState};
pub use checkpoint::{
    load_checkpoint, read_manifest, save_checkpoint, write_atomic, CheckpointManifest, ManifestEntry, MANIFEST_FILE,
    PARAMS_FILE,
};
pub use gradcheck::{central_differences, finite_diff_check, GradCheck, MAX_PROBED_COORDINATES};
pub use layers::{uniform_init, GruCell, Linear};
pub use params::{Bound, ParamId, ParamStore};
pub use tape::{sigmoid, Gradients, Tape, Var, EXP_CLAMP, LOG_FLOOR};
pub use tensor::Tensor;
