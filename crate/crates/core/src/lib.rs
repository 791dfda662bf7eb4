//! Attribute-regularized variational bottleneck models for symbolic melodies.

pub mod attributes;
pub mod autograd;
pub mod error;
pub mod gaussianize;
pub mod melody;
pub mod metrics;
pub mod scalar;
pub mod smf;
pub mod vib;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision transform parameters.
pub type PowerTransform = gaussianize::PowerTransformParams<f64>;

/// Double-precision tensor.
pub type Tensor = autograd::Tensor<f64>;
/// Double-precision tape.
pub type Tape = autograd::Tape<f64>;
