//! Step-indexed schedules for the KL weight, learning rate and teacher forcing.

use crate::scalar::Scalar;

/// `beta_max * (1 - rate^step)`.
pub fn beta_schedule<T: Scalar>(step: u64, beta_max: T, rate: T) -> T {
    beta_max * (T::one() - rate.powf(T::of(step as f64)))
}

/// Rate at which the KL weight reaches `fraction_of_max` of its ceiling after
/// `at_step` steps.
pub fn beta_rate_for(at_step: f64, fraction_of_max: f64) -> f64 {
    (1.0 - fraction_of_max).powf(1.0 / at_step.max(1.0))
}

/// `max(floor, start * decay^step)`.
pub fn lr_schedule<T: Scalar>(step: u64, start: T, floor: T, decay: T) -> T {
    (start * decay.powf(T::of(step as f64))).max(floor)
}

/// Inverse-sigmoid decay `k / (k + exp(step / k))`.
pub fn tf_schedule<T: Scalar>(step: u64, k: T) -> T {
    k / (k + (T::of(step as f64) / k).exp())
}
