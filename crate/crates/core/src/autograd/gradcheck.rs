use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Coordinates probed per check at most.
pub const MAX_PROBED_COORDINATES: usize = 200;

/// Outcome of [`finite_diff_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck<T> {
    pub max_relative_error: T,
    pub coordinates: usize,
    pub passed: bool,
}

/// Compares tape gradients with central differences.
///
/// `f` receives a fresh tape with `params` already pushed as leaves and
/// returns the scalar loss. Up to [`MAX_PROBED_COORDINATES`] coordinates
/// across all params are drawn with `seed`. The relative error of one
/// coordinate is `|a - n| / max(|a|, |n|, 1e-7)`, with the floor keeping
/// near-zero gradients from dividing noise by noise.
pub fn finite_diff_check<T, F>(f: F, params: &[Tensor<T>], h: T, tol: T, seed: u64) -> Result<GradCheck<T>>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor<T>]| -> Result<(Tape<T>, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok((tape, vars, loss))
    };
    let (tape, vars, loss) = eval(params)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor<T>> = vars.iter().map(|&v| grads.get(v)).collect();

    let total: usize = params.iter().map(|p| p.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, total, total.min(MAX_PROBED_COORDINATES)).into_vec();

    let floor = T::of(1e-7);
    let two = T::of(2.0);
    let mut worst = T::zero();
    let mut work = params.to_vec();
    for flat in picks {
        let (mut which, mut k) = (0, flat);
        while k >= params[which].len() {
            k -= params[which].len();
            which += 1;
        }
        let x0 = params[which].data()[k];
        work[which].data_mut()[k] = x0 + h;
        let (t, _, l) = eval(&work)?;
        let up = t.value(l).item()?;
        work[which].data_mut()[k] = x0 - h;
        let (t, _, l) = eval(&work)?;
        let down = t.value(l).item()?;
        work[which].data_mut()[k] = x0;

        let numeric = (up - down) / (two * h);
        let a = analytic[which].data()[k];
        if !numeric.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite(format!("gradient check at parameter {which}, coordinate {k}")));
        }
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    Ok(GradCheck { max_relative_error: worst, coordinates: total.min(MAX_PROBED_COORDINATES), passed: worst < tol })
}

/// Central-difference gradient of a plain function of a vector.
pub fn central_differences<T: Scalar>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (T::of(2.0) * h)
        })
        .collect()
}
