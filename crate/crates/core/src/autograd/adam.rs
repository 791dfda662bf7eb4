use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Adam moments and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments shaped like `params`, with beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn new(params: &[Tensor<T>], lr: T) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect::<Vec<_>>();
        Self { lr, beta1: T::of(0.9), beta2: T::of(0.999), eps: T::of(1e-8), step: 0, m: zeros(), v: zeros() }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Tensor<T>] {
        &self.v
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Scalar>(params: &mut [Tensor<T>], grads: &[Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        p.same_shape(g, "adam gradient")?;
        p.same_shape(m, "adam moment")?;
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (k, x) in p.data_mut().iter_mut().enumerate() {
            m[k] = b1 * m[k] + (T::one() - b1) * g[k];
            v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *x -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: T) -> T {
    let norm = grads.iter().map(|g| g.squared_norm()).sum::<T>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale_in_place(s));
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut params = vec![Tensor::column(vec![1.0f64, -2.0])];
        let mut state = AdamState::new(&params, 1e-3);
        adam_step(&mut params, &[Tensor::column(vec![1.0, 1.0])], &mut state).unwrap();
        let before = params.clone();
        let m_before = state.first_moments()[0].clone();
        adam_step(&mut params, &[Tensor::zeros(2, 1)], &mut state).unwrap();
        // the moment carries over, so params still move; with fresh state they must not
        let m_after = &state.first_moments()[0];
        for (a, b) in m_after.data().iter().zip(m_before.data()) {
            assert!((a - 0.9 * b).abs() < 1e-15);
        }
        assert_eq!(state.step(), 2);

        let mut fresh = vec![Tensor::column(vec![1.0f64, -2.0])];
        let mut s = AdamState::new(&fresh, 1e-3);
        adam_step(&mut fresh, &[Tensor::zeros(2, 1)], &mut s).unwrap();
        assert_eq!(fresh[0].data(), &[1.0, -2.0]);
        assert_ne!(before, params);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = vec![Tensor::full(3, 2, 0.5f64)];
        let mut state = AdamState::new(&params, 1e-3);
        adam_step(&mut params, &[Tensor::full(3, 2, 1.0)], &mut state).unwrap();
        for &x in params[0].data() {
            assert!(((0.5 - x) - 1e-3).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn converges_on_squared_norm() {
        let mut params = vec![Tensor::full(4, 1, 1.0f64)];
        let mut state = AdamState::new(&params, 0.05);
        for _ in 0..200 {
            let g = params[0].map(|x| 2.0 * x);
            adam_step(&mut params, &[g], &mut state).unwrap();
        }
        assert!(params[0].squared_norm().sqrt() < 0.1, "{:?}", params[0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = vec![Tensor::zeros(2, 2)];
        let mut state = AdamState::<f64>::new(&params, 1e-3);
        assert!(adam_step(&mut params, &[Tensor::zeros(4, 1)], &mut state).is_err());
        assert!(adam_step(&mut params, &[], &mut state).is_err());
    }

    #[test]
    fn clipping_caps_the_joint_norm() {
        let mut g = vec![Tensor::column(vec![3.0f64]), Tensor::column(vec![4.0])];
        let norm = clip_global_norm(&mut g, 1.0);
        assert_eq!(norm, 5.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15 && (g[1].data()[0] - 0.8).abs() < 1e-15);
        let mut small = vec![Tensor::column(vec![0.1f64])];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small[0].data(), &[0.1]);
    }
}
