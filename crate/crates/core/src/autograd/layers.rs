use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::Result;
use crate::scalar::Scalar;

use super::params::{Bound, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_init<T: Scalar, R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Tensor::from_fn(rows, cols, |_, _| T::of(dist.sample(rng)))
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add(format!("{name}.weight"), uniform_init(inputs, outputs, inputs, rng))?;
        let bias = store.add(format!("{name}.bias"), uniform_init(1, outputs, inputs, rng))?;
        Ok(Self { weight, bias, inputs, outputs })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, p.var(self.weight))?;
        tape.add_row(xw, p.var(self.bias))
    }
}

/// Gated recurrent unit.
///
/// Gates are packed column-wise as `[reset | update | candidate]`:
/// `r = s(x Wr + h Ur + br)`, `u = s(x Wu + h Uu + bu)`,
/// `n = tanh(x Wn + bn + r * (h Un))`, `h' = n + u * (h - n)`.
#[derive(Debug, Clone, Copy)]
pub struct GruCell {
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let input_weight = store.add(format!("{name}.input_weight"), uniform_init(inputs, 3 * hidden, hidden, rng))?;
        let hidden_weight = store.add(format!("{name}.hidden_weight"), uniform_init(hidden, 3 * hidden, hidden, rng))?;
        let bias = store.add(format!("{name}.bias"), uniform_init(1, 3 * hidden, hidden, rng))?;
        Ok(Self { input_weight, hidden_weight, bias, inputs, hidden })
    }

    /// `x W + b` for a block of inputs; rows may cover several time steps.
    pub fn project_input<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, p.var(self.input_weight))?;
        tape.add_row(xw, p.var(self.bias))
    }

    /// One step given the already projected input `x W + b`.
    pub fn step_projected<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, xp: Var, h: Var) -> Result<Var> {
        let k = self.hidden;
        let hu = tape.matmul(h, p.var(self.hidden_weight))?;
        let x_gates = tape.slice_cols(xp, 0, 2 * k)?;
        let h_gates = tape.slice_cols(hu, 0, 2 * k)?;
        let pre = tape.add(x_gates, h_gates)?;
        let gates = tape.sigmoid(pre);
        let r = tape.slice_cols(gates, 0, k)?;
        let u = tape.slice_cols(gates, k, 2 * k)?;
        let xn = tape.slice_cols(xp, 2 * k, 3 * k)?;
        let hn = tape.slice_cols(hu, 2 * k, 3 * k)?;
        let rhn = tape.mul(r, hn)?;
        let npre = tape.add(xn, rhn)?;
        let n = tape.tanh(npre);
        let diff = tape.sub(h, n)?;
        let carry = tape.mul(u, diff)?;
        tape.add(n, carry)
    }

    pub fn step<T: Scalar>(&self, tape: &mut Tape<T>, p: &Bound, x: Var, h: Var) -> Result<Var> {
        let xp = self.project_input(tape, p, x)?;
        self.step_projected(tape, p, xp, h)
    }
}
