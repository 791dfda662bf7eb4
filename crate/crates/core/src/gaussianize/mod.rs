//! Invertible Gaussianization of a scalar attribute.
//!
//! The transform is a two-parameter Box-Cox power transform followed by a
//! normalization with frozen statistics:
//!
//! ```text
//! T(a) = (g(a) - mu) / sqrt(sigma^2 + eps)
//! g(u) = ((u + l2)^l1 - 1) / l1      (l1 != 0)
//!      = ln(u + l2)                  (l1 == 0)
//! ```
//!
//! The power `l1` is the profile maximum-likelihood estimate for each shift
//! `l2` of a grid; the grid point whose normalized output is closest to
//! Gaussian (lowest approximate negentropy) wins.

mod brent;

pub use brent::{brent_minimize, brent_minimize_capped, BrentMinimum, DEFAULT_MAX_ITER};

use serde::{Deserialize, Serialize};

use crate::attributes::AttributeKind;
use crate::error::{Error, Result};
use crate::scalar::{mean_std, Scalar};

/// Normalization constant added to the variance.
pub const DEFAULT_EPSILON: f64 = 1e-8;
/// Search interval for the power parameter.
pub const LAMBDA1_BRACKET: (f64, f64) = (-3.0, 3.0);
/// Shift values tried by [`fit_power_transform`] (infeasible ones are dropped).
pub const DEFAULT_LAMBDA2_GRID: [f64; 8] = [0.0, 1e-3, 1e-2, 1e-1, 0.5, 1.0, 2.0, 5.0];

/// Fitted parameters of the attribute transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTransformParams<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub mu: T,
    pub sigma: T,
    pub epsilon: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_kind: Option<AttributeKind>,
}

impl<T: Scalar> PowerTransformParams<T> {
    /// Smallest admissible input: inputs must exceed `-lambda2`.
    pub fn domain_lower_bound(&self) -> T {
        -self.lambda2
    }

    fn scale(&self) -> T {
        (self.sigma * self.sigma + self.epsilon).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if !(p.sigma > T::zero()) || !(p.epsilon > T::zero()) || p.lambda2 < T::zero() {
            return Err(Error::Format("transform parameters violate sigma > 0, eps > 0, lambda2 >= 0".into()));
        }
        Ok(p)
    }
}

/// Two-parameter Box-Cox transform.
pub fn box_cox<T: Scalar>(u: T, lambda1: T, lambda2: T) -> Result<T> {
    let s = u + lambda2;
    if !(s > T::zero()) {
        return Err(Error::Domain(format!("box-cox needs u + lambda2 > 0, got {s}")));
    }
    if lambda1 == T::zero() {
        Ok(s.ln())
    } else {
        Ok((lambda1 * s.ln()).exp_m1() / lambda1)
    }
}

pub fn inverse_box_cox<T: Scalar>(v: T, lambda1: T, lambda2: T) -> Result<T> {
    if lambda1 == T::zero() {
        return Ok(v.exp() - lambda2);
    }
    let base = lambda1 * v;
    if !(base > -T::one()) {
        return Err(Error::Domain(format!("inverse box-cox needs lambda1 * v + 1 > 0, got {}", base + T::one())));
    }
    Ok((base.ln_1p() / lambda1).exp() - lambda2)
}

/// Box-Cox profile negative log-likelihood, constants dropped:
/// `(n/2) ln var(g(x)) - (l1 - 1) sum ln(x + l2)`.
pub fn box_cox_nll<T: Scalar>(data: &[T], lambda1: T, lambda2: T) -> Result<T> {
    if data.len() < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: data.len() });
    }
    let transformed = data
        .iter()
        .map(|&u| box_cox(u, lambda1, lambda2))
        .collect::<Result<Vec<T>>>()?;
    let (_, sd) = mean_std(&transformed);
    let var = sd * sd;
    if !(var > T::zero()) || !var.is_finite() {
        return Err(Error::Degenerate(format!("transformed sample variance is {var}")));
    }
    let log_jacobian: T = data.iter().map(|&u| (u + lambda2).ln()).sum();
    let n = T::of_usize(data.len());
    Ok(T::of(0.5) * n * var.ln() - (lambda1 - T::one()) * log_jacobian)
}

/// Approximate negentropy `(E[psi(v)] - E[psi(nu)])^2` with
/// `psi(u) = -exp(-u^2/2)`, `nu ~ N(0, 1)` and `v` the standardized sample.
pub fn negentropy<T: Scalar>(samples: &[T]) -> Result<T> {
    if samples.len() < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: samples.len() });
    }
    let (m, sd) = mean_std(samples);
    if !(sd > T::zero()) {
        return Err(Error::Degenerate("constant sample has no negentropy".into()));
    }
    let half = T::of(0.5);
    let e_psi = samples
        .iter()
        .map(|&x| {
            let v = (x - m) / sd;
            -(-half * v * v).exp()
        })
        .sum::<T>()
        / T::of_usize(samples.len());
    // E[-exp(-nu^2/2)] = -1/sqrt(2) for a standard normal
    let d = e_psi + T::FRAC_1_SQRT_2();
    Ok(d * d)
}

/// One evaluated grid point of the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitCandidate<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub nll: T,
    pub negentropy: T,
}

/// Grid search over the shift, Brent search over the power, negentropy selection.
pub fn fit_power_transform<T: Scalar>(samples: &[T], lambda2_grid: &[T], tol: T) -> Result<PowerTransformParams<T>> {
    fit_power_transform_detailed(samples, lambda2_grid, tol).map(|(p, _)| p)
}

/// As [`fit_power_transform`], also returning every feasible candidate.
pub fn fit_power_transform_detailed<T: Scalar>(
    samples: &[T],
    lambda2_grid: &[T],
    tol: T,
) -> Result<(PowerTransformParams<T>, Vec<FitCandidate<T>>)> {
    if samples.len() < 10 {
        return Err(Error::SampleTooSmall { need: 10, got: samples.len() });
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("sample value {bad}")));
    }
    let min = samples.iter().copied().fold(T::infinity(), T::min);
    let bracket = (T::of(LAMBDA1_BRACKET.0), T::of(LAMBDA1_BRACKET.1));

    let mut candidates = Vec::new();
    for &lambda2 in lambda2_grid.iter().filter(|&&l2| l2 >= T::zero() && min + l2 > T::zero()) {
        let fit = brent_minimize(
            |l1| box_cox_nll(samples, l1, lambda2).unwrap_or(T::max_value()),
            bracket,
            tol,
        )?;
        if fit.fx == T::max_value() {
            continue;
        }
        let transformed = samples
            .iter()
            .map(|&u| box_cox(u, fit.x, lambda2))
            .collect::<Result<Vec<T>>>()?;
        match negentropy(&transformed) {
            Ok(j) if j.is_finite() => candidates.push(FitCandidate {
                lambda1: fit.x,
                lambda2,
                nll: fit.fx,
                negentropy: j,
            }),
            _ => log::debug!("dropping degenerate candidate lambda2 = {lambda2}"),
        }
    }

    // first minimum wins on ties, so grid order breaks them
    let best = candidates
        .iter()
        .copied()
        .reduce(|best, c| if c.negentropy < best.negentropy { c } else { best })
        .ok_or_else(|| Error::Domain("no feasible lambda2 in grid".into()))?;

    let transformed = samples
        .iter()
        .map(|&u| box_cox(u, best.lambda1, best.lambda2))
        .collect::<Result<Vec<T>>>()?;
    let (mu, sigma) = mean_std(&transformed);
    if !(sigma > T::zero()) {
        return Err(Error::Degenerate("transformed sample is constant".into()));
    }
    Ok((
        PowerTransformParams {
            lambda1: best.lambda1,
            lambda2: best.lambda2,
            mu,
            sigma,
            epsilon: T::of(DEFAULT_EPSILON),
            attribute_kind: None,
        },
        candidates,
    ))
}

/// `T(a) = (g(a) - mu) / sqrt(sigma^2 + eps)`.
pub fn apply_transform<T: Scalar>(p: &PowerTransformParams<T>, a: T) -> Result<T> {
    Ok((box_cox(a, p.lambda1, p.lambda2)? - p.mu) / p.scale())
}

pub fn invert_transform<T: Scalar>(p: &PowerTransformParams<T>, t: T) -> Result<T> {
    inverse_box_cox(t * p.scale() + p.mu, p.lambda1, p.lambda2)
}

/// Batch-statistics variant: normalizes `g(a)` with the batch's own mean and
/// standard deviation instead of the frozen fit-time values.
pub fn apply_transform_batch<T: Scalar>(p: &PowerTransformParams<T>, batch: &[T]) -> Result<Vec<T>> {
    let g = batch
        .iter()
        .map(|&a| box_cox(a, p.lambda1, p.lambda2))
        .collect::<Result<Vec<T>>>()?;
    let (m, s) = mean_std(&g);
    let scale = (s * s + p.epsilon).sqrt();
    Ok(g.into_iter().map(|x| (x - m) / scale).collect())
}

/// Yeo-Johnson power transform, defined on the whole real line.
pub fn yeo_johnson<T: Scalar>(u: T, lambda1: T) -> T {
    let two = T::of(2.0);
    if u >= T::zero() {
        if lambda1 == T::zero() {
            u.ln_1p()
        } else {
            (lambda1 * u.ln_1p()).exp_m1() / lambda1
        }
    } else if lambda1 == two {
        -(-u).ln_1p()
    } else {
        let p = two - lambda1;
        -(p * (-u).ln_1p()).exp_m1() / p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn box_cox_examples() {
        assert_eq!(box_cox(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((box_cox(5.0f64, 1.0, 0.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((box_cox(3.0f64, 2.0, 0.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(box_cox(-1.0, 1.0, 0.5), Err(Error::Domain(_))));
        assert!(box_cox(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn inverse_box_cox_examples() {
        assert!((inverse_box_cox(4.0f64, 1.0, 0.0).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(inverse_box_cox(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(inverse_box_cox(-1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn box_cox_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let us = Uniform::new(0.0f64, 50.0).unwrap();
        let l1s = Uniform::new(-3.0f64, 3.0).unwrap();
        let l2s = Uniform::new(0.0f64, 5.0).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let (u, l1, l2) = (us.sample(&mut rng), l1s.sample(&mut rng), l2s.sample(&mut rng));
            let back = inverse_box_cox(box_cox(u, l1, l2).unwrap(), l1, l2).unwrap();
            worst = worst.max((back - u).abs() / u.abs().max(1.0));
        }
        assert!(worst < 1e-9, "max relative error {worst}");
    }

    #[test]
    fn continuity_at_zero_power() {
        for i in 0..=1000 {
            let s = 0.1 + (100.0 - 0.1) * i as f64 / 1000.0;
            let d = (box_cox(s - 0.5, 1e-6, 0.5).unwrap() - s.ln()).abs();
            assert!(d < 1e-4, "s = {s}, diff = {d}");
        }
    }

    #[test]
    fn box_cox_is_strictly_increasing() {
        for &l1 in &[-2.0, -0.5, 0.0, 0.3, 1.0, 2.5] {
            let vals: Vec<f64> = (1..500).map(|i| box_cox(i as f64 * 0.05, l1, 0.0).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "lambda1 = {l1}");
        }
    }

    #[test]
    fn nll_depends_only_on_shifted_data() {
        let data = [0.3, 1.2, 2.2, 4.0, 0.9, 7.5];
        let shifted: Vec<f64> = data.iter().map(|x| x - 0.25).collect();
        let a = box_cox_nll(&data, 0.4, 0.5).unwrap();
        let b = box_cox_nll(&shifted, 0.4, 0.75).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nll_rejects_constant_sample() {
        assert!(matches!(box_cox_nll(&[2.0; 5], 1.0, 0.0), Err(Error::Degenerate(_))));
    }

    fn grid_argmin(data: &[f64], lambda2: f64) -> f64 {
        (0..=400)
            .map(|i| -2.0 + 0.01 * i as f64)
            .min_by(|a, b| {
                box_cox_nll(data, *a, lambda2)
                    .unwrap()
                    .partial_cmp(&box_cox_nll(data, *b, lambda2).unwrap())
                    .unwrap()
            })
            .unwrap()
    }

    #[test]
    fn nll_minimum_for_lognormal_data_is_near_log() {
        let data: Vec<f64> = normal_sample(10_000, 3).into_iter().map(f64::exp).collect();
        assert!(grid_argmin(&data, 0.0).abs() <= 0.1);
    }

    #[test]
    fn nll_minimum_for_normal_data_is_near_identity() {
        let data: Vec<f64> = normal_sample(10_000, 4).into_iter().map(|x| x + 5.0).collect();
        assert!((grid_argmin(&data, 0.0) - 1.0).abs() <= 0.1);
    }

    #[test]
    fn negentropy_of_normal_sample_is_small() {
        let j = negentropy(&normal_sample(100_000, 5)).unwrap();
        assert!(j < 1e-4, "J = {j}");
    }

    #[test]
    fn negentropy_of_uniform_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let sample: Vec<f64> = (0..100_000).map(|_| u.sample(&mut rng)).collect();
        let j = negentropy(&sample).unwrap();
        // Oracle: standardized uniform is uniform on [-sqrt 3, sqrt 3];
        // E[psi] estimated by an independent 10^6-point midpoint average.
        let r = 3f64.sqrt();
        let m = 1_000_000;
        let e_psi = (0..m)
            .map(|k| {
                let v = -r + 2.0 * r * (k as f64 + 0.5) / m as f64;
                -(-0.5 * v * v).exp()
            })
            .sum::<f64>()
            / m as f64;
        let oracle = (e_psi + std::f64::consts::FRAC_1_SQRT_2).powi(2);
        assert!(((j - oracle) / oracle).abs() < 0.1, "J = {j}, oracle = {oracle}");
    }

    #[test]
    fn negentropy_rejects_constant() {
        assert!(negentropy(&[1.0; 10]).is_err());
        assert!(negentropy(&[1.0]).is_err());
    }

    #[test]
    fn fit_recovers_log_for_lognormal() {
        let data: Vec<f64> = normal_sample(10_000, 8).into_iter().map(f64::exp).collect();
        let p = fit_power_transform(&data, &[0.0, 0.5, 1.0], 1e-8).unwrap();
        assert!(p.lambda1.abs() <= 0.15, "{p:?}");
    }

    #[test]
    fn fit_drops_infeasible_shifts() {
        let mut data: Vec<f64> = normal_sample(200, 9).into_iter().map(|x| x.exp()).collect();
        data[0] = -0.4;
        let (p, cands) = fit_power_transform_detailed(&data, &[0.0, 0.5, 1.0], 1e-8).unwrap();
        assert!(cands.iter().all(|c| c.lambda2 > 0.0));
        assert_ne!(p.lambda2, 0.0);
        assert!(matches!(
            fit_power_transform(&data, &[0.0, 0.1], 1e-8),
            Err(Error::Domain(_))
        ));
        assert!(fit_power_transform(&data[..5], &[1.0], 1e-8).is_err());
    }

    #[test]
    fn fitted_transform_standardizes_training_sample() {
        let data: Vec<f64> = normal_sample(5_000, 10).into_iter().map(|x| (0.7 * x).exp() * 3.0).collect();
        let p = fit_power_transform(&data, &DEFAULT_LAMBDA2_GRID, 1e-8).unwrap();
        let t: Vec<f64> = data.iter().map(|&a| apply_transform(&p, a).unwrap()).collect();
        let (m, s) = mean_std(&t);
        assert!(m.abs() < 1e-9, "mean {m}");
        // exactly sigma / sqrt(sigma^2 + eps) by construction
        let expected = p.sigma / (p.sigma * p.sigma + p.epsilon).sqrt();
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 1.0).abs() <= p.epsilon / (2.0 * p.sigma * p.sigma) + 1e-12);
        assert!(negentropy(&t).unwrap() <= negentropy(&data).unwrap());
    }

    #[test]
    fn fit_is_deterministic() {
        let data: Vec<f64> = normal_sample(1_000, 11).into_iter().map(f64::exp).collect();
        let a = fit_power_transform(&data, &DEFAULT_LAMBDA2_GRID, 1e-8).unwrap();
        let b = fit_power_transform(&data, &DEFAULT_LAMBDA2_GRID, 1e-8).unwrap();
        assert_eq!(a, b);
    }

    fn some_params() -> PowerTransformParams<f64> {
        PowerTransformParams {
            lambda1: 0.35,
            lambda2: 0.5,
            mu: 1.1,
            sigma: 0.8,
            epsilon: DEFAULT_EPSILON,
            attribute_kind: Some(AttributeKind::Contour),
        }
    }

    #[test]
    fn apply_matches_manual_composition() {
        let p = some_params();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = Uniform::new(0.0, 20.0).unwrap();
        for _ in 0..100 {
            let a = u.sample(&mut rng);
            let g = ((a + 0.5f64).powf(0.35) - 1.0) / 0.35;
            let manual = (g - 1.1) / (0.64f64 + 1e-8).sqrt();
            assert!((apply_transform(&p, a).unwrap() - manual).abs() < 1e-12);
        }
    }

    #[test]
    fn invert_round_trip_and_centering() {
        let p = some_params();
        let centre = inverse_box_cox(p.mu, p.lambda1, p.lambda2).unwrap();
        assert!(apply_transform(&p, centre).unwrap().abs() < 1e-12);
        assert!((invert_transform(&p, 0.0).unwrap() - centre).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = Uniform::new(-0.49, 40.0).unwrap();
        let mut worst = 0.0f64;
        let mut xs: Vec<f64> = (0..10_000).map(|_| u.sample(&mut rng)).collect();
        for &a in &xs {
            let back = invert_transform(&p, apply_transform(&p, a).unwrap()).unwrap();
            worst = worst.max((back - a).abs() / a.abs().max(1.0));
        }
        assert!(worst < 1e-9, "{worst}");
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let ts: Vec<f64> = xs.iter().map(|&a| apply_transform(&p, a).unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        let back: Vec<f64> = ts.iter().map(|&t| invert_transform(&p, t).unwrap()).collect();
        assert!(back.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn params_json_round_trip_is_exact() {
        let p = PowerTransformParams { lambda1: 0.1 + 0.2, ..some_params() };
        let back = PowerTransformParams::<f64>::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        let json = p.to_json().unwrap();
        for key in ["lambda1", "lambda2", "mu", "sigma", "epsilon", "attribute_kind"] {
            assert!(json.contains(key));
        }
        let bad = json.replace("\"sigma\": 0.8", "\"sigma\": 0.0");
        assert!(PowerTransformParams::<f64>::from_json(&bad).is_err());
    }

    #[test]
    fn batch_mode_standardizes_the_batch() {
        let p = some_params();
        let t = apply_transform_batch(&p, &[0.5, 1.0, 3.0, 9.0]).unwrap();
        let (m, s) = mean_std(&t);
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn yeo_johnson_examples() {
        for l in [-1.0, 0.0, 0.5, 2.0, 3.0] {
            assert_eq!(yeo_johnson(0.0, l), 0.0);
        }
        assert!((yeo_johnson(1.0, 1.0) - 1.0f64).abs() < 1e-15);
        for i in 0..200 {
            let u = i as f64 * 0.25;
            for l in [-1.5, -0.2, 0.7, 1.0, 2.4] {
                let bc = box_cox(u, l, 1.0).unwrap();
                assert!((yeo_johnson(u, l) - bc).abs() <= 1e-12 * bc.abs().max(1.0));
            }
        }
        for l in [-1.0, 0.0, 1.0, 2.0, 3.0] {
            let v: Vec<f64> = (-200..200).map(|i| yeo_johnson(i as f64 * 0.1, l)).collect();
            assert!(v.windows(2).all(|w| w[1] > w[0]), "lambda = {l}");
        }
    }

    #[test]
    fn generic_over_f32() {
        let data: Vec<f32> = normal_sample(2_000, 14).into_iter().map(|x| (x as f32).exp()).collect();
        let p = fit_power_transform(&data, &[0.0f32, 1.0], 1e-5).unwrap();
        assert!(p.lambda1.abs() < 0.2);
        let t = apply_transform(&p, 1.0f32).unwrap();
        assert!((invert_transform(&p, t).unwrap() - 1.0).abs() < 1e-4);
    }
}
