//! Bounded scalar minimization by Brent's method.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentMinimum<T> {
    pub x: T,
    pub fx: T,
    pub evaluations: usize,
    /// False when the evaluation cap was hit; `x` is then the best point seen.
    pub converged: bool,
}

/// Minimizes `f` on `[lo, hi]`, mixing golden-section steps with successive
/// parabolic interpolation (Forsythe, Malcolm and Moler's `fmin`).
///
/// `tol` is the absolute tolerance on the abscissa; a relative tolerance of
/// `sqrt(eps)` is added on top of it.
pub fn brent_minimize<T, F>(f: F, bracket: (T, T), tol: T) -> Result<BrentMinimum<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    brent_minimize_capped(f, bracket, tol, DEFAULT_MAX_ITER)
}

pub fn brent_minimize_capped<T, F>(mut f: F, bracket: (T, T), tol: T, max_iter: usize) -> Result<BrentMinimum<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let (mut a, mut b) = bracket;
    if !(a < b) {
        return Err(Error::Domain(format!("empty bracket [{a}, {b}]")));
    }
    if !(tol > T::zero()) || max_iter == 0 {
        return Err(Error::InvalidConfig("tolerance and iteration cap must be positive".into()));
    }
    let half = T::of(0.5);
    let two = T::of(2.0);
    let golden = T::of(0.5 * (3.0 - 5f64.sqrt()));
    let rel = T::epsilon().sqrt();

    let mut eval = |x: T, count: &mut usize| -> Result<T> {
        *count += 1;
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite(format!("objective returned {y} at {x}")))
        }
    };

    let mut evaluations = 0usize;
    let mut x = a + golden * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = eval(x, &mut evaluations)?;
    let mut fw = fx;
    let mut fv = fx;
    // d: last step, e: step before that
    let mut d = T::zero();
    let mut e = T::zero();

    while evaluations < max_iter {
        let m = half * (a + b);
        let tol1 = rel * x.abs() + tol / T::of(3.0);
        let tol2 = two * tol1;
        if (x - m).abs() <= tol2 - half * (b - a) {
            return Ok(BrentMinimum { x, fx, evaluations, converged: true });
        }

        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = two * (q - r);
            if q > T::zero() {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (half * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = golden * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        let fu = eval(u, &mut evaluations)?;

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    log::warn!("brent_minimize hit the {max_iter}-evaluation cap; returning best point");
    Ok(BrentMinimum { x, fx, evaluations, converged: false })
}
