//! Orlicz-norm upper bounds on the permanent and their companions.
//!
//! `‖v‖_ψ` is the scale `s` with `Σ ψ(|v_i| / s) = 1`. For suitable `ψ`
//! (certified by [`crate::psi::verify_psi_conditions`]) every nonnegative
//! matrix satisfies `Per(B) <= Π_i ‖b_i‖_ψ`.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{row_sum_deviation, Matrix};
use crate::numeric::{ln_factorial, one_minus_xlog};
use crate::psi::PsiFunction;

/// Row-stochastic tolerance for [`bethe_upper_bound`] and [`min_constant_c`].
pub const STOCHASTIC_TOL: f64 = 1e-6;

/// Orlicz norm of a nonnegative nonzero vector, by bisection on the scale.
pub fn orlicz_norm(v: &[f64], f: &PsiFunction) -> Result<f64> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::domain("orlicz_norm needs a finite nonnegative vector"));
    }
    let max = v.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::domain("orlicz_norm of the zero vector"));
    }
    // Work with v / max so that the result is homogeneous to rounding.
    let u: Vec<f64> = v.iter().map(|x| x / max).collect();
    let total = |s: f64| u.iter().map(|&x| f.value((x / s).min(1.0))).sum::<f64>();
    // ψ convex with ψ(0)=0, ψ(1)=1: total(1) >= 1 >= total(Σu).
    let (mut lo, mut hi) = (1.0f64, u.iter().sum::<f64>());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if (total(lo) - 1.0).abs() <= (total(hi) - 1.0).abs() { lo } else { hi };
    Ok(max * s)
}

/// `Σ_i ln ‖b_i‖_ψ`, an upper bound on `ln Per(B)` for a certified `ψ`.
pub fn upper_bound_orlicz(b: &Matrix, f: &PsiFunction) -> Result<f64> {
    b.order()?;
    if !f.is_certified() {
        return Err(Error::domain(format!(
            "{:?} does not satisfy the hypotheses of the Orlicz bound",
            f.kind()
        )));
    }
    b.rows().map(|r| orlicz_norm(r, f).map(f64::ln)).sum()
}

/// `ln Π_k (1 - x_k)^(1 - x_k)`.
pub fn log_bethe_row_factor(x: &[f64]) -> f64 {
    x.iter().map(|&v| one_minus_xlog(v.min(1.0))).sum()
}

fn require_stochastic_vector(x: &[f64]) -> Result<()> {
    if x.is_empty() || x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("expected a nonempty nonnegative vector"));
    }
    if (x.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("vector is not stochastic"));
    }
    Ok(())
}

/// Smallest `C` in `[e^{1/e}, 4]` with
/// `Σ_j ψ_a(x_j / (C Π_k (1 - x_k)^(1 - x_k))) <= 1`, by bisection to `1e-10`
/// or better; `e^{1/e}` when the constraint already holds there.
pub fn min_constant_c(x: &[f64]) -> Result<f64> {
    require_stochastic_vector(x)?;
    let f = PsiFunction::canonical();
    let row = log_bethe_row_factor(x).exp();
    let holds = |c: f64| {
        let mut s = 0.0;
        for &v in x {
            let arg = v / (c * row);
            if arg > 1.0 {
                return false;
            }
            s += f.value(arg);
        }
        s <= 1.0
    };
    let c_min = (1.0 / E).exp();
    if holds(c_min) {
        return Ok(c_min);
    }
    let (mut lo, mut hi) = (c_min, 4.0);
    if !holds(hi) {
        return Err(Error::Numerical("constraint fails at C = 4".into()));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `n ln 2 + ln F(A)` for a row-stochastic `A`.
pub fn bethe_upper_bound(a: &Matrix) -> Result<f64> {
    let n = a.order()?;
    let dev = row_sum_deviation(a);
    if dev > STOCHASTIC_TOL {
        return Err(Error::domain(format!("matrix is not row stochastic (deviation {dev:.3e})")));
    }
    Ok(n as f64 * LN_2 + crate::bethe::bethe_f(a)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BregmanBound {
    /// `Σ_i ln(r_i!) / r_i`; `0` when some row is zero.
    pub log_value: f64,
    /// A zero row forces `Per = 0`.
    pub zero_permanent: bool,
}

/// `ln Π (r_i!)^{1/r_i}` for a 0/1 matrix with row sums `r_i`.
pub fn bregman_bound(a: &Matrix) -> Result<BregmanBound> {
    a.order()?;
    if !a.is_zero_one() {
        return Err(Error::domain("Bregman bound needs a 0/1 matrix"));
    }
    let mut log_value = 0.0;
    for r in a.row_sums() {
        if r == 0.0 {
            return Ok(BregmanBound {
                log_value: 0.0,
                zero_permanent: true,
            });
        }
        log_value += ln_factorial(r) / r;
    }
    Ok(BregmanBound {
        log_value,
        zero_permanent: false,
    })
}

/// `‖(1, r)‖_ψ`, the minimum of `‖(y, r)‖_ψ` over unit vectors `y`.
pub fn g_star(r: f64, f: &PsiFunction) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("g_star needs finite r >= 0, got {r}")));
    }
    orlicz_norm(&[1.0, r], f)
}
