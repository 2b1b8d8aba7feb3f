//! Convex increasing functions `ψ: [0,1] → [0,1]` that define Orlicz norms,
//! and grid certificates for the hypotheses of the Orlicz permanent bound.

use std::f64::consts::E;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Number of intervals in the memoized `ψ` table used to bracket inversions.
const INVERSE_TABLE_SIZE: usize = 1024;
/// Grid used by [`PsiFunction::is_certified`].
const CERTIFY_GRID: usize = 10_000;
pub const MARGIN_TOL: f64 = 1e-12;

/// The unique root of `(1 - ln a) / a = 1/e` on `[1, e]`, by bisection.
pub fn solve_root_a() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let h = |a: f64| (1.0 - a.ln()) / a - 1.0 / E;
        let (mut lo, mut hi) = (1.0f64, E);
        // h is strictly decreasing on [1, e]
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if h(lo).abs() <= h(hi).abs() {
            lo
        } else {
            hi
        }
    })
}

/// `φ₀(x) = Γ((1 + x) / x)^(-x)`; maps `1/r` to `(1/r!)^(1/r)`.
pub fn phi0_eval(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::domain(format!("phi0 is defined on (0, 1], got {x}")));
    }
    Ok(phi0_raw(x))
}

fn phi0_raw(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (-x * ln_gamma(1.0 + 1.0 / x)).exp()
}

fn phi0_derivative(x: f64) -> f64 {
    let u = 1.0 + 1.0 / x;
    phi0_raw(x) * (-ln_gamma(u) + digamma(u) / x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiKind {
    /// `1 - (1 - x) a^x`
    PsiA { a: f64 },
    /// `x^p`
    Power { p: f64 },
    /// The inverse of `φ₀`.
    Phi0Inverse,
}

#[derive(Debug, Clone)]
pub struct PsiFunction {
    kind: PsiKind,
    table: Vec<f64>,
    certified: OnceLock<bool>,
}

impl PsiFunction {
    fn build(kind: PsiKind) -> Self {
        let mut f = Self {
            kind,
            table: Vec::new(),
            certified: OnceLock::new(),
        };
        f.table = (0..=INVERSE_TABLE_SIZE)
            .map(|k| f.value(k as f64 / INVERSE_TABLE_SIZE as f64))
            .collect();
        f
    }

    /// `ψ_a` for `1 <= a < e` (convex increasing onto `[0,1]`).
    pub fn psi_a(a: f64) -> Result<Self> {
        if !(1.0..E).contains(&a) {
            return Err(Error::domain(format!("psi_a needs 1 <= a < e, got {a}")));
        }
        Ok(Self::build(PsiKind::PsiA { a }))
    }

    /// `ψ_a` at the root of `(1 - ln a)/a = 1/e`.
    pub fn canonical() -> Self {
        static CANON: OnceLock<PsiFunction> = OnceLock::new();
        CANON
            .get_or_init(|| Self::build(PsiKind::PsiA { a: solve_root_a() }))
            .clone()
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::domain(format!("power psi needs finite p >= 1, got {p}")));
        }
        Ok(Self::build(PsiKind::Power { p }))
    }

    pub fn phi0_inverse() -> Self {
        Self::build(PsiKind::Phi0Inverse)
    }

    pub fn kind(&self) -> PsiKind {
        self.kind
    }

    /// Whether `a` lies in the family `1/e <= (1 - ln a)/a < 1`.
    pub fn in_certified_family(&self) -> bool {
        match self.kind {
            PsiKind::PsiA { a } => a > 1.0 && a <= solve_root_a() * (1.0 + 1e-15),
            _ => false,
        }
    }

    /// `ψ(x)` without domain checks; `x` must lie in `[0, 1]`.
    pub(crate) fn value(&self, x: f64) -> f64 {
        match self.kind {
            PsiKind::PsiA { a } => {
                let b = a.ln();
                // 1 - (1-x) e^{bx} rearranged to avoid cancellation near 0
                -(b * x).exp_m1() + x * (b * x).exp()
            }
            PsiKind::Power { p } => x.powf(p),
            PsiKind::Phi0Inverse => self.invert(x, phi0_raw),
        }
    }

    /// Derivative of order `0..=3` at `x ∈ [0, 1]`.
    ///
    /// Closed forms for `psi-a` and `power`; for `phi0-inverse` the first
    /// derivative is implicit (`1 / φ₀'(ψ(x))`) and higher orders are central
    /// differences of it.
    pub fn eval(&self, x: f64, order: u8) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("psi is defined on [0, 1], got {x}")));
        }
        if order > 3 {
            return Err(Error::arg("derivative order must be 0..=3"));
        }
        Ok(self.deriv(x, order))
    }

    pub(crate) fn deriv(&self, x: f64, order: u8) -> f64 {
        match (self.kind, order) {
            (_, 0) => self.value(x),
            (PsiKind::PsiA { a }, k) => {
                let b = a.ln();
                let ax = (b * x).exp();
                let c = (1.0 - x) * b;
                match k {
                    1 => (1.0 - c) * ax,
                    2 => b * (2.0 - c) * ax,
                    _ => b * b * (3.0 - c) * ax,
                }
            }
            (PsiKind::Power { p }, k) => {
                let coef: f64 = (0..k).map(|i| p - i as f64).product();
                if coef == 0.0 {
                    0.0
                } else {
                    coef * x.powf(p - k as f64)
                }
            }
            (PsiKind::Phi0Inverse, 1) => {
                let y = self.value(x);
                if y <= 0.0 {
                    // φ₀(t) ≈ e·t near 0
                    1.0 / E
                } else {
                    1.0 / phi0_derivative(y)
                }
            }
            (PsiKind::Phi0Inverse, k) => {
                let h = 1e-4;
                let (lo, hi) = ((x - h).max(0.0), (x + h).min(1.0));
                (self.deriv(hi, k - 1) - self.deriv(lo, k - 1)) / (hi - lo)
            }
        }
    }

    /// `φ = ψ⁻¹` on `[0, 1]`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!("psi inverse is defined on [0, 1], got {y}")));
        }
        Ok(match self.kind {
            PsiKind::Power { p } => y.powf(1.0 / p),
            PsiKind::Phi0Inverse => phi0_raw(y),
            PsiKind::PsiA { .. } => {
                // bracket from the memo table, then bisect
                let k = self.table.partition_point(|&t| t < y);
                let lo_idx = k.saturating_sub(1);
                let hi_idx = k.min(INVERSE_TABLE_SIZE);
                let lo = lo_idx as f64 / INVERSE_TABLE_SIZE as f64;
                let hi = hi_idx as f64 / INVERSE_TABLE_SIZE as f64;
                bisect_increasing(|x| self.value(x), y, lo, hi)
            }
        })
    }

    /// Increasing-function inversion on `[0, 1]` for kinds without a table.
    fn invert(&self, y: f64, f: impl Fn(f64) -> f64) -> f64 {
        bisect_increasing(f, y, 0.0, 1.0)
    }

    /// Grid certificate of the three hypotheses at `CERTIFY_GRID` points,
    /// memoized per instance.
    pub fn is_certified(&self) -> bool {
        *self
            .certified
            .get_or_init(|| verify_psi_conditions(self, CERTIFY_GRID).is_ok_and(|r| r.passes(MARGIN_TOL)))
    }
}

fn bisect_increasing(f: impl Fn(f64) -> f64, y: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (f(lo) - y).abs() <= (f(hi) - y).abs() {
        lo
    } else {
        hi
    }
}

/// Minimum forward differences and inequality margins over uniform grids.
/// Negative margins mean the hypothesis fails at grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiConditionReport {
    /// `x ψ'(x) / ψ(x)` is increasing on `(0, 1)`.
    pub cond1_min_margin: f64,
    /// `x ψ''(x) / ψ'(x)` is increasing on `(0, 1)`.
    pub cond2_min_margin: f64,
    /// `ψ(e^{-r/e}) + ψ(r e^{-r/e}) - 1` on `r ∈ [0, 1]`.
    pub cond3_min_margin: f64,
    /// The same inequality on `r ∈ [0, e]`.
    pub cond3_extended_min_margin: f64,
    pub grid_size: usize,
}

impl PsiConditionReport {
    pub fn passes(&self, tol: f64) -> bool {
        [
            self.cond1_min_margin,
            self.cond2_min_margin,
            self.cond3_min_margin,
            self.cond3_extended_min_margin,
        ]
        .iter()
        .all(|&m| m >= -tol)
    }
}

fn min_forward_difference(values: impl Iterator<Item = f64>) -> f64 {
    let mut prev: Option<f64> = None;
    let mut best = f64::INFINITY;
    for v in values {
        if let Some(p) = prev {
            best = best.min(v - p);
        }
        prev = Some(v);
    }
    best
}

fn cond3_margin(f: &PsiFunction, r: f64) -> f64 {
    let y = (-r / E).exp();
    f.value(y.min(1.0)) + f.value((r * y).min(1.0)) - 1.0
}

pub fn verify_psi_conditions(f: &PsiFunction, grid: usize) -> Result<PsiConditionReport> {
    if grid < 100 {
        return Err(Error::arg("grid must have at least 100 points"));
    }
    let interior = (1..grid).map(|k| k as f64 / grid as f64);
    let cond1 = min_forward_difference(interior.clone().map(|x| x * f.deriv(x, 1) / f.value(x)));
    let cond2 = min_forward_difference(interior.map(|x| x * f.deriv(x, 2) / f.deriv(x, 1)));
    let cond3 = (0..=grid)
        .map(|k| cond3_margin(f, k as f64 / grid as f64))
        .fold(f64::INFINITY, f64::min);
    let cond3_ext = (0..=grid)
        .map(|k| cond3_margin(f, E * k as f64 / grid as f64))
        .fold(f64::INFINITY, f64::min);
    Ok(PsiConditionReport {
        cond1_min_margin: cond1,
        cond2_min_margin: cond2,
        cond3_min_margin: cond3,
        cond3_extended_min_margin: cond3_ext,
        grid_size: grid,
    })
}
