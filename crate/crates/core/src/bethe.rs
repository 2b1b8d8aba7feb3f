//! The Bethe functional and the scale-then-evaluate permanent approximation.
//!
//! For a doubly stochastic `B`, `F(B) = Π (1 - b_ij)^(1 - b_ij)` satisfies
//! `F(B) <= Per(B) <= 2^n F(B)`. Combined with Sinkhorn scaling this gives a
//! deterministic `2^n`-factor approximation of the permanent of any
//! nonnegative matrix with positive permanent.
//!
//! All values here are natural logs.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{permanent_ryser, RYSER_LIMIT};
use crate::frank_wolfe::{self, ConcaveObjective};
use crate::matching::{covering_matchings, support_has_perfect_matching};
use crate::matrix::{require_doubly_stochastic, Matrix};
use crate::numeric::one_minus_xlog;
use crate::scaling::{sinkhorn_scale, ScalingResult, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Doubly-stochastic tolerance for arguments that play the role of `B`.
pub const DS_TOL: f64 = 1e-6;
/// Entries up to `1 + ENTRY_SLACK` are read as one (Sinkhorn roundoff).
const ENTRY_SLACK: f64 = 1e-9;
/// Residual propagation constant in the sandwich slack `c * n * residual`.
pub const RESIDUAL_SLACK_FACTOR: f64 = 10.0;

/// `ln F(A) = Σ (1 - a_ij) ln(1 - a_ij)`, with `0 ln 0 = 0`.
pub fn bethe_f(a: &Matrix) -> Result<f64> {
    let mut s = 0.0;
    for (k, &v) in a.entries().iter().enumerate() {
        if v > 1.0 + ENTRY_SLACK {
            return Err(Error::domain(format!(
                "entry ({}, {}) = {v} exceeds 1",
                k / a.n_cols(),
                k % a.n_cols()
            )));
        }
        s += one_minus_xlog(v.min(1.0));
    }
    Ok(s)
}

/// `CW(P, Q) = Σ (1 - q) ln(1 - q) - Σ q ln(q / p)`.
///
/// Returns `-inf` when `q_ij > 0` on an entry with `p_ij = 0`.
pub fn cw_functional(p: &Matrix, q: &Matrix) -> Result<f64> {
    let n = p.order()?;
    if q.n_rows() != n || q.n_cols() != n {
        return Err(Error::dim("P and Q must have the same shape"));
    }
    require_doubly_stochastic(q, DS_TOL, "Q")?;
    Ok(cw_raw(p.entries(), q.entries()))
}

fn cw_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&p, &q) in p.iter().zip(q) {
        let q = q.min(1.0);
        s += one_minus_xlog(q);
        if q > 0.0 {
            if p == 0.0 {
                return f64::NEG_INFINITY;
            }
            s -= q * (q.ln() - p.ln());
        }
    }
    s
}

/// `∂CW/∂q_ij = -2 - ln(1 - q_ij) - ln q_ij + ln p_ij`, row-major.
/// Entries with `p_ij = 0` are `-inf`.
pub fn cw_gradient(p: &Matrix, q: &Matrix) -> Result<Vec<f64>> {
    p.order()?;
    if p.n_rows() != q.n_rows() || p.n_cols() != q.n_cols() {
        return Err(Error::dim("P and Q must have the same shape"));
    }
    let mut out = vec![0.0; p.entries().len()];
    for (k, (&pv, &qv)) in p.entries().iter().zip(q.entries()).enumerate() {
        if pv == 0.0 {
            out[k] = f64::NEG_INFINITY;
        } else if qv <= 0.0 || qv >= 1.0 {
            return Err(Error::domain(format!(
                "q = {qv} at ({}, {}) lies on the boundary of the support",
                k / p.n_cols(),
                k % p.n_cols()
            )));
        } else {
            out[k] = -2.0 - (-qv).ln_1p() - qv.ln() + pv.ln();
        }
    }
    Ok(out)
}

/// `ln Per(A) >= CW(A, B)` for any doubly stochastic `B`.
pub fn lower_bound_general(a: &Matrix, b: &Matrix) -> Result<f64> {
    cw_functional(a, b)
}

/// Certified interval and point estimate for `ln Per(A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub log_lower: f64,
    pub log_estimate: f64,
    pub log_upper: f64,
    pub log_exact: Option<f64>,
    pub scaling_residual: f64,
    pub scaling_iterations: usize,
    /// Set when Sinkhorn hit its iteration cap; the interval then carries a residual error.
    pub degraded: bool,
    pub log2_lower: f64,
    pub log2_upper: f64,
}

impl BoundReport {
    pub(crate) fn from_scaling(n: usize, r: &ScalingResult, degraded: bool) -> Result<Self> {
        let estimate = bethe_f(&r.scaled)? - r.log_factor_product;
        let upper = estimate + n as f64 * LN_2;
        Ok(Self {
            n,
            log_lower: estimate,
            log_estimate: estimate,
            log_upper: upper,
            log_exact: None,
            scaling_residual: r.residual,
            scaling_iterations: r.iterations,
            degraded,
            log2_lower: estimate / LN_2,
            log2_upper: upper / LN_2,
        })
    }

    /// `c * n * residual`, the allowance for an imperfectly scaled matrix.
    pub fn slack(&self) -> f64 {
        RESIDUAL_SLACK_FACTOR * self.n as f64 * self.scaling_residual
    }

    /// Whether `value` lies in `[lower - slack - tol, upper + slack + tol]`.
    pub fn contains(&self, log_value: f64, tol: f64) -> bool {
        let s = self.slack() + tol;
        self.log_lower - s <= log_value && log_value <= self.log_upper + s
    }

    /// Fills `log_exact` with Ryser when `n <= 24`.
    pub fn with_exact(mut self, a: &Matrix) -> Result<Self> {
        if self.n <= RYSER_LIMIT {
            self.log_exact = Some(permanent_ryser(a)?.log_value);
        }
        Ok(self)
    }
}

/// Scales `A` to near doubly stochastic `B = diag(x) A diag(y)` and reports
/// `ln F(B) - Σ ln x_i - Σ ln y_j` with the `2^n` interval around it.
///
/// A non-converged scaling still produces a report, flagged `degraded`.
pub fn approximate_permanent(a: &Matrix, tol: f64, max_iter: usize) -> Result<BoundReport> {
    let n = a.order()?;
    match sinkhorn_scale(a, tol, max_iter) {
        Ok(r) => BoundReport::from_scaling(n, &r, false),
        Err(Error::ScalingNotConverged(r)) => BoundReport::from_scaling(n, &r, true),
        Err(e) => Err(e),
    }
}

struct CwObjective {
    n: usize,
    log_p: Vec<f64>,
    p: Vec<f64>,
}

impl CwObjective {
    fn new(a: &Matrix) -> Self {
        Self {
            n: a.n_rows(),
            log_p: a.entries().iter().map(|p| p.ln()).collect(),
            p: a.entries().to_vec(),
        }
    }
}

impl ConcaveObjective for CwObjective {
    fn order(&self) -> usize {
        self.n
    }

    fn value(&self, q: &[f64]) -> f64 {
        cw_raw(&self.p, q)
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        for ((o, &q), &lp) in out.iter_mut().zip(q).zip(&self.log_p) {
            *o = if lp == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                -2.0 - (-q).ln_1p() - q.ln() + lp
            };
        }
    }

    fn allowed(&self, k: usize) -> bool {
        self.p[k] > 0.0
    }

    fn hessian_diag(&self, q: &[f64], out: &mut [f64]) -> bool {
        for (o, &q) in out.iter_mut().zip(q) {
            *o = 1.0 / (1.0 - q) - 1.0 / q;
        }
        true
    }
}

/// `Σ q ln(p / q)`: the relative-entropy relaxation whose maximum over
/// doubly stochastic matrices equals `-Σ ln x_i - Σ ln y_j`.
struct KldObjective {
    n: usize,
    log_p: Vec<f64>,
}

impl ConcaveObjective for KldObjective {
    fn order(&self) -> usize {
        self.n
    }

    fn value(&self, q: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&q, &lp) in q.iter().zip(&self.log_p) {
            if q > 0.0 {
                if lp == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                s += q * (lp - q.ln());
            }
        }
        s
    }

    fn gradient(&self, q: &[f64], out: &mut [f64]) {
        for ((o, &q), &lp) in out.iter_mut().zip(q).zip(&self.log_p) {
            *o = lp - q.ln() - 1.0;
        }
    }

    fn allowed(&self, k: usize) -> bool {
        self.log_p[k] > f64::NEG_INFINITY
    }

    fn hessian_diag(&self, q: &[f64], out: &mut [f64]) -> bool {
        for (o, &q) in out.iter_mut().zip(q) {
            *o = -1.0 / q;
        }
        true
    }
}

/// Average of perfect matchings covering every matchable support edge.
fn face_interior_point(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.order()?;
    let ms = covering_matchings(a)?;
    if ms.is_empty() {
        return Err(Error::ZeroPermanent);
    }
    // integer counts first, so edges in every matching get exactly 1
    let mut counts = vec![0usize; n * n];
    for m in &ms {
        for (i, &j) in m.iter().enumerate() {
            counts[i * n + j] += 1;
        }
    }
    let total = ms.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetheSolution {
    pub maximizer: Matrix,
    pub objective: f64,
    pub iterations: usize,
    pub duality_gap_estimate: f64,
    /// `CW(A, start)`; the start is the Sinkhorn image when scaling converges.
    pub start_objective: f64,
}

/// Maximizes `CW(A, B)` over doubly stochastic `B` by pairwise Frank–Wolfe,
/// starting at the Sinkhorn image of `A` (or at an average of perfect
/// matchings of the support when scaling does not converge).
pub fn maximize_bethe(a: &Matrix, max_iter: usize, gap_tol: f64) -> Result<BetheSolution> {
    let n = a.order()?;
    if !support_has_perfect_matching(a)? {
        return Err(Error::ZeroPermanent);
    }
    let start = match sinkhorn_scale(a, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(r) => r.scaled.into_entries(),
        Err(Error::ScalingNotConverged(_)) => face_interior_point(a)?,
        Err(e) => return Err(e),
    };
    let obj = CwObjective::new(a);
    let start_objective = obj.value(&start);
    let out = frank_wolfe::maximize(&obj, start, max_iter, gap_tol);
    Ok(BetheSolution {
        maximizer: Matrix::from_raw(n, n, out.point),
        objective: out.value,
        iterations: out.iterations,
        duality_gap_estimate: out.gap,
        start_objective,
    })
}

/// Objective trace of the Bethe maximization (for monotonicity checks).
pub fn bethe_history(a: &Matrix, max_iter: usize, gap_tol: f64) -> Result<Vec<f64>> {
    let start = sinkhorn_scale(a, DEFAULT_TOL, DEFAULT_MAX_ITER)?.scaled.into_entries();
    Ok(frank_wolfe::maximize(&CwObjective::new(a), start, max_iter, gap_tol).history)
}

/// `max_{B doubly stochastic} Σ b_ij ln(a_ij / b_ij)` by Frank–Wolfe from an
/// average of perfect matchings of the support; independent of Sinkhorn.
pub fn kld_relaxation(a: &Matrix, max_iter: usize, gap_tol: f64) -> Result<f64> {
    let n = a.order()?;
    let start = face_interior_point(a)?;
    let obj = KldObjective {
        n,
        log_p: a.entries().iter().map(|p| p.ln()).collect(),
    };
    let out = frank_wolfe::maximize(&obj, start, max_iter, gap_tol);
    if out.gap > gap_tol {
        return Err(Error::NotConverged {
            what: "relative-entropy relaxation",
            iterations: out.iterations,
            best_value: out.value,
            stationarity: out.gap,
        });
    }
    Ok(out.value)
}

/// `ln Prod_A(e^x) = Σ_i ln Σ_j a_ij e^{x_j}` and its gradient (column sums
/// of the row-softmax weights).
fn product_objective(log_a: &[f64], n: usize, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let mut total = 0.0;
    let mut g_acc = grad.as_ref().map(|_| vec![0.0; n]);
    let mut w = vec![0.0; n];
    for i in 0..n {
        let row = &log_a[i * n..(i + 1) * n];
        let m = row
            .iter()
            .zip(x)
            .map(|(l, x)| l + x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for j in 0..n {
            w[j] = (row[j] + x[j] - m).exp();
            s += w[j];
        }
        total += m + s.ln();
        if let Some(g) = g_acc.as_mut() {
            for j in 0..n {
                g[j] += w[j] / s;
            }
        }
    }
    if let (Some(out), Some(g)) = (grad, g_acc) {
        out.copy_from_slice(&g);
    }
    total
}

pub const PRODUCT_RELAXATION_MAX_ITER: usize = 200_000;

/// `inf_{Σ x_i = 0} ln Prod_A(e^{x_1}, …, e^{x_n})` by projected gradient
/// descent with Barzilai–Borwein steps and Armijo backtracking. Stops when
/// the projected gradient is below `tol` in max norm; tolerances under about
/// `1e-9` are at roundoff level and may not be reachable.
pub fn product_relaxation(a: &Matrix, tol: f64) -> Result<f64> {
    let n = a.order()?;
    if a.row_sums().iter().any(|&s| s <= 0.0) {
        return Err(Error::domain("product relaxation needs positive row sums"));
    }
    if !support_has_perfect_matching(a)? {
        return Err(Error::ZeroPermanent);
    }
    let log_a: Vec<f64> = a.entries().iter().map(|v| v.ln()).collect();
    let project = |g: &mut [f64]| {
        let mean = g.iter().sum::<f64>() / n as f64;
        g.iter_mut().for_each(|v| *v -= mean);
    };
    let norm_inf = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut f = product_objective(&log_a, n, &x, Some(&mut g));
    project(&mut g);
    let mut step = 1.0;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for _ in 0..PRODUCT_RELAXATION_MAX_ITER {
        let gnorm = norm_inf(&g);
        if gnorm <= tol {
            return Ok(f);
        }
        let g2: f64 = g.iter().map(|v| v * v).sum();
        let mut t = step;
        let f_new = loop {
            for k in 0..n {
                x_new[k] = x[k] - t * g[k];
            }
            let f_try = product_objective(&log_a, n, &x_new, Some(&mut g_new));
            if f_try <= f - 1e-4 * t * g2 || t < 1e-20 {
                break f_try;
            }
            t *= 0.5;
        };
        project(&mut g_new);
        // Barzilai–Borwein step for the next iteration.
        let (mut sy, mut ss) = (0.0, 0.0);
        for k in 0..n {
            let s = x_new[k] - x[k];
            sy += s * (g_new[k] - g[k]);
            ss += s * s;
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (2.0 * t).min(1e10) };
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        if f_new >= f && t < 1e-20 {
            f = f.min(f_new);
            break;
        }
        f = f_new;
    }
    Err(Error::NotConverged {
        what: "product-polynomial relaxation",
        iterations: PRODUCT_RELAXATION_MAX_ITER,
        best_value: f,
        stationarity: norm_inf(&g),
    })
}

/// For doubly stochastic `B`: the matrix `(b_ij (1 - b_ij))` and the lower
/// bound `Σ ln(1 - b_ij)` on its log-permanent.
pub fn schrijver_lower(b: &Matrix) -> Result<(Matrix, f64)> {
    require_doubly_stochastic(b, DS_TOL, "B")?;
    let t = b.map(|v| {
        let v = v.min(1.0);
        v * (1.0 - v)
    })?;
    let bound = b.entries().iter().map(|&v| (-v.min(1.0)).ln_1p()).sum();
    Ok((t, bound))
}
