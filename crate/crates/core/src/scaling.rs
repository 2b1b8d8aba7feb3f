//! Sinkhorn scaling to doubly stochastic form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::permanent_ryser;
use crate::matching::support_has_perfect_matching;
use crate::matrix::Matrix;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Output of [`sinkhorn_scale`]: `scaled[i][j] = row_factors[i] * a[i][j] * col_factors[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub row_factors: Vec<f64>,
    pub col_factors: Vec<f64>,
    pub log_row_factors: Vec<f64>,
    pub log_col_factors: Vec<f64>,
    pub scaled: Matrix,
    /// Largest deviation of a row or column sum of `scaled` from one.
    pub residual: f64,
    pub iterations: usize,
    /// `Σ ln x_i + Σ ln y_j`.
    pub log_factor_product: f64,
}

fn line_residual(n: usize, b: &[f64]) -> f64 {
    let mut dev = 0.0f64;
    let mut cols = vec![0.0; n];
    for r in b.chunks_exact(n) {
        dev = dev.max((r.iter().sum::<f64>() - 1.0).abs());
        for (c, v) in cols.iter_mut().zip(r) {
            *c += v;
        }
    }
    cols.iter().fold(dev, |d, c| d.max((c - 1.0).abs()))
}

fn assemble(a: &Matrix, lx: Vec<f64>, ly: Vec<f64>, iterations: usize) -> ScalingResult {
    let n = a.n_rows();
    let mut b = Vec::with_capacity(n * n);
    for (i, r) in a.rows().enumerate() {
        b.extend(r.iter().zip(&ly).map(|(v, l)| v * (lx[i] + l).exp()));
    }
    let residual = line_residual(n, &b);
    ScalingResult {
        row_factors: lx.iter().map(|l| l.exp()).collect(),
        col_factors: ly.iter().map(|l| l.exp()).collect(),
        log_factor_product: lx.iter().sum::<f64>() + ly.iter().sum::<f64>(),
        log_row_factors: lx,
        log_col_factors: ly,
        scaled: Matrix::from_raw(n, n, b),
        residual,
        iterations,
    }
}

/// Alternating row-then-column normalization until every line sum is within
/// `tol` of one. Factors are accumulated as logs and the returned matrix is
/// rebuilt from them, so `scaled` matches the factors to rounding.
///
/// Fails with [`Error::ZeroPermanent`] if the support has no perfect matching,
/// and with [`Error::ScalingNotConverged`] (carrying the last iterate) after `max_iter` passes.
pub fn sinkhorn_scale(a: &Matrix, tol: f64, max_iter: usize) -> Result<ScalingResult> {
    let n = a.order()?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::arg("tol must be positive and max_iter at least 1"));
    }
    if !support_has_perfect_matching(a)? {
        return Err(Error::ZeroPermanent);
    }
    let mut lx = vec![0.0; n];
    let mut ly = vec![0.0; n];
    let mut b = a.entries().to_vec();
    if line_residual(n, &b) <= tol {
        return Ok(assemble(a, lx, ly, 0));
    }
    for it in 1..=max_iter {
        for (i, r) in b.chunks_exact_mut(n).enumerate() {
            let s: f64 = r.iter().sum();
            lx[i] -= s.ln();
            r.iter_mut().for_each(|v| *v /= s);
        }
        let mut cols = vec![0.0; n];
        for r in b.chunks_exact(n) {
            for (c, v) in cols.iter_mut().zip(r) {
                *c += v;
            }
        }
        for r in b.chunks_exact_mut(n) {
            for (v, c) in r.iter_mut().zip(&cols) {
                *v /= c;
            }
        }
        for (l, c) in ly.iter_mut().zip(&cols) {
            *l -= c.ln();
        }
        if line_residual(n, &b) <= tol {
            let res = assemble(a, lx.clone(), ly.clone(), it);
            if res.residual <= tol {
                return Ok(res);
            }
        }
    }
    Err(Error::ScalingNotConverged(Box::new(assemble(a, lx, ly, max_iter))))
}

/// Residual trace of the first `iterations` Sinkhorn passes (row then column).
pub fn residual_history(a: &Matrix, iterations: usize) -> Result<Vec<f64>> {
    let n = a.order()?;
    let mut b = a.entries().to_vec();
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for r in b.chunks_exact_mut(n) {
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|v| *v /= s);
        }
        let mut cols = vec![0.0; n];
        for r in b.chunks_exact(n) {
            for (c, v) in cols.iter_mut().zip(r) {
                *c += v;
            }
        }
        for r in b.chunks_exact_mut(n) {
            for (v, c) in r.iter_mut().zip(&cols) {
                *v /= c;
            }
        }
        out.push(line_residual(n, &b));
    }
    Ok(out)
}

/// `|ln Per(A) - (ln Per(B) - Σ ln x_i - Σ ln y_j)|`, both permanents by Ryser.
pub fn scaling_relation_check(a: &Matrix, r: &ScalingResult) -> Result<f64> {
    let pa = permanent_ryser(a)?;
    let pb = permanent_ryser(&r.scaled)?;
    if pa.is_zero() || pb.is_zero() {
        return Err(Error::ZeroPermanent);
    }
    Ok((pa.log_value - (pb.log_value - r.log_factor_product)).abs())
}
