//! Randomized searches for counterexamples to two open permanent inequalities.
//!
//! Scans only collect data; a violation is reported, never asserted.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::bethe::bethe_f;
use crate::dimer::rng_from_seed;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::exact::permanent;
use crate::matrix::{is_doubly_stochastic, is_row_stochastic, Matrix};
use crate::psi::phi0_eval;
use crate::scaling::sinkhorn_scale;

/// Log ratios above this count as violations.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Counterexamples kept per scan.
pub const MAX_COUNTEREXAMPLES: usize = 10;

pub trait Conjecture: Send + Sync {
    fn name(&self) -> &'static str;

    fn statement(&self) -> &'static str;

    /// Maps an arbitrary nonnegative matrix into the conjecture's domain.
    fn prepare(&self, a: &Matrix) -> Result<Matrix>;

    /// `ln(lhs / rhs)` on a prepared matrix; conjectured `<= 0`.
    fn log_ratio(&self, a: &Matrix) -> Result<f64>;
}

/// `Per(A) <= 2^{n/2} F(A)` for doubly stochastic `A`.
pub struct HalfPowerUpper;

impl Conjecture for HalfPowerUpper {
    fn name(&self) -> &'static str {
        "half-power-upper"
    }

    fn statement(&self) -> &'static str {
        "Per(A) <= 2^(n/2) * prod (1 - a_ij)^(1 - a_ij) for doubly stochastic A"
    }

    fn prepare(&self, a: &Matrix) -> Result<Matrix> {
        if is_doubly_stochastic(a, 1e-9) {
            return Ok(a.clone());
        }
        Ok(sinkhorn_scale(a, 1e-12, 100_000)?.scaled)
    }

    fn log_ratio(&self, a: &Matrix) -> Result<f64> {
        let n = a.order()? as f64;
        Ok(permanent(a)?.log_value - 0.5 * n * LN_2 - bethe_f(a)?)
    }
}

/// `Per(φ₀(A)) <= 1` for stochastic `A`, with `φ₀` applied entrywise.
pub struct Phi0Bregman;

impl Conjecture for Phi0Bregman {
    fn name(&self) -> &'static str {
        "phi0-bregman"
    }

    fn statement(&self) -> &'static str {
        "Per(phi0(A)) <= 1 for row-stochastic A, phi0(x) = Gamma((1 + x)/x)^(-x) entrywise"
    }

    fn prepare(&self, a: &Matrix) -> Result<Matrix> {
        if is_row_stochastic(a, 1e-12) {
            Ok(a.clone())
        } else {
            a.row_normalized()
        }
    }

    fn log_ratio(&self, a: &Matrix) -> Result<f64> {
        let b = Matrix::from_fn(a.n_rows(), a.n_cols(), |i, j| {
            let x = a.get(i, j);
            if x > 0.0 {
                phi0_eval(x.min(1.0)).unwrap_or(f64::NAN)
            } else {
                0.0
            }
        })?;
        Ok(permanent(&b)?.log_value)
    }
}

pub fn conjecture_by_name(name: &str) -> Result<Box<dyn Conjecture>> {
    match name {
        "half-power-upper" => Ok(Box::new(HalfPowerUpper)),
        "phi0-bregman" => Ok(Box::new(Phi0Bregman)),
        _ => Err(Error::arg(format!(
            "unknown conjecture '{name}'; known: half-power-upper, phi0-bregman"
        ))),
    }
}

pub fn all_conjectures() -> Vec<Box<dyn Conjecture>> {
    vec![Box::new(HalfPowerUpper), Box::new(Phi0Bregman)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub sample: usize,
    pub log_ratio: f64,
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureScan {
    pub conjecture: String,
    pub statement: String,
    pub ensemble: String,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Samples skipped because the prepared matrix had zero permanent.
    pub skipped: usize,
    pub min_log_ratio: f64,
    pub max_log_ratio: f64,
    /// `max_log_ratio` as the ratio itself.
    pub max_ratio: f64,
    pub violations: usize,
    pub counterexamples: Vec<Counterexample>,
}

/// Ratios for the given sample indices; sample `i` uses the RNG stream
/// `seed + i`, so any subset or ordering reproduces the same values.
/// Per-sample `(index, Some((log_ratio, prepared matrix)))`, `None` when skipped.
pub type SampleRatios = Vec<(usize, Option<(f64, Matrix)>)>;

pub fn sample_log_ratios(
    conj: &dyn Conjecture,
    ens: &dyn Ensemble,
    n: usize,
    seed: u64,
    indices: std::ops::Range<usize>,
) -> Result<SampleRatios> {
    indices
        .map(|i| {
            let mut rng = rng_from_seed(seed.wrapping_add(i as u64));
            let a = conj.prepare(&ens.sample(n, &mut rng)?)?;
            match conj.log_ratio(&a) {
                Ok(r) if r.is_finite() => Ok((i, Some((r, a)))),
                Ok(_) | Err(Error::ZeroPermanent) => Ok((i, None)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Folds per-sample ratios (in index order) into a scan report.
pub fn summarize(
    conj: &dyn Conjecture,
    ens: &dyn Ensemble,
    n: usize,
    seed: u64,
    ratios: SampleRatios,
) -> ConjectureScan {
    let mut scan = ConjectureScan {
        conjecture: conj.name().into(),
        statement: conj.statement().into(),
        ensemble: ens.name(),
        n,
        samples: ratios.len(),
        seed,
        skipped: 0,
        min_log_ratio: f64::INFINITY,
        max_log_ratio: f64::NEG_INFINITY,
        max_ratio: 0.0,
        violations: 0,
        counterexamples: Vec::new(),
    };
    for (i, r) in ratios {
        let Some((r, a)) = r else {
            scan.skipped += 1;
            continue;
        };
        scan.min_log_ratio = scan.min_log_ratio.min(r);
        scan.max_log_ratio = scan.max_log_ratio.max(r);
        if r > VIOLATION_TOL {
            scan.violations += 1;
            if scan.counterexamples.len() < MAX_COUNTEREXAMPLES {
                scan.counterexamples.push(Counterexample {
                    sample: i,
                    log_ratio: r,
                    matrix: a,
                });
            }
        }
    }
    scan.max_ratio = scan.max_log_ratio.exp();
    scan
}

pub fn scan(conj: &dyn Conjecture, ens: &dyn Ensemble, n: usize, samples: usize, seed: u64) -> Result<ConjectureScan> {
    let ratios = sample_log_ratios(conj, ens, n, seed, 0..samples)?;
    Ok(summarize(conj, ens, n, seed, ratios))
}
