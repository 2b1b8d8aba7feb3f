//! A registry of permanent bounds, selected by name at runtime.
//!
//! Every bound reports a natural-log value or `None` when it does not apply
//! to the given matrix (for example the 0/1-only bound on real input).

use std::cell::OnceCell;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::bethe::{maximize_bethe, BoundReport};
use crate::error::{Error, Result};
use crate::exact::{permanent_ryser, RYSER_LIMIT};
use crate::matrix::Matrix;
use crate::numeric::ln_factorial;
use crate::orlicz::{bregman_bound, upper_bound_orlicz};
use crate::psi::PsiFunction;
use crate::scaling::{sinkhorn_scale, ScalingResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Estimate,
    Upper,
    Exact,
}

/// Shared inputs, with the scaling computed at most once.
pub struct BoundContext<'a> {
    pub a: &'a Matrix,
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub psi: PsiFunction,
    scaling: OnceCell<Result<(ScalingResult, BoundReport)>>,
}

impl<'a> BoundContext<'a> {
    pub fn new(a: &'a Matrix, tol: f64, max_iter: usize, psi: PsiFunction) -> Result<Self> {
        let n = a.order()?;
        Ok(Self {
            a,
            n,
            tol,
            max_iter,
            psi,
            scaling: OnceCell::new(),
        })
    }

    fn scaled(&self) -> Result<&(ScalingResult, BoundReport)> {
        self.scaling
            .get_or_init(|| {
                let (r, degraded) = match sinkhorn_scale(self.a, self.tol, self.max_iter) {
                    Ok(r) => (r, false),
                    Err(Error::ScalingNotConverged(r)) => (*r, true),
                    Err(e) => return Err(e),
                };
                let report = BoundReport::from_scaling(self.n, &r, degraded)?;
                Ok((r, report))
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// The scale-then-evaluate report behind the Bethe-family bounds.
    pub fn report(&self) -> Result<&BoundReport> {
        Ok(&self.scaled()?.1)
    }

    /// `Σ ln x_i + Σ ln y_j` of the Sinkhorn scaling.
    pub fn log_factor_product(&self) -> Result<f64> {
        Ok(self.scaled()?.0.log_factor_product)
    }
}

pub trait PermanentBound: Send + Sync {
    fn name(&self) -> &'static str;

    fn side(&self) -> Side;

    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>>;
}

struct ExactRyser;

impl PermanentBound for ExactRyser {
    fn name(&self) -> &'static str {
        "exact"
    }
    fn side(&self) -> Side {
        Side::Exact
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        if ctx.n > RYSER_LIMIT {
            return Ok(None);
        }
        Ok(Some(permanent_ryser(ctx.a)?.log_value))
    }
}

/// `CW(A, B)` at the Sinkhorn image `B`.
struct BetheLower;

impl PermanentBound for BetheLower {
    fn name(&self) -> &'static str {
        "bethe-lower"
    }
    fn side(&self) -> Side {
        Side::Lower
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        Ok(Some(ctx.report()?.log_lower))
    }
}

struct BetheEstimate;

impl PermanentBound for BetheEstimate {
    fn name(&self) -> &'static str {
        "bethe-estimate"
    }
    fn side(&self) -> Side {
        Side::Estimate
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        Ok(Some(ctx.report()?.log_estimate))
    }
}

/// `n ln 2 + ln F(B)` for the scaled matrix, pulled back through the scaling.
struct BetheUpper;

impl PermanentBound for BetheUpper {
    fn name(&self) -> &'static str {
        "bethe-upper"
    }
    fn side(&self) -> Side {
        Side::Upper
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        Ok(Some(ctx.report()?.log_upper))
    }
}

/// `max_B CW(A, B)` by Frank–Wolfe; never below `bethe-lower`.
struct BetheOptimized;

const BETHE_OPT_ITER: usize = 500;

impl PermanentBound for BetheOptimized {
    fn name(&self) -> &'static str {
        "bethe-opt-lower"
    }
    fn side(&self) -> Side {
        Side::Lower
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        Ok(Some(maximize_bethe(ctx.a, BETHE_OPT_ITER, 1e-10)?.objective))
    }
}

/// `ln(n!/n^n)` pulled back through the scaling.
struct VanDerWaerden;

impl PermanentBound for VanDerWaerden {
    fn name(&self) -> &'static str {
        "van-der-waerden"
    }
    fn side(&self) -> Side {
        Side::Lower
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        let n = ctx.n as f64;
        Ok(Some(ln_factorial(n) - n * n.ln() - ctx.log_factor_product()?))
    }
}

/// `Per(B) <= 1` for doubly stochastic `B`.
struct ScalingUpper;

impl PermanentBound for ScalingUpper {
    fn name(&self) -> &'static str {
        "scaling-upper"
    }
    fn side(&self) -> Side {
        Side::Upper
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        Ok(Some(-ctx.log_factor_product()?))
    }
}

struct OrliczUpper;

impl PermanentBound for OrliczUpper {
    fn name(&self) -> &'static str {
        "orlicz-upper"
    }
    fn side(&self) -> Side {
        Side::Upper
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        if ctx.a.rows().any(|r| r.iter().all(|&x| x == 0.0)) {
            return Ok(None);
        }
        upper_bound_orlicz(ctx.a, &ctx.psi).map(Some)
    }
}

struct BregmanUpper;

impl PermanentBound for BregmanUpper {
    fn name(&self) -> &'static str {
        "bregman-upper"
    }
    fn side(&self) -> Side {
        Side::Upper
    }
    fn evaluate(&self, ctx: &BoundContext) -> Result<Option<f64>> {
        if !ctx.a.is_zero_one() {
            return Ok(None);
        }
        let b = bregman_bound(ctx.a)?;
        Ok((!b.zero_permanent).then_some(b.log_value))
    }
}

pub struct BoundRegistry {
    bounds: Vec<Box<dyn PermanentBound>>,
}

impl Default for BoundRegistry {
    fn default() -> Self {
        Self {
            bounds: vec![
                Box::new(ExactRyser),
                Box::new(BetheLower),
                Box::new(BetheOptimized),
                Box::new(VanDerWaerden),
                Box::new(BetheEstimate),
                Box::new(BetheUpper),
                Box::new(ScalingUpper),
                Box::new(OrliczUpper),
                Box::new(BregmanUpper),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBound {
    pub name: String,
    pub side: Side,
    pub log_value: f64,
    pub log2_value: f64,
}

impl BoundRegistry {
    pub fn register(&mut self, bound: Box<dyn PermanentBound>) {
        self.bounds.push(bound);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.bounds.iter().map(|b| b.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn PermanentBound> {
        self.bounds.iter().find(|b| b.name() == name).map(|b| b.as_ref())
    }

    /// Evaluates the selected bounds (all when `selection` is empty), in
    /// registry order, skipping those that do not apply.
    pub fn evaluate(&self, ctx: &BoundContext, selection: &[String]) -> Result<Vec<NamedBound>> {
        for s in selection {
            if self.get(s).is_none() {
                return Err(Error::arg(format!("unknown bound '{s}'; known: {}", self.names().join(", "))));
            }
        }
        let mut out = Vec::new();
        for b in &self.bounds {
            if !selection.is_empty() && !selection.iter().any(|s| s == b.name()) {
                continue;
            }
            if let Some(v) = b.evaluate(ctx)? {
                out.push(NamedBound {
                    name: b.name().to_string(),
                    side: b.side(),
                    log_value: v,
                    log2_value: v / LN_2,
                });
            }
        }
        Ok(out)
    }
}

/// Bounds that contradict the exact value by more than `slack`.
pub fn ordering_violations(bounds: &[NamedBound], slack: f64) -> Vec<String> {
    let Some(exact) = bounds.iter().find(|b| b.side == Side::Exact).map(|b| b.log_value) else {
        return Vec::new();
    };
    bounds
        .iter()
        .filter_map(|b| match b.side {
            Side::Lower if b.log_value > exact + slack => {
                Some(format!("{} = {} exceeds exact {}", b.name, b.log_value, exact))
            }
            Side::Upper if b.log_value < exact - slack => {
                Some(format!("{} = {} is below exact {}", b.name, b.log_value, exact))
            }
            _ => None,
        })
        .collect()
}
