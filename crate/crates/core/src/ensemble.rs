//! Named random and structured matrix families, selectable at runtime.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dimer::sample_lambda;
use crate::error::{Error, Result};
use crate::matching::support_has_perfect_matching;
use crate::matrix::Matrix;
use crate::scaling::sinkhorn_scale;

/// Scaling tolerance for the doubly stochastic family.
pub const DS_SCALING_TOL: f64 = 1e-12;
const DS_SCALING_MAX_ITER: usize = 100_000;
const MAX_REJECTIONS: usize = 10_000;

pub trait Ensemble: Send + Sync {
    fn name(&self) -> String;

    /// One `n × n` member; deterministic structured families ignore `rng`.
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix>;
}

fn positive_random(n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    // 1 - U lies in (0, 1]
    Matrix::from_fn(n, n, |_, _| 1.0 - rng.gen::<f64>())
}

pub struct PositiveRandom;

impl Ensemble for PositiveRandom {
    fn name(&self) -> String {
        "positive-random".into()
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        positive_random(n, rng)
    }
}

/// Random positive matrices pushed through Sinkhorn.
pub struct DoublyStochasticRandom;

impl Ensemble for DoublyStochasticRandom {
    fn name(&self) -> String {
        "ds-random".into()
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        Ok(sinkhorn_scale(&positive_random(n, rng)?, DS_SCALING_TOL, DS_SCALING_MAX_ITER)?.scaled)
    }
}

/// Random positive matrices with rows normalized.
pub struct StochasticRandom;

impl Ensemble for StochasticRandom {
    fn name(&self) -> String {
        "stochastic-random".into()
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        positive_random(n, rng)?.row_normalized()
    }
}

pub struct LambdaK {
    pub k: usize,
}

impl Ensemble for LambdaK {
    fn name(&self) -> String {
        format!("lambda-{}", self.k)
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        sample_lambda(self.k, n, rng)
    }
}

/// Direct sum of `n/2` all-ones `2 × 2` blocks.
pub struct BlockA1;

impl Ensemble for BlockA1 {
    fn name(&self) -> String {
        "block-a1".into()
    }

    fn sample(&self, n: usize, _: &mut ChaCha8Rng) -> Result<Matrix> {
        block_a1(n)
    }
}

/// Identity plus the cyclic shift; permanent 2 for every `n >= 2`.
pub struct CycleA2;

impl Ensemble for CycleA2 {
    fn name(&self) -> String {
        "cycle-a2".into()
    }

    fn sample(&self, n: usize, _: &mut ChaCha8Rng) -> Result<Matrix> {
        cycle_a2(n)
    }
}

/// Bernoulli(`q`) 0/1 matrices, resampled until the permanent is positive.
pub struct ZeroOneDensity {
    pub q: f64,
}

impl Ensemble for ZeroOneDensity {
    fn name(&self) -> String {
        format!("zero-one-density({})", self.q)
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix> {
        for _ in 0..MAX_REJECTIONS {
            let a = Matrix::from_fn(n, n, |_, _| if rng.gen::<f64>() < self.q { 1.0 } else { 0.0 })?;
            if support_has_perfect_matching(&a)? {
                return Ok(a);
            }
        }
        Err(Error::Numerical(format!(
            "no positive-permanent sample at density {} after {MAX_REJECTIONS} draws",
            self.q
        )))
    }
}

pub fn block_a1(n: usize) -> Result<Matrix> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::arg(format!("block-a1 needs a positive even order, got {n}")));
    }
    Matrix::from_fn(n, n, |i, j| if i / 2 == j / 2 { 1.0 } else { 0.0 })
}

pub fn cycle_a2(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::arg(format!("cycle-a2 needs order >= 2, got {n}")));
    }
    Matrix::from_fn(n, n, |i, j| if j == i || j == (i + 1) % n { 1.0 } else { 0.0 })
}

pub const ENSEMBLE_NAMES: &[&str] = &[
    "ds-random",
    "positive-random",
    "stochastic-random",
    "lambda-k",
    "block-a1",
    "cycle-a2",
    "zero-one-density(q)",
];

/// Resolves a family by name. `lambda-k` takes `k` from the argument unless
/// written with a number (`lambda-3`); the density is written `zero-one-density(0.3)`
/// or `zero-one-density:0.3`.
pub fn ensemble_by_name(name: &str, k: usize) -> Result<Box<dyn Ensemble>> {
    let unknown = || Error::arg(format!("unknown ensemble '{name}'; known: {}", ENSEMBLE_NAMES.join(", ")));
    Ok(match name {
        "ds-random" => Box::new(DoublyStochasticRandom),
        "positive-random" => Box::new(PositiveRandom),
        "stochastic-random" => Box::new(StochasticRandom),
        "block-a1" => Box::new(BlockA1),
        "cycle-a2" => Box::new(CycleA2),
        "lambda-k" => {
            if k == 0 {
                return Err(Error::arg("lambda-k needs k >= 1"));
            }
            Box::new(LambdaK { k })
        }
        other => {
            if let Some(k) = other.strip_prefix("lambda-") {
                let k: usize = k.parse().map_err(|_| unknown())?;
                if k == 0 {
                    return Err(Error::arg("lambda-k needs k >= 1"));
                }
                Box::new(LambdaK { k })
            } else if let Some(rest) = other.strip_prefix("zero-one-density") {
                let q = rest
                    .strip_prefix(':')
                    .or_else(|| rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(unknown)?;
                let q: f64 = q.trim().parse().map_err(|_| unknown())?;
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::domain(format!("density must lie in (0, 1], got {q}")));
                }
                Box::new(ZeroOneDensity { q })
            } else {
                return Err(unknown());
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimer::rng_from_seed;
    use crate::matrix::is_doubly_stochastic;

    #[test]
    fn names_resolve() {
        for name in ["ds-random", "lambda-k", "lambda-3", "block-a1", "cycle-a2", "zero-one-density(0.4)", "zero-one-density:1"] {
            ensemble_by_name(name, 2).unwrap();
        }
        assert!(ensemble_by_name("nope", 2).is_err());
        assert!(ensemble_by_name("zero-one-density(2)", 2).is_err());
        assert_eq!(ensemble_by_name("lambda-k", 4).unwrap().name(), "lambda-4");
    }

    #[test]
    fn ds_random_is_doubly_stochastic() {
        let mut rng = rng_from_seed(3);
        let a = DoublyStochasticRandom.sample(6, &mut rng).unwrap();
        assert!(is_doubly_stochastic(&a, 1e-11));
    }

    #[test]
    fn structured_members() {
        assert!(block_a1(5).is_err());
        assert_eq!(block_a1(4).unwrap().row_sums(), vec![2.0; 4]);
        assert_eq!(cycle_a2(2).unwrap(), Matrix::filled(2, 2, 1.0).unwrap());
    }
}
