//! Small numerical helpers shared across the crate.

use statrs::function::gamma::ln_gamma;

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `(1 - x) ln(1 - x)`, zero at `x = 1`.
#[inline]
pub fn one_minus_xlog(x: f64) -> f64 {
    let y = 1.0 - x;
    if y == 0.0 {
        0.0
    } else {
        y * (-x).ln_1p()
    }
}

/// `ln(n!)` through log-gamma; accepts non-integer arguments.
#[inline]
pub fn ln_factorial(n: f64) -> f64 {
    if n == 0.0 || n == 1.0 {
        0.0
    } else {
        ln_gamma(n + 1.0)
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n as f64) - ln_factorial(k as f64) - ln_factorial((n - k) as f64)
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `ln Σ exp(l_i)`; `-inf` entries are skipped, an all-`-inf` input gives `-inf`.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: CompensatedSum = logs.iter().map(|&l| (l - max).exp()).collect();
    max + s.value().ln()
}

/// `ln((1/N) Σ exp(l_i))`.
pub fn log_mean_exp(logs: &[f64]) -> f64 {
    if logs.is_empty() {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(logs) - (logs.len() as f64).ln()
}

/// Relative difference of two quantities given by their natural logs.
pub fn log_rel_diff(la: f64, lb: f64) -> f64 {
    if la == f64::NEG_INFINITY && lb == f64::NEG_INFINITY {
        return 0.0;
    }
    (la - lb).exp_m1().abs()
}
