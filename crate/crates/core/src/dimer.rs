//! Monomer-dimer counts on `Λ(k, n)`, the nonnegative integer matrices with
//! every line sum equal to `k`.
//!
//! Random members are drawn from the permutation-block distribution μ: a
//! uniform permutation matrix of order `kn`, cut into a `k × k` grid of
//! `n × n` blocks, summed blockwise.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{per_m_direct, per_m_via_block, PermanentValue, PER_M_DIRECT_LIMIT, RYSER_LIMIT};
use crate::matrix::Matrix;
use crate::numeric::{ln_binomial, ln_factorial, log_mean_exp, one_minus_xlog, xlogx};

/// Work estimate `C(n,m)^2 m!` below which the direct `Per_m` route is used.
pub const DIRECT_ROUTE_BUDGET: f64 = 1e7;

/// The RNG behind every sampler; ChaCha8 output is stable across releases.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimerInstance {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub matrix: Matrix,
}

impl DimerInstance {
    pub fn new(matrix: Matrix, k: usize, m: usize) -> Result<Self> {
        let n = matrix.order()?;
        if m < 1 || m > n {
            return Err(Error::arg(format!("matching size {m} outside 1..={n}")));
        }
        let integral = matrix.entries().iter().all(|&x| x >= 0.0 && x.fract() == 0.0);
        let k_f = k as f64;
        if !integral || matrix.row_sums().iter().chain(&matrix.col_sums()).any(|&s| s != k_f) {
            return Err(Error::domain(format!("matrix is not in Λ({k}, {n})")));
        }
        Ok(Self { n, k, m, matrix })
    }

    pub fn p(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn log_per_m(&self) -> Result<PermanentValue> {
        per_m(&self.matrix, self.m)
    }

    pub fn report(&self) -> Result<DimerBoundReport> {
        Ok(DimerBoundReport {
            log_per_m: self.log_per_m()?.log_value,
            log_lower_pa1: friedland_lower_pa1(self.n, self.m, self.k)?,
            p: self.p(),
            limit_beta: friedland_limit_beta(self.p(), self.k)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerBoundReport {
    pub log_per_m: f64,
    pub log_lower_pa1: f64,
    pub p: f64,
    pub limit_beta: f64,
}

/// One draw from μ on `Λ(k, n)`.
pub fn sample_lambda<R: rand::Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Matrix> {
    if k == 0 || n == 0 {
        return Err(Error::arg("k and n must be positive"));
    }
    let kn = k.checked_mul(n).ok_or_else(|| Error::arg("k * n overflows"))?;
    let mut perm: Vec<usize> = (0..kn).collect();
    perm.shuffle(rng);
    let mut entries = vec![0.0; n * n];
    for (i, &j) in perm.iter().enumerate() {
        entries[(i % n) * n + j % n] += 1.0;
    }
    Matrix::new(n, n, entries)
}

/// Whether the direct route is cheap enough for `Per_m` of an `n × n` matrix.
pub fn direct_route_preferred(n: usize, m: usize) -> bool {
    m <= n && n <= PER_M_DIRECT_LIMIT && 2.0 * ln_binomial(n, m) + ln_factorial(m as f64) < DIRECT_ROUTE_BUDGET.ln()
}

/// `Per_m` by the cheaper of the two exact routes.
pub fn per_m(a: &Matrix, m: usize) -> Result<PermanentValue> {
    let n = a.order()?;
    if direct_route_preferred(n, m) {
        per_m_direct(a, m)
    } else {
        per_m_via_block(a, m)
    }
}

/// Log of the instance lower bound on `Per_m(A)` for `A ∈ Λ(k, n)`, `p = m/n`:
///
/// `((k-p)/k)^{n(k-p)} (1-1/n)^{2n²(1-p)(1-1/n)} / ((p/k)^{np} n^{-2n(1-p)} ((n(1-p))!)²)`.
///
/// Non-integer `n(1-p)` cannot occur for integer `m`; the factorial goes
/// through log-gamma regardless.
pub fn friedland_lower_pa1(n: usize, m: usize, k: usize) -> Result<f64> {
    if k < 1 || n < 1 || m > n {
        return Err(Error::arg(format!("need k >= 1 and m <= n, got n={n}, m={m}, k={k}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let p = m as f64 / nf;
    let q = 1.0 - p;
    let kp = kf - p;
    // (k-p) ln((k-p)/k) written to stay finite at k = p = 1
    let t1 = nf * (xlogx(kp) - kp * kf.ln());
    let t2 = 2.0 * nf * nf * q * one_minus_xlog(1.0 / nf);
    // -(np) ln(p/k) = -n (p ln p - p ln k)
    let t3 = -nf * (xlogx(p) - p * kf.ln());
    let t4 = 2.0 * nf * q * nf.ln();
    let t5 = -2.0 * ln_factorial(nf * q);
    Ok(t1 + t2 + t3 + t4 + t5)
}

/// `β(p, k) = p ln(k/p) - 2(1-p) ln(1-p) + (k-p) ln(1 - p/k)`, extended
/// continuously at `p ∈ {0, 1}`.
pub fn friedland_limit_beta(p: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    if k < 1 {
        return Err(Error::arg("k must be positive"));
    }
    let kf = k as f64;
    let kp = kf - p;
    Ok(p * kf.ln() - xlogx(p) - 2.0 * one_minus_xlog(p) + xlogx(kp) - kp * kf.ln())
}

/// `ln Π (1-p_i)^{1-p_i} - k (1-b) ln(1-b)` with `b` the mean; nonnegative by
/// convexity of `(1-x) ln(1-x)`.
pub fn proposition_friedland_check(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::arg("empty vector"));
    }
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain("entries must lie in [0, 1]"));
    }
    let k = p.len() as f64;
    let b = p.iter().sum::<f64>() / k;
    let lhs: f64 = p.iter().map(|&x| one_minus_xlog(x)).sum();
    Ok(lhs - k * one_minus_xlog(b))
}

/// `m(n) = round(p n)`, clamped to `1..=n`.
pub fn matching_size(p: f64, n: usize) -> usize {
    ((p * n as f64).round() as usize).clamp(1, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub n: usize,
    pub m: usize,
    /// `(1/n) ln` of the sample mean of `Per_m`.
    pub estimate: f64,
    /// `(1/n) ln` of the instance lower bound.
    pub lower: f64,
}

/// Monte-Carlo estimates of `(1/n) ln E_μ Per_{m(n)}` for each `n`.
/// Each `n` gets its own stream seeded from `seed` and `n`.
pub fn empirical_beta(k: usize, p: f64, n_list: &[usize], samples: usize, seed: u64) -> Result<Vec<BetaEstimate>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    if samples == 0 {
        return Err(Error::arg("samples must be positive"));
    }
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::arg("n must be positive"));
            }
            let m = matching_size(p, n);
            if !direct_route_preferred(n, m) && 2 * n - m > RYSER_LIMIT {
                return Err(Error::SizeLimit {
                    what: "per_m bordered route",
                    n: 2 * n - m,
                    limit: RYSER_LIMIT,
                });
            }
            let mut rng = rng_from_seed(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let logs = (0..samples)
                .map(|_| per_m(&sample_lambda(k, n, &mut rng)?, m).map(|v| v.log_value))
                .collect::<Result<Vec<_>>>()?;
            let nf = n as f64;
            Ok(BetaEstimate {
                n,
                m,
                estimate: log_mean_exp(&logs) / nf,
                lower: friedland_lower_pa1(n, m, k)? / nf,
            })
        })
        .collect()
}
