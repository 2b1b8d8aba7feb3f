//! Exact permanents and `Per_m` at desk scale.
//!
//! Every value is returned in the natural-log domain with an explicit zero
//! marker, since `n!/n^n` and products of bounds underflow doubles near `n = 20`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::support_has_perfect_matching;
use crate::matrix::Matrix;
use crate::numeric::{ln_factorial, CompensatedSum};

pub const BRUTE_FORCE_LIMIT: usize = 8;
pub const RYSER_LIMIT: usize = 24;
pub const PER_M_DIRECT_LIMIT: usize = 10;

/// A nonnegative quantity stored as its natural log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermanentValue {
    /// `ln Per`, or `None` in JSON when the value is zero.
    #[serde(with = "log_or_null")]
    pub log_value: f64,
    pub sign_is_zero: bool,
}

mod log_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

impl PermanentValue {
    pub const ZERO: PermanentValue = PermanentValue {
        log_value: f64::NEG_INFINITY,
        sign_is_zero: true,
    };

    pub fn from_log(log_value: f64) -> Self {
        if log_value == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_value,
                sign_is_zero: false,
            }
        }
    }

    /// From a linear value `v * exp(log_scale)`; `v <= 0` is the zero marker.
    pub fn from_scaled(v: f64, log_scale: f64) -> Self {
        if v > 0.0 {
            Self::from_log(v.ln() + log_scale)
        } else {
            Self::ZERO
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign_is_zero
    }

    /// Linear value; may under- or overflow.
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Scales each row by its maximum. Returns the scaled entries and
/// `Σ ln(row max)`, or `None` when some row is zero.
fn row_prescale(a: &Matrix) -> Option<(Vec<f64>, f64)> {
    let n = a.n_cols();
    let mut out = Vec::with_capacity(a.entries().len());
    let mut log_scale = 0.0;
    for r in a.rows() {
        let m = r.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return None;
        }
        log_scale += m.ln();
        out.extend(r.iter().map(|v| v / m));
    }
    debug_assert_eq!(out.len(), n * a.n_rows());
    Some((out, log_scale))
}

const BALANCE_SWEEPS: usize = 50;
const BALANCE_TOL: f64 = 1e-3;

/// Rough Sinkhorn balancing before inclusion–exclusion. Ryser's cancellation
/// error is about `eps * Π(row sums) / Per`, which balancing keeps near
/// `eps * n^n / n!` whatever the scaling of the input. Returns the balanced
/// entries and the log of `Per(A) / Per(balanced)`.
fn balance(a: &Matrix) -> Option<(Vec<f64>, f64)> {
    let n = a.n_rows();
    let (mut e, mut log_scale) = row_prescale(a)?;
    for _ in 0..BALANCE_SWEEPS {
        let mut dev = 0.0f64;
        for j in 0..n {
            let s: f64 = (0..n).map(|i| e[i * n + j]).sum();
            if s == 0.0 {
                return None;
            }
            dev = dev.max((s - 1.0).abs());
            log_scale += s.ln();
            (0..n).for_each(|i| e[i * n + j] /= s);
        }
        for row in e.chunks_mut(n) {
            let s: f64 = row.iter().sum();
            dev = dev.max((s - 1.0).abs());
            log_scale += s.ln();
            row.iter_mut().for_each(|v| *v /= s);
        }
        if dev < BALANCE_TOL {
            break;
        }
    }
    Some((e, log_scale))
}

/// Sum over all `n!` permutations of the entry products.
pub fn permanent_bruteforce(a: &Matrix) -> Result<PermanentValue> {
    let n = a.order()?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            what: "brute-force permanent",
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let Some((e, log_scale)) = row_prescale(a) else {
        return Ok(PermanentValue::ZERO);
    };
    // Heap's algorithm.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let term = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| e[i * n + j]).product::<f64>();
    let mut sum = CompensatedSum::new();
    sum.add(term(&perm));
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sum.add(term(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(PermanentValue::from_scaled(sum.value(), log_scale))
}

/// Ryser inclusion–exclusion in the Nijenhuis–Wilf form, visiting subsets of
/// the first `n - 1` columns in Gray-code order with incremental row sums.
/// `e` is a row-major `n x n` array.
pub(crate) fn ryser_linear(e: &[f64], n: usize) -> f64 {
    debug_assert_eq!(e.len(), n * n);
    if n == 0 {
        return 1.0;
    }
    let last = n - 1;
    let mut rows: Vec<f64> = (0..n)
        .map(|i| {
            let r = &e[i * n..(i + 1) * n];
            r[last] - 0.5 * r.iter().sum::<f64>()
        })
        .collect();
    let mut in_set = vec![false; last];
    let mut total = CompensatedSum::new();
    total.add(rows.iter().product());
    let mut odd = false;
    for k in 1u64..(1u64 << last) {
        let j = k.trailing_zeros() as usize;
        let add = !in_set[j];
        in_set[j] = add;
        odd = !odd;
        if add {
            for (i, x) in rows.iter_mut().enumerate() {
                *x += e[i * n + j];
            }
        } else {
            for (i, x) in rows.iter_mut().enumerate() {
                *x -= e[i * n + j];
            }
        }
        let p: f64 = rows.iter().product();
        total.add(if odd { -p } else { p });
    }
    let sign = if last.is_multiple_of(2) { 1.0 } else { -1.0 };
    2.0 * sign * total.value()
}

/// Exact permanent by Ryser's formula on a balanced copy, for `n <= 24`.
pub fn permanent_ryser(a: &Matrix) -> Result<PermanentValue> {
    let n = a.order()?;
    if n > RYSER_LIMIT {
        return Err(Error::SizeLimit {
            what: "Ryser permanent",
            n,
            limit: RYSER_LIMIT,
        });
    }
    if !support_has_perfect_matching(a)? {
        return Ok(PermanentValue::ZERO);
    }
    let (e, log_scale) = balance(a).expect("matching support has no zero line");
    let v = ryser_linear(&e, n);
    if !(v > 0.0) {
        return Err(Error::Numerical(format!(
            "Ryser sum {v:e} is not positive for a matrix with positive permanent"
        )));
    }
    Ok(PermanentValue::from_scaled(v, log_scale))
}

/// Exact permanent by the fastest applicable route.
pub fn permanent(a: &Matrix) -> Result<PermanentValue> {
    permanent_ryser(a)
}

fn check_m(n: usize, m: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::arg(format!("m = {m} must satisfy 1 <= m <= n = {n}")));
    }
    Ok(())
}

/// Lexicographic `k`-subsets of `0..n`.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[pos] += 1;
        for i in pos + 1..k {
            idx[i] = idx[i - 1] + 1;
        }
    }
}

/// `Per_m(A)`: sum of the permanents of all `m x m` submatrices, by enumeration.
pub fn per_m_direct(a: &Matrix, m: usize) -> Result<PermanentValue> {
    let n = a.order()?;
    check_m(n, m)?;
    if n > PER_M_DIRECT_LIMIT {
        return Err(Error::SizeLimit {
            what: "direct Per_m enumeration",
            n,
            limit: PER_M_DIRECT_LIMIT,
        });
    }
    let c = a.max_entry();
    if c == 0.0 {
        return Ok(PermanentValue::ZERO);
    }
    let e: Vec<f64> = a.entries().iter().map(|v| v / c).collect();
    let subsets = combinations(n, m);
    let mut sub = vec![0.0; m * m];
    let mut total = CompensatedSum::new();
    for rows in &subsets {
        for cols in &subsets {
            for (r, &i) in rows.iter().enumerate() {
                for (s, &j) in cols.iter().enumerate() {
                    sub[r * m + s] = e[i * n + j];
                }
            }
            // Sub-permanents are nonnegative; clip roundoff below zero.
            total.add(ryser_linear(&sub, m).max(0.0));
        }
    }
    Ok(PermanentValue::from_scaled(total.value(), m as f64 * c.ln()))
}

/// The bordered matrix `[[A, J], [J^T, 0]]` with `J` of shape `n x (n - m)`.
pub fn bordered_matrix(a: &Matrix, m: usize) -> Result<Matrix> {
    let n = a.order()?;
    check_m(n, m)?;
    let size = 2 * n - m;
    Matrix::from_fn(size, size, |i, j| match (i < n, j < n) {
        (true, true) => a.get(i, j),
        (false, false) => 0.0,
        _ => 1.0,
    })
}

/// `Per_m(A) = Per(L) / ((n - m)!)^2` with `L` the bordered matrix.
pub fn per_m_via_block(a: &Matrix, m: usize) -> Result<PermanentValue> {
    let n = a.order()?;
    check_m(n, m)?;
    if 2 * n - m > RYSER_LIMIT {
        return Err(Error::SizeLimit {
            what: "bordered Per_m matrix",
            n: 2 * n - m,
            limit: RYSER_LIMIT,
        });
    }
    let c = a.max_entry();
    if c == 0.0 {
        return Ok(PermanentValue::ZERO);
    }
    let l = bordered_matrix(&a.scaled(1.0 / c)?, m)?;
    let per_l = permanent_ryser(&l)?;
    if per_l.is_zero() {
        return Ok(PermanentValue::ZERO);
    }
    Ok(PermanentValue::from_log(
        per_l.log_value - 2.0 * ln_factorial((n - m) as f64) + m as f64 * c.ln(),
    ))
}
