//! Oracles and generators shared by the integration tests. Nothing here calls
//! into the library's numerical routines.

#![allow(dead_code)]

use permbounds::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Permanent by dynamic programming over column subsets, `O(n 2^n)`.
pub fn dp_permanent(a: &Matrix) -> f64 {
    let n = a.n_rows();
    let mut f = vec![0.0f64; 1 << n];
    f[0] = 1.0;
    for mask in 0usize..(1 << n) {
        let row = mask.count_ones() as usize;
        if row == n || f[mask] == 0.0 {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 {
                f[mask | (1 << j)] += f[mask] * a.get(row, j);
            }
        }
    }
    f[(1 << n) - 1]
}

pub fn dp_log_permanent(a: &Matrix) -> f64 {
    dp_permanent(a).ln()
}

/// `Per_m` as the sum of permanents over all pairs of `m`-subsets.
pub fn dp_per_m(a: &Matrix, m: usize) -> f64 {
    let n = a.n_rows();
    let subsets: Vec<Vec<usize>> = (0usize..(1 << n))
        .filter(|s| s.count_ones() as usize == m)
        .map(|s| (0..n).filter(|i| s & (1 << i) != 0).collect())
        .collect();
    let mut total = 0.0;
    for r in &subsets {
        for c in &subsets {
            total += dp_permanent(&a.submatrix(r, c));
        }
    }
    total
}

pub fn log_bethe(a: &Matrix) -> f64 {
    a.entries()
        .iter()
        .map(|&x| {
            let y = 1.0 - x.min(1.0);
            if y > 0.0 {
                y * y.ln()
            } else {
                0.0
            }
        })
        .sum()
}

pub fn random_positive(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(n, n, |_, _| rng.gen_range(0.01..1.0)).unwrap()
}

/// Nonnegative with random zeros and row scales over several decades; no
/// row is zero.
pub fn random_nonnegative(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let density = rng.gen_range(0.3..1.0);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let mut row: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < density { scale * rng.gen::<f64>() } else { 0.0 })
            .collect();
        if row.iter().all(|&x| x == 0.0) {
            row[rng.gen_range(0..n)] = scale;
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows).unwrap()
}

/// Plain alternating normalization, independent of the library scaler.
pub fn naive_sinkhorn(a: &Matrix, iters: usize) -> Matrix {
    let n = a.n_rows();
    let mut e = a.entries().to_vec();
    for _ in 0..iters {
        for i in 0..n {
            let s: f64 = e[i * n..(i + 1) * n].iter().sum();
            e[i * n..(i + 1) * n].iter_mut().for_each(|x| *x /= s);
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| e[i * n + j]).sum();
            (0..n).for_each(|i| e[i * n + j] /= s);
        }
    }
    Matrix::new(n, n, e).unwrap()
}

/// Random doubly stochastic matrix as a convex combination of permutations.
pub fn random_birkhoff(n: usize, terms: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut e = vec![0.0; n * n];
    let w: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = w.iter().sum();
    for wk in w {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, rng.gen_range(0..=i));
        }
        for (i, &j) in p.iter().enumerate() {
            e[i * n + j] += wk / total;
        }
    }
    Matrix::new(n, n, e).unwrap()
}

/// Random probability vector; `peak` > 1 concentrates the mass.
pub fn random_stochastic_vector(len: usize, peak: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen::<f64>().powf(peak)).collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn half_block(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i / 2 == j / 2 { 0.5 } else { 0.0 }).unwrap()
}

pub fn cycle(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if j == i || j == (i + 1) % n { 1.0 } else { 0.0 }).unwrap()
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
