//! Pairwise Frank–Wolfe over the Birkhoff polytope.
//!
//! The linear maximization oracle over doubly stochastic matrices is a
//! linear assignment problem, solved exactly by the Hungarian algorithm, so
//! no Euclidean projection is ever needed. Step sizes come from an exact line
//! search on the one-dimensional concave restriction. Separable objectives
//! that expose a Hessian diagonal are finished with projected Newton steps
//! once the iterate is strictly inside the polytope.

use crate::assignment::solve_max;

/// Step clip; keeps iterates off the vertices where log terms blow up.
const STEP_CAP: f64 = 1.0 - 1e-12;
/// Interior clamp used only when building finite costs for the assignment oracle.
const ORACLE_CLAMP: f64 = 1e-14;
const LINE_SEARCH_ITERS: usize = 100;
const DIR_EPS: f64 = 1e-14;
/// Away weights below this may be dropped without a measurable gain.
const DROP_WEIGHT: f64 = 1e-9;
/// Relative step of the fallback difference quotient in the line search.
const FD_STEP: f64 = 1e-9;
/// Newton polish is attempted once the gap falls below this.
const POLISH_GAP: f64 = 1e-2;
const NEWTON_ITERS: usize = 60;
/// Largest reduced Newton system solved densely.
const NEWTON_MAX_DIM: usize = 1600;
/// Entries closer than this to 0 or 1 disable the Newton polish.
const INTERIOR_MARGIN: f64 = 1e-10;

/// A concave objective on `n x n` doubly stochastic matrices (row-major).
pub trait ConcaveObjective {
    fn order(&self) -> usize;

    fn value(&self, q: &[f64]) -> f64;

    /// Partial derivatives at `q`; may contain infinities on the boundary.
    fn gradient(&self, q: &[f64], out: &mut [f64]);

    /// Whether entry `k` may be positive (otherwise the objective is `-inf` there).
    fn allowed(&self, k: usize) -> bool;

    /// Writes the Hessian diagonal of a separable objective; `false` if unavailable.
    fn hessian_diag(&self, _q: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
enum Atom {
    Start(Vec<f64>),
    Perm(Vec<usize>),
}

impl Atom {
    fn dot(&self, g: &[f64], n: usize) -> f64 {
        match self {
            Atom::Start(s) => s
                .iter()
                .zip(g)
                .filter(|(s, _)| **s != 0.0)
                .map(|(s, g)| s * g)
                .sum(),
            Atom::Perm(p) => p.iter().enumerate().map(|(i, &j)| g[i * n + j]).sum(),
        }
    }

    fn dense(&self, n: usize) -> Vec<f64> {
        match self {
            Atom::Start(s) => s.clone(),
            Atom::Perm(p) => {
                let mut d = vec![0.0; n * n];
                for (i, &j) in p.iter().enumerate() {
                    d[i * n + j] = 1.0;
                }
                d
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FwOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Frank–Wolfe duality gap at `point`: an upper bound on `max f - f(point)`.
    pub gap: f64,
    /// Objective value after each iteration, starting with the initial point.
    pub history: Vec<f64>,
}

/// Gradient with boundary infinities replaced by finite stand-ins suitable
/// for the assignment oracle and the gap estimate.
fn oracle_gradient<O: ConcaveObjective>(obj: &O, q: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
    scratch.clear();
    scratch.extend(q.iter().map(|&v| v.clamp(ORACLE_CLAMP, 1.0 - ORACLE_CLAMP)));
    obj.gradient(scratch, out);
    let finite_max = out
        .iter()
        .filter(|g| g.is_finite())
        .fold(0.0f64, |m, g| m.max(g.abs()));
    let big = 1e6 + 4.0 * (q.len() as f64) * finite_max;
    for (k, g) in out.iter_mut().enumerate() {
        if !obj.allowed(k) || *g == f64::NEG_INFINITY {
            *g = -big;
        } else if !g.is_finite() {
            *g = big;
        }
    }
}

/// Directional derivative `<grad f(q + t d), d>` over the entries where `d != 0`.
///
/// At points with entries exactly at 0 and 1 the analytic slope can be
/// `inf - inf`; the objective itself stays finite there, so the sign comes
/// from a one-sided difference instead.
fn slope<O: ConcaveObjective>(obj: &O, q: &[f64], d: &[f64], t: f64, t_max: f64, buf: &mut [f64], g: &mut [f64]) -> f64 {
    let point = |t: f64, buf: &mut [f64]| {
        for ((b, q), d) in buf.iter_mut().zip(q).zip(d) {
            *b = (q + t * d).clamp(0.0, 1.0);
        }
    };
    point(t, buf);
    obj.gradient(buf, g);
    let s: f64 = g
        .iter()
        .zip(d)
        .filter(|(_, d)| **d != 0.0)
        .map(|(g, d)| g * d)
        .sum();
    if !s.is_nan() {
        return s;
    }
    let h = FD_STEP * t_max;
    let (lo, hi) = if t + h <= t_max { (t, t + h) } else { (t - h, t) };
    point(lo, buf);
    let f_lo = obj.value(buf);
    point(hi, buf);
    let f_hi = obj.value(buf);
    let fd = (f_hi - f_lo) / (hi - lo);
    if fd.is_nan() {
        f64::NEG_INFINITY
    } else {
        fd
    }
}

fn line_search<O: ConcaveObjective>(obj: &O, q: &[f64], d: &[f64], t_max: f64) -> f64 {
    let mut buf = vec![0.0; q.len()];
    let mut g = vec![0.0; q.len()];
    if slope(obj, q, d, 0.0, t_max, &mut buf, &mut g) <= 0.0 {
        return 0.0;
    }
    if slope(obj, q, d, t_max, t_max, &mut buf, &mut g) >= 0.0 {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..LINE_SEARCH_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(obj, q, d, mid, t_max, &mut buf, &mut g) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// A basis of the matrices supported on the free entries with zero line
/// sums: one alternating cycle per non-tree edge of a spanning forest of the
/// bipartite support graph. Each cycle lists `(entry, ±1)`.
fn cycle_basis(n: usize, free: &[bool]) -> Vec<Vec<(usize, f64)>> {
    // vertices: rows 0..n, columns n..2n
    let mut adj = vec![Vec::new(); 2 * n];
    for k in (0..n * n).filter(|&k| free[k]) {
        adj[k / n].push((n + k % n, k));
        adj[n + k % n].push((k / n, k));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; 2 * n];
    let mut depth = vec![usize::MAX; 2 * n];
    let mut in_tree = vec![false; n * n];
    for root in 0..2 * n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, k) in &adj[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = Some((u, k));
                    in_tree[k] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    let mut cycles = Vec::new();
    for k in (0..n * n).filter(|&k| free[k] && !in_tree[k]) {
        // walk both ends up to their common ancestor; signs alternate along the cycle
        let (mut a, mut b) = (k / n, n + k % n);
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                let (p, e) = parent[a].expect("tree edge");
                from_a.push(e);
                a = p;
            } else {
                let (p, e) = parent[b].expect("tree edge");
                from_b.push(e);
                b = p;
            }
        }
        let mut cycle = vec![(k, 1.0)];
        let mut sign = -1.0;
        for e in from_b.into_iter().chain(from_a.into_iter().rev()) {
            cycle.push((e, sign));
            sign = -sign;
        }
        cycles.push(cycle);
    }
    cycles
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `M y = r` for symmetric positive definite `M` (row-major, `dim x dim`).
fn cholesky_solve(mut m: Vec<f64>, r: &[f64]) -> Option<Vec<f64>> {
    let dim = r.len();
    for j in 0..dim {
        let mut d = m[j * dim + j];
        for k in 0..j {
            d -= m[j * dim + k] * m[j * dim + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        m[j * dim + j] = d;
        for i in j + 1..dim {
            let mut v = m[i * dim + j];
            for k in 0..j {
                v -= m[i * dim + k] * m[j * dim + k];
            }
            m[i * dim + j] = v / d;
        }
    }
    let mut y = r.to_vec();
    for i in 0..dim {
        for k in 0..i {
            y[i] -= m[i * dim + k] * y[k];
        }
        y[i] /= m[i * dim + i];
    }
    for i in (0..dim).rev() {
        for k in i + 1..dim {
            y[i] -= m[k * dim + i] * y[k];
        }
        y[i] /= m[i * dim + i];
    }
    Some(y)
}

fn reduced_gradient(cycles: &[Vec<(usize, f64)>], g: &[f64]) -> Vec<f64> {
    cycles.iter().map(|c| c.iter().map(|&(k, s)| s * g[k]).sum()).collect()
}

/// Newton ascent on the face of `q`: entries at 0 or 1 stay fixed and the
/// rest must sit away from both. Steps solve the reduced Newton system in a
/// cycle basis exactly. Returns the steps taken.
fn newton_polish<O: ConcaveObjective>(obj: &O, q: &mut [f64], value: &mut f64, history: &mut Vec<f64>) -> usize {
    let n = obj.order();
    let len = n * n;
    let free: Vec<bool> = q.iter().map(|&x| x > 0.0 && x < 1.0).collect();
    let cycles = cycle_basis(n, &free);
    let dim = cycles.len();
    if dim == 0 || dim > NEWTON_MAX_DIM {
        return 0;
    }
    // cycles through each entry, for assembling the reduced Hessian
    let mut through: Vec<Vec<(usize, f64)>> = vec![Vec::new(); len];
    for (c, cycle) in cycles.iter().enumerate() {
        for &(k, s) in cycle {
            through[k].push((c, s));
        }
    }
    let mut g = vec![0.0; len];
    let mut h = vec![0.0; len];
    let mut steps = 0;
    for _ in 0..NEWTON_ITERS {
        let inside = q
            .iter()
            .all(|&x| x == 0.0 || x == 1.0 || (INTERIOR_MARGIN..=1.0 - INTERIOR_MARGIN).contains(&x));
        if !inside || !obj.hessian_diag(q, &mut h) {
            break;
        }
        obj.gradient(q, &mut g);
        let r = reduced_gradient(&cycles, &g);
        let r_norm = dot(&r, &r);
        if r_norm == 0.0 {
            break;
        }
        let mut m = vec![0.0; dim * dim];
        for (k, list) in through.iter().enumerate() {
            for &(a, sa) in list {
                for &(b, sb) in list {
                    m[a * dim + b] -= h[k] * sa * sb;
                }
            }
        }
        let Some(y) = cholesky_solve(m, &r) else { break };
        let mut d = vec![0.0; len];
        for (cycle, &yc) in cycles.iter().zip(&y) {
            for &(k, s) in cycle {
                d[k] += s * yc;
            }
        }
        // largest step keeping a fixed fraction of the distance to the boundary
        let mut t = d
            .iter()
            .zip(q.iter())
            .map(|(&d, &q)| match d {
                d if d < 0.0 => q / -d,
                d if d > 0.0 => (1.0 - q) / d,
                _ => f64::INFINITY,
            })
            .fold(f64::INFINITY, f64::min);
        t = (0.9 * t).min(1.0);
        // Near the optimum the gain drops below the rounding of the value, so
        // a step that holds the value and shrinks the gradient counts.
        let noise = 1e-14 * value.abs().max(1.0);
        let mut accepted = None;
        let mut g_new = vec![0.0; len];
        while t > 1e-12 {
            let cand: Vec<f64> = q.iter().zip(&d).map(|(q, d)| q + t * d).collect();
            let v = obj.value(&cand);
            let better = v > *value + noise || {
                obj.gradient(&cand, &mut g_new);
                let r_new = reduced_gradient(&cycles, &g_new);
                v >= *value - noise && dot(&r_new, &r_new) < 0.25 * r_norm
            };
            if better {
                accepted = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        q.copy_from_slice(&cand);
        *value = v;
        history.push(v);
        steps += 1;
    }
    steps
}

/// Exact line search then backtracking until the value does not drop;
/// `None` when no positive step qualifies.
fn ascent_step<O: ConcaveObjective>(obj: &O, q: &[f64], dir: &[f64], t_max: f64, value: f64) -> Option<(f64, Vec<f64>, f64)> {
    let mut t = line_search(obj, q, dir, t_max);
    while t > 1e-300 {
        let cand: Vec<f64> = q.iter().zip(dir).map(|(q, d)| (q + t * d).clamp(0.0, 1.0)).collect();
        let v = obj.value(&cand);
        if v >= value {
            return Some((t, cand, v));
        }
        t *= 0.5;
    }
    None
}

/// Maximizes `obj` over doubly stochastic matrices from the feasible `start`.
/// Stops when the duality gap is at most `gap_tol` or after `max_iter` steps.
pub fn maximize<O: ConcaveObjective>(obj: &O, start: Vec<f64>, max_iter: usize, gap_tol: f64) -> FwOutcome {
    let n = obj.order();
    let mut q = start.clone();
    let mut atoms: Vec<(Atom, f64)> = vec![(Atom::Start(start), 1.0)];
    let mut g = vec![0.0; n * n];
    let mut scratch = Vec::with_capacity(n * n);
    let mut value = obj.value(&q);
    let mut history = vec![value];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut polish_below = POLISH_GAP;

    while iterations < max_iter {
        oracle_gradient(obj, &q, &mut scratch, &mut g);
        let s = solve_max(&g, n);
        let s_atom = Atom::Perm(s);
        let q_dot: f64 = q
            .iter()
            .zip(&g)
            .filter(|(q, _)| **q != 0.0)
            .map(|(q, g)| q * g)
            .sum();
        gap = (s_atom.dot(&g, n) - q_dot).max(0.0);
        if gap <= gap_tol {
            break;
        }
        if gap < polish_below {
            let steps = newton_polish(obj, &mut q, &mut value, &mut history);
            polish_below = gap * 1e-3;
            if steps > 0 {
                iterations += steps;
                // the atoms no longer describe q; restart the active set at q
                atoms = vec![(Atom::Start(q.clone()), 1.0)];
                continue;
            }
        }
        iterations += 1;

        // Pairwise step: shift weight from the worst active atom to the oracle vertex.
        let away_idx = atoms
            .iter()
            .enumerate()
            .map(|(k, (a, _))| (k, a.dot(&g, n)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
            .0;
        let away_weight = atoms[away_idx].1;
        let dir: Vec<f64> = s_atom
            .dense(n)
            .iter()
            .zip(atoms[away_idx].0.dense(n))
            .map(|(s, v)| s - v)
            // rounding residue where both atoms agree
            .map(|d| if d.abs() < DIR_EPS { 0.0 } else { d })
            .collect();
        let t_max = away_weight.min(STEP_CAP);
        let noise = 1e-14 * value.abs().max(1.0);

        let pairwise = ascent_step(obj, &q, &dir, t_max, value).or_else(|| {
            // a drop step too small to register in the value
            let cand: Vec<f64> = q.iter().zip(&dir).map(|(q, d)| (q + t_max * d).clamp(0.0, 1.0)).collect();
            let v = obj.value(&cand);
            (t_max < DROP_WEIGHT && v >= value - noise).then_some((t_max, cand, v))
        });
        let (candidate, new_value) = if let Some((t, cand, v)) = pairwise {
            atoms[away_idx].1 -= t;
            let existing = atoms
                .iter()
                .position(|(a, _)| matches!((a, &s_atom), (Atom::Perm(p), Atom::Perm(s)) if p == s));
            match existing {
                Some(k) => atoms[k].1 += t,
                None => atoms.push((s_atom, t)),
            }
            if t >= away_weight {
                atoms[away_idx].1 = 0.0;
            }
            (cand, v)
        } else {
            // plain Frank-Wolfe step toward the oracle vertex
            let s_dense = s_atom.dense(n);
            let fw_dir: Vec<f64> = s_dense.iter().zip(&q).map(|(s, q)| s - q).collect();
            let Some((t, cand, v)) = ascent_step(obj, &q, &fw_dir, STEP_CAP, value) else {
                history.push(value);
                break;
            };
            for (_, w) in atoms.iter_mut() {
                *w *= 1.0 - t;
            }
            let existing = atoms
                .iter()
                .position(|(a, _)| matches!((a, &s_atom), (Atom::Perm(p), Atom::Perm(s)) if p == s));
            match existing {
                Some(k) => atoms[k].1 += t,
                None => atoms.push((s_atom, t)),
            }
            (cand, v)
        };
        atoms.retain(|(_, w)| *w > 1e-16);

        q = candidate;
        value = new_value;
        history.push(value);
    }

    if iterations >= max_iter {
        oracle_gradient(obj, &q, &mut scratch, &mut g);
        let s = Atom::Perm(solve_max(&g, n));
        let q_dot: f64 = q
            .iter()
            .zip(&g)
            .filter(|(q, _)| **q != 0.0)
            .map(|(q, g)| q * g)
            .sum();
        gap = (s.dot(&g, n) - q_dot).max(0.0);
    }

    FwOutcome {
        point: q,
        value,
        iterations,
        gap,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `-Σ (q - t)^2`, maximized at a doubly stochastic target `t`.
    struct Quadratic {
        n: usize,
        target: Vec<f64>,
    }

    impl ConcaveObjective for Quadratic {
        fn order(&self) -> usize {
            self.n
        }
        fn value(&self, q: &[f64]) -> f64 {
            -q.iter().zip(&self.target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        }
        fn gradient(&self, q: &[f64], out: &mut [f64]) {
            for ((o, a), b) in out.iter_mut().zip(q).zip(&self.target) {
                *o = -2.0 * (a - b);
            }
        }
        fn allowed(&self, _: usize) -> bool {
            true
        }
    }

    #[test]
    fn reaches_interior_target() {
        let n = 3;
        // average of the identity and a cyclic shift
        let mut target = vec![0.0; 9];
        for i in 0..3 {
            target[i * 3 + i] += 0.5;
            target[i * 3 + (i + 1) % 3] += 0.5;
        }
        let obj = Quadratic { n, target: target.clone() };
        let out = maximize(&obj, vec![1.0 / 3.0; 9], 2000, 1e-12);
        let err = out.point.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "err {err}");
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn stays_doubly_stochastic() {
        let n = 4;
        let target: Vec<f64> = (0..16).map(|k| if k % 5 == 0 { 1.0 } else { 0.0 }).collect();
        let obj = Quadratic { n, target };
        let out = maximize(&obj, vec![0.25; 16], 50, 0.0);
        for i in 0..n {
            let r: f64 = out.point[i * n..(i + 1) * n].iter().sum();
            let c: f64 = (0..n).map(|k| out.point[k * n + i]).sum();
            assert!((r - 1.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cycle_basis_spans_zero_line_sums() {
        let n = 4;
        let free: Vec<bool> = (0..16).map(|k| k != 1 && k != 6 && k != 11).collect();
        let cycles = cycle_basis(n, &free);
        // edges - vertices + components
        assert_eq!(cycles.len(), 13 - 8 + 1);
        for c in &cycles {
            let mut rows = [0.0; 4];
            let mut cols = [0.0; 4];
            for &(k, s) in c {
                assert!(free[k]);
                rows[k / n] += s;
                cols[k % n] += s;
            }
            assert!(rows.iter().chain(&cols).all(|&x| x == 0.0));
        }
    }
}
