//! Linear assignment solver (Hungarian algorithm, dense O(n^3)).

/// Minimum-cost perfect assignment for a square row-major cost array.
/// Returns `assignment[row] = col`. Costs must be finite.
pub fn solve_min(costs: &[f64], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    debug_assert_eq!(costs.len(), n * n);
    debug_assert!(costs.iter().all(|c| c.is_finite()));

    let inf = f64::INFINITY;
    // 1-based potentials; column 0 is the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Maximum-weight perfect assignment.
pub fn solve_max(weights: &[f64], n: usize) -> Vec<usize> {
    let neg: Vec<f64> = weights.iter().map(|w| -w).collect();
    solve_min(&neg, n)
}
