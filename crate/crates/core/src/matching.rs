//! Bipartite matchings on the support of a square matrix.

use crate::error::Result;
use crate::matrix::Matrix;

const NIL: usize = usize::MAX;

/// Hopcroft–Karp maximum matching on a bipartite graph given as left-vertex
/// adjacency lists. Returns `match_left[u]` (or `None`) for every left vertex.
pub fn hopcroft_karp(n_left: usize, n_right: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut match_l = vec![NIL; n_left];
    let mut match_r = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];
    let mut queue = Vec::with_capacity(n_left);

    loop {
        // BFS layering from free left vertices.
        queue.clear();
        let mut found = false;
        for u in 0..n_left {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; n_left];
        for u in 0..n_left {
            if match_l[u] == NIL {
                augment(u, adj, &mut match_l, &mut match_r, &mut dist, &mut it);
            }
        }
    }
    match_l.into_iter().map(|v| (v != NIL).then_some(v)).collect()
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    while it[u] < adj[u].len() {
        let v = adj[u][it[u]];
        it[u] += 1;
        let w = match_r[v];
        if w == NIL || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist, it)) {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    dist[u] = usize::MAX;
    false
}

fn support_adjacency(a: &Matrix) -> Vec<Vec<usize>> {
    a.rows()
        .map(|r| (0..r.len()).filter(|&j| r[j] > 0.0).collect())
        .collect()
}

/// A perfect matching inside the support of `a`, as `perm[i] = j`.
pub fn perfect_matching(a: &Matrix) -> Result<Option<Vec<usize>>> {
    let n = a.order()?;
    let m = hopcroft_karp(n, n, &support_adjacency(a));
    Ok(m.into_iter().collect())
}

/// Whether the bipartite support graph of `a` has a perfect matching,
/// i.e. whether `Per(a) > 0`.
pub fn support_has_perfect_matching(a: &Matrix) -> Result<bool> {
    Ok(perfect_matching(a)?.is_some())
}

/// Perfect matchings of the support that cover every edge lying on at least
/// one perfect matching. Their average is a doubly stochastic matrix in the
/// relative interior of the face of the Birkhoff polytope spanned by the support.
pub fn covering_matchings(a: &Matrix) -> Result<Vec<Vec<usize>>> {
    let n = a.order()?;
    let adj = support_adjacency(a);
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut covered = vec![false; n * n];
    for i in 0..n {
        for &j in &adj[i] {
            if covered[i * n + j] {
                continue;
            }
            // Force edge (i, j): row i may only use column j, column j only row i.
            let forced: Vec<Vec<usize>> = adj
                .iter()
                .enumerate()
                .map(|(u, cols)| {
                    if u == i {
                        vec![j]
                    } else {
                        cols.iter().copied().filter(|&v| v != j).collect()
                    }
                })
                .collect();
            let m = hopcroft_karp(n, n, &forced);
            if let Some(perm) = m.into_iter().collect::<Option<Vec<usize>>>() {
                for (u, &v) in perm.iter().enumerate() {
                    covered[u * n + v] = true;
                }
                found.push(perm);
            }
        }
    }
    Ok(found)
}
