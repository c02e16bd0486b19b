//! Linear-algebra helpers for the flow solvers.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

/// Number of singular values above `1e-10 * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * max).count()
}

/// Number of closed communicating classes of the directed graph on `n` nodes.
///
/// For a stochastic transition pattern this equals the multiplicity of the
/// unit eigenvalue, so `I - P` has rank `n - closed_class_count`.
pub fn closed_class_count(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> usize {
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (a, b) in edges {
        g.add_edge(nodes[a], nodes[b], ());
    }
    let sccs = tarjan_scc(&g);
    let mut class_of = vec![0usize; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            class_of[v.index()] = c;
        }
    }
    let mut leaks = vec![false; sccs.len()];
    for e in g.raw_edges() {
        let (a, b) = (e.source().index(), e.target().index());
        if class_of[a] != class_of[b] {
            leaks[class_of[a]] = true;
        }
    }
    leaks.iter().filter(|&&l| !l).count()
}

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern.
///
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_order(n: usize, pattern: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(r, c) in pattern {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let head = order.len();
        order.push(start);
        let mut cursor = head;
        while cursor < order.len() {
            let v = order[cursor];
            cursor += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Solves the square sparse system `M x = rhs` by banded Gaussian elimination
/// without pivoting, after an RCM reordering.
///
/// Intended for column diagonally dominant matrices, for which elimination
/// without pivoting is stable and preserves the band.
pub fn solve_banded(n: usize, entries: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(rhs.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let pattern: Vec<(usize, usize)> = entries.iter().map(|&(r, c, _)| (r, c)).collect();
    let perm = rcm_order(n, &pattern);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    let (mut kl, mut ku) = (0usize, 0usize);
    for &(r, c, _) in entries {
        let (r, c) = (inv[r], inv[c]);
        if r > c {
            kl = kl.max(r - c);
        } else {
            ku = ku.max(c - r);
        }
    }
    let width = kl + ku + 1;
    let mut band = vec![0.0_f64; n * width];
    let idx = |r: usize, c: usize| r * width + (c + kl - r);
    for &(r, c, v) in entries {
        let (r, c) = (inv[r], inv[c]);
        band[idx(r, c)] += v;
    }
    let mut b: Vec<f64> = perm.iter().map(|&old| rhs[old]).collect();

    for k in 0..n {
        let pivot = band[idx(k, k)];
        if !(pivot.abs() > 1e-13) {
            return Err(Error::Singular { condition: 1.0 / pivot.abs() });
        }
        let last_row = (k + kl).min(n - 1);
        let last_col = (k + ku).min(n - 1);
        for i in k + 1..=last_row {
            let lik = band[idx(i, k)];
            if lik == 0.0 {
                continue;
            }
            let l = lik / pivot;
            band[idx(i, k)] = l;
            for j in k + 1..=last_col {
                let ukj = band[idx(k, j)];
                if ukj != 0.0 {
                    band[idx(i, j)] -= l * ukj;
                }
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = vec![0.0_f64; n];
    for k in (0..n).rev() {
        let last_col = (k + ku).min(n - 1);
        let mut acc = b[k];
        for j in k + 1..=last_col {
            acc -= band[idx(k, j)] * x[j];
        }
        x[k] = acc / band[idx(k, k)];
    }

    let mut out = vec![0.0_f64; n];
    for (new, &old) in perm.iter().enumerate() {
        out[old] = x[new];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_cycle_laplacian() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(numerical_rank(&a), 1);
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3)), 3);
    }

    #[test]
    fn closed_classes() {
        // 0 <-> 1 closed; 2 -> 0 transient.
        assert_eq!(closed_class_count(3, [(0, 1), (1, 0), (2, 0)]), 1);
        // two disjoint cycles
        assert_eq!(closed_class_count(4, [(0, 1), (1, 0), (2, 3), (3, 2)]), 2);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let pattern = [(0, 5), (5, 2), (2, 7), (7, 1), (1, 3), (3, 6), (6, 4)];
        let mut p = rcm_order(8, &pattern);
        p.sort_unstable();
        assert_eq!(p, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn banded_matches_dense_lu() {
        // column diagonally dominant tridiagonal-ish system with a scrambled order
        let n = 12;
        let mut entries = Vec::new();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let order = [3, 7, 0, 11, 5, 9, 1, 4, 10, 2, 8, 6];
        for w in 0..n {
            let i = order[w];
            entries.push((i, i, 2.0));
            dense[(i, i)] += 2.0;
            if w + 1 < n {
                let j = order[w + 1];
                entries.push((i, j, -0.7));
                entries.push((j, i, -0.4));
                dense[(i, j)] += -0.7;
                dense[(j, i)] += -0.4;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let x = solve_banded(n, &entries, &rhs).unwrap();
        let reference = dense.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        for k in 0..n {
            assert!((x[k] - reference[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_reports_singular() {
        let entries = [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)];
        assert!(matches!(
            solve_banded(2, &entries, &[1.0, 1.0]),
            Err(Error::Singular { .. })
        ));
    }
}
