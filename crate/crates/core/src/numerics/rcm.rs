use std::collections::VecDeque;

use super::csr::CsrMatrix;

/// Reverse Cuthill-McKee ordering of the symmetrized pattern of `a`.
///
/// Returns `perm` with `perm[new] = old`, suitable for
/// [`CsrMatrix::permute_symmetric`]. Falls back to the identity ordering
/// when RCM would widen the band.
pub fn rcm_reordering(a: &CsrMatrix) -> Vec<usize> {
    assert_eq!(a.n_rows(), a.n_cols(), "RCM needs a square matrix");
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            let mut next: Vec<usize> = adj[node].iter().copied().filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();

    if a.permute_symmetric(&order).bandwidth() > a.bandwidth() {
        (0..n).collect()
    } else {
        order
    }
}

/// BFS level structure from `root`: (eccentricity, last level).
fn levels(root: usize, adj: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let mut depth = vec![usize::MAX; adj.len()];
    depth[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = vec![root];
    let mut ecc = 0;
    while let Some(node) = queue.pop_front() {
        for &j in &adj[node] {
            if depth[j] == usize::MAX {
                depth[j] = depth[node] + 1;
                if depth[j] > ecc {
                    ecc = depth[j];
                    last.clear();
                }
                last.push(j);
                queue.push_back(j);
            }
        }
    }
    (ecc, last)
}

fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut ecc, mut last) = levels(root, adj);
    loop {
        let candidate = *last
            .iter()
            .min_by_key(|&&j| (degree[j], j))
            .expect("level set is never empty");
        let (cand_ecc, cand_last) = levels(candidate, adj);
        if cand_ecc <= ecc {
            return root;
        }
        root = candidate;
        ecc = cand_ecc;
        last = cand_last;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn banded_stays_banded() {
        let a = tridiagonal(20);
        let p = rcm_reordering(&a);
        assert!(is_permutation(&p));
        assert_eq!(a.permute_symmetric(&p).bandwidth(), 1);
    }

    #[test]
    fn shuffled_tridiagonal_restored() {
        let a = tridiagonal(30);
        // deterministic scramble
        let scramble: Vec<usize> = (0..30).map(|i| (i * 7) % 30).collect();
        let shuffled = a.permute_symmetric(&scramble);
        assert!(shuffled.bandwidth() > 1);
        let p = rcm_reordering(&shuffled);
        assert!(is_permutation(&p));
        assert_eq!(shuffled.permute_symmetric(&p).bandwidth(), 1);
    }

    #[test]
    fn disconnected_components() {
        let a = CsrMatrix::from_triplets(4, 4, &[(0, 2, 1.0), (2, 0, 1.0), (1, 1, 1.0), (3, 3, 1.0)]).unwrap();
        let p = rcm_reordering(&a);
        assert!(is_permutation(&p));
        assert!(a.permute_symmetric(&p).bandwidth() <= a.bandwidth());
    }
}
