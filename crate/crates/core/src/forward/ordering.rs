//! Reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

/// Returns `perm` with `perm[new] = old`, computed from symmetric adjacency
/// lists. Disconnected graphs are handled component by component.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Node at the end of a long BFS chain starting from `seed` (George–Liu).
fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut v = seed;
    let mut ecc = 0usize;
    for _ in 0..8 {
        let levels = bfs_levels(adj, v);
        let depth = *levels.iter().filter(|&&l| l != usize::MAX).max().unwrap();
        if depth <= ecc && v != seed {
            break;
        }
        ecc = depth;
        // lowest-degree node of the last level
        let far = (0..adj.len())
            .filter(|&w| levels[w] == depth)
            .min_by_key(|&w| (adj[w].len(), w))
            .unwrap();
        if far == v {
            break;
        }
        v = far;
    }
    v
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

/// Bandwidth of the adjacency under the ordering `perm` (`perm[new] = old`).
pub fn bandwidth(adj: &[Vec<usize>], perm: &[usize]) -> usize {
    let mut inv = vec![0usize; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    adj.iter()
        .enumerate()
        .flat_map(|(v, ws)| ws.iter().map(move |&w| (v, w)))
        .map(|(v, w)| inv[v].abs_diff(inv[w]))
        .max()
        .unwrap_or(0)
}
