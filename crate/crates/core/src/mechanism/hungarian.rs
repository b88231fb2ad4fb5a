//! Minimum-cost perfect assignment (shortest augmenting paths with
//! potentials), followed by a pass that picks the lexicographically smallest
//! optimal assignment.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Result of [`min_cost_assignment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `col_to_row[c]` is the row assigned to column `c`.
    pub col_to_row: Vec<usize>,
    pub cost: f64,
}

/// Solves the square assignment problem `cost[row][col]` in `O(n^3)`.
///
/// Among optimal assignments (costs equal within a relative `1e-9`), the one
/// whose `col_to_row` vector is lexicographically smallest is returned.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    if n == 0 {
        return Assignment {
            col_to_row: Vec::new(),
            cost: 0.0,
        };
    }
    debug_assert!(cost.iter().all(|r| r.len() == n));

    // 1-indexed potentials; row 0 / column 0 are sentinels.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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

    let scale = cost
        .iter()
        .flat_map(|r| r.iter())
        .fold(1.0f64, |m, c| m.max(libm::fabs(*c)));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| cost[r][c] - u[r + 1] - v[c + 1] <= tol)
                .collect()
        })
        .collect();

    let mut col_to_row: Vec<usize> = (1..=n).map(|j| p[j] - 1).collect();
    lexicographic_min(&tight, &mut col_to_row);
    let total = col_to_row
        .iter()
        .enumerate()
        .map(|(c, &r)| cost[r][c])
        .sum();
    Assignment {
        col_to_row,
        cost: total,
    }
}

/// Rewrites a perfect matching of the `tight` bipartite graph into the
/// lexicographically smallest one (by `col_to_row`).
fn lexicographic_min(tight: &[Vec<bool>], col_to_row: &mut [usize]) {
    let n = col_to_row.len();
    let mut row_to_col = vec![0usize; n];
    for (c, &r) in col_to_row.iter().enumerate() {
        row_to_col[r] = c;
    }
    for t in 0..n {
        let current = col_to_row[t];
        for cand in 0..current {
            // Rows matched to earlier columns are fixed.
            if row_to_col[cand] < t || !tight[cand][t] {
                continue;
            }
            if let Some(path) = alternating_path(tight, col_to_row, &row_to_col, t, cand) {
                // Column `t` takes `cand`; every column on the path shifts to
                // the next row, ending with the row `t` released.
                col_to_row[t] = cand;
                row_to_col[cand] = t;
                for (c, r) in path {
                    col_to_row[c] = r;
                    row_to_col[r] = c;
                }
                break;
            }
        }
    }
}

/// Searches for a re-matching of the column freed by moving `cand` to column
/// `t`, using only columns `> t`, that ends by absorbing `t`'s old row.
fn alternating_path(
    tight: &[Vec<bool>],
    col_to_row: &[usize],
    row_to_col: &[usize],
    t: usize,
    cand: usize,
) -> Option<Vec<(usize, usize)>> {
    let n = col_to_row.len();
    let freed_row = col_to_row[t];
    let start = row_to_col[cand];
    // BFS over columns; parent[c] = (previous column, row that moved).
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        for r in 0..n {
            if !tight[r][c] || r == cand {
                continue;
            }
            if r == freed_row {
                // Reconstruct: column c takes freed_row, and back along parents.
                let mut path = vec![(c, r)];
                let mut cur = c;
                while let Some(prev) = parent[cur] {
                    path.push((prev, col_to_row[cur]));
                    cur = prev;
                }
                return Some(path);
            }
            let next = row_to_col[r];
            if next <= t || seen[next] {
                continue;
            }
            seen[next] = true;
            parent[next] = Some(c);
            queue.push_back(next);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n = cost.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best: Option<(Vec<usize>, f64)> = None;
        loop {
            let c: f64 = perm.iter().enumerate().map(|(col, &r)| cost[r][col]).sum();
            if best.as_ref().is_none_or(|(_, b)| c < *b - 1e-9) {
                best = Some((perm.clone(), c));
            }
            if !crate::model::next_permutation(&mut perm) {
                break;
            }
        }
        best.unwrap()
    }

    #[test]
    fn small_known_case() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = min_cost_assignment(&cost);
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.col_to_row, vec![1, 0, 2]);
    }

    #[test]
    fn all_ties_gives_identity() {
        let cost = vec![vec![0.0; 5]; 5];
        assert_eq!(min_cost_assignment(&cost).col_to_row, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn matches_brute_force_with_many_ties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(0..3) as f64).collect())
                .collect();
            let a = min_cost_assignment(&cost);
            let (perm, c) = brute(&cost);
            assert_eq!(a.col_to_row, perm, "{cost:?}");
            assert!((a.cost - c).abs() < 1e-9);
        }
    }
}
