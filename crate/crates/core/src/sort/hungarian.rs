//! Minimum-cost maximal matching on a rectangular cost matrix.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs in increasing row order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of the matched entries, added in row order.
    pub cost: f64,
}

/// Solves the assignment problem for `cost` (rows of equal length, finite
/// entries). Every row is matched when there are at most as many rows as
/// columns, and every column otherwise.
///
/// Among optimal matchings the one whose row-sorted pair list is
/// lexicographically smallest is returned.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    assert!(cost.iter().flatten().all(|c| c.is_finite()), "non-finite cost");

    let all_rows: Vec<usize> = (0..n).collect();
    let all_cols: Vec<usize> = (0..m).collect();
    let size = n.min(m);
    let pairs = if size == 0 { Vec::new() } else { refine(cost, &all_rows, &all_cols, size) };

    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    for &(r, c) in &pairs {
        row_used[r] = true;
        col_used[c] = true;
    }
    Assignment {
        cost: pairs.iter().map(|&(r, c)| cost[r][c]).sum(),
        unmatched_rows: (0..n).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..m).filter(|&c| !col_used[c]).collect(),
        pairs,
    }
}

/// Walks rows in order and fixes each to the smallest column (or, when rows
/// outnumber columns, to "unmatched") that still admits an optimal completion.
fn refine(cost: &[Vec<f64>], rows: &[usize], cols: &[usize], size: usize) -> Vec<(usize, usize)> {
    let opt = min_cost(cost, rows, cols);
    let tol = 1e-9 * (1.0 + opt.abs());
    let mut fixed = Vec::with_capacity(size);
    let mut fixed_cost = 0.0;
    let mut free_cols: Vec<usize> = cols.to_vec();
    for (k, &r) in rows.iter().enumerate() {
        if fixed.len() == size {
            break;
        }
        let rest = &rows[k + 1..];
        let mut chosen = None;
        for (ci, &c) in free_cols.iter().enumerate() {
            let mut others = free_cols.clone();
            others.remove(ci);
            let need = size - fixed.len() - 1;
            if rest.len().min(others.len()) != need {
                continue;
            }
            let total = fixed_cost + cost[r][c] + if need == 0 { 0.0 } else { min_cost(cost, rest, &others) };
            if total <= opt + tol {
                chosen = Some(ci);
                break;
            }
        }
        if let Some(ci) = chosen {
            let c = free_cols.remove(ci);
            fixed_cost += cost[r][c];
            fixed.push((r, c));
        }
        // Otherwise the row stays unmatched; an optimal completion exists
        // because one existed before this row was considered.
    }
    fixed
}

/// Optimal cost of a maximal matching between `rows` and `cols`.
fn min_cost(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let (n, m) = (rows.len(), cols.len());
    let at = |i: usize, j: usize| if n <= m { cost[rows[i]][cols[j]] } else { cost[rows[j]][cols[i]] };
    let (a, b) = if n <= m { (n, m) } else { (m, n) };
    let assign = solve(a, b, at);
    (0..a).map(|i| at(i, assign[i])).sum()
}

/// Shortest augmenting paths with potentials for an `n × m` matrix, `n ≤ m`.
/// Returns the column of every row.
fn solve(n: usize, m: usize, at: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
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
            for j in 0..=m {
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
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
