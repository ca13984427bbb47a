//! Maximum-weight bipartite assignment (Kuhn–Munkres with potentials).

/// Largest `rows × cols` for which the lexicographic tie-break is run.
pub const TIE_BREAK_LIMIT: usize = 1024;

/// Minimum-cost perfect matching on a square matrix. Returns the column
/// assigned to each row.
fn min_cost_square(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
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
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Maximum-weight assignment on a rectangular matrix of non-negative
/// weights. Each row gets at most one column and vice versa.
pub fn max_weight_assignment(w: &[Vec<i64>]) -> Vec<Option<usize>> {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let maxw = w.iter().flatten().copied().max().unwrap_or(0);
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| maxw - if i < rows && j < cols { w[i][j] } else { 0 }).collect())
        .collect();
    let sol = min_cost_square(&cost);
    (0..rows).map(|i| (sol[i] < cols).then_some(sol[i])).collect()
}

pub fn assignment_weight(w: &[Vec<i64>], a: &[Option<usize>]) -> i64 {
    a.iter().enumerate().filter_map(|(i, c)| c.map(|c| w[i][c])).sum()
}

fn best_total(w: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> i64 {
    if rows.is_empty() || cols.is_empty() {
        return 0;
    }
    let sub: Vec<Vec<i64>> = rows.iter().map(|&r| cols.iter().map(|&c| w[r][c]).collect()).collect();
    assignment_weight(&sub, &max_weight_assignment(&sub))
}

/// Optimal assignment; among optimal ones the lexicographically smallest
/// when rows are visited in order and columns tried in ascending order.
/// Large matrices fall back to the plain solver result.
pub fn lexicographic_assignment(w: &[Vec<i64>]) -> Vec<Option<usize>> {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    let plain = max_weight_assignment(w);
    if rows * cols > TIE_BREAK_LIMIT || rows == 0 || cols == 0 {
        return plain;
    }
    let mut target = assignment_weight(w, &plain);
    let mut free_cols: Vec<usize> = (0..cols).collect();
    let mut out = vec![None; rows];
    for i in 0..rows {
        let rest: Vec<usize> = (i + 1..rows).collect();
        let mut chosen = None;
        for (pos, &j) in free_cols.iter().enumerate() {
            let others: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            if w[i][j] + best_total(w, &rest, &others) == target {
                chosen = Some((pos, j));
                break;
            }
        }
        match chosen {
            Some((pos, j)) => {
                target -= w[i][j];
                free_cols.remove(pos);
                out[i] = Some(j);
            }
            None => out[i] = None,
        }
    }
    out
}
