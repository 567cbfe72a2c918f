use nalgebra::DMatrix;

use crate::{Error, Result};

/// Minimum-cost perfect matching of a square cost matrix.
///
/// Returns `(perm, total)` with row `i` assigned to column `perm[i]`. Among
/// optimal assignments (up to a round-off tolerance) the lexicographically
/// smallest permutation is returned.
pub fn linear_sum_assignment(cost: &DMatrix<f64>) -> Result<(Vec<usize>, f64)> {
    if cost.nrows() != cost.ncols() {
        return Err(Error::dim("linear_sum_assignment: square cost", cost.nrows(), cost.ncols()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("linear_sum_assignment"));
    }
    let n = cost.nrows();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let best = total(cost, &hungarian(cost));
    let tol = 1e-12 * (1.0 + cost.iter().map(|c| c.abs()).sum::<f64>());

    // Fix rows one at a time to the smallest column that still admits an
    // optimal completion.
    let mut perm = Vec::with_capacity(n);
    let mut fixed_cost = 0.0;
    let mut free_cols: Vec<usize> = (0..n).collect();
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut chosen = None;
        for (slot, &col) in free_cols.iter().enumerate() {
            let mut cols = free_cols.clone();
            cols.remove(slot);
            let sub = DMatrix::from_fn(rest_rows.len(), cols.len(), |i, j| cost[(rest_rows[i], cols[j])]);
            let sub_cost = if sub.is_empty() { 0.0 } else { total(&sub, &hungarian(&sub)) };
            if fixed_cost + cost[(row, col)] + sub_cost <= best + tol {
                chosen = Some(slot);
                break;
            }
        }
        // The Hungarian optimum always passes, so a slot exists.
        let slot = chosen.expect("an optimal completion exists");
        let col = free_cols.remove(slot);
        fixed_cost += cost[(row, col)];
        perm.push(col);
    }
    let cost_total = total(cost, &perm);
    Ok((perm, cost_total))
}

fn total(cost: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

/// Shortest augmenting path Hungarian method with potentials, `O(n^3)`.
fn hungarian(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row (1-based) matched to column j; column 0 is a sentinel.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
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
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn zero_diagonal_is_identity() {
        let c = dmatrix![0.0, 1.0, 1.0; 1.0, 0.0, 1.0; 1.0, 1.0, 0.0];
        assert_eq!(linear_sum_assignment(&c).unwrap(), (vec![0, 1, 2], 0.0));
    }

    #[test]
    fn picks_off_diagonal_optimum() {
        let c = dmatrix![4.0, 1.0, 3.0; 2.0, 0.0, 5.0; 3.0, 2.0, 2.0];
        let (perm, cost) = linear_sum_assignment(&c).unwrap();
        assert_eq!(perm, vec![1, 0, 2]);
        assert_eq!(cost, 5.0);
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = DMatrix::from_element(4, 4, 1.0);
        assert_eq!(linear_sum_assignment(&c).unwrap().0, vec![0, 1, 2, 3]);
        let c = dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.0; 0.0, 0.0, 1.0];
        assert_eq!(linear_sum_assignment(&c).unwrap().0, vec![1, 2, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(linear_sum_assignment(&DMatrix::zeros(2, 3)).is_err());
        assert!(linear_sum_assignment(&dmatrix![f64::NAN]).is_err());
    }
}
