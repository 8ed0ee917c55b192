//! Optimal linear assignment (Hungarian / Kuhn-Munkres with potentials).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("{predictions} predictions cannot cover {ground_truths} ground-truth objects")]
    TooFewPredictions { predictions: usize, ground_truths: usize },
    #[error("cost at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has {len} columns, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
}

/// Result of pairing predictions (cost rows) with ground truths (cost columns).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// `(prediction, ground_truth)` pairs, ordered by ground-truth index.
    pub pairs: Vec<(usize, usize)>,
    /// Predictions left without a ground truth, ascending.
    pub unmatched: Vec<usize>,
}

impl Matching {
    /// Prediction indices in ground-truth order.
    pub fn prediction_order(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(p, _)| p).collect()
    }

    pub fn prediction_for(&self, gt: usize) -> Option<usize> {
        self.pairs.iter().find(|&&(_, g)| g == gt).map(|&(p, _)| p)
    }

    pub fn total_cost<R: AsRef<[f64]>>(&self, cost: &[R]) -> f64 {
        self.pairs.iter().map(|&(p, g)| cost[p].as_ref()[g]).sum()
    }
}

/// Assigns every ground truth (column) to a distinct prediction (row) at
/// minimum total cost. Requires at least as many rows as columns.
///
/// Equal-cost alternatives are resolved deterministically: columns are
/// scanned in ascending order and the first strictly better slack wins, so
/// with fully tied costs ground truth `g` receives prediction `g`.
pub fn hungarian<R: AsRef<[f64]>>(cost: &[R]) -> Result<Matching, AssignmentError> {
    let q = cost.len();
    let m = cost.first().map_or(0, |r| r.as_ref().len());
    validate(cost, m)?;
    if q < m {
        return Err(AssignmentError::TooFewPredictions { predictions: q, ground_truths: m });
    }
    // Solve with ground truths as the (fewer) rows.
    let transposed: Vec<Vec<f64>> = (0..m).map(|g| (0..q).map(|p| cost[p].as_ref()[g]).collect()).collect();
    let col_for_row = solve_rows_le_cols(&transposed, m, q);
    let pairs: Vec<(usize, usize)> = col_for_row.iter().enumerate().map(|(g, &p)| (p, g)).collect();
    let mut taken = vec![false; q];
    for &(p, _) in &pairs {
        taken[p] = true;
    }
    let unmatched = (0..q).filter(|&p| !taken[p]).collect();
    Ok(Matching { pairs, unmatched })
}

/// Minimum-cost pairing of `min(rows, cols)` row/column pairs for a cost
/// matrix of any orientation. Pairs are `(row, col)`, ordered by row.
pub fn assign_rectangular<R: AsRef<[f64]>>(cost: &[R]) -> Result<Vec<(usize, usize)>, AssignmentError> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.as_ref().len());
    validate(cost, cols)?;
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    if rows <= cols {
        let dense: Vec<Vec<f64>> = cost.iter().map(|r| r.as_ref().to_vec()).collect();
        let col_for_row = solve_rows_le_cols(&dense, rows, cols);
        Ok(col_for_row.into_iter().enumerate().collect())
    } else {
        let matching = hungarian(cost)?;
        let mut pairs = matching.pairs;
        pairs.sort_unstable();
        Ok(pairs)
    }
}

fn validate<R: AsRef<[f64]>>(cost: &[R], expected: usize) -> Result<(), AssignmentError> {
    for (row, r) in cost.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != expected {
            return Err(AssignmentError::Ragged { row, len: r.len(), expected });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(AssignmentError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Shortest-augmenting-path Hungarian method, O(n^2 m) for `n <= m`.
/// Returns the column assigned to each row.
fn solve_rows_le_cols(a: &[Vec<f64>], n: usize, m: usize) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based potentials and matches; column 0 is a virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_for_row = vec![0usize; n];
    for j in 1..=m {
        if row_of_col[j] != 0 {
            col_for_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_for_row
}
