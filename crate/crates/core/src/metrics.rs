//! External clustering indices: accuracy under the best one-to-one label
//! mapping, and normalized mutual information.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Minimum-cost perfect matching on a (zero-padded) square cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched to row `i` of the padded matrix.
    pub row_to_col: Vec<usize>,
    /// Total cost over the entries of the original matrix.
    pub cost: f64,
}

/// Hungarian algorithm with row/column potentials, `O(n³)`.
///
/// Rectangular inputs are padded with zero-cost rows or columns.
pub fn kuhn_munkres(cost: &Matrix) -> Result<Assignment> {
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kuhn_munkres"));
    }
    let (rows, cols) = cost.shape();
    let n = rows.max(cols);
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
        });
    }
    let at = |i: usize, j: usize| if i < rows && j < cols { cost[(i, j)] } else { 0.0 };

    // 1-based potentials; column 0 is a virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| at(i, j))
        .sum();
    Ok(Assignment {
        row_to_col,
        cost: total,
    })
}

/// Maps arbitrary class ids onto `0..C` in increasing id order.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    // Re-number in sorted id order for a stable mapping.
    for (rank, (_, v)) in ids.iter_mut().enumerate() {
        *v = rank;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

fn contingency(truth: &[usize], pred: &[usize]) -> Result<(Vec<Vec<usize>>, usize, usize)> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            op: "label vectors",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("label vectors"));
    }
    let (t, c) = compact(truth);
    let (p, d) = compact(pred);
    let mut table = vec![vec![0usize; c]; d];
    for (&a, &b) in t.iter().zip(&p) {
        table[b][a] += 1;
    }
    Ok((table, c, d))
}

/// Fraction of samples whose predicted cluster maps onto their true class
/// under the best one-to-one mapping of clusters to classes.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let (table, c, d) = contingency(truth, pred)?;
    let cost = Matrix::from_fn(d, c, |i, j| -(table[i][j] as f64));
    let a = kuhn_munkres(&cost)?;
    Ok(-a.cost / truth.len() as f64)
}

fn entropy(counts: impl Iterator<Item = usize>, total: f64) -> f64 {
    counts
        .filter(|&n| n > 0)
        .map(|n| {
            let p = n as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// `MI(L, L̂) / max(H(L), H(L̂))` with base-2 logarithms.
///
/// When both labelings are a single cluster the ratio is undefined; it is
/// taken as 1 for identical partitions and 0 otherwise.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let (table, c, d) = contingency(truth, pred)?;
    let total = truth.len() as f64;
    let col: Vec<usize> = (0..c).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let row: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let h_truth = entropy(col.iter().copied(), total);
    let h_pred = entropy(row.iter().copied(), total);
    let denom = h_truth.max(h_pred);
    if denom <= 0.0 {
        return Ok(if c == d { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &n) in r.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let pxy = n as f64 / total;
            let px = row[i] as f64 / total;
            let py = col[j] as f64 / total;
            mi += pxy * (pxy / (px * py)).log2();
        }
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}
