//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 300,
        }
    }
}

fn sq_dist(rows: &Matrix, i: usize, centers: &Matrix, c: usize) -> f64 {
    rows.row(i)
        .iter()
        .zip(centers.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(rows: &Matrix, i: usize, centers: &Matrix) -> (usize, f64) {
    let mut best = (0, sq_dist(rows, i, centers, 0));
    for c in 1..centers.nrows() {
        let d = sq_dist(rows, i, centers, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(rows: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = rows.nrows();
    let mut centers = Matrix::zeros(k, rows.ncols());
    centers.row_mut(0).copy_from(&rows.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(rows, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from(&rows.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows, i, &centers, c));
        }
    }
    centers
}

fn lloyd(rows: &Matrix, mut centers: Matrix, max_iter: usize) -> (Vec<usize>, f64) {
    let (n, k) = (rows.nrows(), centers.nrows());
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(rows, i, &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, rows.ncols());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sums.row_mut(c).zip_apply(&rows.row(i), |s, x| *s += x);
            counts[c] += 1;
        }
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                centers.row_mut(c).copy_from(&(sums.row(c) / n as f64));
            }
        }
        // Empty clusters take the point farthest from its current center,
        // drawn from a cluster that keeps at least one member.
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = (0, f64::NEG_INFINITY);
                for (i, &l) in labels.iter().enumerate() {
                    if counts[l] <= 1 {
                        continue;
                    }
                    let d = sq_dist(rows, i, &centers, l);
                    if d > far.1 {
                        far = (i, d);
                    }
                }
                centers.row_mut(c).copy_from(&rows.row(far.0));
                counts[labels[far.0]] -= 1;
                labels[far.0] = c;
                counts[c] = 1;
            }
        }
    }
    let wcss = (0..n).map(|i| sq_dist(rows, i, &centers, labels[i])).sum();
    (labels, wcss)
}

/// Clusters the rows of `rows` into `k` groups; the restart with the lowest
/// within-cluster sum of squares wins (earliest on ties).
pub fn kmeans_with(rows: &Matrix, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<Vec<usize>> {
    if k == 0 || rows.nrows() < k {
        return Err(Error::InvalidConfig(format!(
            "k-means needs 1 <= k <= rows, got k = {k} with {} rows",
            rows.nrows()
        )));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kmeans"));
    }
    if k == 1 {
        return Ok(vec![0; rows.nrows()]);
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let centers = plus_plus(rows, k, &mut rng);
        let (labels, wcss) = lloyd(rows, centers, cfg.max_iter);
        if best.as_ref().is_none_or(|(_, b)| wcss < *b) {
            best = Some((labels, wcss));
        }
    }
    Ok(best.expect("at least one restart").0)
}

/// [`kmeans_with`] using 20 restarts and at most 300 Lloyd iterations.
pub fn kmeans(rows: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    kmeans_with(rows, k, seed, &KMeansConfig::default())
}
