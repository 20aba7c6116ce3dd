//! Geometry of the multinomial manifold: `M × K` matrices with strictly
//! positive entries and unit row sums, under the Fisher information metric
//! `g_U(ξ, η) = Σ ξₘₖ ηₘₖ / Uₘₖ`.
//!
//! Tangent vectors at `U` are the `M × K` matrices whose rows sum to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rtr::Manifold;
use crate::tensor::Matrix;

/// Smallest entry a retracted point may hold before its row is renormalized.
pub const POSITIVITY_FLOOR: f64 = 1e-16;

const ROW_SUM_TOL: f64 = 1e-12;

/// A row-stochastic matrix with strictly positive entries.
#[derive(Clone, Debug, PartialEq)]
pub struct MultinomialPoint(Matrix);

impl MultinomialPoint {
    /// Validates positivity and unit row sums.
    pub fn new(u: Matrix) -> Result<Self> {
        if u.nrows() == 0 || u.ncols() == 0 {
            return Err(Error::Empty("MultinomialPoint"));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("MultinomialPoint"));
        }
        if u.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidConfig(
                "membership entries must be strictly positive".into(),
            ));
        }
        for (m, row) in u.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidConfig(format!(
                    "membership row {m} sums to {s}, not 1"
                )));
            }
        }
        Ok(Self(u))
    }

    /// Normalizes the rows of a positive matrix onto the simplex.
    pub fn from_positive(mut u: Matrix) -> Result<Self> {
        if u.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidConfig(
                "from_positive requires finite, strictly positive entries".into(),
            ));
        }
        normalize_rows(&mut u);
        Self::new(u)
    }

    /// The `M × 1` point of the degenerate one-cluster manifold.
    pub fn ones(m: usize) -> Self {
        Self(Matrix::from_element(m, 1, 1.0))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    /// Index of the largest entry in each row (lowest index on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        self.0
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// A tangent vector at some point of the manifold: rows sum to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector(Matrix);

impl TangentVector {
    pub fn new(xi: Matrix) -> Result<Self> {
        for (m, row) in xi.row_iter().enumerate() {
            let scale = row.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            if row.sum().abs() > ROW_SUM_TOL * scale {
                return Err(Error::InvalidConfig(format!(
                    "tangent row {m} sums to {}, not 0",
                    row.sum()
                )));
            }
        }
        Ok(Self(xi))
    }

    pub fn zeros(m: usize, k: usize) -> Self {
        Self(Matrix::zeros(m, k))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn add(&self, other: &TangentVector) -> Self {
        Self(&self.0 + &other.0)
    }
}

fn normalize_rows(u: &mut Matrix) {
    for mut row in u.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
}

fn check_same(op: &'static str, u: &Matrix, z: &Matrix) -> Result<()> {
    if u.shape() != z.shape() {
        return Err(Error::ShapeMismatch {
            op,
            left: vec![u.nrows(), u.ncols()],
            right: vec![z.nrows(), z.ncols()],
        });
    }
    Ok(())
}

fn fisher(u: &Matrix, xi: &Matrix, eta: &Matrix) -> f64 {
    u.iter()
        .zip(xi.iter())
        .zip(eta.iter())
        .map(|((&w, &a), &b)| a * b / w)
        .sum()
}

/// `Z − (α 1ᵀ) ⊙ U` with `α = Z 1`.
fn project_raw(u: &Matrix, z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for (m, mut row) in out.row_iter_mut().enumerate() {
        let alpha = z.row(m).sum();
        for k in 0..row.len() {
            row[k] -= alpha * u[(m, k)];
        }
    }
    out
}

/// Fisher information metric `Σ ξₘₖ ηₘₖ / Uₘₖ`.
pub fn metric(u: &MultinomialPoint, xi: &TangentVector, eta: &TangentVector) -> Result<f64> {
    check_same("metric", &u.0, &xi.0)?;
    check_same("metric", &u.0, &eta.0)?;
    Ok(fisher(&u.0, &xi.0, &eta.0))
}

/// Metric-orthogonal projection of an ambient matrix onto the tangent space at `u`.
pub fn project(u: &MultinomialPoint, z: &Matrix) -> Result<TangentVector> {
    check_same("project", &u.0, z)?;
    Ok(TangentVector(project_raw(&u.0, z)))
}

/// Exponential-type retraction `U ⊙ exp(t ξ ⊘ U)` with every row renormalized.
///
/// Each row's exponent is shifted by its maximum first; the shift cancels in
/// the normalization. Entries are then floored at [`POSITIVITY_FLOOR`].
pub fn retract(u: &MultinomialPoint, xi: &TangentVector, t: f64) -> Result<MultinomialPoint> {
    check_same("retract", &u.0, &xi.0)?;
    Ok(MultinomialPoint(retract_raw(&u.0, &xi.0, t)?))
}

fn retract_raw(u: &Matrix, xi: &Matrix, t: f64) -> Result<Matrix> {
    if !t.is_finite() || xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("retract"));
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let (rows, cols) = u.shape();
    let mut out = Matrix::zeros(rows, cols);
    let mut expo = vec![0.0; cols];
    for m in 0..rows {
        for k in 0..cols {
            expo[k] = t * xi[(m, k)] / u[(m, k)];
        }
        let shift = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::NonFinite("retract"));
        }
        let mut sum = 0.0;
        for k in 0..cols {
            let v = u[(m, k)] * (expo[k] - shift).exp();
            out[(m, k)] = v;
            sum += v;
        }
        let mut floored = false;
        for k in 0..cols {
            let v = out[(m, k)] / sum;
            if v < POSITIVITY_FLOOR {
                floored = true;
            }
            out[(m, k)] = v.max(POSITIVITY_FLOOR);
        }
        if floored {
            let s: f64 = out.row(m).sum();
            for k in 0..cols {
                out[(m, k)] /= s;
            }
        }
    }
    Ok(out)
}

/// Riemannian gradient `Π_U(G ⊙ U)` from the Euclidean gradient `G`.
pub fn egrad_to_rgrad(u: &MultinomialPoint, egrad: &Matrix) -> Result<TangentVector> {
    check_same("egrad_to_rgrad", &u.0, egrad)?;
    Ok(TangentVector(project_raw(&u.0, &egrad.component_mul(&u.0))))
}

/// Riemannian Hessian along `xi` from the Euclidean gradient `egrad` and its
/// directional derivative `ehess = D Grad F(U)[ξ]`.
///
/// Computes `Π_U(D grad[ξ] − ½ (ξ ⊙ grad) ⊘ U)` where
/// `D grad[ξ] = ehess⊙U + egrad⊙ξ − (α1ᵀ)⊙ξ − (Dα[ξ]1ᵀ)⊙U`,
/// `α = (egrad⊙U)1` and `Dα[ξ] = (ehess⊙U + egrad⊙ξ)1`.
pub fn ehess_to_rhess(
    u: &MultinomialPoint,
    egrad: &Matrix,
    ehess: &Matrix,
    xi: &TangentVector,
) -> Result<TangentVector> {
    check_same("ehess_to_rhess", &u.0, egrad)?;
    check_same("ehess_to_rhess", &u.0, ehess)?;
    check_same("ehess_to_rhess", &u.0, &xi.0)?;
    Ok(TangentVector(ehess_raw(&u.0, egrad, ehess, &xi.0)))
}

fn ehess_raw(u: &Matrix, egrad: &Matrix, ehess: &Matrix, xi: &Matrix) -> Matrix {
    let scaled = egrad.component_mul(u);
    let rgrad = project_raw(u, &scaled);
    // ehess⊙U + egrad⊙ξ, whose row sums are Dα[ξ].
    let lead = ehess.component_mul(u) + egrad.component_mul(xi);
    let (rows, cols) = u.shape();
    let mut z = Matrix::zeros(rows, cols);
    for m in 0..rows {
        let alpha = scaled.row(m).sum();
        let dalpha = lead.row(m).sum();
        for k in 0..cols {
            let dgrad = lead[(m, k)] - alpha * xi[(m, k)] - dalpha * u[(m, k)];
            z[(m, k)] = dgrad - 0.5 * xi[(m, k)] * rgrad[(m, k)] / u[(m, k)];
        }
    }
    project_raw(u, &z)
}

/// Seeded point with rows drawn uniformly from `(0, 1)` and normalized.
pub fn random_point(m: usize, k: usize, seed: u64) -> MultinomialPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Matrix::from_fn(m, k, |_, _| {
        // Keep away from zero so the Fisher weights stay bounded.
        rng.random_range(1e-3..1.0)
    });
    normalize_rows(&mut u);
    MultinomialPoint(u)
}

/// Seeded tangent vector at `u` with unit Fisher norm (zero when `K = 1`).
pub fn random_tangent(u: &MultinomialPoint, seed: u64) -> TangentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Separate stream from `random_point` with the same seed.
    rng.set_stream(1);
    let z = Matrix::from_fn(u.nrows(), u.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let xi = project_raw(&u.0, &z);
    let norm = fisher(&u.0, &xi, &xi).sqrt();
    if norm > 0.0 && u.ncols() > 1 {
        TangentVector(xi / norm)
    } else {
        TangentVector::zeros(u.nrows(), u.ncols())
    }
}

/// The multinomial manifold as consumed by the trust-region solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct Multinomial;

impl Manifold for Multinomial {
    type Point = MultinomialPoint;

    fn inner(&self, x: &MultinomialPoint, a: &Matrix, b: &Matrix) -> f64 {
        fisher(&x.0, a, b)
    }

    fn project(&self, x: &MultinomialPoint, z: &Matrix) -> Matrix {
        project_raw(&x.0, z)
    }

    fn retract(&self, x: &MultinomialPoint, v: &Matrix, t: f64) -> Result<MultinomialPoint> {
        Ok(MultinomialPoint(retract_raw(&x.0, v, t)?))
    }

    fn egrad_to_rgrad(&self, x: &MultinomialPoint, egrad: &Matrix) -> Matrix {
        project_raw(&x.0, &egrad.component_mul(&x.0))
    }

    fn ehess_to_rhess(
        &self,
        x: &MultinomialPoint,
        egrad: &Matrix,
        ehess: &Matrix,
        v: &Matrix,
    ) -> Matrix {
        ehess_raw(&x.0, egrad, ehess, v)
    }

    fn zero_tangent(&self, x: &MultinomialPoint) -> Matrix {
        Matrix::zeros(x.nrows(), x.ncols())
    }
}
