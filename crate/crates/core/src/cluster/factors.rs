//! Closed-form updates for the orthonormal factors and the core tensor.

use nalgebra::SVD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::manifold::MultinomialPoint;
use crate::objective::GramFactor;
use crate::tensor::{DenseTensor, Matrix};

/// Relative singular value below which a matrix is treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Left singular vectors and singular values of `a`, sorted by decreasing value.
fn sorted_svd(a: &Matrix) -> (Matrix, Vec<f64>, Option<Matrix>) {
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_sorted = v_t.map(|vt| Matrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]));
    (u_sorted, values, v_sorted)
}

/// Extends orthonormal columns `q` to `cols` orthonormal columns.
fn complete_basis(q: Matrix, cols: usize) -> Matrix {
    let rows = q.nrows();
    let mut basis: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while basis.len() < cols && e < rows {
        let mut v = nalgebra::DVector::zeros(rows);
        v[e] = 1.0;
        // Two passes of Gram–Schmidt.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
        e += 1;
    }
    Matrix::from_columns(&basis[..cols.min(basis.len())])
}

/// The `j` leading left singular vectors of `a` as an `a.nrows() × j` matrix.
pub fn top_left_singular_vectors(a: &Matrix, j: usize) -> Result<Matrix> {
    if j == 0 || j > a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "top_left_singular_vectors",
            expected: a.nrows(),
            got: j,
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("top_left_singular_vectors"));
    }
    let (u, _, _) = sorted_svd(a);
    let u = if u.ncols() < j { complete_basis(u, j) } else { u };
    Ok(u.columns(0, j).into_owned())
}

/// Orthonormal polar factor `P Qᵀ` of the thin singular decomposition `A = P Σ Qᵀ`.
pub fn uf(a: &Matrix) -> Result<Matrix> {
    if a.nrows() < a.ncols() {
        return Err(Error::RankDeficient {
            op: "uf",
            condition: f64::INFINITY,
        });
    }
    let (p, s, qt) = sorted_svd(a);
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || min <= RANK_TOL * max {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::RankDeficient { op: "uf", condition });
    }
    let qt = qt.expect("requested V");
    Ok(p * qt)
}

/// Orthonormal factor of a seeded Gaussian `rows × cols` matrix.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    q.columns(0, cols).into_owned()
}

/// Convenience wrapper for [`random_orthonormal`] from a plain seed.
pub fn seeded_orthonormal(rows: usize, cols: usize, seed: u64) -> Matrix {
    random_orthonormal(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn check_factors(x: &DenseTensor, factors: &[Matrix], membership: &MultinomialPoint) -> Result<()> {
    let n = x.order();
    if factors.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            op: "factor count",
            expected: n - 1,
            got: factors.len(),
        });
    }
    for (mode, u) in factors.iter().enumerate() {
        if u.nrows() != x.shape()[mode] {
            return Err(Error::DimensionMismatch {
                op: "factor rows",
                expected: x.shape()[mode],
                got: u.nrows(),
            });
        }
    }
    if membership.nrows() != x.shape()[n - 1] {
        return Err(Error::DimensionMismatch {
            op: "membership rows",
            expected: x.shape()[n - 1],
            got: membership.nrows(),
        });
    }
    Ok(())
}

/// Projects every factor mode except `skip` by `Uₘᵀ`, and the last mode by `Qᵀ`
/// where `Q` is an orthonormal basis of span(U_N).
///
/// Since `V_N = Q Qᵀ`, norms and left singular subspaces of the result equal
/// those obtained with the `M × M` projector, which is never formed.
fn project_all_but(
    x: &DenseTensor,
    factors: &[Matrix],
    membership: &MultinomialPoint,
    skip: Option<usize>,
) -> Result<DenseTensor> {
    check_factors(x, factors, membership)?;
    let gram = GramFactor::new(membership.matrix())?;
    let q = gram.orthonormal_basis(membership.matrix());
    let last = x.order() - 1;
    let mut y = x.mode_n_product(&q.transpose(), last)?;
    for (mode, u) in factors.iter().enumerate() {
        if Some(mode) != skip {
            y = y.mode_n_product(&u.transpose(), mode)?;
        }
    }
    Ok(y)
}

/// `h(U) = ½ ‖X ×₁ U₁ᵀ ⋯ ×_{N−1} U_{N−1}ᵀ ×_N V_N‖²_F`.
pub fn h_value(x: &DenseTensor, factors: &[Matrix], membership: &MultinomialPoint) -> Result<f64> {
    let y = project_all_but(x, factors, membership, None)?;
    Ok(0.5 * y.frob_norm().powi(2))
}

/// Maximizer of `‖Uₙᵀ Bₙ‖²_F` over orthonormal `Iₙ × Jₙ` matrices: the leading
/// `Jₙ` left singular vectors of `Bₙ`, the mode-`n` unfolding of the data
/// projected by every other factor and by `V_N` on the last mode.
pub fn update_factor_n(
    x: &DenseTensor,
    factors: &[Matrix],
    membership: &MultinomialPoint,
    n: usize,
) -> Result<Matrix> {
    if n + 1 >= x.order() {
        return Err(Error::InvalidMode {
            mode: n,
            order: x.order() - 1,
        });
    }
    let y = project_all_but(x, factors, membership, Some(n))?;
    top_left_singular_vectors(&y.matricize(n)?, factors[n].ncols())
}

/// Least-squares core for fixed factors:
/// `G = X ×₁ U₁ᵀ ⋯ ×_{N−1} U_{N−1}ᵀ ×_N (U_NᵀU_N)⁻¹U_Nᵀ`.
pub fn recover_core(
    x: &DenseTensor,
    factors: &[Matrix],
    membership: &MultinomialPoint,
) -> Result<DenseTensor> {
    check_factors(x, factors, membership)?;
    let u = membership.matrix();
    let gram = GramFactor::new(u)?;
    let pinv = gram.solve_left(&u.transpose());
    let mut g = x.mode_n_product(&pinv, x.order() - 1)?;
    for (mode, f) in factors.iter().enumerate() {
        g = g.mode_n_product(&f.transpose(), mode)?;
    }
    Ok(g)
}

/// `G ×₁ U₁ ⋯ ×_{N−1} U_{N−1} ×_N U_N`.
pub fn reconstruct(core: &DenseTensor, factors: &[Matrix], membership: &Matrix) -> Result<DenseTensor> {
    let mut y = core.mode_n_product(membership, core.order() - 1)?;
    for (mode, f) in factors.iter().enumerate() {
        y = y.mode_n_product(f, mode)?;
    }
    Ok(y)
}

/// Model error `½ ‖X − G ×₁ U₁ ⋯ ×_N U_N‖²_F` evaluated at the optimal core.
pub fn model_error(x: &DenseTensor, factors: &[Matrix], membership: &MultinomialPoint) -> Result<f64> {
    let core = recover_core(x, factors, membership)?;
    let fit = reconstruct(&core, factors, membership.matrix())?;
    Ok(0.5 * x.sub(&fit)?.frob_norm().powi(2))
}

/// Factors and per-sweep fit trace from [`hooi`].
#[derive(Clone, Debug)]
pub struct HooiOutput {
    pub factors: Vec<Matrix>,
    /// `‖core‖² / ‖X‖²` after the truncated HOSVD start and after every sweep.
    pub fits: Vec<f64>,
}

pub const HOOI_MAX_SWEEPS: usize = 50;
pub const HOOI_REL_TOL: f64 = 1e-8;

/// Alternating principal subspaces over the modes with `Some(J)`; modes with
/// `None` are left unprojected.
pub(crate) fn alternating_subspaces(x: &DenseTensor, dims: &[Option<usize>]) -> Result<HooiOutput> {
    if dims.len() != x.order() {
        return Err(Error::DimensionMismatch {
            op: "hooi dims",
            expected: x.order(),
            got: dims.len(),
        });
    }
    for (mode, d) in dims.iter().enumerate() {
        if let Some(j) = *d {
            if j == 0 || j > x.shape()[mode] {
                return Err(Error::InvalidConfig(format!(
                    "core dimension {j} invalid for mode {mode} of extent {}",
                    x.shape()[mode]
                )));
            }
        }
    }
    let active: Vec<usize> = (0..dims.len()).filter(|&m| dims[m].is_some()).collect();
    let mut factors: Vec<Option<Matrix>> = vec![None; dims.len()];
    for &m in &active {
        factors[m] = Some(top_left_singular_vectors(&x.matricize(m)?, dims[m].unwrap())?);
    }
    let total = x.frob_norm().powi(2);
    let project = |factors: &[Option<Matrix>], skip: Option<usize>| -> Result<DenseTensor> {
        let mut y = x.clone();
        for &m in &active {
            if Some(m) != skip {
                y = y.mode_n_product(&factors[m].as_ref().unwrap().transpose(), m)?;
            }
        }
        Ok(y)
    };
    let fit_of = |factors: &[Option<Matrix>]| -> Result<f64> {
        if total == 0.0 {
            return Ok(1.0);
        }
        Ok(project(factors, None)?.frob_norm().powi(2) / total)
    };
    let mut fits = vec![fit_of(&factors)?];
    for _ in 0..HOOI_MAX_SWEEPS {
        for &m in &active {
            let y = project(&factors, Some(m))?;
            factors[m] = Some(top_left_singular_vectors(&y.matricize(m)?, dims[m].unwrap())?);
        }
        let fit = fit_of(&factors)?;
        let prev = *fits.last().unwrap();
        fits.push(fit);
        if (fit - prev).abs() < HOOI_REL_TOL * prev.max(1e-300) {
            break;
        }
    }
    let factors = factors
        .into_iter()
        .enumerate()
        .map(|(m, f)| f.unwrap_or_else(|| Matrix::identity(x.shape()[m], x.shape()[m])))
        .collect();
    Ok(HooiOutput { factors, fits })
}

/// Higher-order orthogonal iteration for a Tucker fit with core size `dims`,
/// started from the truncated HOSVD.
pub fn hooi(x: &DenseTensor, dims: &[usize]) -> Result<HooiOutput> {
    let dims: Vec<Option<usize>> = dims.iter().map(|&d| Some(d)).collect();
    alternating_subspaces(x, &dims)
}
