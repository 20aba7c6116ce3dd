//! Membership objective `F(U) = −½ tr(Bᵀ U (UᵀU)⁻¹ Uᵀ B)` with its Euclidean
//! gradient and the directional derivative of that gradient.
//!
//! `(UᵀU)⁻¹` is only ever applied through a Cholesky factorization of the
//! `K × K` Gram matrix, and `BBᵀ` is never formed: every product is
//! associated as `B (Bᵀ ·)`.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::manifold::{Multinomial, MultinomialPoint};
use crate::rtr::Problem;
use crate::tensor::{DenseTensor, Matrix};

/// Gram matrices with a larger eigenvalue ratio are treated as singular.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Builds `B_N = X_(N) · (U_{N−1} ⊗ ⋯ ⊗ U₁)`, one row per last-mode slice.
///
/// Computed as the last-mode unfolding of `X ×₁ U₁ᵀ ⋯ ×_{N−1} U_{N−1}ᵀ`.
pub fn build_b(x: &DenseTensor, factors: &[Matrix]) -> Result<Matrix> {
    let n = x.order();
    if factors.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            op: "build_b (factor count)",
            expected: n.saturating_sub(1),
            got: factors.len(),
        });
    }
    let mut y = x.clone();
    for (mode, u) in factors.iter().enumerate() {
        if u.nrows() != x.shape()[mode] {
            return Err(Error::DimensionMismatch {
                op: "build_b",
                expected: x.shape()[mode],
                got: u.nrows(),
            });
        }
        y = y.mode_n_product(&u.transpose(), mode)?;
    }
    y.matricize(n - 1)
}

/// Cholesky factor of `UᵀU` after a condition check.
#[derive(Clone, Debug)]
pub struct GramFactor {
    chol: Cholesky<f64, Dyn>,
}

impl GramFactor {
    pub fn new(u: &Matrix) -> Result<Self> {
        let gram = u.transpose() * u;
        let eig = SymmetricEigen::new(gram.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) || !max.is_finite() || max / min > MAX_GRAM_CONDITION {
            let condition = if min > 0.0 { max / min } else { f64::INFINITY };
            return Err(Error::RankDeficient {
                op: "Gram factorization",
                condition,
            });
        }
        let chol = Cholesky::new(gram).ok_or(Error::RankDeficient {
            op: "Gram factorization",
            condition: max / min,
        })?;
        Ok(Self { chol })
    }

    /// `(UᵀU)⁻¹ a`.
    pub fn solve_left(&self, a: &Matrix) -> Matrix {
        self.chol.solve(a)
    }

    /// `a (UᵀU)⁻¹`.
    pub fn solve_right(&self, a: &Matrix) -> Matrix {
        self.chol.solve(&a.transpose()).transpose()
    }

    /// `Q = U L⁻ᵀ` where `UᵀU = L Lᵀ`; its columns are an orthonormal basis of span(U).
    pub fn orthonormal_basis(&self, u: &Matrix) -> Matrix {
        let l = self.chol.l();
        // Solve Q Lᵀ = U, i.e. L Qᵀ = Uᵀ.
        let qt = l
            .solve_lower_triangular(&u.transpose())
            .expect("Cholesky factor has a positive diagonal");
        qt.transpose()
    }
}

/// The last-mode subproblem for a fixed `B`.
#[derive(Clone, Debug)]
pub struct ObjectiveInstance {
    b: Matrix,
}

struct Prepared {
    gram: GramFactor,
    /// B (Bᵀ U)
    cu: Matrix,
    /// Uᵀ B Bᵀ U
    s: Matrix,
}

fn sym(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

impl ObjectiveInstance {
    pub fn new(b: Matrix) -> Result<Self> {
        if b.nrows() == 0 {
            return Err(Error::Empty("ObjectiveInstance"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ObjectiveInstance"));
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// `B Bᵀ a`, associated as `B (Bᵀ a)`.
    fn apply_bbt(&self, a: &Matrix) -> Matrix {
        &self.b * (self.b.transpose() * a)
    }

    fn check_rows(&self, u: &Matrix) -> Result<()> {
        if u.nrows() != self.b.nrows() {
            return Err(Error::DimensionMismatch {
                op: "objective",
                expected: self.b.nrows(),
                got: u.nrows(),
            });
        }
        Ok(())
    }

    fn prepare(&self, u: &Matrix) -> Result<Prepared> {
        self.check_rows(u)?;
        let gram = GramFactor::new(u)?;
        let btu = self.b.transpose() * u;
        let s = btu.transpose() * &btu;
        let cu = &self.b * btu;
        Ok(Prepared { gram, cu, s })
    }

    /// `F(U) = −½ ‖P_U B‖²_F`.
    pub fn eval(&self, u: &Matrix) -> Result<f64> {
        let p = self.prepare(u)?;
        Ok(-0.5 * p.gram.solve_left(&p.s).trace())
    }

    /// `GradF = −BBᵀU W + U W (UᵀBBᵀU) W` with `W = (UᵀU)⁻¹`.
    pub fn egrad(&self, u: &Matrix) -> Result<Matrix> {
        let p = self.prepare(u)?;
        Ok(self.egrad_prepared(u, &p))
    }

    fn egrad_prepared(&self, u: &Matrix, p: &Prepared) -> Matrix {
        let cuw = p.gram.solve_right(&p.cu);
        let wsw = p.gram.solve_right(&p.gram.solve_left(&p.s));
        -cuw + u * wsw
    }

    /// Directional derivative `D GradF(U)[ξ]`, term for term.
    pub fn dgrad(&self, u: &Matrix, xi: &Matrix) -> Result<Matrix> {
        if xi.shape() != u.shape() {
            return Err(Error::ShapeMismatch {
                op: "dgrad",
                left: vec![u.nrows(), u.ncols()],
                right: vec![xi.nrows(), xi.ncols()],
            });
        }
        let p = self.prepare(u)?;
        let g = &p.gram;
        let a = sym(&(u.transpose() * xi));
        let uw = g.solve_right(u);
        let wsw = g.solve_right(&g.solve_left(&p.s));
        let waw = g.solve_right(&g.solve_left(&a));

        let t1 = -g.solve_right(&self.apply_bbt(xi));
        let t2 = xi * &wsw;
        let t3 = g.solve_right(&(g.solve_right(&p.cu) * &a)) * 2.0;
        let t4 = g.solve_right(&(&uw * sym(&(xi.transpose() * &p.cu)))) * 2.0;
        let t5 = &uw * &a * &wsw * -2.0;
        let t6 = &uw * &p.s * &waw * -2.0;
        Ok(t1 + t2 + t3 + t4 + t5 + t6)
    }
}

impl Problem<Multinomial> for ObjectiveInstance {
    fn cost(&self, x: &MultinomialPoint) -> Result<f64> {
        self.eval(x.matrix())
    }

    fn egrad(&self, x: &MultinomialPoint) -> Result<Matrix> {
        ObjectiveInstance::egrad(self, x.matrix())
    }

    fn ehess(&self, x: &MultinomialPoint, v: &Matrix) -> Result<Matrix> {
        self.dgrad(x.matrix(), v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::seeded_orthonormal;
    use crate::manifold::random_point;
    use crate::tensor::kron;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_tensor(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn build_b_identity_and_rank_one() {
        let x = random_tensor(vec![3, 4, 5], 1);
        let ids = vec![Matrix::identity(3, 3), Matrix::identity(4, 4)];
        assert_eq!(build_b(&x, &ids).unwrap(), x.matricize(2).unwrap());

        let u1 = seeded_orthonormal(3, 1, 2);
        let u2 = seeded_orthonormal(4, 1, 3);
        let b = build_b(&x, &[u1.clone(), u2.clone()]).unwrap();
        assert_eq!(b.shape(), (5, 1));
        for m in 0..5 {
            let s = x.last_mode_slice(m).unwrap();
            let mut want = 0.0;
            for i in 0..3 {
                for j in 0..4 {
                    want += u1[(i, 0)] * u2[(j, 0)] * s.get(&[i, j]);
                }
            }
            assert!((b[(m, 0)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn build_b_matches_kronecker_path() {
        let x = random_tensor(vec![3, 3, 4], 4);
        let u1 = seeded_orthonormal(3, 2, 5);
        let u2 = seeded_orthonormal(3, 2, 6);
        let b = build_b(&x, &[u1.clone(), u2.clone()]).unwrap();
        let via_kron = x.matricize(2).unwrap() * kron(&u2, &u1);
        assert!((b - via_kron).abs().max() <= 1e-12);
        assert!(build_b(&x, &[u1]).is_err());
    }

    #[test]
    fn eval_examples() {
        let u = random_point(6, 3, 1);
        let zero = ObjectiveInstance::new(Matrix::zeros(6, 4)).unwrap();
        assert_eq!(zero.eval(u.matrix()).unwrap(), 0.0);
        assert_eq!(zero.egrad(u.matrix()).unwrap(), Matrix::zeros(6, 3));
        let xi = crate::manifold::random_tangent(&u, 2);
        assert_eq!(zero.dgrad(u.matrix(), xi.matrix()).unwrap(), Matrix::zeros(6, 3));

        let b = random_matrix(6, 4, 3);
        let inst = ObjectiveInstance::new(b.clone()).unwrap();
        let ones = Matrix::from_element(6, 1, 1.0);
        let col_sums = ones.transpose() * &b;
        let want = -0.5 * col_sums.norm_squared() / 6.0;
        assert!(rel(inst.eval(&ones).unwrap(), want) < 1e-12);

        let dup = Matrix::from_fn(6, 2, |i, _| 0.1 + i as f64);
        assert!(matches!(inst.eval(&dup), Err(Error::RankDeficient { .. })));
        assert!(inst.eval(&Matrix::zeros(5, 2)).is_err());
    }

    #[test]
    fn eval_is_bounded() {
        let b = random_matrix(8, 5, 7);
        let inst = ObjectiveInstance::new(b.clone()).unwrap();
        let f = inst.eval(random_point(8, 3, 8).matrix()).unwrap();
        assert!(f <= 0.0 && f >= -0.5 * b.norm_squared() - 1e-12);
    }

    #[test]
    fn eval_depends_only_on_span() {
        for seed in 0..10 {
            let inst = ObjectiveInstance::new(random_matrix(9, 4, seed)).unwrap();
            let u = random_point(9, 3, seed + 100).into_matrix();
            let a = random_matrix(3, 3, seed + 200) + Matrix::identity(3, 3) * 3.0;
            let f = inst.eval(&u).unwrap();
            let g = inst.eval(&(&u * a)).unwrap();
            assert!((f - g).abs() <= 1e-10 * f.abs());
        }
    }

    #[test]
    fn egrad_matches_central_differences() {
        let h = 1e-6;
        for seed in 0..20 {
            let inst = ObjectiveInstance::new(random_matrix(10, 4, seed)).unwrap();
            let u = random_point(10, 3, seed + 50).into_matrix();
            let z = random_matrix(10, 3, seed + 90);
            let g = inst.egrad(&u).unwrap();
            let analytic = g.dot(&z);
            let fd = (inst.eval(&(&u + &z * h)).unwrap() - inst.eval(&(&u - &z * h)).unwrap())
                / (2.0 * h);
            assert!(rel(fd, analytic) < 1e-5, "seed {seed}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn egrad_vanishes_at_full_span() {
        let inst = ObjectiveInstance::new(random_matrix(3, 3, 11)).unwrap();
        let u = Matrix::identity(3, 3) * 0.9 + Matrix::from_element(3, 3, 0.1 / 3.0);
        assert!(inst.egrad(&u).unwrap().abs().max() < 1e-12);
    }

    #[test]
    fn dgrad_matches_gradient_differences() {
        let h = 1e-6;
        for seed in 0..20 {
            let inst = ObjectiveInstance::new(random_matrix(10, 4, seed)).unwrap();
            let u = random_point(10, 3, seed + 50).into_matrix();
            let xi = random_matrix(10, 3, seed + 70);
            let analytic = inst.dgrad(&u, &xi).unwrap();
            let fd = (inst.egrad(&(&u + &xi * h)).unwrap() - inst.egrad(&(&u - &xi * h)).unwrap())
                / (2.0 * h);
            let err = (&analytic - &fd).norm() / analytic.norm();
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
            assert_eq!(inst.dgrad(&u, &Matrix::zeros(10, 3)).unwrap().norm(), 0.0);
        }
    }
}
