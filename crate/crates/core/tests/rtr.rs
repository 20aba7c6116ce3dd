use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_cluster::manifold::{random_point, random_tangent, Multinomial, MultinomialPoint};
use tensor_cluster::objective::ObjectiveInstance;
use tensor_cluster::rtr::{self, Manifold, Problem, TcgStop, Termination, TrustRegionConfig};
use tensor_cluster::cluster::kmeans;
use tensor_cluster::{Matrix, Result};

/// `±½‖U − C‖²` in the ambient coordinates.
struct Quadratic {
    target: Matrix,
    sign: f64,
}

impl Problem<Multinomial> for Quadratic {
    fn cost(&self, x: &MultinomialPoint) -> Result<f64> {
        Ok(self.sign * 0.5 * (x.matrix() - &self.target).norm_squared())
    }
    fn egrad(&self, x: &MultinomialPoint) -> Result<Matrix> {
        Ok((x.matrix() - &self.target) * self.sign)
    }
    fn ehess(&self, _x: &MultinomialPoint, v: &Matrix) -> Result<Matrix> {
        Ok(v * self.sign)
    }
}

/// A target whose constrained minimizer is an interior point: a random point
/// of the manifold with an arbitrary shift added to each row.
fn interior_target(m: usize, k: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = random_point(m, k, seed).into_matrix();
    for mut row in c.row_iter_mut() {
        row.add_scalar_mut(rng.random_range(-1.0..1.0));
    }
    c
}

/// Per-row minimizer of `½‖u − c‖²` over `Σu = 1`: `u = c + (1 − Σc)/K`.
fn kkt_solution(c: &Matrix) -> Matrix {
    let k = c.ncols() as f64;
    let mut u = c.clone();
    for mut row in u.row_iter_mut() {
        let shift = (1.0 - row.sum()) / k;
        row.add_scalar_mut(shift);
    }
    u
}

fn rhess<'a>(
    p: &'a impl Problem<Multinomial>,
    x: &'a MultinomialPoint,
) -> impl FnMut(&Matrix) -> Result<Matrix> + 'a {
    let eg = p.egrad(x).unwrap();
    move |v| Ok(Multinomial.ehess_to_rhess(x, &eg, &p.ehess(x, v)?, v))
}

#[test]
fn tcg_zero_gradient() {
    let x = random_point(5, 3, 1);
    let p = Quadratic { target: interior_target(5, 3, 2), sign: 1.0 };
    let cfg = TrustRegionConfig::for_shape(5, 3);
    let out = rtr::truncated_cg(&Multinomial, &x, &Matrix::zeros(5, 3), rhess(&p, &x), 1.0, &cfg)
        .unwrap();
    assert_eq!(out.eta, Matrix::zeros(5, 3));
    assert_eq!(out.iterations, 0);
}

#[test]
fn tcg_reaches_newton_step() {
    for seed in 0..5 {
        // Near the minimizer the Riemannian Hessian is positive definite.
        let c = interior_target(6, 3, seed + 10);
        let opt = MultinomialPoint::new(kkt_solution(&c)).unwrap();
        let x = Multinomial.retract(&opt, random_tangent(&opt, seed).matrix(), 0.02).unwrap();
        let p = Quadratic { target: c, sign: 1.0 };
        let grad = Multinomial.egrad_to_rgrad(&x, &p.egrad(&x).unwrap());
        let mut cfg = TrustRegionConfig::for_shape(6, 3);
        cfg.kappa = 1e-14;
        cfg.theta = 1.0;
        cfg.max_inner = 200;
        let out =
            rtr::truncated_cg(&Multinomial, &x, &grad, rhess(&p, &x), 1e6, &cfg).unwrap();
        assert!(matches!(out.stop, TcgStop::ResidualTolerance | TcgStop::ModelIncreased));

        // Dense oracle: Galerkin system on the tangent basis e_{ik} − e_{iK}.
        let (m, k) = (6, 3);
        let mut h = rhess(&p, &x);
        let basis: Vec<Matrix> = (0..m * (k - 1))
            .map(|i| {
                let mut e = Matrix::zeros(m, k);
                e[(i / (k - 1), i % (k - 1))] = 1.0;
                e[(i / (k - 1), k - 1)] = -1.0;
                e
            })
            .collect();
        let n = basis.len();
        let hb: Vec<Matrix> = basis.iter().map(|b| h(b).unwrap()).collect();
        let a = Matrix::from_fn(n, n, |i, j| Multinomial.inner(&x, &basis[i], &hb[j]));
        let rhs = Matrix::from_fn(n, 1, |i, _| -Multinomial.inner(&x, &basis[i], &grad));
        let coeffs = a.lu().solve(&rhs).unwrap();
        let mut newton = Matrix::zeros(m, k);
        for (c, b) in coeffs.iter().zip(&basis) {
            newton += b * *c;
        }
        let err = Multinomial.norm(&x, &(&out.eta - &newton));
        assert!(err <= 1e-8 * Multinomial.norm(&x, &newton).max(1.0), "seed {seed}: {err}");
    }
}

#[test]
fn tcg_negative_curvature_hits_boundary() {
    for seed in 0..5 {
        let x = random_point(5, 4, seed);
        let p = Quadratic { target: interior_target(5, 4, seed + 3), sign: -1.0 };
        let grad = Multinomial.egrad_to_rgrad(&x, &p.egrad(&x).unwrap());
        let cfg = TrustRegionConfig::for_shape(5, 4);
        let delta = 0.05;
        let out = rtr::truncated_cg(&Multinomial, &x, &grad, rhess(&p, &x), delta, &cfg).unwrap();
        assert!(matches!(out.stop, TcgStop::NegativeCurvature | TcgStop::ExceededRadius));
        assert!((Multinomial.norm(&x, &out.eta) - delta).abs() <= 1e-10);
    }
}

#[test]
fn critical_start_takes_no_steps() {
    let c = interior_target(4, 3, 7);
    let start = MultinomialPoint::new(kkt_solution(&c)).unwrap();
    let p = Quadratic { target: c, sign: 1.0 };
    let (x, stats) =
        rtr::solve(&Multinomial, &p, start.clone(), &TrustRegionConfig::for_shape(4, 3)).unwrap();
    assert_eq!(stats.outer_iterations, 0);
    assert_eq!(stats.termination, Termination::GradientTolerance);
    assert_eq!(x, start);
}

#[test]
fn quadratic_converges_to_kkt_point() {
    for seed in 0..10 {
        let (m, k) = (8, 4);
        let c = interior_target(m, k, seed);
        let want = kkt_solution(&c);
        let p = Quadratic { target: c, sign: 1.0 };
        let mut cfg = TrustRegionConfig::for_shape(m, k).with_max_outer(500);
        cfg.grad_tol = 1e-10;
        let (x, stats) = rtr::solve(&Multinomial, &p, random_point(m, k, seed + 1), &cfg).unwrap();
        assert!((x.matrix() - &want).abs().max() <= 1e-6, "seed {seed}");
        assert!(stats.costs.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn clustering_objective_separates_two_groups() {
    let (m, d) = (10, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let centers = [
        Matrix::from_fn(1, d, |_, _| rng.random_range(-3.0..3.0)),
        Matrix::from_fn(1, d, |_, _| rng.random_range(-3.0..3.0)),
    ];
    let truth: Vec<usize> = (0..m).map(|i| usize::from(i % 3 == 0)).collect();
    let b = Matrix::from_fn(m, d, |i, j| centers[truth[i]][(0, j)] + rng.random_range(-0.01..0.01));
    let inst = ObjectiveInstance::new(b.clone()).unwrap();

    // Exhaustive oracle: the 2-partition whose indicator span scores lowest.
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 1u32..(1 << m) - 1 {
        if mask & 1 == 0 {
            continue;
        }
        let part: Vec<usize> = (0..m).map(|i| ((mask >> i) & 1) as usize).collect();
        let ind = Matrix::from_fn(m, 2, |i, c| if part[i] == c { 1.0 } else { 0.0 });
        let f = inst.eval(&ind).unwrap();
        if f < best.0 {
            best = (f, part);
        }
    }

    for seed in 0..5 {
        let cfg = TrustRegionConfig::for_shape(m, 2).with_max_outer(1000);
        let (x, stats) = rtr::solve(&Multinomial, &inst, random_point(m, 2, seed), &cfg).unwrap();
        assert!(stats.costs.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(stats.termination, Termination::GradientTolerance);
        assert!(stats.final_grad_norm() <= 1e-6);
        let labels = kmeans(x.matrix(), 2, seed).unwrap();
        assert!(same_partition(&labels, &best.1), "seed {seed}");
        assert!(same_partition(&labels, &truth));
        // Indicator spans are feasible limits, so they bound the optimum.
        assert!(stats.final_cost() <= best.0 + 1e-9 * best.0.abs());
    }
}

#[test]
fn random_tangent_is_unit() {
    let x = random_point(7, 3, 2);
    let v = random_tangent(&x, 3);
    assert!((Multinomial.norm(&x, v.matrix()) - 1.0).abs() < 1e-12);
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn tcg_never_increases_the_model() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Matrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
        let inst = ObjectiveInstance::new(b).unwrap();
        let x = random_point(12, 3, seed);
        let grad = Multinomial.egrad_to_rgrad(&x, &inst.egrad(x.matrix()).unwrap());
        let cfg = TrustRegionConfig::for_shape(12, 3);
        for delta in [1e-3, 0.1, 10.0] {
            let out = rtr::truncated_cg(&Multinomial, &x, &grad, rhess(&inst, &x), delta, &cfg)
                .unwrap();
            let model = Multinomial.inner(&x, &grad, &out.eta)
                + 0.5 * Multinomial.inner(&x, &out.eta, &out.heta);
            assert!(model <= 0.0);
            assert!(Multinomial.norm(&x, &out.eta) <= delta * (1.0 + 1e-10));
        }
    }
}

#[test]
fn radius_and_acceptance_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = Matrix::from_fn(20, 6, |_, _| rng.random_range(-1.0..1.0));
    let inst = ObjectiveInstance::new(b).unwrap();
    let cfg = TrustRegionConfig::for_shape(20, 4).with_max_outer(300);
    let (x, stats) = rtr::solve(&Multinomial, &inst, random_point(20, 4, 1), &cfg).unwrap();
    for r in &stats.records {
        assert!(r.delta <= cfg.delta_bar);
        if r.accepted {
            assert!(r.rho >= cfg.rho_prime);
        }
    }
    for row in x.matrix().row_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-12 && row.iter().all(|&v| v > 0.0));
    }
}
