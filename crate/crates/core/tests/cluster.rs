use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_cluster::cluster::{
    fit, h_value, init_hosvd_i, init_hosvd_ii, model_error, reconstruct, reconstruct_centroids,
    recover_core, seeded_orthonormal, update_factor_n, ClusterConfig, FactorSet, InitStrategy,
};
use tensor_cluster::io::{synth_clusters, SynthSpec};
use tensor_cluster::manifold::{random_point, MultinomialPoint};
use tensor_cluster::metrics::{accuracy, nmi};
use tensor_cluster::{DenseTensor, Error, Matrix};

fn random_tensor(shape: Vec<usize>, seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
}

fn span_distance(a: &Matrix, b: &Matrix) -> f64 {
    (a * a.transpose() - b * b.transpose()).norm()
}

fn separated(seed: u64) -> (DenseTensor, Vec<usize>) {
    let spec = SynthSpec {
        k: 3,
        per_cluster: 30,
        slice_shape: vec![8, 8],
        sigma: 0.1,
        separation: 2.0,
        seed,
    };
    let (ds, _) = synth_clusters(&spec).unwrap();
    (ds.tensor, ds.labels.unwrap())
}

#[test]
fn recovers_separated_clusters_with_every_init() {
    for init in [InitStrategy::Random, InitStrategy::HosvdI, InitStrategy::HosvdII] {
        for seed in 0..2 {
            let (x, truth) = separated(seed);
            let cfg = ClusterConfig::new(3)
                .with_core_dims(vec![4, 4])
                .with_init(init)
                .with_seed(seed);
            let res = fit(&x, &cfg).unwrap();
            assert!(accuracy(&truth, &res.labels).unwrap() >= 0.95, "{init:?} seed {seed}");
            assert!(nmi(&truth, &res.labels).unwrap() >= 0.90, "{init:?} seed {seed}");
            assert!(res.factors.orthonormality_residual() < 1e-10);
            assert_eq!(res.centroids.len(), 3);
            assert_eq!(res.centroids[0].shape(), &[8, 8]);
        }
    }
}

#[test]
fn model_error_is_monotone_and_matches_h() {
    for seed in 0..5 {
        let x = random_tensor(vec![6, 5, 12], seed);
        let cfg = ClusterConfig::new(3)
            .with_core_dims(vec![3, 3])
            .with_seed(seed)
            .with_max_outer(15);
        let res = fit(&x, &cfg).unwrap();
        let scale = 0.5 * x.frob_norm().powi(2);
        for d in &res.diagnostics {
            assert!((d.model_error - d.error_from_h).abs() <= 1e-10 * scale);
        }
        for w in res.factors.error_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs(), "seed {seed}: {w:?}");
        }
    }
}

#[test]
fn factor_update_does_not_decrease_h() {
    let x = random_tensor(vec![7, 6, 10], 3);
    let mut factors = vec![seeded_orthonormal(7, 3, 1), seeded_orthonormal(6, 2, 2)];
    let u = random_point(10, 3, 4);
    let mut prev = h_value(&x, &factors, &u).unwrap();
    for _ in 0..4 {
        for n in 0..2 {
            factors[n] = update_factor_n(&x, &factors, &u, n).unwrap();
            let h = h_value(&x, &factors, &u).unwrap();
            assert!(h >= prev - 1e-10 * prev);
            prev = h;
        }
    }
}

#[test]
fn single_cluster_is_trivial() {
    let x = random_tensor(vec![4, 3, 6], 1);
    let res = fit(&x, &ClusterConfig::new(1).with_core_dims(vec![2, 2])).unwrap();
    assert_eq!(res.labels, vec![0; 6]);
    let want = Matrix::from_element(6, 1, 1.0);
    assert_eq!(res.factors.membership.matrix(), &want);
}

#[test]
fn rejects_more_clusters_than_samples() {
    let x = random_tensor(vec![4, 3, 2], 1);
    assert!(matches!(fit(&x, &ClusterConfig::new(3)), Err(Error::InvalidConfig(_))));
    assert!(fit(&x, &ClusterConfig::new(2).with_core_dims(vec![5, 1])).is_err());
    assert!(fit(&x, &ClusterConfig::new(2).with_core_dims(vec![2])).is_err());
}

#[test]
fn deterministic_for_a_seed() {
    let x = random_tensor(vec![5, 4, 9], 8);
    let cfg = ClusterConfig::new(2).with_core_dims(vec![2, 2]).with_seed(11).with_max_outer(5);
    let a = fit(&x, &cfg).unwrap();
    let b = fit(&x, &cfg).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.factors, b.factors);
}

#[test]
fn shared_factors_match_hooi_when_membership_is_full() {
    let x = random_tensor(vec![6, 5, 4], 21);
    let cfg = ClusterConfig::new(4).with_core_dims(vec![3, 2]);
    let (fs1, _) = init_hosvd_i(&x, &cfg).unwrap();
    let fs2 = init_hosvd_ii(&x, &cfg).unwrap();
    for (a, b) in fs1.factors.iter().zip(&fs2.factors) {
        assert!(span_distance(a, b) < 1e-8);
    }
}

#[test]
fn exact_model_round_trip() {
    let core = random_tensor(vec![3, 2, 2], 5);
    let factors = vec![seeded_orthonormal(6, 3, 1), seeded_orthonormal(5, 2, 2)];
    let membership = random_point(9, 2, 3);
    let x = reconstruct(&core, &factors, membership.matrix()).unwrap();
    let g = recover_core(&x, &factors, &membership).unwrap();
    let diff = g.sub(&core).unwrap().frob_norm();
    assert!(diff <= 1e-10 * core.frob_norm());
    assert!(model_error(&x, &factors, &membership).unwrap() <= 1e-20 * x.frob_norm().powi(2) + 1e-24);
}

#[test]
fn centroid_examples() {
    let core = random_tensor(vec![3, 2, 2], 9);
    let fs = FactorSet {
        factors: vec![Matrix::identity(3, 3), Matrix::identity(2, 2)],
        membership: MultinomialPoint::new(Matrix::from_element(2, 2, 0.5)).unwrap(),
        core: core.clone(),
        error_trace: vec![],
    };
    let cs = reconstruct_centroids(&fs).unwrap();
    for (k, c) in cs.iter().enumerate() {
        assert_eq!(c, &core.last_mode_slice(k).unwrap());
    }

    let zero = FactorSet {
        core: DenseTensor::zeros(vec![3, 2, 2]).unwrap(),
        ..fs
    };
    for c in reconstruct_centroids(&zero).unwrap() {
        assert_eq!(c.frob_norm(), 0.0);
    }
}

#[test]
fn centroids_approach_cluster_means_for_crisp_membership() {
    let core = random_tensor(vec![3, 2, 2], 4);
    let factors = vec![seeded_orthonormal(5, 3, 6), seeded_orthonormal(4, 2, 7)];
    let eps = 1e-3;
    let truth = [0usize, 1, 1, 0, 1, 0];
    let u = Matrix::from_fn(6, 2, |i, k| if truth[i] == k { 1.0 - eps } else { eps });
    let membership = MultinomialPoint::new(u).unwrap();
    let x = reconstruct(&core, &factors, membership.matrix()).unwrap();
    let fs = FactorSet {
        core: recover_core(&x, &factors, &membership).unwrap(),
        factors,
        membership,
        error_trace: vec![],
    };
    let cs = reconstruct_centroids(&fs).unwrap();
    for (k, c) in cs.iter().enumerate() {
        let members: Vec<usize> = (0..6).filter(|&i| truth[i] == k).collect();
        let mut mean = DenseTensor::zeros(vec![5, 4]).unwrap();
        for &i in &members {
            mean = mean.sub(&x.last_mode_slice(i).unwrap().scale(-1.0)).unwrap();
        }
        let mean = mean.scale(1.0 / members.len() as f64);
        let err = c.sub(&mean).unwrap().frob_norm();
        assert!(err <= 4.0 * eps * core.frob_norm(), "cluster {k}: {err}");
    }
}

#[test]
fn shared_factor_fits_are_monotone() {
    let x = random_tensor(vec![7, 6, 9], 2);
    let fits = tensor_cluster::cluster::hosvd_ii_fits(&x, &[3, 2]).unwrap();
    assert!(fits.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn single_slice_shared_factors_match_hooi() {
    let x = random_tensor(vec![6, 5, 1], 13);
    let cfg = ClusterConfig::new(1).with_core_dims(vec![2, 3]);
    let shared = init_hosvd_ii(&x, &cfg).unwrap();
    let h = tensor_cluster::cluster::hooi(&x, &[2, 3, 1]).unwrap();
    for (a, b) in shared.factors.iter().zip(&h.factors) {
        assert!(span_distance(a, b) < 1e-8);
    }
}

#[test]
fn random_init_is_seeded_and_orthonormal() {
    let cfg = ClusterConfig::new(3).with_core_dims(vec![4, 5]).with_seed(3);
    let a = tensor_cluster::cluster::init_random(&[4, 7, 10], &cfg).unwrap();
    let b = tensor_cluster::cluster::init_random(&[4, 7, 10], &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.orthonormality_residual() <= 1e-12);
    assert_eq!(a.membership.ncols(), 3);
}

#[test]
fn permuting_samples_permutes_the_partition() {
    let (x, _) = separated(4);
    let m = x.shape()[2];
    let perm: Vec<usize> = (0..m).map(|i| (i * 37 + 11) % m).collect();
    let slices: Vec<DenseTensor> = perm.iter().map(|&i| x.last_mode_slice(i).unwrap()).collect();
    let xp = tensor_cluster::tensor::stack_last_mode(&slices).unwrap();
    let cfg = ClusterConfig::new(3).with_core_dims(vec![4, 4]).with_seed(1);
    let a = fit(&x, &cfg).unwrap().labels;
    let b = fit(&xp, &cfg).unwrap().labels;
    let permuted: Vec<usize> = perm.iter().map(|&i| a[i]).collect();
    assert_eq!(accuracy(&permuted, &b).unwrap(), 1.0);
}
