//! The alternating clustering scheme.
//!
//! Each outer iteration first updates the membership matrix with a
//! trust-region solve on the multinomial manifold, then sweeps the orthonormal
//! factors with their closed-form updates. After the loop the core is
//! recovered, centroids are back-projected and k-means over the membership
//! rows gives the hard labels.
//!
//! Only the membership-first ordering is implemented; starting the loop with
//! factor updates is not supported.

mod factors;
mod kmeans;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use factors::{
    h_value, hooi, model_error, random_orthonormal, reconstruct, recover_core,
    seeded_orthonormal, top_left_singular_vectors, uf, update_factor_n, HooiOutput,
    HOOI_MAX_SWEEPS, HOOI_REL_TOL,
};
pub use kmeans::{kmeans, kmeans_with, KMeansConfig};

use crate::error::{Error, Result};
use crate::manifold::{random_point, Multinomial, MultinomialPoint};
use crate::objective::{build_b, ObjectiveInstance};
use crate::rtr::{self, SolveStats, TrustRegionConfig};
use crate::tensor::{DenseTensor, Matrix};

/// Default cap on each core dimension when none is given.
pub const DEFAULT_CORE_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Random orthonormal factors, random interior membership.
    Random,
    /// HOOI factors, then a long trust-region run for the membership.
    HosvdI,
    /// Shared factors fitted over all slices, random interior membership.
    HosvdII,
}

impl std::str::FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "hosvd1" | "hosvd_i" => Ok(Self::HosvdI),
            "hosvd2" | "hosvd_ii" => Ok(Self::HosvdII),
            other => Err(Error::InvalidConfig(format!(
                "unknown init strategy {other:?} (expected random, hosvd1 or hosvd2)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    /// `J₁ … J_{N−1}`; `None` uses `min(Iₙ, 12)` per mode.
    pub core_dims: Option<Vec<usize>>,
    pub max_outer: usize,
    pub factor_sweeps_per_outer: usize,
    pub rtr_first_call_outer: usize,
    pub rtr_subsequent_outer: usize,
    pub rtr_max_inner: usize,
    pub rtr_grad_tol: f64,
    pub init_strategy: InitStrategy,
    pub seed: u64,
    pub early_stop_rel_tol: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl ClusterConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            core_dims: None,
            max_outer: 250,
            factor_sweeps_per_outer: 2,
            rtr_first_call_outer: 1000,
            rtr_subsequent_outer: 5,
            rtr_max_inner: 30,
            rtr_grad_tol: 1e-6,
            init_strategy: InitStrategy::Random,
            seed: 0,
            early_stop_rel_tol: 1e-8,
            kmeans_restarts: 20,
            kmeans_max_iter: 300,
        }
    }

    pub fn with_core_dims(mut self, dims: Vec<usize>) -> Self {
        self.core_dims = Some(dims);
        self
    }

    pub fn with_init(mut self, init: InitStrategy) -> Self {
        self.init_strategy = init;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_outer(mut self, max_outer: usize) -> Self {
        self.max_outer = max_outer;
        self
    }

    /// Core dimensions for a data tensor of the given shape.
    pub fn resolved_core_dims(&self, shape: &[usize]) -> Vec<usize> {
        let n = shape.len();
        match &self.core_dims {
            Some(d) => d.clone(),
            None => shape[..n.saturating_sub(1)]
                .iter()
                .map(|&i| i.min(DEFAULT_CORE_CAP))
                .collect(),
        }
    }

    /// Checks the configuration against a data tensor shape.
    pub fn validate(&self, shape: &[usize]) -> Result<Vec<usize>> {
        let n = shape.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "data tensor must have order >= 2, got {n}"
            )));
        }
        let m = shape[n - 1];
        if self.k == 0 || self.k > m {
            return Err(Error::InvalidConfig(format!(
                "cluster count {} must lie in 1..={m} (number of samples)",
                self.k
            )));
        }
        let dims = self.resolved_core_dims(shape);
        if dims.len() != n - 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} core dimensions, got {}",
                n - 1,
                dims.len()
            )));
        }
        for (mode, (&j, &i)) in dims.iter().zip(shape).enumerate() {
            if j == 0 || j > i {
                return Err(Error::InvalidConfig(format!(
                    "core dimension {j} for mode {mode} must lie in 1..={i}"
                )));
            }
        }
        if self.max_outer == 0
            || self.rtr_first_call_outer == 0
            || self.rtr_subsequent_outer == 0
            || self.rtr_max_inner == 0
        {
            return Err(Error::InvalidConfig("iteration caps must be >= 1".into()));
        }
        if !(self.rtr_grad_tol > 0.0) || !(self.early_stop_rel_tol >= 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(dims)
    }

    fn rtr_config(&self, m: usize, budget: usize) -> TrustRegionConfig {
        let mut cfg = TrustRegionConfig::for_shape(m, self.k).with_max_outer(budget);
        cfg.max_inner = self.rtr_max_inner;
        cfg.grad_tol = self.rtr_grad_tol;
        cfg
    }
}

/// Current factors of the heterogeneous Tucker model.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    /// Orthonormal `Iₙ × Jₙ` factors for the first `N − 1` modes.
    pub factors: Vec<Matrix>,
    pub membership: MultinomialPoint,
    /// `J₁ × ⋯ × J_{N−1} × K`.
    pub core: DenseTensor,
    /// Model error after every outer iteration.
    pub error_trace: Vec<f64>,
}

impl FactorSet {
    fn without_core(factors: Vec<Matrix>, membership: MultinomialPoint) -> Result<Self> {
        let mut shape: Vec<usize> = factors.iter().map(|f| f.ncols()).collect();
        shape.push(membership.ncols());
        Ok(Self {
            factors,
            membership,
            core: DenseTensor::zeros(shape)?,
            error_trace: Vec::new(),
        })
    }

    /// Largest `‖UₙᵀUₙ − I‖_F` over the orthonormal factors.
    pub fn orthonormality_residual(&self) -> f64 {
        self.factors
            .iter()
            .map(|u| (u.transpose() * u - Matrix::identity(u.ncols(), u.ncols())).norm())
            .fold(0.0, f64::max)
    }
}

/// Diagnostics of one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// Model error `½‖X − G ×₁ U₁ ⋯ ×_N U_N‖²` at the optimal core.
    pub model_error: f64,
    /// `h(U)`, the projected energy being maximized.
    pub h: f64,
    /// `½‖X‖² − h`, equal to `model_error` up to rounding.
    pub error_from_h: f64,
    pub rtr: SolveStats,
}

#[derive(Clone, Debug)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub factors: FactorSet,
    /// One `I₁ × ⋯ × I_{N−1}` representative per cluster.
    pub centroids: Vec<DenseTensor>,
    pub diagnostics: Vec<OuterRecord>,
    /// Trust-region statistics of the initialization run, if any.
    pub init_stats: Option<SolveStats>,
}

fn membership_seed(cfg: &ClusterConfig) -> u64 {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d65_6d62).random()
}

fn initial_membership(m: usize, cfg: &ClusterConfig) -> MultinomialPoint {
    if cfg.k == 1 {
        MultinomialPoint::ones(m)
    } else {
        random_point(m, cfg.k, membership_seed(cfg))
    }
}

fn membership_step(
    x: &DenseTensor,
    factors: &[Matrix],
    membership: MultinomialPoint,
    cfg: &ClusterConfig,
    budget: usize,
) -> Result<(MultinomialPoint, SolveStats)> {
    let inst = ObjectiveInstance::new(build_b(x, factors)?)?;
    if cfg.k == 1 {
        let f = rtr::Problem::<Multinomial>::cost(&inst, &membership)?;
        let stats = SolveStats {
            outer_iterations: 0,
            inner_iterations: 0,
            accepted_steps: 0,
            grad_norms: vec![0.0],
            costs: vec![f],
            records: Vec::new(),
            termination: rtr::Termination::GradientTolerance,
        };
        return Ok((membership, stats));
    }
    let rcfg = cfg.rtr_config(membership.nrows(), budget);
    rtr::solve(&Multinomial, &inst, membership, &rcfg)
}

/// Random orthonormal factors and a random interior membership.
pub fn init_random(shape: &[usize], cfg: &ClusterConfig) -> Result<FactorSet> {
    let dims = cfg.validate(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors = dims
        .iter()
        .zip(shape)
        .map(|(&j, &i)| random_orthonormal(i, j, &mut rng))
        .collect();
    FactorSet::without_core(factors, initial_membership(shape[shape.len() - 1], cfg))
}

/// HOOI factors with core `(J₁, …, J_{N−1}, K)`, followed by a trust-region
/// run of `rtr_first_call_outer` iterations for the membership.
pub fn init_hosvd_i(x: &DenseTensor, cfg: &ClusterConfig) -> Result<(FactorSet, SolveStats)> {
    let mut dims = cfg.validate(x.shape())?;
    dims.push(cfg.k);
    let mut out = hooi(x, &dims)?;
    out.factors.pop();
    let m = x.shape()[x.order() - 1];
    let (membership, stats) = membership_step(
        x,
        &out.factors,
        initial_membership(m, cfg),
        cfg,
        cfg.rtr_first_call_outer,
    )?;
    Ok((FactorSet::without_core(out.factors, membership)?, stats))
}

/// Factors shared by all slices, fitted with the last mode left unprojected;
/// random interior membership.
pub fn init_hosvd_ii(x: &DenseTensor, cfg: &ClusterConfig) -> Result<FactorSet> {
    let dims = cfg.validate(x.shape())?;
    let mut spec: Vec<Option<usize>> = dims.iter().map(|&d| Some(d)).collect();
    spec.push(None);
    let mut out = factors::alternating_subspaces(x, &spec)?;
    out.factors.pop();
    let m = x.shape()[x.order() - 1];
    FactorSet::without_core(out.factors, initial_membership(m, cfg))
}

/// Per-sweep fit trace of the shared-factor fit used by [`init_hosvd_ii`].
pub fn hosvd_ii_fits(x: &DenseTensor, dims: &[usize]) -> Result<Vec<f64>> {
    let mut spec: Vec<Option<usize>> = dims.iter().map(|&d| Some(d)).collect();
    spec.push(None);
    Ok(factors::alternating_subspaces(x, &spec)?.fits)
}

/// Back-projects the core: slice `k` of `G ×₁ U₁ ⋯ ×_{N−1} U_{N−1}` along the last mode.
pub fn reconstruct_centroids(fs: &FactorSet) -> Result<Vec<DenseTensor>> {
    let mut y = fs.core.clone();
    for (mode, f) in fs.factors.iter().enumerate() {
        y = y.mode_n_product(f, mode)?;
    }
    (0..fs.membership.ncols())
        .map(|k| y.last_mode_slice(k))
        .collect()
}

/// Runs the full clustering pipeline on a tensor whose last mode indexes samples.
pub fn fit(x: &DenseTensor, cfg: &ClusterConfig) -> Result<ClusteringResult> {
    cfg.validate(x.shape())?;
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data tensor"));
    }
    let (mut fs, init_stats) = match cfg.init_strategy {
        InitStrategy::Random => (init_random(x.shape(), cfg)?, None),
        InitStrategy::HosvdI => {
            let (fs, stats) = init_hosvd_i(x, cfg)?;
            (fs, Some(stats))
        }
        InitStrategy::HosvdII => (init_hosvd_ii(x, cfg)?, None),
    };
    let half_norm = 0.5 * x.frob_norm().powi(2);
    let mut first_call_done = init_stats.is_some();
    let mut diagnostics = Vec::new();

    for iteration in 0..cfg.max_outer {
        let budget = if first_call_done {
            cfg.rtr_subsequent_outer
        } else {
            cfg.rtr_first_call_outer
        };
        first_call_done = true;
        let (membership, stats) =
            membership_step(x, &fs.factors, fs.membership.clone(), cfg, budget)?;
        fs.membership = membership;

        for _ in 0..cfg.factor_sweeps_per_outer {
            for n in 0..fs.factors.len() {
                fs.factors[n] = update_factor_n(x, &fs.factors, &fs.membership, n)?;
            }
        }

        let h = h_value(x, &fs.factors, &fs.membership)?;
        let err = model_error(x, &fs.factors, &fs.membership)?;
        fs.error_trace.push(err);
        diagnostics.push(OuterRecord {
            iteration,
            model_error: err,
            h,
            error_from_h: half_norm - h,
            rtr: stats,
        });

        if let [.., prev, last] = fs.error_trace[..] {
            if (last - prev).abs() / prev.max(1e-30) < cfg.early_stop_rel_tol {
                break;
            }
        }
    }

    fs.core = recover_core(x, &fs.factors, &fs.membership)?;
    let centroids = reconstruct_centroids(&fs)?;
    let labels = kmeans_with(
        fs.membership.matrix(),
        cfg.k,
        cfg.seed,
        &KMeansConfig {
            restarts: cfg.kmeans_restarts,
            max_iter: cfg.kmeans_max_iter,
        },
    )?;
    Ok(ClusteringResult {
        labels,
        factors: fs,
        centroids,
        diagnostics,
        init_stats,
    })
}
