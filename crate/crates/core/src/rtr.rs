//! Riemannian trust-region minimization with a Steihaug–Toint truncated
//! conjugate-gradient inner solver.
//!
//! The solver only sees a manifold through [`Manifold`] and an objective
//! through [`Problem`]. Tangent vectors are carried as ambient matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Geometry consumed by the solver.
pub trait Manifold {
    type Point: Clone;

    /// Riemannian metric at `x`.
    fn inner(&self, x: &Self::Point, a: &Matrix, b: &Matrix) -> f64;
    /// Orthogonal projection of an ambient matrix onto the tangent space at `x`.
    fn project(&self, x: &Self::Point, z: &Matrix) -> Matrix;
    fn retract(&self, x: &Self::Point, v: &Matrix, t: f64) -> Result<Self::Point>;
    fn egrad_to_rgrad(&self, x: &Self::Point, egrad: &Matrix) -> Matrix;
    fn ehess_to_rhess(&self, x: &Self::Point, egrad: &Matrix, ehess: &Matrix, v: &Matrix)
        -> Matrix;
    fn zero_tangent(&self, x: &Self::Point) -> Matrix;

    fn norm(&self, x: &Self::Point, v: &Matrix) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }
}

/// Objective callbacks: value, Euclidean gradient and its directional derivative.
pub trait Problem<M: Manifold> {
    fn cost(&self, x: &M::Point) -> Result<f64>;
    fn egrad(&self, x: &M::Point) -> Result<Matrix>;
    fn ehess(&self, x: &M::Point, v: &Matrix) -> Result<Matrix>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrustRegionConfig {
    /// Largest admissible radius.
    pub delta_bar: f64,
    pub delta0: f64,
    /// Minimum actual/predicted reduction ratio for accepting a step.
    pub rho_prime: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub grad_tol: f64,
    pub theta: f64,
    pub kappa: f64,
}

impl TrustRegionConfig {
    /// Default radii scale with the problem size: `Δ̄ = √(M·K)`, `Δ₀ = Δ̄ / 8`.
    pub fn for_shape(m: usize, k: usize) -> Self {
        let delta_bar = ((m * k) as f64).sqrt();
        Self {
            delta_bar,
            delta0: delta_bar / 8.0,
            rho_prime: 0.1,
            max_outer: 1000,
            max_inner: 30,
            grad_tol: 1e-6,
            theta: 1.0,
            kappa: 0.1,
        }
    }

    pub fn with_max_outer(mut self, max_outer: usize) -> Self {
        self.max_outer = max_outer;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta0 > 0.0
            && self.delta0 <= self.delta_bar
            && self.rho_prime > 0.0
            && self.rho_prime < 0.25
            && self.max_outer >= 1
            && self.max_inner >= 1
            && self.grad_tol > 0.0
            && self.kappa > 0.0
            && self.kappa < 1.0
            && self.theta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid trust-region configuration {self:?}"
            )))
        }
    }
}

/// Why the inner solver stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TcgStop {
    NegativeCurvature,
    ExceededRadius,
    ResidualTolerance,
    MaxInner,
    ModelIncreased,
}

/// Why the outer loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    RadiusCollapse,
}

/// One outer iteration of the trust-region loop.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub delta: f64,
    pub rho: f64,
    pub inner: usize,
    pub accepted: bool,
    pub tcg_stop: TcgStop,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveStats {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub accepted_steps: usize,
    /// Gradient norm at each accepted iterate, starting with the initial point.
    pub grad_norms: Vec<f64>,
    /// Cost at each accepted iterate, starting with the initial point.
    pub costs: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl SolveStats {
    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("costs holds the initial value")
    }

    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norms.last().expect("grad_norms holds the initial value")
    }
}

/// Output of [`truncated_cg`].
#[derive(Clone, Debug)]
pub struct TcgOutput {
    pub eta: Matrix,
    pub heta: Matrix,
    pub stop: TcgStop,
    pub iterations: usize,
}

/// Approximately minimizes `m(η) = ⟨g, η⟩ + ½⟨H η, η⟩` over `‖η‖ ≤ delta`.
///
/// `hess` must be linear and self-adjoint for the metric at `x`.
pub fn truncated_cg<M: Manifold>(
    manifold: &M,
    x: &M::Point,
    grad: &Matrix,
    mut hess: impl FnMut(&Matrix) -> Result<Matrix>,
    delta: f64,
    cfg: &TrustRegionConfig,
) -> Result<TcgOutput> {
    let inner = |a: &Matrix, b: &Matrix| manifold.inner(x, a, b);
    let mut eta = manifold.zero_tangent(x);
    let mut heta = eta.clone();
    let mut r = grad.clone();
    let mut r_r = inner(&r, &r);
    let norm_r0 = r_r.sqrt();
    if norm_r0 == 0.0 {
        return Ok(TcgOutput {
            eta,
            heta,
            stop: TcgStop::ResidualTolerance,
            iterations: 0,
        });
    }
    let mut e_pe = 0.0;
    let mut e_pd = 0.0;
    let mut d_pd = r_r;
    let mut dir = -&r;
    let mut model = 0.0;
    let delta2 = delta * delta;

    for j in 0..cfg.max_inner {
        let hdir = hess(&dir)?;
        if hdir.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("truncated_cg Hessian"));
        }
        let d_hd = inner(&dir, &hdir);
        let alpha = r_r / d_hd;
        let e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;

        if d_hd <= 0.0 || e_pe_new >= delta2 {
            let tau = (-e_pd + (e_pd * e_pd + d_pd * (delta2 - e_pe)).max(0.0).sqrt()) / d_pd;
            eta += &dir * tau;
            heta += &hdir * tau;
            let stop = if d_hd <= 0.0 {
                TcgStop::NegativeCurvature
            } else {
                TcgStop::ExceededRadius
            };
            return Ok(TcgOutput {
                eta,
                heta,
                stop,
                iterations: j + 1,
            });
        }

        let new_eta = &eta + &dir * alpha;
        let new_heta = &heta + &hdir * alpha;
        let new_model = inner(&new_eta, grad) + 0.5 * inner(&new_eta, &new_heta);
        if new_model >= model {
            return Ok(TcgOutput {
                eta,
                heta,
                stop: TcgStop::ModelIncreased,
                iterations: j + 1,
            });
        }
        model = new_model;
        eta = new_eta;
        heta = new_heta;
        e_pe = e_pe_new;

        r += &hdir * alpha;
        r = manifold.project(x, &r);
        let r_r_new = inner(&r, &r);
        let norm_r = r_r_new.sqrt();
        if norm_r <= norm_r0 * norm_r0.powf(cfg.theta).min(cfg.kappa) {
            return Ok(TcgOutput {
                eta,
                heta,
                stop: TcgStop::ResidualTolerance,
                iterations: j + 1,
            });
        }
        let beta = r_r_new / r_r;
        r_r = r_r_new;
        dir = -&r + &dir * beta;
        dir = manifold.project(x, &dir);
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = r_r + beta * beta * d_pd;
    }
    Ok(TcgOutput {
        eta,
        heta,
        stop: TcgStop::MaxInner,
        iterations: cfg.max_inner,
    })
}

fn check_finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Runs the trust-region loop from `x0`.
///
/// Rejected steps leave the iterate untouched, so the cost never increases.
pub fn solve<M: Manifold, P: Problem<M>>(
    manifold: &M,
    problem: &P,
    x0: M::Point,
    cfg: &TrustRegionConfig,
) -> Result<(M::Point, SolveStats)> {
    cfg.validate()?;
    let mut x = x0;
    let mut fx = check_finite(problem.cost(&x)?, "objective")?;
    let mut egrad = problem.egrad(&x)?;
    if egrad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut grad = manifold.egrad_to_rgrad(&x, &egrad);
    let mut gnorm = manifold.norm(&x, &grad);
    let mut delta = cfg.delta0;

    let mut stats = SolveStats {
        outer_iterations: 0,
        inner_iterations: 0,
        accepted_steps: 0,
        grad_norms: vec![gnorm],
        costs: vec![fx],
        records: Vec::new(),
        termination: Termination::MaxIterations,
    };

    for iteration in 0..cfg.max_outer {
        if gnorm <= cfg.grad_tol {
            stats.termination = Termination::GradientTolerance;
            return Ok((x, stats));
        }
        stats.outer_iterations += 1;

        let tcg = truncated_cg(
            manifold,
            &x,
            &grad,
            |v| {
                let dg = problem.ehess(&x, v)?;
                Ok(manifold.ehess_to_rhess(&x, &egrad, &dg, v))
            },
            delta,
            cfg,
        )?;
        stats.inner_iterations += tcg.iterations;

        let candidate = manifold.retract(&x, &tcg.eta, 1.0)?;
        let f_cand = problem.cost(&candidate);
        let predicted =
            -manifold.inner(&x, &grad, &tcg.eta) - 0.5 * manifold.inner(&x, &tcg.eta, &tcg.heta);

        // A rank-deficient trial point is treated like any other failed step.
        let (rho, f_cand) = match f_cand {
            Ok(f) if f.is_finite() => {
                if predicted <= 1e-15 * fx.abs() {
                    (f64::NAN, f)
                } else {
                    ((fx - f) / predicted, f)
                }
            }
            Ok(_) | Err(Error::RankDeficient { .. }) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };

        let touched = matches!(
            tcg.stop,
            TcgStop::NegativeCurvature | TcgStop::ExceededRadius
        );
        if !(rho >= 0.25) {
            delta *= 0.25;
        } else if rho > 0.75 && touched {
            delta = (2.0 * delta).min(cfg.delta_bar);
        }

        let accepted = rho > cfg.rho_prime && f_cand < fx;
        if accepted {
            x = candidate;
            fx = f_cand;
            egrad = problem.egrad(&x)?;
            if egrad.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradient"));
            }
            grad = manifold.egrad_to_rgrad(&x, &egrad);
            gnorm = manifold.norm(&x, &grad);
            stats.accepted_steps += 1;
            stats.costs.push(fx);
            stats.grad_norms.push(gnorm);
        }
        stats.records.push(IterationRecord {
            iteration,
            cost: fx,
            grad_norm: gnorm,
            delta,
            rho,
            inner: tcg.iterations,
            accepted,
            tcg_stop: tcg.stop,
        });

        if delta < f64::EPSILON * cfg.delta_bar {
            stats.termination = Termination::RadiusCollapse;
            return Ok((x, stats));
        }
    }
    if gnorm <= cfg.grad_tol {
        stats.termination = Termination::GradientTolerance;
    }
    Ok((x, stats))
}
