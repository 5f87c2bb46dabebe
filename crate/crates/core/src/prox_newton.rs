//! Inexact proximal Newton with a coordinate-descent subproblem solver.
//!
//! Each outer iteration builds the quadratic model
//! `Q(θ; θk) = vₖᵀθ + ½(θ-θk)ᵀ(∇²G_n(θk) + λ2 I)(θ-θk)`, `vₖ = ∇G_n(θk) + λ2 θk`,
//! minimizes `Q + λ1 Σ w_j|θ_j|` inexactly by cyclic coordinate descent until
//! `‖J_Q(θ^{k,l})‖ ≤ c2 ‖J_Q(θk)‖`, and then backtracks along the segment to
//! the subproblem solution until the sufficient-decrease test holds.
//!
//! Stationarity is measured by the fixed-point residual
//! `J(θ; c1) = (θ - prox_{c1 h}(θ - c1 v)) / c1`, `v = ∇G_n(θ) + λ2 θ`, where `h`
//! is the weighted L1 term plus the coordinate bounds. For coordinates without
//! a bound this is `v - P_{λ1 w}(v - θ/c1)`.

use crate::design::{Bound, ModelData, PenaltySpec};
use crate::error::{Error, Result};
use crate::family::IntervalDerivs;
use crate::objective::{grad_from_derivs, penalized_obj, ObjectiveState};
use serde::{Deserialize, Serialize};

/// Curvature below which a coordinate gets the ridge fallback.
const DEGENERATE_CURVATURE: f64 = 1e-12;
/// Ridge added to a degenerate coordinate for the current subproblem.
const CURVATURE_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Scaling inside the stationarity residual `J(θ; c1)`.
    pub c1: f64,
    /// Inner termination factor, in `[0, 1)`.
    pub c2: f64,
    /// Sufficient-decrease constant, in `(0, 1/2)`.
    pub c3: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub shrink: f64,
    /// Outer tolerance on `‖J(θ; c1)‖∞`.
    pub tol: f64,
    pub max_outer: usize,
    /// Cap on coordinate-descent sweeps per subproblem.
    pub max_inner: usize,
    pub max_linesearch: usize,
    /// Initial Lipschitz estimate of the accelerated proximal-gradient solver.
    pub lipschitz0: f64,
    /// Iteration cap of the accelerated proximal-gradient solver.
    pub max_fista_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            c1: 1.0,
            c2: 0.25,
            c3: 1e-4,
            shrink: 0.5,
            tol: 1e-8,
            max_outer: 500,
            max_inner: 10_000,
            max_linesearch: 60,
            lipschitz0: 1.0,
            max_fista_iter: 200_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("solver option {what}")));
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return bad("c1 must be positive");
        }
        if !(0.0..1.0).contains(&self.c2) {
            return bad("c2 must lie in [0, 1)");
        }
        if !(self.c3 > 0.0 && self.c3 < 0.5) {
            return bad("c3 must lie in (0, 1/2)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.lipschitz0 > 0.0 && self.lipschitz0.is_finite()) {
            return bad("lipschitz0 must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.max_linesearch == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// The line search found no acceptable step.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    /// Penalized objective at `theta_hat`.
    pub objective: f64,
    /// `‖J(θ̂; c1)‖∞`.
    pub j_norm: f64,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub converged: bool,
    pub status: FitStatus,
    pub neg_loglik_at_solution: f64,
    pub n_obs: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Penalized objective after every accepted outer iteration, starting point first.
    pub objective_trace: Vec<f64>,
    /// Subproblems that hit `max_inner` before meeting the termination test.
    pub inner_cap_hits: usize,
    /// Coordinates that needed the curvature ridge, summed over subproblems.
    pub ridge_fallbacks: usize,
}

impl FitResult {
    /// Maximized log-likelihood `ℓ_n(θ̂) = -n G_n(θ̂)`.
    pub fn loglik(&self) -> f64 {
        -(self.n_obs as f64) * self.neg_loglik_at_solution
    }

    pub fn is_penalized(&self) -> bool {
        self.lambda1 > 0.0 || self.lambda2 > 0.0
    }
}

/// `sign(x) max{|x| - λ, 0}`
#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Proximal map of `t·(λ w |θ_j|)` plus the bound on coordinate `j`.
#[inline]
pub(crate) fn prox_coord(x: f64, radius: f64, bound: Bound) -> f64 {
    bound.clamp(soft_threshold(x, radius))
}

/// `J` given `u = ∇(smooth part)` at θ. Coordinates in `fixed` report zero.
pub(crate) fn stationarity_map(
    u: &[f64],
    theta: &[f64],
    pen: &PenaltySpec,
    c1: f64,
    fixed: Option<&[bool]>,
) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            if fixed.is_some_and(|f| f[j]) {
                return 0.0;
            }
            let radius = pen.lambda1 * pen.l1_weight[j];
            match pen.lower_bound[j] {
                Bound::Free => u[j] - (u[j] - theta[j] / c1).clamp(-radius, radius),
                Bound::NonNegative => {
                    (theta[j] - prox_coord(theta[j] - c1 * u[j], c1 * radius, Bound::NonNegative))
                        / c1
                }
            }
        })
        .collect()
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_inputs(model: &ModelData, pen: &PenaltySpec, theta: &[f64]) -> Result<()> {
    pen.validate(model.dim())?;
    if theta.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "θ has length {} but the model dimension is {}",
            theta.len(),
            model.dim()
        )));
    }
    Ok(())
}

fn feasible_state(model: &ModelData, theta: &[f64], pen: &PenaltySpec) -> Result<ObjectiveState> {
    if !pen.is_feasible(theta) {
        return Err(Error::Infeasible("θ violates a coordinate bound".into()));
    }
    let state = ObjectiveState::new(model, theta);
    if !state.is_feasible() {
        return Err(Error::Infeasible("some observation has an empty interval at θ".into()));
    }
    Ok(state)
}

/// `∇G_n(θ) + λ2 θ`
fn smooth_gradient(model: &ModelData, derivs: &[IntervalDerivs], theta: &[f64], lambda2: f64) -> Vec<f64> {
    let mut v = grad_from_derivs(model, derivs);
    for (vj, tj) in v.iter_mut().zip(theta) {
        *vj += lambda2 * tj;
    }
    v
}

/// Stationarity residual `J(θ; c1)` of the penalized problem.
pub fn j_residual(model: &ModelData, theta: &[f64], pen: &PenaltySpec, c1: f64) -> Result<Vec<f64>> {
    check_inputs(model, pen, theta)?;
    let state = feasible_state(model, theta, pen)?;
    let derivs = state.interval_derivs(model)?;
    let v = smooth_gradient(model, &derivs, theta, pen.lambda2);
    Ok(stationarity_map(&v, theta, pen, c1, None))
}

/// Quadratic model of the smooth part at `θk`, in the form the coordinate
/// descent needs.
pub(crate) struct LocalQuadratic<'a> {
    model: &'a ModelData,
    pen: &'a PenaltySpec,
    theta_k: Vec<f64>,
    /// `∇G_n(θk) + λ2 θk`
    v: Vec<f64>,
    /// Per-observation `H(η_i^k)`.
    h: Vec<[[f64; 2]; 2]>,
    /// Diagonal of `∇²G_n(θk) + λ2 I` plus any ridge.
    curvature: Vec<f64>,
    /// Ridge actually added per coordinate (0 or `CURVATURE_RIDGE`).
    ridge: Vec<f64>,
    fixed: Option<&'a [bool]>,
    pub ridge_fallbacks: usize,
}

impl<'a> LocalQuadratic<'a> {
    pub fn new(
        model: &'a ModelData,
        pen: &'a PenaltySpec,
        theta_k: &[f64],
        derivs: &[IntervalDerivs],
        fixed: Option<&'a [bool]>,
    ) -> Self {
        let d = model.dim();
        let n = model.n_obs() as f64;
        let v = smooth_gradient(model, derivs, theta_k, pen.lambda2);
        let h: Vec<[[f64; 2]; 2]> = derivs.iter().map(|dv| dv.h).collect();
        let mut curvature = vec![0.0; d];
        let mut ridge = vec![0.0; d];
        let mut ridge_fallbacks = 0;
        for (j, col) in model.columns().iter().enumerate() {
            let mut acc = 0.0;
            for e in col {
                let hi = &h[e.obs];
                acc -= e.za * (hi[0][0] * e.za + hi[0][1] * e.zb) + e.zb * (hi[1][0] * e.za + hi[1][1] * e.zb);
            }
            curvature[j] = acc / n + pen.lambda2;
            if curvature[j] <= DEGENERATE_CURVATURE && !fixed.is_some_and(|f| f[j]) {
                ridge[j] = CURVATURE_RIDGE;
                curvature[j] += CURVATURE_RIDGE;
                ridge_fallbacks += 1;
            }
        }
        LocalQuadratic {
            model,
            pen,
            theta_k: theta_k.to_vec(),
            v,
            h,
            curvature,
            ridge,
            fixed,
            ridge_fallbacks,
        }
    }

    /// `j`-th component of `∇Q` at the point whose offsets from `θk` are
    /// `delta_eta_i = Z_i (θ - θk)`.
    fn q_grad_coord(&self, j: usize, theta_j: f64, delta_eta: &[[f64; 2]]) -> f64 {
        let mut acc = 0.0;
        for e in &self.model.columns()[j] {
            let hi = &self.h[e.obs];
            let de = delta_eta[e.obs];
            acc -= e.za * (hi[0][0] * de[0] + hi[0][1] * de[1]) + e.zb * (hi[1][0] * de[0] + hi[1][1] * de[1]);
        }
        self.v[j] + acc / self.model.n_obs() as f64 + (self.pen.lambda2 + self.ridge[j]) * (theta_j - self.theta_k[j])
    }

    fn q_gradient(&self, theta: &[f64], delta_eta: &[[f64; 2]]) -> Vec<f64> {
        (0..theta.len()).map(|j| self.q_grad_coord(j, theta[j], delta_eta)).collect()
    }

    /// `J_Q(θ; θk)` for a point with offsets `delta_eta`.
    fn jq(&self, theta: &[f64], delta_eta: &[[f64; 2]], c1: f64) -> Vec<f64> {
        let u = self.q_gradient(theta, delta_eta);
        stationarity_map(&u, theta, self.pen, c1, self.fixed)
    }

    /// Closed-form minimizer of the penalized 1-D quadratic in coordinate `j`,
    /// clamped at the coordinate's bound; updates `theta` and `delta_eta`.
    pub fn update_coordinate(&self, j: usize, theta: &mut [f64], delta_eta: &mut [[f64; 2]]) {
        if self.fixed.is_some_and(|f| f[j]) {
            return;
        }
        let a = self.curvature[j];
        let grad = self.q_grad_coord(j, theta[j], delta_eta);
        let radius = self.pen.lambda1 * self.pen.l1_weight[j];
        let new = prox_coord(a * theta[j] - grad, radius, self.pen.lower_bound[j]) / a;
        let step = new - theta[j];
        if step == 0.0 {
            return;
        }
        for e in &self.model.columns()[j] {
            let de = &mut delta_eta[e.obs];
            de[0] += e.za * step;
            de[1] += e.zb * step;
        }
        theta[j] = new;
    }

    fn delta_eta_for(&self, theta: &[f64]) -> Vec<[f64; 2]> {
        let diff: Vec<f64> = theta.iter().zip(&self.theta_k).map(|(a, b)| a - b).collect();
        self.model
            .blocks()
            .iter()
            .map(|b| [b.a.z.dot(&diff), b.b.z.dot(&diff)])
            .collect()
    }
}

/// Outcome of one coordinate-descent subproblem solve.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub theta: Vec<f64>,
    pub sweeps: usize,
    pub jq_start: f64,
    pub jq_final: f64,
    /// `max_inner` was reached before the termination test held.
    pub hit_cap: bool,
    pub ridge_fallbacks: usize,
}

fn run_inner(quad: &LocalQuadratic<'_>, opts: &SolverOptions) -> InnerSolution {
    let d = quad.theta_k.len();
    let mut theta = quad.theta_k.clone();
    let mut delta_eta = vec![[0.0, 0.0]; quad.model.n_obs()];
    let jq_start = two_norm(&quad.jq(&theta, &delta_eta, opts.c1));
    let forcing = opts.c2.min(jq_start);
    let target = forcing * jq_start;
    let mut jq_final = jq_start;
    let mut sweeps = 0;
    let mut hit_cap = false;
    if jq_start > 0.0 {
        loop {
            let before = theta.clone();
            for j in 0..d {
                quad.update_coordinate(j, &mut theta, &mut delta_eta);
            }
            sweeps += 1;
            jq_final = two_norm(&quad.jq(&theta, &delta_eta, opts.c1));
            if jq_final <= target || theta == before {
                break;
            }
            if sweeps >= opts.max_inner {
                hit_cap = true;
                break;
            }
            // Re-synchronize the incremental offsets against round-off drift.
            if sweeps % 50 == 0 {
                delta_eta = quad.delta_eta_for(&theta);
            }
        }
    }
    InnerSolution {
        theta,
        sweeps,
        jq_start,
        jq_final,
        hit_cap,
        ridge_fallbacks: quad.ridge_fallbacks,
    }
}

/// `J_Q(θ; c1, θk)` of the subproblem at `θk`.
pub fn jq_residual(
    model: &ModelData,
    theta: &[f64],
    theta_k: &[f64],
    pen: &PenaltySpec,
    c1: f64,
) -> Result<Vec<f64>> {
    check_inputs(model, pen, theta)?;
    check_inputs(model, pen, theta_k)?;
    let state = feasible_state(model, theta_k, pen)?;
    let derivs = state.interval_derivs(model)?;
    let quad = LocalQuadratic::new(model, pen, theta_k, &derivs, None);
    let delta = quad.delta_eta_for(theta);
    Ok(quad.jq(theta, &delta, c1))
}

/// Cyclic coordinate descent on the subproblem at `θk` until
/// `‖J_Q(θ^{k,l})‖ ≤ min(c2, ‖J_Q(θk)‖) ‖J_Q(θk)‖`.
pub fn inner_cd_solve(
    model: &ModelData,
    theta_k: &[f64],
    pen: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<InnerSolution> {
    opts.validate()?;
    check_inputs(model, pen, theta_k)?;
    let state = feasible_state(model, theta_k, pen)?;
    let derivs = state.interval_derivs(model)?;
    let quad = LocalQuadratic::new(model, pen, theta_k, &derivs, None);
    Ok(run_inner(&quad, opts))
}

/// Multiple of machine epsilon (relative to |f|) treated as round-off in the line search.
const ROUNDOFF_SLACK: f64 = 16.0;
/// Consecutive round-off-level steps allowed before the fit is declared stalled.
const MAX_ROUNDOFF_STEPS: usize = 5;

/// Result of a backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Accepted step; 0 when the search stalled.
    pub step: f64,
    pub objective: f64,
    pub trials: usize,
    pub stalled: bool,
}

fn line_search_inner(
    model: &ModelData,
    pen: &PenaltySpec,
    theta_k: &[f64],
    candidate: &[f64],
    f_k: f64,
    v: &[f64],
    opts: &SolverOptions,
) -> (LineSearch, Vec<f64>) {
    let dir: Vec<f64> = candidate.iter().zip(theta_k).map(|(c, t)| c - t).collect();
    let v_dot_dir: f64 = v.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let l1_k = pen.weighted_l1(theta_k);
    let noise = ROUNDOFF_SLACK * f64::EPSILON * f_k.abs().max(1.0);
    let full_decrease = -v_dot_dir + pen.lambda1 * (l1_k - pen.weighted_l1(candidate));
    if full_decrease.abs() <= noise {
        // The predicted decrease is below the resolution of f, so the Armijo
        // comparison is meaningless. Take the full step unless f rises.
        let f = penalized_obj(model, candidate, pen);
        if f.is_finite() && f <= f_k {
            return (LineSearch { step: 1.0, objective: f, trials: 1, stalled: false }, candidate.to_vec());
        }
    }
    let mut step = 1.0;
    for trial in 1..=opts.max_linesearch {
        let point: Vec<f64> = theta_k
            .iter()
            .zip(candidate)
            .map(|(&t, &c)| (1.0 - step) * t + step * c)
            .collect();
        let f = penalized_obj(model, &point, pen);
        if f.is_finite() {
            // L(θk; θk) - L(θ_s; θk)
            let model_decrease = -step * v_dot_dir + pen.lambda1 * (l1_k - pen.weighted_l1(&point));
            if f_k - f >= opts.c3 * model_decrease {
                return (LineSearch { step, objective: f, trials: trial, stalled: false }, point);
            }
        }
        step *= opts.shrink;
    }
    (
        LineSearch { step: 0.0, objective: f_k, trials: opts.max_linesearch, stalled: true },
        theta_k.to_vec(),
    )
}

/// Backtracking along `(1-s)θk + s θ_candidate`, `s ∈ {1, shrink, shrink², …}`.
pub fn line_search(
    model: &ModelData,
    theta_k: &[f64],
    candidate: &[f64],
    pen: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<LineSearch> {
    opts.validate()?;
    check_inputs(model, pen, theta_k)?;
    check_inputs(model, pen, candidate)?;
    let state = feasible_state(model, theta_k, pen)?;
    let derivs = state.interval_derivs(model)?;
    let v = smooth_gradient(model, &derivs, theta_k, pen.lambda2);
    let f_k = state.value + pen.value(theta_k);
    Ok(line_search_inner(model, pen, theta_k, candidate, f_k, &v, opts).0)
}

/// Fits the elastic-net penalized model by proximal Newton. Starts from
/// `theta0` or, when absent, from the model's feasible default start.
pub fn fit(
    model: &ModelData,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    theta0: Option<&[f64]>,
) -> Result<FitResult> {
    fit_impl(model, pen, opts, theta0, None)
}

/// As [`fit`], holding the coordinates flagged in `fixed` at their starting values.
pub fn fit_restricted(
    model: &ModelData,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    theta0: Option<&[f64]>,
    fixed: &[bool],
) -> Result<FitResult> {
    if fixed.len() != model.dim() {
        return Err(Error::Dimension("fixed mask length differs from the model dimension".into()));
    }
    fit_impl(model, pen, opts, theta0, Some(fixed))
}

fn fit_impl(
    model: &ModelData,
    pen: &PenaltySpec,
    opts: &SolverOptions,
    theta0: Option<&[f64]>,
    fixed: Option<&[bool]>,
) -> Result<FitResult> {
    opts.validate()?;
    let mut theta = theta0.unwrap_or(model.start()).to_vec();
    check_inputs(model, pen, &theta)?;
    let mut state = feasible_state(model, &theta, pen)?;
    let mut f = state.value + pen.value(&theta);
    let mut trace = vec![f];
    let mut total_inner = 0;
    let mut inner_cap_hits = 0;
    let mut ridge_fallbacks = 0;
    let mut outer = 0;
    let mut roundoff_steps = 0;
    let mut status = FitStatus::MaxIterations;
    let mut j_norm;
    loop {
        let derivs = state.interval_derivs(model)?;
        let v = smooth_gradient(model, &derivs, &theta, pen.lambda2);
        j_norm = inf_norm(&stationarity_map(&v, &theta, pen, opts.c1, fixed));
        if j_norm <= opts.tol {
            status = FitStatus::Converged;
            break;
        }
        if outer >= opts.max_outer {
            break;
        }
        outer += 1;
        let quad = LocalQuadratic::new(model, pen, &theta, &derivs, fixed);
        let inner = run_inner(&quad, opts);
        total_inner += inner.sweeps;
        inner_cap_hits += usize::from(inner.hit_cap);
        ridge_fallbacks += inner.ridge_fallbacks;
        let (ls, next) = line_search_inner(model, pen, &theta, &inner.theta, f, &v, opts);
        if ls.stalled {
            status = FitStatus::Stalled;
            break;
        }
        if ls.objective >= f {
            roundoff_steps += 1;
            if roundoff_steps > MAX_ROUNDOFF_STEPS {
                status = FitStatus::Stalled;
                break;
            }
        } else {
            roundoff_steps = 0;
        }
        theta = next;
        f = ls.objective;
        trace.push(f);
        state = ObjectiveState::new(model, &theta);
    }
    Ok(FitResult {
        objective: f,
        neg_loglik_at_solution: state.value,
        theta_hat: theta,
        j_norm,
        outer_iters: outer,
        total_inner_iters: total_inner,
        converged: status == FitStatus::Converged,
        status,
        n_obs: model.n_obs(),
        lambda1: pen.lambda1,
        lambda2: pen.lambda2,
        objective_trace: trace,
        inner_cap_hits,
        ridge_fallbacks,
    })
}
