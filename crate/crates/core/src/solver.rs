//! Quadratic-regularization outer loop.
//!
//! Each iteration checks the stopping test, computes a step for the
//! regularized Gauss-Newton (or gradient) model, solves the constraint at the
//! trial point and accepts the step when the ratio of actual to predicted
//! decrease reaches `η`. The regularization weight halves (down to `γ_min`)
//! on success and doubles on failure.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adjoint::{reduced_gradient, GaussNewtonOperator, ReducedJacobian};
use crate::counters::{CounterSnapshot, EvalCounters};
use crate::error::{check_dim, Error, Result};
use crate::operator::{LinearOperator, ZeroOperator};
use crate::problem::{counted_solve_state, ImplicitProblem};
use crate::subproblem::{compute_step, estimate_operator_norm, SubproblemSpec};

/// Choice of model Hessian `H_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianMode {
    /// `H_k = 0`: a regularized gradient method.
    Zero,
    /// `H_k = Ĝ_kᵀĜ_k`: regularized Gauss-Newton.
    GaussNewton,
}

impl fmt::Display for HessianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HessianMode::Zero => "zero",
            HessianMode::GaussNewton => "gauss-newton",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Acceptance threshold `η ∈ (0, 1)`.
    pub eta: f64,
    /// Initial regularization; `None` uses [`default_gamma0`].
    pub gamma0: Option<f64>,
    /// Regularization floor `γ_min ∈ (0, γ0]`.
    pub gamma_min: f64,
    /// Step inexactness `θ ∈ [0, 1)`; zero solves the subproblem exactly.
    pub theta: f64,
    /// Residual tolerance `ε_R`.
    pub eps_r: f64,
    /// Scaled-gradient tolerance `ε_g`.
    pub eps_g: f64,
    /// Outer iteration budget.
    pub max_iter: usize,
    pub hessian_mode: HessianMode,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            gamma0: None,
            gamma_min: 1e-10,
            theta: 0.0,
            eps_r: 1e-6,
            eps_g: 1e-4,
            max_iter: 300,
            hessian_mode: HessianMode::GaussNewton,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min.is_finite()) {
            return fail(format!(
                "gamma_min must be positive, got {}",
                self.gamma_min
            ));
        }
        if let Some(g0) = self.gamma0 {
            if !(g0 >= self.gamma_min && g0.is_finite()) {
                return fail(format!(
                    "gamma0 = {g0} must be finite and at least gamma_min"
                ));
            }
        }
        if !(0.0..1.0).contains(&self.theta) {
            return fail(format!("theta must lie in [0, 1), got {}", self.theta));
        }
        if !(self.eps_r > 0.0) || !(self.eps_g > 0.0) {
            return fail(format!(
                "tolerances must be positive, got eps_r = {}, eps_g = {}",
                self.eps_r, self.eps_g
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopStatus {
    ConvergedResidual,
    ConvergedScaledGradient,
    BudgetExhausted,
}

impl StopStatus {
    pub fn is_converged(self) -> bool {
        !matches!(self, StopStatus::BudgetExhausted)
    }
}

impl fmt::Display for StopStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopStatus::ConvergedResidual => "converged_residual",
            StopStatus::ConvergedScaledGradient => "converged_scaled_gradient",
            StopStatus::BudgetExhausted => "budget_exhausted",
        })
    }
}

/// Record of one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub k: usize,
    /// `γ_k` used to build the model.
    pub gamma: f64,
    pub objective: f64,
    pub residual_norm: f64,
    pub grad_norm: f64,
    /// `‖g_k‖ / ‖R_k‖`.
    pub scaled_gradient: f64,
    pub h_norm_estimate: f64,
    pub step_norm: f64,
    pub cg_iters: usize,
    pub cg_residual: f64,
    pub cg_target: f64,
    pub model_decrease: f64,
    pub actual_decrease: f64,
    /// `None` when the predicted decrease was not positive.
    pub rho: Option<f64>,
    pub success: bool,
    /// `γ_{k+1}`.
    pub gamma_next: f64,
    pub warning: Option<String>,
    /// Cumulative counters at the end of the iteration.
    pub counters: CounterSnapshot,
}

/// Iteration record together with the vectors it was computed from.
pub struct IterationView<'v> {
    pub trace: &'v IterationTrace,
    /// `u_k`.
    pub u: &'v DVector<f64>,
    /// `R_k`.
    pub residual: &'v DVector<f64>,
    /// `g_k = Ĝ_kᵀ R_k`.
    pub gradient: &'v DVector<f64>,
    /// `s_k`.
    pub step: &'v DVector<f64>,
}

/// Receives one record per outer iteration.
pub trait TraceSink {
    fn record(&mut self, view: &IterationView<'_>);
}

impl<F: FnMut(&IterationView<'_>)> TraceSink for F {
    fn record(&mut self, view: &IterationView<'_>) {
        self(view)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: StopStatus,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub residual: DVector<f64>,
    pub gradient: DVector<f64>,
    pub objective: f64,
    pub residual_norm: f64,
    pub scaled_gradient: f64,
    /// Regularization weight at termination.
    pub gamma: f64,
    /// Outer iterations performed (steps attempted).
    pub iterations: usize,
    pub successful_iterations: usize,
    pub trace: Vec<IterationTrace>,
    pub counters: CounterSnapshot,
    /// Work spent estimating `‖H_k‖`, kept out of `counters`.
    pub overhead: CounterSnapshot,
}

/// `γ0 = max{1, ‖g0‖, ‖u0‖_∞ + 1}`.
pub fn default_gamma0(g0: &DVector<f64>, u0: &DVector<f64>) -> f64 {
    1f64.max(g0.norm()).max(u0.amax() + 1.0)
}

/// Residual test first, then the scaled-gradient test; both inclusive.
pub fn stopping_check(
    residual_norm: f64,
    grad_norm: f64,
    eps_r: f64,
    eps_g: f64,
) -> Option<StopStatus> {
    if residual_norm <= eps_r {
        Some(StopStatus::ConvergedResidual)
    } else if grad_norm / residual_norm <= eps_g {
        Some(StopStatus::ConvergedScaledGradient)
    } else {
        None
    }
}

/// Ratio of actual to predicted decrease.
pub fn ratio(actual_decrease: f64, predicted_decrease: f64) -> Result<f64> {
    if predicted_decrease > 0.0 {
        Ok(actual_decrease / predicted_decrease)
    } else {
        Err(Error::NonPositivePrediction(predicted_decrease))
    }
}

/// Runs the regularization method from `u0`.
pub fn solve(
    problem: &dyn ImplicitProblem,
    u0: &DVector<f64>,
    config: &SolverConfig,
    mut sink: Option<&mut dyn TraceSink>,
) -> Result<SolveOutcome> {
    config.validate()?;
    let n = problem.dims().n;
    check_dim("initial control", n, u0.len())?;

    let counters = EvalCounters::new();
    let mut u = u0.clone();
    let mut y = counted_solve_state(problem, &u, &counters)?;
    let mut r = problem.residual(&y, &u)?;
    let mut objective = 0.5 * r.norm_squared();
    let mut jac = ReducedJacobian::new(problem, u.clone(), y.clone(), &counters);
    let mut g = reduced_gradient(&jac, &r)?;

    let mut gamma = config.gamma0.unwrap_or_else(|| default_gamma0(&g, &u));
    if gamma < config.gamma_min {
        return Err(Error::InvalidConfig(format!(
            "gamma0 = {gamma} is below gamma_min = {}",
            config.gamma_min
        )));
    }
    // ‖H_k‖ only changes with u_k, so the estimate survives rejected steps.
    let mut h_norm_cache: Option<f64> = None;
    let mut trace = Vec::new();
    let mut successes = 0;
    let mut k = 0;

    let status = loop {
        let r_norm = r.norm();
        let g_norm = g.norm();
        if let Some(status) = stopping_check(r_norm, g_norm, config.eps_r, config.eps_g) {
            break status;
        }
        if k == config.max_iter {
            break StopStatus::BudgetExhausted;
        }

        let zero = ZeroOperator(n);
        let gauss_newton = GaussNewtonOperator { jacobian: &jac };
        let h: &dyn LinearOperator = match config.hessian_mode {
            HessianMode::Zero => &zero,
            HessianMode::GaussNewton => &gauss_newton,
        };
        let h_norm = match h_norm_cache {
            Some(v) => v,
            None => {
                let v = counters.as_overhead(|| estimate_operator_norm(h, n, config.seed))?;
                h_norm_cache = Some(v);
                v
            }
        };
        let spec = SubproblemSpec {
            g: &g,
            h,
            gamma,
            theta: config.theta,
            h_norm_estimate: h_norm,
        };
        let step = compute_step(&spec)?;
        counters.record_cg_iterations(step.cg_iters);

        let u_trial = &u + &step.s;
        let y_trial = counted_solve_state(problem, &u_trial, &counters)?;
        let r_trial = problem.residual(&y_trial, &u_trial)?;
        let objective_trial = 0.5 * r_trial.norm_squared();

        let actual = objective - objective_trial;
        let predicted = step.model_decrease;
        let (rho, warning) = match ratio(actual, predicted) {
            Ok(rho) => (Some(rho), None),
            Err(_) => (
                None,
                Some(format!(
                    "predicted decrease {predicted:e} is not positive; step rejected"
                )),
            ),
        };
        let success = rho.is_some_and(|rho| rho >= config.eta);
        let gamma_next = if success {
            (0.5 * gamma).max(config.gamma_min)
        } else {
            2.0 * gamma
        };

        let u_k = u.clone();
        let r_k = r.clone();
        let g_k = g.clone();
        if success {
            u = u_trial;
            y = y_trial;
            r = r_trial;
            objective = objective_trial;
            jac = ReducedJacobian::new(problem, u.clone(), y.clone(), &counters);
            g = reduced_gradient(&jac, &r)?;
            h_norm_cache = None;
            successes += 1;
        }

        let record = IterationTrace {
            k,
            gamma,
            objective: 0.5 * r_k.norm_squared(),
            residual_norm: r_norm,
            grad_norm: g_norm,
            scaled_gradient: g_norm / r_norm,
            h_norm_estimate: h_norm,
            step_norm: step.s.norm(),
            cg_iters: step.cg_iters,
            cg_residual: step.residual_norm,
            cg_target: step.target_residual,
            model_decrease: predicted,
            actual_decrease: actual,
            rho,
            success,
            gamma_next,
            warning,
            counters: counters.snapshot(),
        };
        if let Some(sink) = sink.as_deref_mut() {
            sink.record(&IterationView {
                trace: &record,
                u: &u_k,
                residual: &r_k,
                gradient: &g_k,
                step: &step.s,
            });
        }
        trace.push(record);
        gamma = gamma_next;
        k += 1;
    };

    let residual_norm = r.norm();
    let scaled_gradient = g.norm() / residual_norm;
    Ok(SolveOutcome {
        status,
        u,
        y,
        residual: r,
        gradient: g,
        objective,
        residual_norm,
        scaled_gradient,
        gamma,
        iterations: k,
        successful_iterations: successes,
        trace,
        counters: counters.snapshot(),
        overhead: counters.overhead_snapshot(),
    })
}
