//! Runtime checks of the step and iteration properties the complexity
//! analysis relies on.
//!
//! [`LemmaChecker`] recomputes the true `‖H_k‖` densely at every iterate, so
//! it is only usable on small instances.

use icls::oracle::dense_jacobian_oracle;
use icls::subproblem::{cg_iteration_bound, inexact_tolerance_factor};
use icls::{
    HessianMode, ImplicitProblem, IterationView, SolveOutcome, SolverConfig, StopStatus, TraceSink,
};
use nalgebra::DMatrix;

/// Relative slack for comparing floating-point quantities against bounds.
pub const BOUND_SLACK: f64 = 1e-8;

/// Checks each step against the decrease, step-norm, exit-residual and CG
/// iteration bounds using the dense Gauss-Newton matrix at `u_k`.
pub struct LemmaChecker<'p> {
    problem: &'p dyn ImplicitProblem,
    theta: f64,
    mode: HessianMode,
    pub checked: usize,
    pub violations: Vec<String>,
}

impl<'p> LemmaChecker<'p> {
    pub fn new(problem: &'p dyn ImplicitProblem, config: &SolverConfig) -> Self {
        Self {
            problem,
            theta: config.theta,
            mode: config.hessian_mode,
            checked: 0,
            violations: Vec::new(),
        }
    }

    fn hessian(&self, view: &IterationView<'_>) -> Result<DMatrix<f64>, String> {
        let n = view.u.len();
        match self.mode {
            HessianMode::Zero => Ok(DMatrix::zeros(n, n)),
            HessianMode::GaussNewton => {
                let g = dense_jacobian_oracle(self.problem, view.u).map_err(|e| e.to_string())?;
                Ok(g.transpose() * g)
            }
        }
    }

    fn check(&mut self, view: &IterationView<'_>) -> Result<(), String> {
        let t = view.trace;
        let h = self.hessian(view)?;
        let n = h.nrows();
        let h_norm = h.clone().symmetric_eigen().eigenvalues.max().max(0.0);
        let (g, s, gamma, theta) = (view.gradient, view.step, t.gamma, self.theta);
        let g_norm = g.norm();
        let mut fail = |what: String| self.violations.push(format!("k = {}: {what}", t.k));

        let decrease_bound = 0.5 * (1.0 - theta * theta) * g_norm * g_norm / (h_norm + gamma);
        if t.model_decrease < decrease_bound * (1.0 - BOUND_SLACK) {
            fail(format!(
                "model decrease {:e} below {decrease_bound:e}",
                t.model_decrease
            ));
        }
        let step_bound = (1.0 + theta) * g_norm / gamma;
        if s.norm() > step_bound * (1.0 + BOUND_SLACK) + 1e-12 {
            fail(format!("step norm {:e} above {step_bound:e}", s.norm()));
        }
        if theta > 0.0 {
            let residual = (&h * s + s * gamma + g).norm();
            let target = inexact_tolerance_factor(theta, gamma, h_norm) * g_norm;
            if residual > target * (1.0 + BOUND_SLACK) {
                fail(format!("CG exit residual {residual:e} above {target:e}"));
            }
        }
        let bound = cg_iteration_bound(n, theta, gamma, h_norm);
        if t.cg_iters > bound {
            fail(format!(
                "{} CG iterations exceed the bound {bound}",
                t.cg_iters
            ));
        }
        Ok(())
    }
}

impl TraceSink for LemmaChecker<'_> {
    fn record(&mut self, view: &IterationView<'_>) {
        self.checked += 1;
        if let Err(err) = self.check(view) {
            self.violations
                .push(format!("k = {}: dense oracle failed: {err}", view.trace.k));
        }
    }
}

/// Violations of the outer-loop invariants in a finished run: monotone
/// objective, acceptance iff `ρ ≥ η`, the two-valued `γ` update, the
/// solve-count identity and the stopping status.
pub fn dynamics_violations(outcome: &SolveOutcome, config: &SolverConfig) -> Vec<String> {
    let mut out = Vec::new();
    if outcome.counters.forward_solves != outcome.iterations as u64 + 1 {
        out.push(format!(
            "{} forward solves for {} iterations",
            outcome.counters.forward_solves, outcome.iterations
        ));
    }
    for (k, t) in outcome.trace.iter().enumerate() {
        let accept = t.rho.is_some_and(|rho| rho >= config.eta);
        if t.success != accept {
            out.push(format!(
                "k = {k}: success = {} with rho = {:?}",
                t.success, t.rho
            ));
        }
        let expected = if t.success {
            (0.5 * t.gamma).max(config.gamma_min)
        } else {
            2.0 * t.gamma
        };
        if t.gamma_next != expected {
            out.push(format!(
                "k = {k}: gamma {:e} -> {:e}",
                t.gamma, t.gamma_next
            ));
        }
        if t.gamma < config.gamma_min {
            out.push(format!("k = {k}: gamma {:e} below the floor", t.gamma));
        }
        if let Some(next) = outcome.trace.get(k + 1) {
            if next.objective > t.objective {
                out.push(format!(
                    "k = {k}: objective rose from {:e} to {:e}",
                    t.objective, next.objective
                ));
            }
            if next.gamma != t.gamma_next {
                out.push(format!("k = {k}: gamma_next not carried over"));
            }
        }
    }
    let status_ok = match outcome.status {
        StopStatus::ConvergedResidual => outcome.residual_norm <= config.eps_r,
        StopStatus::ConvergedScaledGradient => outcome.scaled_gradient <= config.eps_g,
        StopStatus::BudgetExhausted => outcome.iterations == config.max_iter,
    };
    if !status_ok {
        out.push(format!(
            "status {} does not match the final state",
            outcome.status
        ));
    }
    out
}

/// For θ = 0 runs: every accepted step's CG residual must meet the inexact
/// rule with `theta_prime` (evaluated with the solver's own norm estimate).
pub fn near_exact_violations(outcome: &SolveOutcome, theta_prime: f64) -> Vec<String> {
    outcome
        .trace
        .iter()
        .filter(|t| t.success)
        .filter_map(|t| {
            let target =
                inexact_tolerance_factor(theta_prime, t.gamma, t.h_norm_estimate) * t.grad_norm;
            (t.cg_residual > target).then(|| {
                format!(
                    "k = {}: CG residual {:e} above {target:e}",
                    t.k, t.cg_residual
                )
            })
        })
        .collect()
}
