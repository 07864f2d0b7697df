//! Steps for the regularized quadratic model
//!
//! ```text
//! m(u + s) = ½‖R‖² + gᵀs + ½ sᵀ(H + γI)s
//! ```
//!
//! computed by conjugate gradient from `s = 0`, either to near machine
//! precision (exact variant) or until the residual of `(H + γI)s = −g` drops
//! below `θ √(γ / (‖H‖ + γ)) ‖g‖` (inexact variant).

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::operator::LinearOperator;

/// Relative residual targeted by the exact variant.
pub const EXACT_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Exact steps also satisfy the inexact termination rule with this `θ`.
pub const NEAR_EXACT_THETA: f64 = 1e-10;

/// Power iterations used by [`estimate_operator_norm`].
pub const POWER_ITERATIONS: usize = 30;

/// Factor applied to the Rayleigh quotient so the estimate bounds `‖H‖` from above.
pub const NORM_SAFETY_FACTOR: f64 = 1.5;

/// One instance of the step subproblem.
#[derive(Clone, Copy)]
pub struct SubproblemSpec<'a> {
    /// Model gradient `g = ĜᵀR`.
    pub g: &'a DVector<f64>,
    /// Symmetric positive semidefinite model Hessian.
    pub h: &'a dyn LinearOperator,
    /// Regularization weight `γ > 0`.
    pub gamma: f64,
    /// Inexactness `θ ∈ [0, 1)`; zero selects the exact variant.
    pub theta: f64,
    /// Upper estimate of `‖H‖`.
    pub h_norm_estimate: f64,
}

impl SubproblemSpec<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.g.len();
        check_dim("subproblem H rows", n, self.h.nrows())?;
        check_dim("subproblem H cols", n, self.h.ncols())?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!(
                "theta must lie in [0, 1), got {}",
                self.theta
            )));
        }
        if !(self.h_norm_estimate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "norm estimate must be non-negative, got {}",
                self.h_norm_estimate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Exact,
    Inexact,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub s: DVector<f64>,
    /// `m(u) − m(u + s)`.
    pub model_decrease: f64,
    /// `‖(H + γI)s + g‖` as tracked by the CG recursion.
    pub residual_norm: f64,
    /// Residual norm the iteration was asked to reach.
    pub target_residual: f64,
    pub cg_iters: usize,
    pub mode: StepMode,
}

/// Relative residual factor `θ √(γ / (‖H‖ + γ))` of the inexact termination rule.
pub fn inexact_tolerance_factor(theta: f64, gamma: f64, h_norm: f64) -> f64 {
    theta * (gamma / (h_norm + gamma)).sqrt()
}

/// Relative residual factor for the exact variant: `1e-12`, tightened where
/// needed so that exact steps also meet the inexact rule with
/// `θ = NEAR_EXACT_THETA`. The test is applied to the CG recursion residual,
/// which keeps decreasing after the true residual has reached rounding level.
pub fn exact_tolerance_factor(gamma: f64, h_norm: f64) -> f64 {
    EXACT_RELATIVE_TOLERANCE.min(inexact_tolerance_factor(NEAR_EXACT_THETA, gamma, h_norm))
}

/// Worst-case CG iterations to satisfy the inexact rule,
/// `min{n, ⌈½√κ ln(2κ/θ)⌉}` with `κ = (‖H‖ + γ)/γ`; `n` when `θ = 0`.
pub fn cg_iteration_bound(n: usize, theta: f64, gamma: f64, h_norm: f64) -> usize {
    if theta <= 0.0 {
        return n;
    }
    let kappa = (h_norm + gamma) / gamma;
    let bound = 0.5 * kappa.sqrt() * (2.0 * kappa / theta).ln();
    if bound >= n as f64 {
        n
    } else {
        (bound.ceil() as usize).min(n)
    }
}

/// Exact minimizer `s = −(H + γI)⁻¹ g`, computed by CG to a relative residual
/// of [`exact_tolerance_factor`].
pub fn exact_step(spec: &SubproblemSpec<'_>) -> Result<StepResult> {
    spec.validate()?;
    let target = exact_tolerance_factor(spec.gamma, spec.h_norm_estimate) * spec.g.norm();
    conjugate_gradient(spec, target, StepMode::Exact)
}

/// Truncated CG step satisfying `‖(H + γI)s + g‖ ≤ θ √(γ/(‖H‖ + γ)) ‖g‖`,
/// with `‖H‖` replaced by `spec.h_norm_estimate`.
pub fn truncated_cg_step(spec: &SubproblemSpec<'_>) -> Result<StepResult> {
    spec.validate()?;
    if spec.theta <= 0.0 {
        return Err(Error::InvalidConfig(
            "truncated CG needs theta > 0; use exact_step for theta = 0".into(),
        ));
    }
    let target =
        inexact_tolerance_factor(spec.theta, spec.gamma, spec.h_norm_estimate) * spec.g.norm();
    conjugate_gradient(spec, target, StepMode::Inexact)
}

/// Dispatches on `θ`: exact for zero, truncated CG otherwise.
pub fn compute_step(spec: &SubproblemSpec<'_>) -> Result<StepResult> {
    if spec.theta == 0.0 {
        exact_step(spec)
    } else {
        truncated_cg_step(spec)
    }
}

fn conjugate_gradient(
    spec: &SubproblemSpec<'_>,
    target: f64,
    mode: StepMode,
) -> Result<StepResult> {
    let n = spec.g.len();
    let g = spec.g;
    let max_iter = 20 * n + 200;

    let mut s = DVector::zeros(n);
    // r = (H + γI)s + g
    let mut r = g.clone();
    let mut p = -&r;
    let mut rr = r.norm_squared();
    let mut iters = 0;

    while rr.sqrt() > target {
        if iters == max_iter {
            return Err(Error::CgNotConverged {
                iterations: iters,
                residual: rr.sqrt(),
                target,
            });
        }
        let ap = spec.h.apply(&p)? + &p * spec.gamma;
        let curvature = p.dot(&ap);
        if !(curvature > 0.0) {
            return Err(Error::NonPositiveCurvature {
                iteration: iters,
                curvature,
            });
        }
        let alpha = rr / curvature;
        s.axpy(alpha, &p, 1.0);
        r.axpy(alpha, &ap, 1.0);
        let rr_next = r.norm_squared();
        p *= rr_next / rr;
        p -= &r;
        rr = rr_next;
        iters += 1;
    }

    // sᵀ(H + γI)s = sᵀ(r − g), so no extra operator application is needed.
    let model_decrease = -0.5 * g.dot(&s) - 0.5 * s.dot(&r);
    Ok(StepResult {
        s,
        model_decrease,
        residual_norm: rr.sqrt(),
        target_residual: target,
        cg_iters: iters,
        mode,
    })
}

/// `m(u) − m(u + s) = −gᵀs − ½ sᵀ(H + γI)s`; costs one `H` application.
pub fn model_decrease(spec: &SubproblemSpec<'_>, s: &DVector<f64>) -> Result<f64> {
    check_dim("model decrease", spec.g.len(), s.len())?;
    let hs = spec.h.apply(s)?;
    Ok(-spec.g.dot(s) - 0.5 * (s.dot(&hs) + spec.gamma * s.norm_squared()))
}

/// Upper estimate of `‖H‖` for symmetric positive semidefinite `H` on `ℝⁿ`:
/// Rayleigh quotient after [`POWER_ITERATIONS`] power iterations from a
/// seeded random start, times [`NORM_SAFETY_FACTOR`]. Returns zero for the
/// zero operator.
pub fn estimate_operator_norm(h: &dyn LinearOperator, n: usize, seed: u64) -> Result<f64> {
    check_dim("norm estimate", n, h.ncols())?;
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    v /= v.norm();

    let mut rayleigh = 0.0;
    for i in 0..POWER_ITERATIONS {
        let w = h.apply(&v)?;
        let w_norm = w.norm();
        if i == 0 && w_norm <= 1e-300 {
            return Ok(0.0);
        }
        rayleigh = v.dot(&w);
        if w_norm == 0.0 {
            break;
        }
        v = w / w_norm;
    }
    Ok(NORM_SAFETY_FACTOR * rayleigh.max(0.0))
}
