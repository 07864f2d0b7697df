use std::path::{Path, PathBuf};
use std::time::Instant;

use icls::burgers::{assemble_burgers, BurgersInstance, DEFAULT_OMEGA};
use icls::elliptic::{assemble_elliptic, DesiredState, EllipticInstance, DEFAULT_LAMBDA};
use icls::{solve, ImplicitProblem, SolveOutcome, SolverConfig, StopStatus, TraceSink, Vector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::trace::JsonlTrace;

/// Inexactness levels swept by default.
pub const DEFAULT_THETAS: [f64; 6] = [0.0, 1e-6, 1e-4, 1e-2, 1e-1, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Elliptic {
        n_mesh: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
        z: DesiredState,
    },
    Burgers {
        nx: usize,
        nt: usize,
        nu: f64,
        #[serde(default = "default_omega")]
        omega: f64,
    },
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

impl ProblemSpec {
    /// Short identifier used in CSV rows and trace file names.
    pub fn label(&self) -> String {
        match self {
            ProblemSpec::Elliptic { n_mesh, lambda, z } => {
                let z = match z {
                    DesiredState::Zero => "zero",
                    DesiredState::One => "one",
                };
                format!("elliptic_n{n_mesh}_lambda{lambda:e}_z{z}")
            }
            ProblemSpec::Burgers { nx, nt, nu, omega } => {
                format!("burgers_nx{nx}_nt{nt}_nu{nu:e}_omega{omega:e}")
            }
        }
    }

    pub fn build(&self) -> icls::Result<Instance> {
        Ok(match *self {
            ProblemSpec::Elliptic { n_mesh, lambda, z } => {
                Instance::Elliptic(assemble_elliptic(n_mesh, lambda, z)?)
            }
            ProblemSpec::Burgers { nx, nt, nu, omega } => {
                Instance::Burgers(assemble_burgers(nx, nt, nu, omega)?)
            }
        })
    }
}

/// An assembled benchmark.
pub enum Instance {
    Elliptic(EllipticInstance),
    Burgers(BurgersInstance),
}

impl Instance {
    pub fn problem(&self) -> &(dyn ImplicitProblem + Sync) {
        match self {
            Instance::Elliptic(p) => p,
            Instance::Burgers(p) => p,
        }
    }

    /// Starting control of the reference experiments.
    pub fn initial_control(&self) -> Vector {
        match self {
            Instance::Elliptic(p) => p.default_initial_control(),
            Instance::Burgers(p) => p.default_initial_control(),
        }
    }

    pub fn solve(
        &self,
        config: &SolverConfig,
        sink: Option<&mut dyn TraceSink>,
    ) -> icls::Result<SolveOutcome> {
        solve(self.problem(), &self.initial_control(), config, sink)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerancePair {
    pub eps_r: f64,
    pub eps_g: f64,
}

/// One problem swept over `thetas × tolerances`.
///
/// `solver` supplies every remaining setting; its `theta`, `eps_r` and `eps_g`
/// are overwritten per grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    pub tolerances: Vec<TolerancePair>,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_thetas() -> Vec<f64> {
    DEFAULT_THETAS.to_vec()
}

impl ExperimentSpec {
    pub fn validate(&self) -> icls::Result<()> {
        let invalid = |msg: &str| Err(icls::Error::InvalidConfig(msg.into()));
        if self.thetas.is_empty() {
            return invalid("theta grid is empty");
        }
        if self.tolerances.is_empty() {
            return invalid("tolerance grid is empty");
        }
        for config in self.cells().map(|(_, _, c)| c) {
            config.validate()?;
        }
        Ok(())
    }

    /// Grid cells in output order: tolerance pairs outer, θ inner.
    pub fn cells(&self) -> impl Iterator<Item = (f64, TolerancePair, SolverConfig)> + '_ {
        self.tolerances.iter().flat_map(move |&tol| {
            self.thetas.iter().map(move |&theta| {
                let config = SolverConfig {
                    theta,
                    eps_r: tol.eps_r,
                    eps_g: tol.eps_g,
                    ..self.solver.clone()
                };
                (theta, tol, config)
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Finished(StopStatus),
    Failed(String),
}

impl RowStatus {
    pub fn label(&self) -> String {
        match self {
            RowStatus::Finished(s) => s.to_string(),
            RowStatus::Failed(_) => "failed".into(),
        }
    }
}

/// Summary of one grid cell. Counts are zero for failed cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub problem: String,
    pub theta: f64,
    pub eps_r: f64,
    pub eps_g: f64,
    pub status: RowStatus,
    pub iterations: usize,
    pub successes: usize,
    pub pde_solves: u64,
    pub adjoint_solves: u64,
    /// Applications of `Ĝ` or `Ĝᵀ`; a Gauss-Newton product counts twice.
    pub jvp: u64,
    pub cg_iters: u64,
    pub final_residual_norm: f64,
    pub final_scaled_gradient: f64,
    pub wall_ms: f64,
}

impl ExperimentRow {
    fn from_outcome(
        problem: &str,
        theta: f64,
        tol: TolerancePair,
        outcome: &SolveOutcome,
        wall_ms: f64,
    ) -> Self {
        Self {
            problem: problem.into(),
            theta,
            eps_r: tol.eps_r,
            eps_g: tol.eps_g,
            status: RowStatus::Finished(outcome.status),
            iterations: outcome.iterations,
            successes: outcome.successful_iterations,
            pde_solves: outcome.counters.forward_solves,
            adjoint_solves: outcome.counters.adjoint_solves,
            jvp: outcome.counters.jacobian_applies,
            cg_iters: outcome.counters.cg_iterations,
            final_residual_norm: outcome.residual_norm,
            final_scaled_gradient: outcome.scaled_gradient,
            wall_ms,
        }
    }

    fn failed(
        problem: &str,
        theta: f64,
        tol: TolerancePair,
        message: String,
        wall_ms: f64,
    ) -> Self {
        Self {
            problem: problem.into(),
            theta,
            eps_r: tol.eps_r,
            eps_g: tol.eps_g,
            status: RowStatus::Failed(message),
            iterations: 0,
            successes: 0,
            pde_solves: 0,
            adjoint_solves: 0,
            jvp: 0,
            cg_iters: 0,
            final_residual_norm: f64::NAN,
            final_scaled_gradient: f64::NAN,
            wall_ms,
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.status, RowStatus::Failed(_))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory for one JSONL trace per cell; no traces when `None`.
    pub trace_dir: Option<PathBuf>,
}

/// File name of the trace for one grid cell.
pub fn trace_file_name(problem: &str, theta: f64, tol: TolerancePair) -> String {
    format!(
        "{problem}_theta{theta:e}_epsr{:e}_epsg{:e}.jsonl",
        tol.eps_r, tol.eps_g
    )
}

/// Runs every grid cell (in parallel) and returns rows in grid order.
///
/// Solver failures become failed rows; only an invalid spec, an unbuildable
/// problem or an I/O error aborts the whole experiment.
pub fn run_experiment(
    spec: &ExperimentSpec,
    options: &RunOptions,
) -> anyhow::Result<Vec<ExperimentRow>> {
    spec.validate()?;
    let instance = spec.problem.build()?;
    let label = spec.problem.label();
    if let Some(dir) = &options.trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    let cells: Vec<_> = spec.cells().collect();
    cells
        .par_iter()
        .map(|(theta, tol, config)| {
            let trace_path = options
                .trace_dir
                .as_ref()
                .map(|dir| dir.join(trace_file_name(&label, *theta, *tol)));
            run_cell(
                instance.problem(),
                &instance.initial_control(),
                &label,
                *tol,
                config,
                trace_path.as_deref(),
            )
        })
        .collect()
}

/// Solves one grid cell, turning a solver error into a failed row.
fn run_cell(
    problem: &dyn ImplicitProblem,
    u0: &Vector,
    label: &str,
    tol: TolerancePair,
    config: &SolverConfig,
    trace_path: Option<&Path>,
) -> anyhow::Result<ExperimentRow> {
    let mut trace = trace_path.map(JsonlTrace::create).transpose()?;
    let start = Instant::now();
    let result = solve(
        problem,
        u0,
        config,
        trace.as_mut().map(|t| t as &mut dyn TraceSink),
    );
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(trace) = trace {
        trace.finish()?;
    }
    Ok(match result {
        Ok(outcome) => ExperimentRow::from_outcome(label, config.theta, tol, &outcome, wall_ms),
        Err(err) => ExperimentRow::failed(label, config.theta, tol, err.to_string(), wall_ms),
    })
}
