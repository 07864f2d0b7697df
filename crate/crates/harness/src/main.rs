use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use icls::elliptic::DesiredState;
use icls::{HessianMode, SolverConfig};
use icls_harness::{
    render_table, run_experiment, write_summary, ExperimentSpec, Metric, ProblemSpec, RunOptions,
    TolerancePair, DEFAULT_THETAS,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemKind {
    Elliptic,
    Burgers,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ZChoice {
    Zero,
    One,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Hessian {
    Zero,
    GaussNewton,
}

/// Sweep the regularized Gauss-Newton solver over (theta, eps_r, eps_g) grids.
#[derive(Debug, Parser)]
#[command(name = "icls", version)]
struct Cli {
    /// Benchmark to run; required unless --grid-file is given.
    #[arg(value_enum, required_unless_present = "grid_file")]
    problem: Option<ProblemKind>,

    /// Elliptic: subdivisions per side of the unit square.
    #[arg(long, default_value_t = 20)]
    n_mesh: usize,
    /// Elliptic: control regularization weight.
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Elliptic: desired state.
    #[arg(long, value_enum, default_value_t = ZChoice::Zero)]
    z: ZChoice,

    /// Burgers: spatial resolution.
    #[arg(long, default_value_t = 16)]
    nx: usize,
    /// Burgers: number of time steps.
    #[arg(long, default_value_t = 16)]
    nt: usize,
    /// Burgers: viscosity.
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    /// Burgers: control regularization weight.
    #[arg(long, default_value_t = 0.05)]
    omega: f64,

    /// Inexactness levels (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    theta: Option<Vec<f64>>,
    /// Residual tolerances, paired element-wise with --eps-g.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1e-6")]
    eps_r: Vec<f64>,
    /// Scaled-gradient tolerances; a single value is used for every --eps-r.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1e-4")]
    eps_g: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 1e-10)]
    gamma_min: f64,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Hessian::GaussNewton)]
    hessian: Hessian,
    /// Seed of the power-iteration start vector.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// TOML experiment description; replaces the problem and grid flags.
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Output directory for CSV tables and JSONL traces.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Leave wall_ms empty so summary.csv is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

fn tolerance_pairs(eps_r: &[f64], eps_g: &[f64]) -> anyhow::Result<Vec<TolerancePair>> {
    let eps_g: Vec<f64> = match eps_g.len() {
        1 => vec![eps_g[0]; eps_r.len()],
        n if n == eps_r.len() => eps_g.to_vec(),
        n => bail!("--eps-g has {n} values but --eps-r has {}", eps_r.len()),
    };
    Ok(eps_r
        .iter()
        .zip(eps_g)
        .map(|(&eps_r, eps_g)| TolerancePair { eps_r, eps_g })
        .collect())
}

fn spec_from_flags(cli: &Cli) -> anyhow::Result<ExperimentSpec> {
    let problem = match cli.problem.context("no problem given")? {
        ProblemKind::Elliptic => ProblemSpec::Elliptic {
            n_mesh: cli.n_mesh,
            lambda: cli.lambda,
            z: match cli.z {
                ZChoice::Zero => DesiredState::Zero,
                ZChoice::One => DesiredState::One,
            },
        },
        ProblemKind::Burgers => ProblemSpec::Burgers {
            nx: cli.nx,
            nt: cli.nt,
            nu: cli.nu,
            omega: cli.omega,
        },
    };
    Ok(ExperimentSpec {
        problem,
        thetas: cli.theta.clone().unwrap_or_else(|| DEFAULT_THETAS.to_vec()),
        tolerances: tolerance_pairs(&cli.eps_r, &cli.eps_g)?,
        solver: SolverConfig {
            eta: cli.eta,
            gamma_min: cli.gamma_min,
            max_iter: cli.max_iter,
            hessian_mode: match cli.hessian {
                Hessian::Zero => HessianMode::Zero,
                Hessian::GaussNewton => HessianMode::GaussNewton,
            },
            seed: cli.seed,
            ..SolverConfig::default()
        },
    })
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let spec = match &cli.grid_file {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => spec_from_flags(cli)?,
    };
    fs::create_dir_all(&cli.out_dir)?;
    let options = RunOptions {
        trace_dir: Some(cli.out_dir.join("traces")),
    };
    let rows = run_experiment(&spec, &options)?;

    let summary = fs::File::create(cli.out_dir.join("summary.csv"))?;
    write_summary(&rows, summary, !cli.no_timing)?;
    for (metric, name) in [
        (Metric::PdeSolves, "pde_solves"),
        (Metric::JacobianApplies, "jvp"),
    ] {
        let table = render_table(&rows, metric);
        fs::write(cli.out_dir.join(format!("{name}.csv")), &table)?;
        println!("{} ({name})\n{table}", spec.problem.label());
    }
    let mut ok = true;
    for row in rows.iter().filter(|r| r.is_failed()) {
        ok = false;
        if let icls_harness::RowStatus::Failed(msg) = &row.status {
            eprintln!(
                "theta = {:e}, eps_r = {:e}, eps_g = {:e}: {msg}",
                row.theta, row.eps_r, row.eps_g
            );
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
