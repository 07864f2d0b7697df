use std::io::Write;

use icls::StopStatus;

use crate::experiment::{ExperimentRow, RowStatus};

pub const SUMMARY_HEADER: [&str; 14] = [
    "problem",
    "theta",
    "eps_r",
    "eps_g",
    "status",
    "iterations",
    "successes",
    "pde_solves",
    "adjoint_solves",
    "jvp",
    "cg_iters",
    "final_residual_norm",
    "final_scaled_gradient",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    PdeSolves,
    JacobianApplies,
}

impl Metric {
    fn value(self, row: &ExperimentRow) -> u64 {
        match self {
            Metric::PdeSolves => row.pde_solves,
            Metric::JacobianApplies => row.jvp,
        }
    }
}

/// One line per row under [`SUMMARY_HEADER`]. Pass `with_timing = false`
/// for output that is reproducible byte for byte (`wall_ms` is left empty).
pub fn write_summary<W: Write>(
    rows: &[ExperimentRow],
    writer: W,
    with_timing: bool,
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(SUMMARY_HEADER)?;
    for row in rows {
        let (counts, norms) = match row.status {
            RowStatus::Finished(_) => (
                [
                    row.iterations as u64,
                    row.successes as u64,
                    row.pde_solves,
                    row.adjoint_solves,
                    row.jvp,
                    row.cg_iters,
                ]
                .map(|v| v.to_string())
                .to_vec(),
                [row.final_residual_norm, row.final_scaled_gradient]
                    .map(|v| format!("{v:e}"))
                    .to_vec(),
            ),
            RowStatus::Failed(_) => (vec![String::new(); 6], vec![String::new(); 2]),
        };
        let mut record = vec![
            row.problem.clone(),
            format!("{:e}", row.theta),
            format!("{:e}", row.eps_r),
            format!("{:e}", row.eps_g),
            row.status.label(),
        ];
        record.extend(counts);
        record.extend(norms);
        record.push(if with_timing {
            format!("{:.3}", row.wall_ms)
        } else {
            String::new()
        });
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Grid of one metric: a line per `(eps_r, eps_g)` pair, a column per θ, in
/// order of first appearance. Budget-exhausted cells print `-`, failed
/// cells `error`.
pub fn render_table(rows: &[ExperimentRow], metric: Metric) -> String {
    let mut thetas: Vec<f64> = Vec::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for row in rows {
        if !thetas.contains(&row.theta) {
            thetas.push(row.theta);
        }
        if !pairs.contains(&(row.eps_r, row.eps_g)) {
            pairs.push((row.eps_r, row.eps_g));
        }
    }
    let mut out = csv::Writer::from_writer(Vec::new());
    let header = ["eps_r".to_string(), "eps_g".to_string()]
        .into_iter()
        .chain(thetas.iter().map(|t| format!("theta={t:e}")));
    out.write_record(header).expect("write to memory");
    for &(eps_r, eps_g) in &pairs {
        let mut record = vec![format!("{eps_r:e}"), format!("{eps_g:e}")];
        for &theta in &thetas {
            let cell = rows
                .iter()
                .find(|r| r.theta == theta && r.eps_r == eps_r && r.eps_g == eps_g)
                .map(|r| match r.status {
                    RowStatus::Finished(StopStatus::BudgetExhausted) => "-".to_string(),
                    RowStatus::Finished(_) => metric.value(r).to_string(),
                    RowStatus::Failed(_) => "error".to_string(),
                })
                .unwrap_or_default();
            record.push(cell);
        }
        out.write_record(&record).expect("write to memory");
    }
    String::from_utf8(out.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}
