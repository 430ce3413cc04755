//! Single-set commands: `rectify`, `step` and `oracle-check`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use camegrad::dual::worst_case_improvement;
use camegrad::fmt::float;
use camegrad::oracle::primal_maxmin_oracle;
use camegrad::rng::stream;
use camegrad::{
    came_grad_step_with_noise, rectify, CameGradConfig, GradVec, GradientSet, SeededRng,
    SolverSettings, Strategy,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::{read_file, to_json, write_file, Outcome};

/// Largest solver/oracle disagreement `oracle-check` accepts.
pub const ORACLE_GAP_TOL: f64 = 2e-3;
pub const DEFAULT_RESOLUTION: usize = 2000;

pub fn read_gradient_set(path: &Path) -> Result<GradientSet> {
    let text = read_file(path)?;
    GradientSet::parse(&text).map_err(|e| match CliError::from(e) {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        CliError::Invariant(m) => CliError::Invariant(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// `|u_rect - mu| - rho |mu|`; zero when `u_rect` sits on the trust-region
/// boundary.
fn trust_region_residual(u_rect: &GradVec, mu: &GradVec, rho: f64) -> Result<f64> {
    Ok(u_rect.sub(mu)?.norm() - rho * mu.norm())
}

pub fn cmd_rectify(input: &Path, rho: f64, settings: &SolverSettings) -> Result<Outcome> {
    let gs = read_gradient_set(input)?;
    let r = rectify(&gs, rho, settings)?;
    let mu = gs.mean_gradient();
    let report = json!({
        "alpha": r.solution.alpha_star,
        "u_rect": r.u_rect,
        "mu": mu,
        "dual_value": r.solution.dual_value,
        "trust_region_residual": trust_region_residual(&r.u_rect, &mu, rho)?,
        "degenerate": r.degenerate,
        "iterations": r.solution.iterations,
        "converged": r.solution.converged,
    });
    Ok(Outcome::ok(to_json(&report)))
}

/// Runs the full update on one set. `seed` drives the SGLD noise stream.
pub fn cmd_step(
    input: &Path,
    came: &CameGradConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<Outcome> {
    let gs = read_gradient_set(input)?;
    let mut noise = SeededRng::with_stream(seed, stream::NOISE);
    let result = came_grad_step_with_noise(&gs, came, strategy, &mut noise)?;
    Ok(Outcome::ok(to_json(&result)))
}

/// Solver and brute-force oracle on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub instance: usize,
    pub dual_value: f64,
    pub oracle_value: f64,
    pub abs_gap: f64,
    /// `min_i g_i . u_rect`.
    pub recovered_value: f64,
    /// `|u_rect - mu| / (rho |mu|)`; absent for degenerate or `rho = 0`.
    pub boundary_ratio: Option<f64>,
    pub degenerate: bool,
}

impl OracleRow {
    pub fn evaluate(
        instance: usize,
        gs: &GradientSet,
        rho: f64,
        resolution: usize,
    ) -> Result<Self> {
        let r = rectify(gs, rho, &SolverSettings::default())?;
        let oracle = primal_maxmin_oracle(gs, rho, resolution)?;
        let mu = gs.mean_gradient();
        let radius = rho * mu.norm();
        let boundary_ratio = if r.degenerate || radius == 0.0 {
            None
        } else {
            Some(r.u_rect.sub(&mu)?.norm() / radius)
        };
        Ok(Self {
            instance,
            dual_value: r.solution.dual_value,
            oracle_value: oracle.best_value,
            abs_gap: (r.solution.dual_value - oracle.best_value).abs(),
            recovered_value: worst_case_improvement(gs, &r.u_rect)?,
            boundary_ratio,
            degenerate: r.degenerate,
        })
    }
}

/// Parameters of a seeded batch of random instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheck {
    pub count: usize,
    pub dims: usize,
    /// Number of gradients per set, `K + 1`.
    pub tasks: usize,
    pub rho: f64,
    pub seed: u64,
    pub resolution: usize,
}

/// Instances have components uniform in `[-1, 1]` and unit weights, drawn
/// in order from one generator seeded with `seed`.
pub fn oracle_check_instances(check: &OracleCheck) -> Result<Vec<GradientSet>> {
    let mut rng = SeededRng::new(check.seed);
    (0..check.count)
        .map(|_| {
            let grads = (0..check.tasks)
                .map(|_| {
                    GradVec::new(
                        (0..check.dims)
                            .map(|_| rng.uniform_range(-1.0, 1.0))
                            .collect(),
                    )
                })
                .collect::<camegrad::Result<Vec<_>>>()?;
            Ok(GradientSet::unweighted(grads)?)
        })
        .collect()
}

pub fn oracle_check_rows(check: &OracleCheck) -> Result<Vec<OracleRow>> {
    if check.dims > camegrad::oracle::MAX_PRIMAL_DIM {
        return Err(CliError::Invariant(format!(
            "oracle-check supports dims <= {}, got {}",
            camegrad::oracle::MAX_PRIMAL_DIM,
            check.dims
        )));
    }
    if check.count == 0 || check.dims == 0 || check.tasks == 0 {
        return Err(CliError::Invariant(
            "count, dims and tasks must be >= 1".into(),
        ));
    }
    oracle_check_instances(check)?
        .iter()
        .enumerate()
        .map(|(i, gs)| OracleRow::evaluate(i, gs, check.rho, check.resolution))
        .collect()
}

fn rows_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from("instance,dual_value,oracle_value,abs_gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.instance,
            float(r.dual_value),
            float(r.oracle_value),
            float(r.abs_gap)
        );
    }
    out
}

fn breached(gap: f64) -> bool {
    gap.is_nan() || gap > ORACLE_GAP_TOL
}

fn gap_failure(rows: &[OracleRow]) -> Option<CliError> {
    let breaches = rows
        .iter()
        .filter(|r| breached(r.abs_gap))
        .count();
    let max_gap = rows.iter().map(|r| r.abs_gap).fold(0.0, f64::max);
    (breaches > 0).then_some(CliError::OracleGap { breaches, max_gap })
}

/// Writes `oracle_check.csv` under `output_dir` and prints a JSON summary.
pub fn cmd_oracle_check(check: &OracleCheck, output_dir: &Path) -> Result<Outcome> {
    let rows = oracle_check_rows(check)?;
    let path: PathBuf = output_dir.join("oracle_check.csv");
    write_file(&path, &rows_csv(&rows))?;
    let failure = gap_failure(&rows);
    let report = json!({
        "instances": rows.len(),
        "dims": check.dims,
        "tasks": check.tasks,
        "rho": check.rho,
        "seed": check.seed,
        "max_gap": rows.iter().map(|r| r.abs_gap).fold(0.0, f64::max),
        "breaches": rows.iter().filter(|r| breached(r.abs_gap)).count(),
        "csv": path,
    });
    Ok(Outcome {
        stdout: to_json(&report),
        failure,
    })
}

/// Checks a single set read from `input`; prints the CSV row to stdout.
pub fn cmd_oracle_check_file(input: &Path, rho: f64, resolution: usize) -> Result<Outcome> {
    let gs = read_gradient_set(input)?;
    let row = OracleRow::evaluate(0, &gs, rho, resolution)?;
    let rows = [row];
    Ok(Outcome {
        stdout: rows_csv(&rows),
        failure: gap_failure(&rows),
    })
}
