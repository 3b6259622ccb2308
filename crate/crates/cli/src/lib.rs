//! `fixdual` command-line front end.
//!
//! ```text
//! fixdual solve  <file> [--json out.json] [--box lo:hi[,lo:hi]] [--grid N]
//! fixdual scan   <file> [--out scan.csv]  [--box lo:hi[,lo:hi]] [--grid N]
//! fixdual verify <file> [--box ...] [--grid N] [--seed S]
//! fixdual oracle <file> [--seed S]
//! ```
//!
//! Exit codes: 0 success, 1 input or runtime error, 2 nothing accepted
//! (`solve`) or pipelines disagree (`verify`).

pub mod report;
pub mod schema;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fixdual_core::{
    cross_validate, multistart_stationary_search, scan_landscape, solve, Axis, OracleReport,
    ScanGrid, SolveOptions, SolveReport,
};

use crate::report::{format_table, sig6, Report};
use crate::schema::{load_problem, parse_box, LoadedProblem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_EMPTY: i32 = 2;

const DEFAULT_ORACLE_HALF_WIDTH: f64 = 10.0;
const DEFAULT_ORACLE_STARTS: usize = 2000;

#[derive(Debug, Parser)]
#[command(
    name = "fixdual",
    version,
    about = "All fixed points of potential operators via canonical duality"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find, verify and label every fixed point.
    Solve(Flags),
    /// Export the dual landscape Π^d over a grid as CSV.
    Scan(Flags),
    /// Cross-check the dual pipeline against the primal multistart oracle.
    Verify(Flags),
    /// Run only the primal multistart oracle.
    Oracle(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Write the full-precision report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV destination for `scan` (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dual search box, `lo:hi` per dual axis.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub dual_box: Option<String>,
    /// Grid nodes per dual axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Seed for the oracle start sequence.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Solve(f) => cmd_solve(&f, out, err),
        Command::Scan(f) => cmd_scan(&f, out, err),
        Command::Verify(f) => cmd_verify(&f, out, err),
        Command::Oracle(f) => cmd_oracle(&f, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn solve_options(lp: &LoadedProblem, flags: &Flags) -> Result<SolveOptions> {
    let m = lp.problem.m();
    let steps = flags.grid.or(lp.solver.grid_steps);
    let axes = match &flags.dual_box {
        Some(b) => Some(
            parse_box(b, m)?
                .into_iter()
                .map(|(lo, hi)| Axis {
                    lo,
                    hi,
                    steps: steps.unwrap_or(fixdual_core::dual::DEFAULT_STEPS),
                })
                .collect(),
        ),
        None => lp.dual_axes(),
    };
    Ok(SolveOptions {
        axes,
        grid_steps: steps,
        tol: lp.tolerances(),
        polish: true,
    })
}

fn run_solve(lp: &LoadedProblem, flags: &Flags) -> Result<SolveReport> {
    Ok(solve(&lp.problem, &solve_options(lp, flags)?)?)
}

pub fn cmd_solve(flags: &Flags, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let lp = load_problem(&flags.file)?;
    let rep = run_solve(&lp, flags)?;
    let report = Report::new(
        &flags.file.display().to_string(),
        lp.problem.n(),
        lp.problem.m(),
        &rep,
    );
    out.write_all(format_table(&report).as_bytes())?;
    for d in &report.diagnostics {
        writeln!(err, "note: {d}")?;
    }
    if let Some(path) = &flags.json {
        write_json(path, &report)?;
    }
    Ok(if report.records.is_empty() {
        EXIT_EMPTY
    } else {
        EXIT_OK
    })
}

pub fn write_json(path: &Path, report: &Report) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Report> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// CSV text of the dual landscape: `sigma_1[,sigma_2],pid,mask`.
pub fn scan_csv(lp: &LoadedProblem, flags: &Flags) -> Result<String> {
    let p = &lp.problem;
    if p.m() > 2 {
        bail!("scan supports m ≤ 2 (problem has m = {})", p.m());
    }
    let opts = solve_options(lp, flags)?;
    let axes = opts
        .axes
        .unwrap_or_else(|| ScanGrid::default_axes(p, opts.grid_steps));
    let axes: Vec<Axis> = match opts.grid_steps {
        Some(steps) => axes.into_iter().map(|a| Axis { steps, ..a }).collect(),
        None => axes,
    };
    let grid = ScanGrid::new(p, axes, &opts.tol)?;
    let rows = scan_landscape(p, &grid, &opts.tol);
    let mut csv = String::new();
    let names: Vec<String> = (1..=p.m()).map(|i| format!("sigma_{i}")).collect();
    csv.push_str(&format!("{},pid,mask\n", names.join(",")));
    for r in rows {
        let s: Vec<String> = r.sigma.iter().map(|v| v.to_string()).collect();
        let (pid, mask) = match r.pid {
            Some(v) => (v.to_string(), 0),
            None => (String::new(), 1),
        };
        csv.push_str(&format!("{},{pid},{mask}\n", s.join(",")));
    }
    Ok(csv)
}

pub fn cmd_scan(flags: &Flags, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32> {
    let lp = load_problem(&flags.file)?;
    let csv = scan_csv(&lp, flags)?;
    match &flags.out {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn oracle_bounds(lp: &LoadedProblem) -> Vec<(f64, f64)> {
    match &lp.solver.oracle_box {
        Some(b) => b.iter().map(|&[lo, hi]| (lo, hi)).collect(),
        None => vec![(-DEFAULT_ORACLE_HALF_WIDTH, DEFAULT_ORACLE_HALF_WIDTH); lp.problem.n()],
    }
}

/// Dual solve, primal oracle and their pairing.
pub fn verify_problem(lp: &LoadedProblem, flags: &Flags) -> Result<(SolveReport, OracleReport)> {
    let rep = run_solve(lp, flags)?;
    let seed = flags.seed.or(lp.solver.seed).unwrap_or(0);
    let starts = lp.solver.oracle_starts.unwrap_or(DEFAULT_ORACLE_STARTS);
    let pts = multistart_stationary_search(&lp.problem, &oracle_bounds(lp), starts, seed)?;
    let oracle = cross_validate(&rep.records, &pts);
    Ok((rep, oracle))
}

pub fn cmd_verify(flags: &Flags, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let lp = load_problem(&flags.file)?;
    let (rep, oracle) = verify_problem(&lp, flags)?;
    writeln!(
        err,
        "dual records: {}, oracle points: {}, matched: {}",
        rep.records.len(),
        oracle.points.len(),
        oracle.matched.len()
    )?;
    for m in &oracle.matched {
        let r = &rep.records[m.record];
        writeln!(
            err,
            "  matched x = {:?}  distance {}  |dPi| {}",
            r.x.as_slice(),
            sig6(m.distance),
            sig6(m.value_diff)
        )?;
    }
    for &j in &oracle.unmatched_oracle {
        writeln!(
            err,
            "  unmatched oracle point x = {:?}",
            oracle.points[j].x.as_slice()
        )?;
    }
    for &i in &oracle.unmatched_dual {
        writeln!(
            err,
            "  unmatched dual record x = {:?}",
            rep.records[i].x.as_slice()
        )?;
    }
    for &k in &oracle.value_mismatches {
        let m = &oracle.matched[k];
        writeln!(
            err,
            "  value mismatch on record {}: {}",
            m.record + 1,
            sig6(m.value_diff)
        )?;
    }
    if oracle.is_clean() {
        writeln!(out, "verify: OK ({} fixed points)", rep.records.len())?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "verify: MISMATCH")?;
        Ok(EXIT_EMPTY)
    }
}

pub fn cmd_oracle(flags: &Flags, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32> {
    let lp = load_problem(&flags.file)?;
    let seed = flags.seed.or(lp.solver.seed).unwrap_or(0);
    let starts = lp.solver.oracle_starts.unwrap_or(DEFAULT_ORACLE_STARTS);
    let pts = multistart_stationary_search(&lp.problem, &oracle_bounds(&lp), starts, seed)?;
    writeln!(out, "#  x  Pi  |grad|  hessian(-,0,+)")?;
    for (i, o) in pts.iter().enumerate() {
        let x: Vec<String> = o.x.iter().map(|v| sig6(*v)).collect();
        let (neg, zero, pos) = o.hess_signature;
        writeln!(
            out,
            "{}  ({})  {}  {}  ({neg},{zero},{pos})",
            i + 1,
            x.join(", "),
            sig6(o.pi_value),
            sig6(o.grad_norm)
        )?;
    }
    Ok(if pts.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}
