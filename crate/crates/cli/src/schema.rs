//! Problem file format (a single JSON document).
//!
//! ```json
//! {
//!   "n": 2,
//!   "f": [2, 1],
//!   "terms": [
//!     {"kind": "exponential", "alpha": 6, "D": [[2, 0], [0, 3]]},
//!     {"kind": "quartic", "beta": 8, "lambda": 1, "D": [[4, 0], [0, 5]]}
//!   ],
//!   "solver": {"box": [[-10, 10], [-10, 10]], "grid_steps": 401, "seed": 0}
//! }
//! ```
//!
//! Parsing is strict: unknown keys are rejected, and a term may only carry
//! the parameters of its own family.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use fixdual_core::{Axis, CanonicalTerm, FixedPointProblem, SolverTolerances};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Exponential,
    Quartic,
    LogQuadratic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub kind: Kind,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub gtol: Option<f64>,
    pub max_newton: Option<usize>,
    pub def_rel: Option<f64>,
    pub dedup_rel: Option<f64>,
    pub gap_tol: Option<f64>,
    pub res_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Dual search box, one `[lo, hi]` per term.
    #[serde(rename = "box")]
    pub dual_box: Option<Vec<[f64; 2]>>,
    pub grid_steps: Option<usize>,
    pub tolerances: Option<ToleranceSpec>,
    pub seed: Option<u64>,
    /// Primal box for the multistart oracle, one `[lo, hi]` per coordinate.
    pub oracle_box: Option<Vec<[f64; 2]>>,
    pub oracle_starts: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub f: Vec<f64>,
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
}

/// A parsed problem plus its solver settings.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: FixedPointProblem,
    pub solver: SolverSpec,
}

impl LoadedProblem {
    pub fn tolerances(&self) -> SolverTolerances {
        let mut tol = SolverTolerances::default();
        if let Some(t) = &self.solver.tolerances {
            tol.gtol = t.gtol.unwrap_or(tol.gtol);
            tol.max_newton = t.max_newton.unwrap_or(tol.max_newton);
            tol.def_rel = t.def_rel.unwrap_or(tol.def_rel);
            tol.dedup_rel = t.dedup_rel.unwrap_or(tol.dedup_rel);
            tol.gap_tol = t.gap_tol.unwrap_or(tol.gap_tol);
            tol.res_tol = t.res_tol.unwrap_or(tol.res_tol);
        }
        tol
    }

    pub fn dual_axes(&self) -> Option<Vec<Axis>> {
        let steps = self
            .solver
            .grid_steps
            .unwrap_or(fixdual_core::dual::DEFAULT_STEPS);
        self.solver
            .dual_box
            .as_ref()
            .map(|b| b.iter().map(|&[lo, hi]| Axis { lo, hi, steps }).collect())
    }
}

fn matrix(rows: &[Vec<f64>], n: usize, at: &str) -> Result<DMatrix<f64>> {
    ensure!(!rows.is_empty(), "{at}.D: operator has no rows");
    for (r, row) in rows.iter().enumerate() {
        ensure!(
            row.len() == n,
            "{at}.D[{r}]: expected {n} columns (n = {n}), found {}",
            row.len()
        );
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        n,
        rows.iter().flatten().copied(),
    ))
}

fn term(spec: &TermSpec, n: usize, at: &str) -> Result<CanonicalTerm> {
    let d = matrix(&spec.d, n, at)?;
    let present = [
        ("alpha", spec.alpha),
        ("beta", spec.beta),
        ("lambda", spec.lambda),
        ("c1", spec.c1),
        ("c2", spec.c2),
    ];
    let allowed: &[&str] = match spec.kind {
        Kind::Exponential => &["alpha"],
        Kind::Quartic => &["beta", "lambda"],
        Kind::LogQuadratic => &["c1", "c2"],
    };
    for (key, v) in present {
        match (allowed.contains(&key), v) {
            (true, None) => bail!("{at}: missing parameter `{key}` for kind {:?}", spec.kind),
            (false, Some(_)) => bail!(
                "{at}: parameter `{key}` does not belong to kind {:?}",
                spec.kind
            ),
            _ => {}
        }
    }
    let t = match spec.kind {
        Kind::Exponential => CanonicalTerm::exponential(spec.alpha.unwrap(), d),
        Kind::Quartic => CanonicalTerm::quartic(spec.beta.unwrap(), spec.lambda.unwrap(), d),
        Kind::LogQuadratic => CanonicalTerm::log_quadratic(spec.c1.unwrap(), spec.c2.unwrap(), d),
    };
    t.with_context(|| at.to_string())
}

fn check_box(b: &[[f64; 2]], len: usize, what: &str) -> Result<()> {
    ensure!(
        b.len() == len,
        "solver.{what}: expected {len} intervals, found {}",
        b.len()
    );
    for (i, [lo, hi]) in b.iter().enumerate() {
        ensure!(
            lo < hi,
            "solver.{what}[{i}]: need lo < hi, got [{lo}, {hi}]"
        );
    }
    Ok(())
}

pub fn parse_problem(text: &str) -> Result<LoadedProblem> {
    let file: ProblemFile = serde_json::from_str(text).context("malformed problem file")?;
    ensure!(file.n >= 1, "n: must be at least 1");
    ensure!(
        file.f.len() == file.n,
        "f: expected {} entries (n = {}), found {}",
        file.n,
        file.n,
        file.f.len()
    );
    ensure!(
        !file.terms.is_empty(),
        "terms: at least one term is required"
    );
    let terms = file
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| term(t, file.n, &format!("terms[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let m = terms.len();
    let problem = FixedPointProblem::new(DVector::from_vec(file.f), terms)?;
    if let Some(b) = &file.solver.dual_box {
        check_box(b, m, "box")?;
    }
    if let Some(b) = &file.solver.oracle_box {
        check_box(b, file.n, "oracle_box")?;
    }
    if let Some(s) = file.solver.grid_steps {
        ensure!(s >= 2, "solver.grid_steps: need at least 2");
    }
    Ok(LoadedProblem {
        problem,
        solver: file.solver,
    })
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_problem(&text).with_context(|| format!("{}", path.display()))
}

/// Parses `lo:hi[,lo:hi...]`; a single interval is repeated over `dims` axes.
pub fn parse_box(s: &str, dims: usize) -> Result<Vec<(f64, f64)>> {
    let parts = s
        .split(',')
        .map(|iv| {
            let (lo, hi) = iv
                .split_once(':')
                .with_context(|| format!("box interval `{iv}` is not lo:hi"))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .with_context(|| format!("bad lower bound `{lo}`"))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .with_context(|| format!("bad upper bound `{hi}`"))?;
            ensure!(lo < hi, "box interval `{iv}` needs lo < hi");
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dims]),
        k if k == dims => Ok(parts),
        k => bail!("box has {k} intervals, expected 1 or {dims}"),
    }
}
