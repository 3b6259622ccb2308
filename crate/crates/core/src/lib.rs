//! Complete fixed-point enumeration for potential operators by canonical
//! duality.
//!
//! A fixed point `x = F(x)` of `F = ∇P` with
//! `P(x) = Σ_i V_i(½ xᵀA_i x) − ⟨x, f⟩` is a stationary point of
//! `Π(x) = P(x) − ½‖x‖²`. Instead of searching `ℝⁿ`, the solver looks for
//! the stationary points of the canonical dual `Π^d(σ)` on the
//! `m`-dimensional dual space (one coordinate per term), recovers each
//! primal point as `x = G(σ)⁻¹ f`, verifies the zero duality gap and the
//! fixed-point residual, and labels stability from the definiteness of
//! `G(σ)`.
//!
//! ```
//! use fixdual_core::{catalog, solve, SolveOptions, Stability};
//!
//! let report = solve(&catalog::example2(), &SolveOptions::default()).unwrap();
//! assert_eq!(report.records.len(), 3);
//! assert_eq!(report.records[0].stability, Stability::GlobalStable);
//! ```

pub mod catalog;
pub mod dual;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod recovery;
pub mod roots;
pub mod terms;

pub use dual::{
    build_g, classify_g, eval_pid, find_dual_stationary_points, grad_pid, hess_pid, scan_landscape,
    single_term_poles, Axis, DualEval, DualPoint, DualSearch, GClass, GClassification, ScanGrid,
    ScanRow, SolverTolerances,
};
pub use error::{Error, Result, TermError};
pub use oracle::{cross_validate, multistart_stationary_search, OraclePoint, OracleReport};
pub use problem::FixedPointProblem;
pub use recovery::{
    duality_gap, label_stability, recover_primal, solve, NotApplicable, SolutionRecord,
    SolveOptions, SolveReport, Stability, StabilitySource, StabilityVerdict, TrialityVerdict,
};
pub use terms::{CanonicalTerm, Family, Interval};
