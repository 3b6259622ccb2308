//! Primal recovery `x̄ = G(σ̄)⁻¹ f`, duality-gap and residual checks, and
//! triality-based stability labels with a primal-Hessian fallback.

use std::fmt;

use nalgebra::DVector;

use crate::dual::{
    find_dual_stationary_points, singular_threshold, sorted_eigen, Axis, DualEval, DualPoint,
    GClass, ScanGrid, SolverTolerances,
};
use crate::error::{Error, Result};
use crate::problem::FixedPointProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    GlobalStable,
    LocalStableFixedPoint,
    LocalUnstableFixedPoint,
    Indeterminate,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::GlobalStable => "GlobalStable",
            Stability::LocalStableFixedPoint => "LocalStable",
            Stability::LocalUnstableFixedPoint => "LocalUnstable",
            Stability::Indeterminate => "Indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilitySource {
    TrialityMinMax,
    TrialityDoubleMin,
    TrialityDoubleMax,
    PrimalHessianFallback,
}

impl fmt::Display for StabilitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilitySource::TrialityMinMax => "triality:min-max",
            StabilitySource::TrialityDoubleMin => "triality:double-min",
            StabilitySource::TrialityDoubleMax => "triality:double-max",
            StabilitySource::PrimalHessianFallback => "primal-hessian",
        })
    }
}

/// Why the triality statements say nothing about a dual point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NotApplicable {
    IndefiniteG,
    SingularG,
    /// Double-min duality needs `dim X = dim S`.
    DimensionMismatch,
    /// `G ≺ 0` but `σ̄` is neither a local max nor a local min of `Π^d`.
    DualSaddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrialityVerdict {
    MinMax,
    DoubleMax,
    DoubleMin,
    NotApplicable(NotApplicable),
}

impl TrialityVerdict {
    pub fn is_applicable(&self) -> bool {
        !matches!(self, TrialityVerdict::NotApplicable(_))
    }
}

impl fmt::Display for TrialityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialityVerdict::MinMax => "min-max: GlobalStable",
            TrialityVerdict::DoubleMax => "double-max: LocalUnstable",
            TrialityVerdict::DoubleMin => "double-min: LocalStable",
            TrialityVerdict::NotApplicable(NotApplicable::IndefiniteG) => {
                "not applicable (G indefinite)"
            }
            TrialityVerdict::NotApplicable(NotApplicable::SingularG) => {
                "not applicable (G singular)"
            }
            TrialityVerdict::NotApplicable(NotApplicable::DimensionMismatch) => {
                "not applicable (n ≠ m)"
            }
            TrialityVerdict::NotApplicable(NotApplicable::DualSaddle) => {
                "not applicable (dual saddle)"
            }
        })
    }
}

/// Both verdicts and the label shown to the user.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub label: Stability,
    pub source: StabilitySource,
    pub triality: TrialityVerdict,
    pub fallback: Stability,
    pub primal_hess_eigs: DVector<f64>,
    /// Triality applied but the primal Hessian contradicted it.
    pub disagreement: bool,
}

/// A verified primal–dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub x: DVector<f64>,
    pub sigma: DVector<f64>,
    pub pi_value: f64,
    pub pid_value: f64,
    pub gap: f64,
    pub fp_residual: f64,
    pub g_class: GClass,
    pub stability: Stability,
    pub stability_source: StabilitySource,
    pub triality: TrialityVerdict,
    pub fallback: Stability,
    pub disagreement: bool,
    /// Recovered on a pole of `G` (`f` in the range of a singular `G`).
    pub pole_branch: bool,
}

/// `x̄ = G(σ̄)⁻¹ f`.
pub fn recover_primal(
    p: &FixedPointProblem,
    dp: &DualPoint,
    tol: &SolverTolerances,
) -> Result<DVector<f64>> {
    if dp.g_class == GClass::NearSingular {
        let min_abs_eig = dp.g_eigs.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
        return Err(Error::Pole {
            min_abs_eig,
            threshold: singular_threshold(p, &dp.sigma, tol),
        });
    }
    Ok(DualEval::new(p, &dp.sigma, tol)?.primal().clone())
}

/// `|Π(x) − Π^d(σ)|`.
pub fn duality_gap(p: &FixedPointProblem, x: &DVector<f64>, sigma: &DVector<f64>) -> Result<f64> {
    Ok((p.eval_pi(x)? - crate::dual::eval_pid(p, sigma)?).abs())
}

/// Total complementary function `Ξ(x, σ) = ½ xᵀG(σ)x − Σ V_i*(σ_i) − xᵀf`.
pub fn complementary(p: &FixedPointProblem, x: &DVector<f64>, sigma: &DVector<f64>) -> Result<f64> {
    let g = crate::dual::build_g(p, sigma)?;
    let mut v = 0.5 * x.dot(&(g * x)) - x.dot(p.f());
    for (i, (t, s)) in p.terms().iter().zip(sigma.iter()).enumerate() {
        v -= t.vstar(*s).map_err(Error::term(i))?;
    }
    Ok(v)
}

fn classify_hessian(eigs: &DVector<f64>, eps: f64) -> Stability {
    if eigs.min() > eps {
        Stability::LocalStableFixedPoint
    } else if eigs.max() < -eps {
        Stability::LocalUnstableFixedPoint
    } else {
        Stability::Indeterminate
    }
}

fn triality_verdict(
    p: &FixedPointProblem,
    sigma: &DVector<f64>,
    tol: &SolverTolerances,
) -> TrialityVerdict {
    let ev = match DualEval::new(p, sigma, tol) {
        Ok(ev) => ev,
        Err(_) => return TrialityVerdict::NotApplicable(NotApplicable::SingularG),
    };
    match ev.g_class() {
        GClass::PosDef => TrialityVerdict::MinMax,
        GClass::Indefinite => TrialityVerdict::NotApplicable(NotApplicable::IndefiniteG),
        GClass::NearSingular => TrialityVerdict::NotApplicable(NotApplicable::SingularG),
        GClass::NegDef => {
            let h = ev.hessian();
            let eps = tol.def_rel * h.amax();
            let (eigs, _) = sorted_eigen(h);
            if eigs.max() < -eps {
                TrialityVerdict::DoubleMax
            } else if eigs.min() > eps {
                if p.n() == p.m() {
                    TrialityVerdict::DoubleMin
                } else {
                    TrialityVerdict::NotApplicable(NotApplicable::DimensionMismatch)
                }
            } else {
                TrialityVerdict::NotApplicable(NotApplicable::DualSaddle)
            }
        }
    }
}

/// Labels the fixed point `x̄` paired with `σ̄`.
///
/// The triality verdict is used when it applies and the eigenvalues of
/// `∇²Π(x̄)` agree with it; otherwise the primal-Hessian verdict is the
/// label, and a contradiction is flagged in `disagreement`.
pub fn label_stability(
    p: &FixedPointProblem,
    x: &DVector<f64>,
    sigma: &DVector<f64>,
    tol: &SolverTolerances,
) -> Result<StabilityVerdict> {
    let triality = triality_verdict(p, sigma, tol);
    let (eigs, _) = sorted_eigen(p.hess_pi(x)?);
    let fallback = classify_hessian(&eigs, singular_threshold(p, sigma, tol));
    let claimed = match triality {
        TrialityVerdict::MinMax => Some((
            Stability::GlobalStable,
            Stability::LocalStableFixedPoint,
            StabilitySource::TrialityMinMax,
        )),
        TrialityVerdict::DoubleMax => Some((
            Stability::LocalUnstableFixedPoint,
            Stability::LocalUnstableFixedPoint,
            StabilitySource::TrialityDoubleMax,
        )),
        TrialityVerdict::DoubleMin => Some((
            Stability::LocalStableFixedPoint,
            Stability::LocalStableFixedPoint,
            StabilitySource::TrialityDoubleMin,
        )),
        TrialityVerdict::NotApplicable(_) => None,
    };
    let (label, source, disagreement) = match claimed {
        Some((label, expected, source)) if expected == fallback => (label, source, false),
        Some(_) => (fallback, StabilitySource::PrimalHessianFallback, true),
        None => (fallback, StabilitySource::PrimalHessianFallback, false),
    };
    Ok(StabilityVerdict {
        label,
        source,
        triality,
        fallback,
        primal_hess_eigs: eigs,
        disagreement,
    })
}

/// Bounded Newton steps on `∇Π` from a recovered point. Each step is
/// capped at `0.1 (1 + ‖x‖)` and kept only if it lowers the residual.
pub fn polish_primal(
    p: &FixedPointProblem,
    x0: &DVector<f64>,
    tol: &SolverTolerances,
) -> DVector<f64> {
    let mut x = x0.clone();
    let Ok(mut r) = p.residual(&x) else { return x };
    for _ in 0..20 {
        if r <= 1e-3 * tol.res_tol {
            break;
        }
        let (Ok(g), Ok(h)) = (p.grad_pi(&x), p.hess_pi(&x)) else {
            break;
        };
        let Some(mut d) = h.lu().solve(&(-g)) else {
            break;
        };
        let radius = 0.1 * (1.0 + x.norm());
        let dn = d.norm();
        if !dn.is_finite() {
            break;
        }
        if dn > radius {
            d *= radius / dn;
        }
        let xn = &x + d;
        match p.residual(&xn) {
            Ok(rn) if rn < r => {
                x = xn;
                r = rn;
            }
            _ => break,
        }
    }
    x
}

/// Primal points on a pole `σ*` of a single-term problem where `f` lies
/// in the range of `G(σ*)`: `x = G⁺f + t v` with `v` spanning the null
/// space and `t` fixed by `Λ(x) = V*'(σ*)`.
pub fn recover_at_pole(
    p: &FixedPointProblem,
    pole: f64,
    tol: &SolverTolerances,
) -> Result<Vec<DVector<f64>>> {
    if p.m() != 1 {
        return Err(Error::Dimension(
            "pole recovery needs a one-dimensional dual space".into(),
        ));
    }
    let sigma = DVector::from_element(1, pole);
    let term = &p.terms()[0];
    let target = term.dvstar(pole).map_err(Error::term(0))?;
    let (eigs, vecs) = sorted_eigen(crate::dual::build_g(p, &sigma)?);
    let eps = singular_threshold(p, &sigma, tol).max(1e-9 * eigs.amax());
    let null: Vec<usize> = (0..eigs.len()).filter(|&k| eigs[k].abs() <= eps).collect();
    if null.is_empty() {
        return Ok(Vec::new());
    }
    let f = p.f();
    let leak: f64 = null
        .iter()
        .map(|&k| vecs.column(k).dot(f).powi(2))
        .sum::<f64>()
        .sqrt();
    if leak > 1e-10 * (1.0 + f.norm()) {
        return Ok(Vec::new());
    }
    if null.len() > 1 {
        return Err(Error::InvalidParameter(format!(
            "pole {pole:e} has a {}-dimensional null space: fixed points form a continuum",
            null.len()
        )));
    }
    let mut xp = DVector::zeros(p.n());
    for k in 0..eigs.len() {
        if k != null[0] {
            let v = vecs.column(k);
            xp += v * (v.dot(f) / eigs[k]);
        }
    }
    let v: DVector<f64> = vecs.column(null[0]).into_owned();
    // A v = v / σ*, and v ⟂ xp, so Λ(xp + t v) = Λ(xp) + t² / (2σ*)
    let t2 = 2.0 * pole * (target - term.measure(&xp));
    let scale = 1e-12 * (1.0 + target.abs());
    if t2 < -scale {
        Ok(Vec::new())
    } else if t2 <= scale {
        Ok(vec![xp])
    } else {
        let t = t2.sqrt();
        Ok(vec![&xp + &v * t, &xp - &v * t])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Dual search box; `None` uses [`ScanGrid::default_axes`].
    pub axes: Option<Vec<Axis>>,
    pub grid_steps: Option<usize>,
    pub tol: SolverTolerances,
    pub polish: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            axes: None,
            grid_steps: None,
            tol: SolverTolerances::default(),
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Ascending in `pi_value`.
    pub records: Vec<SolutionRecord>,
    pub dual_points: Vec<DualPoint>,
    pub poles: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl SolveReport {
    pub fn global(&self) -> Option<&SolutionRecord> {
        self.records
            .iter()
            .find(|r| r.stability == Stability::GlobalStable)
    }
}

fn finish_record(
    p: &FixedPointProblem,
    x: DVector<f64>,
    sigma: DVector<f64>,
    g_class: GClass,
    pid_value: f64,
    pole_branch: bool,
    tol: &SolverTolerances,
) -> Result<SolutionRecord> {
    let pi_value = p.eval_pi(&x)?;
    let gap = (pi_value - pid_value).abs();
    let fp_residual = p.residual(&x)?;
    let v = label_stability(p, &x, &sigma, tol)?;
    Ok(SolutionRecord {
        x,
        sigma,
        pi_value,
        pid_value,
        gap,
        fp_residual,
        g_class,
        stability: v.label,
        stability_source: v.source,
        triality: v.triality,
        fallback: v.fallback,
        disagreement: v.disagreement,
        pole_branch,
    })
}

/// Dual search, recovery, polish, verification and labelling.
pub fn solve(p: &FixedPointProblem, opts: &SolveOptions) -> Result<SolveReport> {
    let tol = &opts.tol;
    let axes = opts
        .axes
        .clone()
        .unwrap_or_else(|| ScanGrid::default_axes(p, opts.grid_steps));
    let axes = match opts.grid_steps {
        Some(steps) => axes.into_iter().map(|a| Axis { steps, ..a }).collect(),
        None => axes,
    };
    let grid = ScanGrid::new(p, axes, tol)?;
    let search = find_dual_stationary_points(p, &grid, tol)?;
    let mut diagnostics = search.notes.clone();
    if search.diverged_seeds > 0 {
        diagnostics.push(format!(
            "{} seeds abandoned without converging",
            search.diverged_seeds
        ));
    }

    let mut records = Vec::new();
    for dp in &search.points {
        match verify_dual_point(p, dp, opts) {
            Ok(rec) => records.push(rec),
            Err(msg) => diagnostics.push(msg),
        }
    }

    for &pole in &search.poles {
        match recover_at_pole(p, pole, tol) {
            Ok(xs) => {
                for x0 in xs {
                    let sigma = DVector::from_element(1, pole);
                    let x = if opts.polish {
                        polish_primal(p, &x0, tol)
                    } else {
                        x0
                    };
                    let rec = complementary(p, &x, &sigma).and_then(|xi| {
                        finish_record(p, x, sigma.clone(), GClass::NearSingular, xi, true, tol)
                    });
                    match rec {
                        Ok(r) if r.gap <= tol.gap_tol && r.fp_residual <= tol.res_tol => {
                            records.push(r)
                        }
                        Ok(r) => diagnostics.push(format!(
                            "pole sigma = {pole:.6e}: rejected (gap {:.3e}, residual {:.3e})",
                            r.gap, r.fp_residual
                        )),
                        Err(e) => diagnostics.push(format!("pole sigma = {pole:.6e}: {e}")),
                    }
                }
            }
            Err(e) => diagnostics.push(format!("pole sigma = {pole:.6e}: {e}")),
        }
    }

    for r in records.iter().filter(|r| r.disagreement) {
        diagnostics.push(format!(
            "WARNING: triality verdict '{}' contradicted by primal Hessian ({}) at sigma = {:?}",
            r.triality,
            r.fallback,
            r.sigma.as_slice()
        ));
    }
    records.sort_by(|a, b| a.pi_value.total_cmp(&b.pi_value));
    Ok(SolveReport {
        records,
        dual_points: search.points,
        poles: search.poles,
        diagnostics,
    })
}

fn verify_dual_point(
    p: &FixedPointProblem,
    dp: &DualPoint,
    opts: &SolveOptions,
) -> Result<SolutionRecord, String> {
    let tol = &opts.tol;
    let at = |e: &dyn fmt::Display| format!("sigma = {:?}: {e}", dp.sigma.as_slice());
    let x0 = recover_primal(p, dp, tol).map_err(|e| at(&e))?;
    let gap0 = (p.eval_pi(&x0).map_err(|e| at(&e))? - dp.value).abs();
    if gap0 > tol.gap_tol {
        return Err(at(&format!(
            "duality gap {gap0:.3e} exceeds {:.1e}",
            tol.gap_tol
        )));
    }
    if !opts.polish {
        return finish_record(p, x0, dp.sigma.clone(), dp.g_class, dp.value, false, tol)
            .map_err(|e| at(&e));
    }
    let x = polish_primal(p, &x0, tol);
    // re-pair through the duality map so (x, σ) stay conjugate
    let sigma = DVector::from_iterator(
        p.m(),
        p.terms()
            .iter()
            .map(|t| t.dv(t.measure(&x)).unwrap_or(f64::NAN)),
    );
    let (sigma, g_class, pid) = match DualEval::new(p, &sigma, tol) {
        Ok(ev) if (&sigma - &dp.sigma).norm() <= 1e-6 * (1.0 + dp.sigma.norm()) => {
            (sigma, ev.g_class(), ev.value())
        }
        _ => (dp.sigma.clone(), dp.g_class, dp.value),
    };
    let rec = finish_record(p, x, sigma, g_class, pid, false, tol).map_err(|e| at(&e))?;
    if rec.gap > tol.gap_tol || rec.fp_residual > tol.res_tol {
        return Err(at(&format!(
            "rejected after polish (gap {:.3e}, residual {:.3e})",
            rec.gap, rec.fp_residual
        )));
    }
    Ok(rec)
}
