//! Canonical dual function
//!
//! `Π^d(σ) = −½ fᵀ G(σ)⁻¹ f − Σ V_i*(σ_i)`, `G(σ) = Σ σ_i A_i − I`,
//!
//! its derivatives, the definiteness classification of `G`, and the search
//! for every stationary point of `Π^d` inside a box of the dual space.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::FixedPointProblem;
use crate::roots::newton_bisect;

/// Numerical thresholds shared by the dual search and the primal checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Stationarity tolerance on `‖∇Π^d‖`, relative to `1 + max_i |V_i*'(σ_i)|`.
    pub gtol: f64,
    pub max_newton: usize,
    /// Relative definiteness threshold: `eps_def = def_rel · (1 + ‖σ‖ max_i ‖A_i‖)`.
    pub def_rel: f64,
    /// Dual points closer than `dedup_rel · (1 + ‖σ‖)` are merged.
    pub dedup_rel: f64,
    /// Accepted duality gap before the primal polish.
    pub gap_tol: f64,
    /// Accepted fixed-point residual after the primal polish.
    pub res_tol: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            gtol: 1e-10,
            max_newton: 100,
            def_rel: 1e-8,
            dedup_rel: 1e-6,
            gap_tol: 1e-6,
            res_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GClass {
    PosDef,
    NegDef,
    Indefinite,
    NearSingular,
}

impl fmt::Display for GClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GClass::PosDef => "PosDef",
            GClass::NegDef => "NegDef",
            GClass::Indefinite => "Indefinite",
            GClass::NearSingular => "NearSingular",
        })
    }
}

/// Definiteness class of `G(σ)` with its ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct GClassification {
    pub class: GClass,
    pub eigenvalues: DVector<f64>,
    pub threshold: f64,
}

/// A stationary point of `Π^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub sigma: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub g_class: GClass,
    pub g_eigs: DVector<f64>,
}

fn check_sigma_len(p: &FixedPointProblem, sigma: &DVector<f64>) -> Result<()> {
    if sigma.len() == p.m() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "dual point has length {}, expected m = {}",
            sigma.len(),
            p.m()
        )))
    }
}

/// `G(σ) = Σ σ_i A_i − I`.
pub fn build_g(p: &FixedPointProblem, sigma: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_sigma_len(p, sigma)?;
    let n = p.n();
    let mut g = -DMatrix::<f64>::identity(n, n);
    for (t, s) in p.terms().iter().zip(sigma.iter()) {
        g += t.metric() * *s;
    }
    Ok(g)
}

/// Scale-aware threshold below which an eigenvalue of `G` counts as zero.
pub fn singular_threshold(
    p: &FixedPointProblem,
    sigma: &DVector<f64>,
    tol: &SolverTolerances,
) -> f64 {
    let a_max = p
        .terms()
        .iter()
        .map(|t| t.metric_norm())
        .fold(0.0, f64::max);
    tol.def_rel * (1.0 + sigma.norm() * a_max)
}

fn classify_eigs(eigs: &DVector<f64>, eps: f64) -> GClass {
    if eigs.iter().any(|e| e.abs() <= eps) {
        GClass::NearSingular
    } else if eigs.min() > eps {
        GClass::PosDef
    } else if eigs.max() < -eps {
        GClass::NegDef
    } else {
        GClass::Indefinite
    }
}

/// Ascending eigen-decomposition of a symmetric matrix.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn classify_g(
    p: &FixedPointProblem,
    sigma: &DVector<f64>,
    tol: &SolverTolerances,
) -> Result<GClassification> {
    let g = build_g(p, sigma)?;
    let (eigenvalues, _) = sorted_eigen(g);
    let threshold = singular_threshold(p, sigma, tol);
    Ok(GClassification {
        class: classify_eigs(&eigenvalues, threshold),
        eigenvalues,
        threshold,
    })
}

/// Factorized `G(σ)` and the recovered primal `x(σ) = G(σ)⁻¹ f`; all
/// dual quantities at `σ` are evaluated from it.
#[derive(Debug, Clone)]
pub struct DualEval<'p> {
    problem: &'p FixedPointProblem,
    sigma: DVector<f64>,
    eigs: DVector<f64>,
    vecs: DMatrix<f64>,
    threshold: f64,
    x: DVector<f64>,
}

impl<'p> DualEval<'p> {
    pub fn new(
        p: &'p FixedPointProblem,
        sigma: &DVector<f64>,
        tol: &SolverTolerances,
    ) -> Result<Self> {
        check_sigma_len(p, sigma)?;
        for (i, (t, s)) in p.terms().iter().zip(sigma.iter()).enumerate() {
            if !t.dual_domain().contains(*s) {
                return Err(Error::Term {
                    index: i,
                    source: crate::error::TermError::DualDomain { sigma: *s },
                });
            }
        }
        let (eigs, vecs) = sorted_eigen(build_g(p, sigma)?);
        let threshold = singular_threshold(p, sigma, tol);
        let min_abs = eigs.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
        if min_abs <= threshold {
            return Err(Error::Pole {
                min_abs_eig: min_abs,
                threshold,
            });
        }
        let mut ev = Self {
            problem: p,
            sigma: sigma.clone(),
            eigs,
            vecs,
            threshold,
            x: DVector::zeros(0),
        };
        ev.x = ev.solve(p.f());
        Ok(ev)
    }

    /// Solves `G y = rhs` through the spectral factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut c = self.vecs.tr_mul(rhs);
        c.component_div_assign(&self.eigs);
        &self.vecs * c
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    /// `x(σ) = G(σ)⁻¹ f`.
    pub fn primal(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn g_eigs(&self) -> &DVector<f64> {
        &self.eigs
    }

    pub fn g_class(&self) -> GClass {
        classify_eigs(&self.eigs, self.threshold)
    }

    pub fn value(&self) -> f64 {
        let q = -0.5 * self.problem.f().dot(&self.x);
        let vs: f64 = self
            .problem
            .terms()
            .iter()
            .zip(self.sigma.iter())
            .map(|(t, s)| t.vstar(*s).expect("sigma checked in dual domain"))
            .sum();
        q - vs
    }

    /// Residuals of the canonical equations `Λ_i(x(σ)) − V_i*'(σ_i)`.
    pub fn gradient(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.problem.m(),
            self.problem
                .terms()
                .iter()
                .zip(self.sigma.iter())
                .map(|(t, s)| {
                    t.measure(&self.x) - t.dvstar(*s).expect("sigma checked in dual domain")
                }),
        )
    }

    /// `H_ij = −(A_i x)ᵀ G⁻¹ (A_j x) − δ_ij V_i*''(σ_i)`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let m = self.problem.m();
        let ax: Vec<DVector<f64>> = self
            .problem
            .terms()
            .iter()
            .map(|t| t.metric() * &self.x)
            .collect();
        let gax: Vec<DVector<f64>> = ax.iter().map(|v| self.solve(v)).collect();
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = -ax[i].dot(&gax[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
            let t = &self.problem.terms()[i];
            h[(i, i)] -= t
                .d2vstar(self.sigma[i])
                .expect("sigma checked in dual domain");
        }
        h
    }

    /// Tolerance scale for the gradient: `1 + max_i |V_i*'(σ_i)|`.
    pub fn grad_scale(&self) -> f64 {
        1.0 + self
            .problem
            .terms()
            .iter()
            .zip(self.sigma.iter())
            .map(|(t, s)| t.dvstar(*s).map(f64::abs).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn is_stationary(&self, tol: &SolverTolerances) -> bool {
        self.gradient().norm() <= tol.gtol * self.grad_scale()
    }

    fn to_point(&self) -> DualPoint {
        DualPoint {
            sigma: self.sigma.clone(),
            value: self.value(),
            grad_norm: self.gradient().norm(),
            g_class: self.g_class(),
            g_eigs: self.eigs.clone(),
        }
    }
}

pub fn eval_pid(p: &FixedPointProblem, sigma: &DVector<f64>) -> Result<f64> {
    Ok(DualEval::new(p, sigma, &SolverTolerances::default())?.value())
}

pub fn grad_pid(p: &FixedPointProblem, sigma: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(DualEval::new(p, sigma, &SolverTolerances::default())?.gradient())
}

pub fn hess_pid(p: &FixedPointProblem, sigma: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(DualEval::new(p, sigma, &SolverTolerances::default())?.hessian())
}

/// Roots of `det G(σ)` for a single-term problem: `σ = 1/λ` for each
/// positive eigenvalue `λ` of `A`, ascending and deduplicated.
pub fn single_term_poles(p: &FixedPointProblem) -> Vec<f64> {
    if p.m() != 1 {
        return Vec::new();
    }
    let t = &p.terms()[0];
    let (eigs, _) = sorted_eigen(t.metric().clone());
    let floor = 1e-12 * t.metric_norm().max(f64::MIN_POSITIVE);
    let mut poles: Vec<f64> = eigs
        .iter()
        .filter(|&&l| l > floor)
        .map(|l| 1.0 / l)
        .collect();
    poles.sort_by(f64::total_cmp);
    poles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()));
    poles
}

/// One axis of a rectangular dual grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.steps {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.steps - 1) as f64
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.steps - 1) as f64
    }
}

pub const DEFAULT_HALF_WIDTH: f64 = 200.0;
pub const DEFAULT_STEPS: usize = 401;
pub const DEFAULT_STEPS_HIGH_DIM: usize = 51;

/// Rectangular grid over the dual box with a mask of unusable nodes
/// (outside a dual domain or on a pole of `G`). Nodes are ordered with
/// the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    axes: Vec<Axis>,
    mask: Vec<bool>,
}

impl ScanGrid {
    pub fn new(p: &FixedPointProblem, axes: Vec<Axis>, tol: &SolverTolerances) -> Result<Self> {
        if axes.len() != p.m() {
            return Err(Error::Dimension(format!(
                "grid has {} axes, expected m = {}",
                axes.len(),
                p.m()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(Error::InvalidParameter(format!(
                    "axis {i}: need finite lo < hi, got [{}, {}]",
                    a.lo, a.hi
                )));
            }
            if a.steps < 2 {
                return Err(Error::InvalidParameter(format!(
                    "axis {i}: need at least 2 steps"
                )));
            }
        }
        let mut grid = Self {
            axes,
            mask: Vec::new(),
        };
        grid.mask = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let s = grid.node(k);
                match DualEval::new(p, &s, tol) {
                    Ok(_) => false,
                    Err(Error::Pole { .. }) | Err(Error::Term { .. }) => true,
                    Err(_) => true,
                }
            })
            .collect();
        Ok(grid)
    }

    /// Default box `[−200, 200]` per axis intersected with the dual
    /// domains; 401 nodes per axis for `m ≤ 2`, 51 beyond.
    pub fn default_axes(p: &FixedPointProblem, steps: Option<usize>) -> Vec<Axis> {
        let steps = steps.unwrap_or(if p.m() <= 2 {
            DEFAULT_STEPS
        } else {
            DEFAULT_STEPS_HIGH_DIM
        });
        p.terms()
            .iter()
            .map(|t| {
                let d = t.dual_domain();
                Axis {
                    lo: (-DEFAULT_HALF_WIDTH).max(d.lo),
                    hi: DEFAULT_HALF_WIDTH.min(d.hi),
                    steps,
                }
            })
            .collect()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.steps).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, mut k: usize) -> DVector<f64> {
        let m = self.axes.len();
        let mut s = DVector::zeros(m);
        for i in (0..m).rev() {
            let a = &self.axes[i];
            s[i] = a.node(k % a.steps);
            k /= a.steps;
        }
        s
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn contains(&self, s: &DVector<f64>) -> bool {
        self.axes.iter().zip(s.iter()).all(|(a, v)| {
            let slack = 1e-9 * (a.hi - a.lo);
            *v >= a.lo - slack && *v <= a.hi + slack
        })
    }
}

/// One row of a landscape export; `pid` is `None` on masked nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub sigma: DVector<f64>,
    pub pid: Option<f64>,
}

/// Evaluates `Π^d` over the grid. For a one-dimensional dual space the
/// located poles inside the box are inserted as masked rows.
pub fn scan_landscape(
    p: &FixedPointProblem,
    grid: &ScanGrid,
    tol: &SolverTolerances,
) -> Vec<ScanRow> {
    let mut rows: Vec<ScanRow> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let sigma = grid.node(k);
            let pid = if grid.is_masked(k) {
                None
            } else {
                DualEval::new(p, &sigma, tol).ok().map(|e| e.value())
            };
            ScanRow { sigma, pid }
        })
        .collect();
    if p.m() == 1 {
        for pole in single_term_poles(p) {
            let s = DVector::from_element(1, pole);
            if grid.contains(&s) {
                rows.push(ScanRow {
                    sigma: s,
                    pid: None,
                });
            }
        }
        rows.sort_by(|a, b| a.sigma[0].total_cmp(&b.sigma[0]));
    }
    rows
}

/// Result of [`find_dual_stationary_points`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualSearch {
    pub points: Vec<DualPoint>,
    /// Poles of `G` inside the box (one-dimensional dual space only).
    pub poles: Vec<f64>,
    /// Seeds whose Newton iteration was abandoned.
    pub diverged_seeds: usize,
    pub notes: Vec<String>,
}

/// Finds the stationary points of `Π^d` inside the grid box.
///
/// One-dimensional dual spaces are split at the poles of `G` and at the
/// domain edges; each piece is sampled, sign changes of `dΠ^d/dσ` are
/// bracketed and refined by safeguarded Newton–bisection. Higher
/// dimensions run damped Newton on `∇Π^d` from every unmasked node.
pub fn find_dual_stationary_points(
    p: &FixedPointProblem,
    grid: &ScanGrid,
    tol: &SolverTolerances,
) -> Result<DualSearch> {
    if grid.axes().len() != p.m() {
        return Err(Error::Dimension(
            "grid does not match the dual dimension".into(),
        ));
    }
    let mut search = if p.m() == 1 {
        search_1d(p, grid, tol)
    } else {
        search_nd(p, grid, tol)
    };
    if p.m() == 1 {
        search
            .points
            .sort_by(|a, b| b.sigma[0].total_cmp(&a.sigma[0]));
    } else {
        search.points.sort_by(|a, b| b.value.total_cmp(&a.value));
    }
    if search.points.is_empty() {
        search.notes.push("no stationary point in box".into());
    }
    Ok(search)
}

const CLUSTER_NODES: usize = 64;

fn search_1d(p: &FixedPointProblem, grid: &ScanGrid, tol: &SolverTolerances) -> DualSearch {
    let axis = grid.axes()[0];
    let dom = p.terms()[0].dual_domain();
    let lo = axis.lo.max(dom.lo);
    let hi = axis.hi.min(dom.hi);
    let mut notes = Vec::new();
    let mut found: Vec<f64> = Vec::new();
    let mut diverged = 0;
    if lo.partial_cmp(&hi) != Some(Ordering::Less) {
        return DualSearch {
            points: Vec::new(),
            poles: Vec::new(),
            diverged_seeds: 0,
            notes: vec!["search box does not meet the dual domain".into()],
        };
    }
    let poles: Vec<f64> = single_term_poles(p)
        .into_iter()
        .filter(|&s| s > lo && s < hi)
        .collect();

    // breakpoints: (value, closed?) where closed ends may be sampled
    let mut cuts: Vec<(f64, bool)> = vec![(lo, lo > dom.lo)];
    cuts.extend(poles.iter().map(|&s| (s, false)));
    cuts.push((hi, hi < dom.hi));

    let eval = |s: f64| -> Option<(f64, f64)> {
        let e = DualEval::new(p, &DVector::from_element(1, s), tol).ok()?;
        Some((e.gradient()[0], e.hessian()[(0, 0)]))
    };
    let grad = |s: f64| eval(s).map(|v| v.0);

    for w in cuts.windows(2) {
        let (a, a_closed) = w[0];
        let (b, b_closed) = w[1];
        let mut samples: Vec<f64> = (0..axis.steps)
            .map(|k| axis.node(k))
            .filter(|&s| s > a && s < b)
            .collect();
        for j in 1..CLUSTER_NODES {
            let u = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / CLUSTER_NODES as f64).cos());
            samples.push(a + (b - a) * u);
        }
        if a_closed {
            samples.push(a);
        }
        if b_closed {
            samples.push(b);
        }
        samples.retain(|&s| s >= a && s <= b);
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        let vals: Vec<(f64, f64)> = samples
            .iter()
            .filter_map(|&s| grad(s).map(|g| (s, g)))
            .collect();

        let mut brackets: Vec<(f64, f64)> = Vec::new();
        for (i, pair) in vals.windows(2).enumerate() {
            let ((s0, g0), (s1, g1)) = (pair[0], pair[1]);
            if g0 == 0.0 {
                brackets.push((s0, s0));
            } else if g0.signum() != g1.signum() {
                brackets.push((s0, s1));
            }
            // same-sign dip: look for a hidden pair of roots
            if i + 2 < vals.len() {
                let (s2, g2) = vals[i + 2];
                if g0.signum() == g1.signum()
                    && g1.signum() == g2.signum()
                    && g1.abs() < g0.abs()
                    && g1.abs() < g2.abs()
                {
                    let sg = g1.signum();
                    if let Some(smin) = golden_min(|s| grad(s).map(|g| sg * g), s0, s2) {
                        if let Some(gm) = grad(smin) {
                            if gm.signum() != sg {
                                brackets.push((s0, smin));
                                brackets.push((smin, s2));
                            }
                        }
                    }
                }
            }
        }
        if let Some(&(s, g)) = vals.last() {
            if g == 0.0 {
                brackets.push((s, s));
            }
        }
        for (x0, x1) in brackets {
            let root = if x0 == x1 {
                Some(x0)
            } else {
                match newton_bisect(eval, x0, x1, 0.0, 200) {
                    Ok(r) => Some(r.x),
                    Err(_) => {
                        diverged += 1;
                        None
                    }
                }
            };
            if let Some(r) = root {
                found.push(r);
            }
        }
    }

    let mut points: Vec<DualPoint> = Vec::new();
    for s in found {
        let sig = DVector::from_element(1, s);
        match DualEval::new(p, &sig, tol) {
            Ok(e) if e.is_stationary(tol) => {
                if !points
                    .iter()
                    .any(|q| (q.sigma[0] - s).abs() <= tol.dedup_rel * (1.0 + s.abs()))
                {
                    points.push(e.to_point());
                }
            }
            Ok(e) => {
                diverged += 1;
                notes.push(format!(
                    "rejected bracket root sigma = {s:e}: |grad| = {:e}",
                    e.gradient().norm()
                ));
            }
            Err(err) => {
                diverged += 1;
                notes.push(format!("rejected bracket root sigma = {s:e}: {err}"));
            }
        }
    }
    DualSearch {
        points,
        poles,
        diverged_seeds: diverged,
        notes,
    }
}

/// Golden-section minimizer of a unimodal-ish function on `[a, b]`.
fn golden_min<F: Fn(f64) -> Option<f64>>(f: F, mut a: f64, mut b: f64) -> Option<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Damped Newton on `∇Π^d = 0` with Armijo backtracking on `‖∇Π^d‖²`.
pub fn dual_newton(
    p: &FixedPointProblem,
    seed: &DVector<f64>,
    tol: &SolverTolerances,
    max_step: f64,
) -> Option<DVector<f64>> {
    let mut s = seed.clone();
    let mut ev = DualEval::new(p, &s, tol).ok()?;
    let mut g = ev.gradient();
    for _ in 0..tol.max_newton {
        if g.norm() <= tol.gtol * ev.grad_scale() {
            return Some(s);
        }
        let h = ev.hessian();
        let mut d = h.lu().solve(&(-&g))?;
        if !d.iter().all(|v| v.is_finite()) {
            return None;
        }
        let dn = d.norm();
        if dn > max_step {
            d *= max_step / dn;
        }
        let merit = g.norm_squared();
        let mut t = 1.0;
        loop {
            let trial = &s + &d * t;
            if let Ok(e2) = DualEval::new(p, &trial, tol) {
                let g2 = e2.gradient();
                if g2.norm_squared() <= merit * (1.0 - 2e-4 * t) {
                    s = trial;
                    ev = e2;
                    g = g2;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                // stalled; accept only if already stationary to tolerance
                return (g.norm() <= tol.gtol * ev.grad_scale()).then_some(s);
            }
        }
    }
    (g.norm() <= tol.gtol * ev.grad_scale()).then_some(s)
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn search_nd(p: &FixedPointProblem, grid: &ScanGrid, tol: &SolverTolerances) -> DualSearch {
    let mut notes = Vec::new();
    if p.m() >= 3 {
        notes.push(format!(
            "dual dimension {} uses {} seeds; cost grows as steps^m",
            p.m(),
            grid.len()
        ));
    }
    let diameter = grid
        .axes()
        .iter()
        .map(|a| (a.hi - a.lo).powi(2))
        .sum::<f64>()
        .sqrt();
    let results: Vec<Option<DVector<f64>>> = (0..grid.len())
        .into_par_iter()
        .filter(|&k| !grid.is_masked(k))
        .map(|k| dual_newton(p, &grid.node(k), tol, diameter))
        .collect();
    let diverged = results.iter().filter(|r| r.is_none()).count();
    let mut converged: Vec<DVector<f64>> = results
        .into_iter()
        .flatten()
        .filter(|s| grid.contains(s))
        .collect();
    converged.sort_by(lex_cmp);

    let mut reps: Vec<DVector<f64>> = Vec::new();
    for s in converged {
        if !reps
            .iter()
            .any(|r| (r - &s).norm() <= tol.dedup_rel * (1.0 + r.norm()))
        {
            reps.push(s);
        }
    }
    let points = reps
        .iter()
        .filter_map(|s| DualEval::new(p, s, tol).ok().map(|e| e.to_point()))
        .collect();
    DualSearch {
        points,
        poles: Vec::new(),
        diverged_seeds: diverged,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::terms::CanonicalTerm;
    use nalgebra::{dmatrix, dvector};

    fn tol() -> SolverTolerances {
        SolverTolerances::default()
    }

    #[test]
    fn g_matrix_examples() {
        let p2 = catalog::example2();
        let g = build_g(&p2, &dvector![0.969642]).unwrap();
        assert!((g[(0, 0)] - 16.4536).abs() < 1e-3);
        assert!((g[(1, 1)] - 30.0285).abs() < 1e-3);
        assert_eq!(g[(0, 1)], 0.0);

        let p3 = catalog::example3();
        let g = build_g(&p3, &dvector![1.0]).unwrap();
        let want = dmatrix![0.0, 1.28; 1.28, 0.78];
        assert!((g - want).amax() < 1e-12);

        let g = build_g(&catalog::example1(), &dvector![0.0, 0.0]).unwrap();
        assert_eq!(g, -DMatrix::identity(2, 2));
    }

    #[test]
    fn dual_values() {
        let v = eval_pid(&catalog::example1(), &dvector![7.38697, -1.39206]).unwrap();
        assert!((v - 6.78671).abs() < 1e-4);
        let v = eval_pid(&catalog::example3(), &dvector![20.396]).unwrap();
        assert!((v + 190.381).abs() < 1e-3);

        let t = CanonicalTerm::quartic(2.0, 1.0, dmatrix![1.0, 0.0; 0.0, 2.0]).unwrap();
        let p = FixedPointProblem::new(dvector![0.0, 0.0], vec![t.clone()]).unwrap();
        let s = dvector![-3.0];
        assert_eq!(eval_pid(&p, &s).unwrap(), -t.vstar(-3.0).unwrap());
        let h = hess_pid(&p, &s).unwrap();
        assert_eq!(h[(0, 0)], -0.5);
    }

    #[test]
    fn paper_critical_points_are_stationary() {
        let g = grad_pid(&catalog::example2(), &dvector![0.969642]).unwrap();
        assert!(g.norm() < 1e-4);
        let g = grad_pid(&catalog::example3(), &dvector![-52.7144]).unwrap();
        assert!(g.norm() < 1e-3);
        let h = hess_pid(&catalog::example2(), &dvector![0.969642]).unwrap();
        assert!(h[(0, 0)] < 0.0);
    }

    #[test]
    fn pole_and_domain_errors() {
        let p3 = catalog::example3();
        let pole = single_term_poles(&p3)[1];
        assert!(matches!(
            eval_pid(&p3, &dvector![pole]),
            Err(Error::Pole { .. })
        ));
        let p1 = catalog::example1();
        assert!(matches!(
            eval_pid(&p1, &dvector![-1.0, 0.0]),
            Err(Error::Term { index: 0, .. })
        ));
        assert!(eval_pid(&p1, &dvector![1.0]).is_err());
    }

    #[test]
    fn classification() {
        let p3 = catalog::example3();
        assert_eq!(
            classify_g(&p3, &dvector![20.396], &tol()).unwrap().class,
            GClass::PosDef
        );
        assert_eq!(
            classify_g(&p3, &dvector![-0.881733], &tol()).unwrap().class,
            GClass::NegDef
        );
        assert_eq!(
            classify_g(&p3, &dvector![1.46219], &tol()).unwrap().class,
            GClass::Indefinite
        );
        let c = classify_g(&catalog::example1(), &dvector![0.0, 0.0], &tol()).unwrap();
        assert_eq!(c.class, GClass::NegDef);
        assert_eq!(c.eigenvalues, dvector![-1.0, -1.0]);
    }

    #[test]
    fn poles_are_reciprocal_eigenvalues() {
        let poles = single_term_poles(&catalog::example3());
        assert_eq!(poles.len(), 2);
        assert!((poles[0] - 0.367).abs() < 1e-3);
        assert!((poles[1] - 19.266).abs() < 1e-3);
        for s in poles {
            assert!(
                build_g(&catalog::example3(), &dvector![s])
                    .unwrap()
                    .determinant()
                    .abs()
                    < 1e-9
            );
        }
        assert_eq!(single_term_poles(&catalog::example1()), Vec::<f64>::new());
    }

    #[test]
    fn grid_nodes_and_mask() {
        let p1 = catalog::example1();
        let axes = vec![
            Axis {
                lo: -1.0,
                hi: 1.0,
                steps: 3,
            },
            Axis {
                lo: 0.0,
                hi: 2.0,
                steps: 5,
            },
        ];
        let g = ScanGrid::new(&p1, axes, &tol()).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.node(0), dvector![-1.0, 0.0]);
        assert_eq!(g.node(6), dvector![0.0, 0.5]);
        assert_eq!(g.node(14), dvector![1.0, 2.0]);
        // sigma_1 <= 0 is outside the exponential dual domain
        assert!((0..10).all(|k| g.is_masked(k)));
        assert!(ScanGrid::new(
            &p1,
            vec![
                Axis {
                    lo: 1.0,
                    hi: 0.0,
                    steps: 3
                };
                2
            ],
            &tol()
        )
        .is_err());
        assert!(ScanGrid::new(
            &p1,
            vec![
                Axis {
                    lo: 0.0,
                    hi: 1.0,
                    steps: 1
                };
                2
            ],
            &tol()
        )
        .is_err());
    }

    #[test]
    fn one_dimensional_search_finds_paper_roots() {
        let p2 = catalog::example2();
        let grid = ScanGrid::new(&p2, ScanGrid::default_axes(&p2, None), &tol()).unwrap();
        let r = find_dual_stationary_points(&p2, &grid, &tol()).unwrap();
        let s: Vec<f64> = r.points.iter().map(|d| d.sigma[0]).collect();
        let want = [0.969642, -0.955077, -91.0174];
        assert_eq!(s.len(), 3, "{s:?}");
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn scan_inserts_poles() {
        let p3 = catalog::example3();
        let grid = ScanGrid::new(&p3, ScanGrid::default_axes(&p3, Some(41)), &tol()).unwrap();
        let rows = scan_landscape(&p3, &grid, &tol());
        assert_eq!(rows.len(), 43);
        let masked: Vec<f64> = rows
            .iter()
            .filter(|r| r.pid.is_none())
            .map(|r| r.sigma[0])
            .collect();
        assert_eq!(masked.len(), 2);
        assert!((masked[0] - 0.367).abs() < 1e-3 && (masked[1] - 19.266).abs() < 1e-3);
    }
}
