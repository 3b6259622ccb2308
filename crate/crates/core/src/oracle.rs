//! Brute-force primal validator.
//!
//! Attacks `∇Π(x) = 0` directly from many low-discrepancy starts, with no
//! use of the dual machinery, and pairs the result with the dual pipeline.

use std::cmp::Ordering;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dual::sorted_eigen;
use crate::error::{Error, Result};
use crate::problem::FixedPointProblem;
use crate::recovery::SolutionRecord;

pub const MAX_ORACLE_DIM: usize = 6;
const ACCEPT_GRAD: f64 = 1e-8;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub x: DVector<f64>,
    pub pi_value: f64,
    pub grad_norm: f64,
    /// Counts of negative, near-zero and positive Hessian eigenvalues.
    pub hess_signature: (usize, usize, usize),
}

/// First primes, one Halton base per coordinate.
const PRIMES: [u64; MAX_ORACLE_DIM] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

fn seed_offset(seed: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) % (1 << 20)
}

/// Halton points in the box, starting at a seed-dependent index.
pub fn halton_starts(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<DVector<f64>> {
    let off = seed_offset(seed) + 1;
    (0..count as u64)
        .map(|k| {
            DVector::from_iterator(
                bounds.len(),
                bounds
                    .iter()
                    .zip(PRIMES)
                    .map(|(&(lo, hi), b)| lo + (hi - lo) * radical_inverse(off + k, b)),
            )
        })
        .collect()
}

fn merit(p: &FixedPointProblem, x: &DVector<f64>) -> Option<f64> {
    p.grad_pi(x).ok().map(|g| g.norm_squared())
}

/// Pushes `x` out of a log singularity along the dominant direction of
/// the offending term.
fn project_outward(p: &FixedPointProblem, x: &DVector<f64>) -> DVector<f64> {
    let mut y = x.clone();
    for t in p.terms() {
        if !t.primal_contains(t.measure(&y)) {
            let (_, vecs) = sorted_eigen(t.metric().clone());
            let u = vecs.column(vecs.ncols() - 1).into_owned();
            y += u * 1e-6;
        }
    }
    y
}

fn newton_from(p: &FixedPointProblem, start: &DVector<f64>) -> Option<DVector<f64>> {
    let mut x = start.clone();
    if merit(p, &x).is_none() {
        x = project_outward(p, &x);
    }
    let mut m = merit(p, &x)?;
    for _ in 0..MAX_ITER {
        if m.sqrt() <= 1e-3 * ACCEPT_GRAD {
            break;
        }
        let g = p.grad_pi(&x).ok()?;
        let h = p.hess_pi(&x).ok()?;
        let d = h.lu().solve(&(-g))?;
        if !d.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut t = 1.0;
        loop {
            let trial = &x + &d * t;
            if let Some(mt) = merit(p, &trial) {
                if mt <= m * (1.0 - 2e-4 * t) {
                    x = trial;
                    m = mt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return (m.sqrt() <= ACCEPT_GRAD).then_some(x);
            }
        }
    }
    (m.sqrt() <= ACCEPT_GRAD).then_some(x)
}

fn lex(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Stationary points of `Π` found by damped Newton from `n_starts` Halton
/// starts in `bounds`. Deterministic in `seed`.
pub fn multistart_stationary_search(
    p: &FixedPointProblem,
    bounds: &[(f64, f64)],
    n_starts: usize,
    seed: u64,
) -> Result<Vec<OraclePoint>> {
    if p.n() > MAX_ORACLE_DIM {
        return Err(Error::Dimension(format!(
            "oracle is limited to n <= {MAX_ORACLE_DIM}, got {}",
            p.n()
        )));
    }
    if bounds.len() != p.n() {
        return Err(Error::Dimension(format!(
            "oracle box has {} axes, expected n = {}",
            bounds.len(),
            p.n()
        )));
    }
    if bounds
        .iter()
        .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(Error::InvalidParameter(
            "oracle box needs finite lo < hi".into(),
        ));
    }
    let starts = halton_starts(bounds, n_starts, seed);
    let mut hits: Vec<DVector<f64>> = starts
        .par_iter()
        .filter_map(|s| newton_from(p, s))
        .collect();
    hits.sort_by(lex);

    let mut reps: Vec<DVector<f64>> = Vec::new();
    for x in hits {
        if !reps
            .iter()
            .any(|r| (r - &x).norm() <= 1e-5 * (1.0 + r.norm()))
        {
            reps.push(x);
        }
    }
    let mut points = reps
        .into_iter()
        .map(|x| {
            let pi_value = p.eval_pi(&x)?;
            let grad_norm = p.grad_pi(&x)?.norm();
            let (eigs, _) = sorted_eigen(p.hess_pi(&x)?);
            let eps = 1e-8 * (1.0 + eigs.amax());
            let neg = eigs.iter().filter(|e| **e < -eps).count();
            let pos = eigs.iter().filter(|e| **e > eps).count();
            Ok(OraclePoint {
                x,
                pi_value,
                grad_norm,
                hess_signature: (neg, eigs.len() - neg - pos, pos),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.pi_value
            .total_cmp(&b.pi_value)
            .then_with(|| lex(&a.x, &b.x))
    });
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub record: usize,
    pub oracle: usize,
    pub distance: f64,
    pub value_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub points: Vec<OraclePoint>,
    pub matched: Vec<Match>,
    /// Oracle points with no dual counterpart (indices into `points`).
    pub unmatched_oracle: Vec<usize>,
    /// Records with no oracle counterpart (indices into the record list).
    pub unmatched_dual: Vec<usize>,
    /// Matches whose values differ by more than `1e-4`.
    pub value_mismatches: Vec<usize>,
}

impl OracleReport {
    pub fn is_clean(&self) -> bool {
        self.unmatched_oracle.is_empty()
            && self.unmatched_dual.is_empty()
            && self.value_mismatches.is_empty()
    }
}

pub const VALUE_MISMATCH: f64 = 1e-4;

/// Greedy nearest pairing of dual records with oracle points; a pair is
/// admissible within `1e-3 (1 + ‖x‖)`.
pub fn cross_validate(records: &[SolutionRecord], oracle: &[OraclePoint]) -> OracleReport {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for (j, o) in oracle.iter().enumerate() {
            let d = (&r.x - &o.x).norm();
            if d <= 1e-3 * (1.0 + r.x.norm()) {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_r = vec![false; records.len()];
    let mut used_o = vec![false; oracle.len()];
    let mut matched = Vec::new();
    for (d, i, j) in pairs {
        if used_r[i] || used_o[j] {
            continue;
        }
        used_r[i] = true;
        used_o[j] = true;
        matched.push(Match {
            record: i,
            oracle: j,
            distance: d,
            value_diff: (records[i].pi_value - oracle[j].pi_value).abs(),
        });
    }
    matched.sort_by_key(|m| m.record);
    let value_mismatches = matched
        .iter()
        .enumerate()
        .filter(|(_, m)| m.value_diff > VALUE_MISMATCH)
        .map(|(k, _)| k)
        .collect();
    OracleReport {
        points: oracle.to_vec(),
        matched,
        unmatched_oracle: (0..oracle.len()).filter(|&j| !used_o[j]).collect(),
        unmatched_dual: (0..records.len()).filter(|&i| !used_r[i]).collect(),
        value_mismatches,
    }
}
