//! Scalar canonical functions and their closed-form Legendre conjugates.
//!
//! Every term pairs a quadratic canonical measure `ξ = ½ xᵀ A x` with a
//! scalar function `V(ξ)` whose derivative is a bijection onto the dual
//! domain, so the conjugate `V*(σ)` and both duality maps are explicit.
//!
//! | family        | `V(ξ)`              | `V*(σ)`                       | dual domain |
//! |---------------|---------------------|-------------------------------|-------------|
//! | exponential   | `α e^ξ`             | `σ (ln(σ/α) − 1)`             | `(0, ∞)`    |
//! | quartic       | `½ β (ξ − λ)²`      | `σ²/(2β) + λσ`                | `ℝ`         |
//! | log-quadratic | `c₁ ξ + c₂ ξ ln ξ`  | `c₂ exp((σ − c₁)/c₂ − 1)`     | `ℝ`         |

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, TermError};

/// Smallest canonical measure accepted by the log-quadratic family.
pub const LOG_XI_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Exponential { alpha: f64 },
    Quartic { beta: f64, lambda: f64 },
    LogQuadratic { c1: f64, c2: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Exponential { .. } => "exponential",
            Family::Quartic { .. } => "quartic",
            Family::LogQuadratic { .. } => "log_quadratic",
        }
    }

    /// Scale `k` in `A = k DᵀD`.
    fn metric_scale(&self) -> f64 {
        match self {
            Family::Exponential { .. } | Family::Quartic { .. } => 1.0,
            Family::LogQuadratic { .. } => 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!(
                "{}: {what} must be finite and positive, got {v}",
                self.name()
            )))
        };
        match *self {
            Family::Exponential { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad("alpha", alpha)
            }
            Family::Quartic { beta, .. } if !(beta > 0.0 && beta.is_finite()) => bad("beta", beta),
            Family::Quartic { lambda, .. } if !lambda.is_finite() => Err(Error::InvalidParameter(
                format!("quartic: lambda must be finite, got {lambda}"),
            )),
            Family::LogQuadratic { c2, .. } if !(c2 > 0.0 && c2.is_finite()) => bad("c2", c2),
            Family::LogQuadratic { c1, .. } if !c1.is_finite() => Err(Error::InvalidParameter(
                format!("log_quadratic: c1 must be finite, got {c1}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v < self.hi
    }
}

/// One `(A_i, V_i)` pair of the canonical decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTerm {
    family: Family,
    d: DMatrix<f64>,
    a: DMatrix<f64>,
    a_norm: f64,
}

impl CanonicalTerm {
    /// Builds a term from its family and linear operator `D` (`m_i × n`).
    pub fn new(family: Family, d: DMatrix<f64>) -> Result<Self> {
        family.validate()?;
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(Error::Dimension("operator D must be non-empty".into()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "operator D has non-finite entries".into(),
            ));
        }
        let mut a = d.transpose() * &d * family.metric_scale();
        // symmetrize away rounding
        let at = a.transpose();
        a += at;
        a *= 0.5;
        let a_norm = a
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Ok(Self {
            family,
            d,
            a,
            a_norm,
        })
    }

    pub fn exponential(alpha: f64, d: DMatrix<f64>) -> Result<Self> {
        Self::new(Family::Exponential { alpha }, d)
    }

    pub fn quartic(beta: f64, lambda: f64, d: DMatrix<f64>) -> Result<Self> {
        Self::new(Family::Quartic { beta, lambda }, d)
    }

    pub fn log_quadratic(c1: f64, c2: f64, d: DMatrix<f64>) -> Result<Self> {
        Self::new(Family::LogQuadratic { c1, c2 }, d)
    }

    /// Same family, different operator.
    pub fn with_operator(&self, d: DMatrix<f64>) -> Result<Self> {
        Self::new(self.family, d)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Canonical-measure metric `A` (symmetric positive semidefinite).
    pub fn metric(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Spectral norm of `A`.
    pub fn metric_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    /// `ξ = ½ xᵀ A x`.
    pub fn measure(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x))
    }

    pub fn primal_contains(&self, xi: f64) -> bool {
        match self.family {
            Family::Exponential { .. } | Family::Quartic { .. } => xi >= 0.0,
            Family::LogQuadratic { .. } => xi > LOG_XI_FLOOR,
        }
    }

    pub fn dual_domain(&self) -> Interval {
        match self.family {
            Family::Exponential { .. } => Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            Family::Quartic { .. } | Family::LogQuadratic { .. } => Interval::REAL_LINE,
        }
    }

    fn check_primal(&self, xi: f64) -> Result<(), TermError> {
        if self.primal_contains(xi) {
            Ok(())
        } else {
            Err(TermError::PrimalDomain { xi })
        }
    }

    fn check_dual(&self, sigma: f64) -> Result<(), TermError> {
        if self.dual_domain().contains(sigma) {
            Ok(())
        } else {
            Err(TermError::DualDomain { sigma })
        }
    }

    pub fn v(&self, xi: f64) -> Result<f64, TermError> {
        self.check_primal(xi)?;
        Ok(match self.family {
            Family::Exponential { alpha } => alpha * xi.exp(),
            Family::Quartic { beta, lambda } => 0.5 * beta * (xi - lambda).powi(2),
            Family::LogQuadratic { c1, c2 } => c1 * xi + c2 * xi * xi.ln(),
        })
    }

    /// Duality map `σ = V'(ξ)`.
    pub fn dv(&self, xi: f64) -> Result<f64, TermError> {
        self.check_primal(xi)?;
        Ok(match self.family {
            Family::Exponential { alpha } => alpha * xi.exp(),
            Family::Quartic { beta, lambda } => beta * (xi - lambda),
            Family::LogQuadratic { c1, c2 } => c1 + c2 * (xi.ln() + 1.0),
        })
    }

    pub fn d2v(&self, xi: f64) -> Result<f64, TermError> {
        self.check_primal(xi)?;
        Ok(match self.family {
            Family::Exponential { alpha } => alpha * xi.exp(),
            Family::Quartic { beta, .. } => beta,
            Family::LogQuadratic { c2, .. } => c2 / xi,
        })
    }

    pub fn vstar(&self, sigma: f64) -> Result<f64, TermError> {
        self.check_dual(sigma)?;
        Ok(match self.family {
            Family::Exponential { alpha } => sigma * ((sigma / alpha).ln() - 1.0),
            Family::Quartic { beta, lambda } => sigma * sigma / (2.0 * beta) + lambda * sigma,
            Family::LogQuadratic { c1, c2 } => c2 * ((sigma - c1) / c2 - 1.0).exp(),
        })
    }

    /// Inverse duality map `ξ = V*'(σ)`.
    pub fn dvstar(&self, sigma: f64) -> Result<f64, TermError> {
        self.check_dual(sigma)?;
        Ok(match self.family {
            Family::Exponential { alpha } => (sigma / alpha).ln(),
            Family::Quartic { beta, lambda } => sigma / beta + lambda,
            Family::LogQuadratic { c1, c2 } => ((sigma - c1) / c2 - 1.0).exp(),
        })
    }

    pub fn d2vstar(&self, sigma: f64) -> Result<f64, TermError> {
        self.check_dual(sigma)?;
        Ok(match self.family {
            Family::Exponential { .. } => 1.0 / sigma,
            Family::Quartic { beta, .. } => 1.0 / beta,
            Family::LogQuadratic { c1, c2 } => ((sigma - c1) / c2 - 1.0).exp() / c2,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    fn exp6() -> CanonicalTerm {
        CanonicalTerm::exponential(6.0, eye(1)).unwrap()
    }

    fn quart() -> CanonicalTerm {
        CanonicalTerm::quartic(8.0, 1.0, eye(1)).unwrap()
    }

    fn logq() -> CanonicalTerm {
        CanonicalTerm::log_quadratic(-8.0, 10.0, eye(1)).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(exp6().v(0.0).unwrap(), 6.0);
        assert_eq!(quart().v(1.0).unwrap(), 0.0);
        assert_eq!(logq().v(1.0).unwrap(), -8.0);

        assert_eq!(exp6().dv(0.0).unwrap(), 6.0);
        assert_eq!(quart().dv(1.0).unwrap(), 0.0);
        assert_relative_eq!(logq().dv((-1.0f64).exp()).unwrap(), -8.0, epsilon = 1e-14);

        assert_eq!(exp6().vstar(6.0).unwrap(), -6.0);
        assert_eq!(quart().vstar(0.0).unwrap(), 0.0);
        assert_eq!(logq().vstar(2.0).unwrap(), 10.0);

        assert_eq!(exp6().dvstar(6.0).unwrap(), 0.0);
        assert_eq!(quart().dvstar(8.0).unwrap(), 2.0);
        assert_eq!(logq().dvstar(2.0).unwrap(), 1.0);

        assert_eq!(exp6().d2vstar(2.0).unwrap(), 0.5);
        assert_eq!(quart().d2vstar(-37.0).unwrap(), 0.125);
        assert_relative_eq!(logq().d2vstar(2.0).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn dual_domains() {
        assert_eq!(
            exp6().dual_domain(),
            Interval {
                lo: 0.0,
                hi: f64::INFINITY
            }
        );
        assert_eq!(quart().dual_domain(), Interval::REAL_LINE);
        let t = CanonicalTerm::log_quadratic(-15.0, 9.0, eye(2)).unwrap();
        assert_eq!(t.dual_domain(), Interval::REAL_LINE);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(exp6().vstar(0.0), Err(TermError::DualDomain { sigma: 0.0 }));
        assert!(exp6().dvstar(-1.0).is_err());
        assert_eq!(logq().v(0.0), Err(TermError::PrimalDomain { xi: 0.0 }));
        assert!(logq().dv(-1.0).is_err());
        assert!(quart().v(-1e-3).is_err());
    }

    #[test]
    fn rejects_non_canonical_parameters() {
        assert!(CanonicalTerm::exponential(0.0, eye(1)).is_err());
        assert!(CanonicalTerm::quartic(-1.0, 0.0, eye(1)).is_err());
        assert!(CanonicalTerm::log_quadratic(1.0, 0.0, eye(1)).is_err());
        assert!(CanonicalTerm::quartic(1.0, f64::NAN, eye(1)).is_err());
        assert!(CanonicalTerm::quartic(1.0, 0.0, DMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn metric_scaling() {
        let d = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let q = CanonicalTerm::quartic(1.0, 0.0, d.clone()).unwrap();
        let l = CanonicalTerm::log_quadratic(1.0, 1.0, d).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        // ‖Dx‖² = 49
        assert_relative_eq!(q.measure(&x), 24.5);
        assert_relative_eq!(l.measure(&x), 49.0);
        assert_relative_eq!(l.metric_norm(), 50.0, epsilon = 1e-12);
    }

    fn family_strategy() -> impl Strategy<Value = Family> {
        prop_oneof![
            (0.1f64..20.0).prop_map(|alpha| Family::Exponential { alpha }),
            (0.1f64..20.0, -5.0f64..5.0)
                .prop_map(|(beta, lambda)| Family::Quartic { beta, lambda }),
            (-20.0f64..20.0, 0.5f64..20.0).prop_map(|(c1, c2)| Family::LogQuadratic { c1, c2 }),
        ]
    }

    fn term(f: Family) -> CanonicalTerm {
        CanonicalTerm::new(f, eye(1)).unwrap()
    }

    proptest! {
        #[test]
        fn legendre_roundtrip_from_primal(f in family_strategy(), xi in 1e-3f64..4.0) {
            let t = term(f);
            let s = t.dv(xi).unwrap();
            let back = t.dvstar(s).unwrap();
            prop_assert!((back - xi).abs() <= 1e-12 * xi.abs().max(1.0));
            let fy = t.v(xi).unwrap() + t.vstar(s).unwrap() - xi * s;
            prop_assert!(fy.abs() <= 1e-10 * (1.0 + (xi * s).abs()));
        }

        #[test]
        fn finite_differences_match(f in family_strategy(), xi in 0.05f64..3.0) {
            let t = term(f);
            let h = 1e-5;
            let fd = (t.v(xi + h).unwrap() - t.v(xi - h).unwrap()) / (2.0 * h);
            let d = t.dv(xi).unwrap();
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0));
            let s = t.dv(xi).unwrap();
            let fd = (t.vstar(s + h).unwrap() - t.vstar(s - h).unwrap()) / (2.0 * h);
            prop_assert!((fd - t.dvstar(s).unwrap()).abs() <= 1e-6 * xi.abs().max(1.0));
            let fd2 = (t.dvstar(s + h).unwrap() - t.dvstar(s - h).unwrap()) / (2.0 * h);
            prop_assert!((fd2 - t.d2vstar(s).unwrap()).abs() <= 1e-6 * fd2.abs().max(1.0));
            prop_assert!(t.d2vstar(s).unwrap() > 0.0);
        }
    }
}
