//! Primal target `Π(x) = Σ V_i(½ xᵀA_i x) − ½‖x‖² − ⟨x, f⟩` and the
//! potential operator `F = ∇P` whose fixed points are the stationary
//! points of `Π`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::terms::CanonicalTerm;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointProblem {
    f: DVector<f64>,
    terms: Vec<CanonicalTerm>,
}

impl FixedPointProblem {
    pub fn new(f: DVector<f64>, terms: Vec<CanonicalTerm>) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::Dimension("input vector f is empty".into()));
        }
        if terms.is_empty() {
            return Err(Error::Dimension(
                "at least one canonical term is required".into(),
            ));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "input vector f has non-finite entries".into(),
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.dim() != n {
                return Err(Error::Dimension(format!(
                    "term {i}: operator has {} columns, expected n = {n}",
                    t.dim()
                )));
            }
        }
        Ok(Self { f, terms })
    }

    /// Primal dimension.
    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// Dual dimension (number of canonical terms).
    pub fn m(&self) -> usize {
        self.terms.len()
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn terms(&self) -> &[CanonicalTerm] {
        &self.terms
    }

    /// Rebuilds the problem with every operator `D_i` replaced by `map(i, D_i)`.
    pub fn map_operators<M>(&self, mut map: M) -> Result<Self>
    where
        M: FnMut(usize, &DMatrix<f64>) -> DMatrix<f64>,
    {
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| t.with_operator(map(i, t.operator())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.f.clone(), terms)
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() == self.n() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "point has length {}, expected {}",
                x.len(),
                self.n()
            )))
        }
    }

    /// Canonical measures `ξ_i(x)`.
    pub fn measures(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.terms.iter().map(|t| t.measure(x)).collect())
    }

    pub fn eval_pi(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_len(x)?;
        let mut w = 0.0;
        for (i, t) in self.terms.iter().enumerate() {
            w += t.v(t.measure(x)).map_err(Error::term(i))?;
        }
        Ok(w - 0.5 * x.norm_squared() - x.dot(&self.f))
    }

    pub fn grad_pi(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        let mut g = -x - &self.f;
        for (i, t) in self.terms.iter().enumerate() {
            let s = t.dv(t.measure(x)).map_err(Error::term(i))?;
            g += t.metric() * x * s;
        }
        Ok(g)
    }

    pub fn hess_pi(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(x)?;
        let n = self.n();
        let mut h = -DMatrix::<f64>::identity(n, n);
        for (i, t) in self.terms.iter().enumerate() {
            let xi = t.measure(x);
            let s = t.dv(xi).map_err(Error::term(i))?;
            let c = t.d2v(xi).map_err(Error::term(i))?;
            let ax = t.metric() * x;
            h += t.metric() * s + &ax * ax.transpose() * c;
        }
        Ok(h)
    }

    /// `F(x) = ∇P(x)`, through the `Π` gradient: `F(x) = ∇Π(x) + x`.
    pub fn eval_f(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.grad_pi(x)? + x)
    }

    /// `F(x) = Σ k_i V_i'(½ k_i ‖D_i x‖²) D_iᵀ D_i x − f`, evaluated on the
    /// operators directly without the cached metrics.
    pub fn eval_f_direct(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        let mut out = -self.f.clone();
        for (i, t) in self.terms.iter().enumerate() {
            let dx = t.operator() * x;
            // k = 1 for ½‖Dx‖² measures, 2 for ‖Dx‖²
            let k = if matches!(t.family(), crate::terms::Family::LogQuadratic { .. }) {
                2.0
            } else {
                1.0
            };
            let xi = 0.5 * k * dx.norm_squared();
            let s = t.dv(xi).map_err(Error::term(i))?;
            out += t.operator().transpose() * dx * (k * s);
        }
        Ok(out)
    }

    /// Fixed-point residual `‖F(x) − x‖`.
    pub fn residual(&self, x: &DVector<f64>) -> Result<f64> {
        Ok((self.eval_f(x)? - x).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn quartic_1d(lambda: f64) -> FixedPointProblem {
        let t = CanonicalTerm::quartic(1.0, lambda, DMatrix::identity(1, 1)).unwrap();
        FixedPointProblem::new(dvector![0.0], vec![t]).unwrap()
    }

    #[test]
    fn paper_values() {
        let p1 = catalog::example1();
        assert!((p1.eval_pi(&dvector![0.318731, 0.0325932]).unwrap() - 6.78671).abs() < 1e-4);
        let p2 = catalog::example2();
        assert!((p2.eval_pi(&dvector![-0.303886, 0.0666033]).unwrap() + 9.84726).abs() < 1e-4);
        assert_eq!(quartic_1d(1.0).eval_pi(&dvector![0.0]).unwrap(), 0.5);
    }

    #[test]
    fn paper_points_are_fixed_points() {
        let p1 = catalog::example1();
        assert!(p1.grad_pi(&dvector![0.318731, 0.0325932]).unwrap().norm() < 1e-3);
        let x2 = dvector![-0.0191337, -0.00683777];
        let fx = p1.eval_f(&x2).unwrap();
        assert!((fx - &x2).amax() < 1e-3);

        let p2 = catalog::example2();
        let x1 = dvector![-0.303886, 0.0666033];
        assert!((p2.eval_f(&x1).unwrap() - &x1).amax() < 1e-3);

        let p3 = catalog::example3();
        assert!(p3.grad_pi(&dvector![0.323, -0.272]).unwrap().norm() < 5e-2);
        assert!(p3.residual(&dvector![2.130, 0.008]).unwrap() < 5e-2);
        assert!(p2.residual(&dvector![10.0, 10.0]).unwrap() > 1.0);
    }

    #[test]
    fn homogeneous_operator_fixes_origin() {
        let p = quartic_1d(1.0);
        assert_eq!(p.eval_f(&dvector![0.0]).unwrap(), dvector![0.0]);
        let h = p.hess_pi(&dvector![0.0]).unwrap();
        assert_eq!(h[(0, 0)], -2.0);
    }

    #[test]
    fn hessian_positive_definite_at_example2_global_min() {
        let p2 = catalog::example2();
        let h = p2.hess_pi(&dvector![-0.303886, 0.0666033]).unwrap();
        assert!(h.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn log_singularity_is_a_domain_error() {
        let p2 = catalog::example2();
        match p2.eval_pi(&dvector![0.0, 0.0]) {
            Err(Error::Term { index: 0, .. }) => {}
            other => panic!("expected term domain error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_checks() {
        let t = CanonicalTerm::quartic(1.0, 1.0, DMatrix::identity(2, 2)).unwrap();
        assert!(FixedPointProblem::new(dvector![1.0], vec![t.clone()]).is_err());
        assert!(FixedPointProblem::new(dvector![1.0, 2.0], vec![]).is_err());
        let p = FixedPointProblem::new(dvector![1.0, 2.0], vec![t]).unwrap();
        assert!(p.eval_pi(&dvector![1.0]).is_err());
    }

    #[test]
    fn gradient_paths_agree() {
        for p in [
            catalog::example1(),
            catalog::example2(),
            catalog::example3(),
        ] {
            for x in [
                dvector![0.3, -0.2],
                dvector![-0.1, 0.05],
                dvector![0.02, 0.4],
            ] {
                let a = p.eval_f(&x).unwrap();
                let b = p.eval_f_direct(&x).unwrap();
                assert!((a - &b).amax() <= 1e-10 * (1.0 + b.amax()));
            }
        }
    }

    #[test]
    fn finite_difference_gradient_and_hessian() {
        let h = 1e-6;
        for p in [
            catalog::example1(),
            catalog::example2(),
            catalog::example3(),
        ] {
            let x = dvector![0.21, -0.13];
            let g = p.grad_pi(&x).unwrap();
            let hs = p.hess_pi(&x).unwrap();
            for k in 0..2 {
                let mut e = DVector::zeros(2);
                e[k] = h;
                let fd =
                    (p.eval_pi(&(&x + &e)).unwrap() - p.eval_pi(&(&x - &e)).unwrap()) / (2.0 * h);
                assert_relative_eq!(fd, g[k], epsilon = 1e-5, max_relative = 1e-6);
                let col =
                    (p.grad_pi(&(&x + &e)).unwrap() - p.grad_pi(&(&x - &e)).unwrap()) / (2.0 * h);
                for r in 0..2 {
                    assert_relative_eq!(col[r], hs[(r, k)], epsilon = 1e-4, max_relative = 1e-6);
                }
            }
        }
    }
}
