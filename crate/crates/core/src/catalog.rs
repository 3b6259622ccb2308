//! Reference problems with known complete solution sets.

use nalgebra::{dmatrix, dvector};

use crate::problem::FixedPointProblem;
use crate::terms::CanonicalTerm;

/// Exponential + quartic double well in ℝ², dual space ℝ².
pub fn example1() -> FixedPointProblem {
    let t1 = CanonicalTerm::exponential(6.0, dmatrix![2.0, 0.0; 0.0, 3.0]).unwrap();
    let t2 = CanonicalTerm::quartic(8.0, 1.0, dmatrix![4.0, 0.0; 0.0, 5.0]).unwrap();
    FixedPointProblem::new(dvector![2.0, 1.0], vec![t1, t2]).unwrap()
}

/// Log-quadratic potential with diagonal operator, dual space ℝ.
pub fn example2() -> FixedPointProblem {
    let t = CanonicalTerm::log_quadratic(-8.0, 10.0, dmatrix![3.0, 0.0; 0.0, 4.0]).unwrap();
    FixedPointProblem::new(dvector![-5.0, 2.0], vec![t]).unwrap()
}

/// Log-quadratic potential with a 3 × 2 operator, dual space ℝ.
pub fn example3() -> FixedPointProblem {
    let t =
        CanonicalTerm::log_quadratic(-15.0, 9.0, dmatrix![0.3, 0.2; 0.5, 0.6; 0.4, 0.7]).unwrap();
    FixedPointProblem::new(dvector![1.0, 4.0], vec![t]).unwrap()
}
