//! Safeguarded Newton–bisection for a bracketed scalar root.

/// Outcome of [`newton_bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootError {
    /// `f(a)` and `f(b)` have the same strict sign.
    NotBracketed,
    /// The function could not be evaluated inside the bracket.
    Evaluation(f64),
}

/// Finds a root of `f` in `[a, b]` given `f(a)·f(b) ≤ 0`.
///
/// `eval` returns `(f(x), f'(x))`, or `None` where the function is not
/// defined. Newton steps that leave the current bracket or fail to halve
/// the bracket are replaced by bisection. Stops when `|f| ≤ ftol` or the
/// bracket shrinks to a few ulps.
pub fn newton_bisect<E>(
    mut eval: E,
    a: f64,
    b: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root, RootError>
where
    E: FnMut(f64) -> Option<(f64, f64)>,
{
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let (flo, _) = eval(lo).ok_or(RootError::Evaluation(lo))?;
    let (fhi, _) = eval(hi).ok_or(RootError::Evaluation(hi))?;
    if flo == 0.0 {
        return Ok(Root {
            x: lo,
            fx: 0.0,
            iterations: 0,
        });
    }
    if fhi == 0.0 {
        return Ok(Root {
            x: hi,
            fx: 0.0,
            iterations: 0,
        });
    }
    if flo.signum() == fhi.signum() {
        return Err(RootError::NotBracketed);
    }
    // orient so that f(lo) < 0 < f(hi) in the bookkeeping
    let flip = flo > 0.0;
    let sgn = |v: f64| if flip { -v } else { v };

    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    let (mut fx, mut dfx) = eval(x).ok_or(RootError::Evaluation(x))?;
    let mut best = Root {
        x,
        fx,
        iterations: 0,
    };

    for it in 1..=max_iter {
        let newton_x = x - fx / dfx;
        let newton_ok = dfx != 0.0
            && newton_x.is_finite()
            && newton_x > lo
            && newton_x < hi
            && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x = newton_x;
        } else {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        }
        let (f_new, df_new) = eval(x).ok_or(RootError::Evaluation(x))?;
        fx = f_new;
        dfx = df_new;
        if fx.abs() < best.fx.abs() {
            best = Root {
                x,
                fx,
                iterations: it,
            };
        }
        best.iterations = it;
        if fx.abs() <= ftol || fx == 0.0 {
            return Ok(Root {
                x,
                fx,
                iterations: it,
            });
        }
        if sgn(fx) < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let r = newton_bisect(|x| Some((x * x - 2.0, 2.0 * x)), 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn survives_flat_derivative() {
        // Newton from the midpoint would jump out of the bracket
        let r = newton_bisect(
            |x| Some((x.powi(3) - 0.001, 3.0 * x * x)),
            -1.0,
            1.0,
            1e-15,
            200,
        )
        .unwrap();
        assert!((r.x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wrong_derivative_still_converges_by_bisection() {
        let r = newton_bisect(|x| Some((x - 0.3, -5.0)), 0.0, 1.0, 1e-13, 200).unwrap();
        assert!((r.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn decreasing_function() {
        let r = newton_bisect(|x| Some((1.0 - x.exp(), -x.exp())), -3.0, 5.0, 1e-14, 100).unwrap();
        assert!(r.x.abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed() {
        assert_eq!(
            newton_bisect(|x| Some((x * x + 1.0, 2.0 * x)), -1.0, 1.0, 1e-12, 50),
            Err(RootError::NotBracketed)
        );
    }
}
