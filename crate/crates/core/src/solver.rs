//! Root finding for the power-adjustment and KKT stages.
//!
//! [`solve_scalar`] is a safeguarded secant/bisection hybrid for monotone
//! stationarity equations; [`solve_system`] is a damped Newton iteration with
//! a central-difference Jacobian for the square KKT systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default tolerance on |f| for scalar stationarity equations.
pub const SCALAR_TOL: f64 = 1e-10;
/// Default max-norm tolerance for KKT systems.
pub const SYSTEM_TOL: f64 = 1e-8;

const MAX_SCALAR_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual max-norm after each accepted step, starting with the initial point.
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn root(&self) -> f64 {
        self.solution[0]
    }
}

/// Finds a root of `f` on `[lo, hi]`.
///
/// Requires a sign change across the bracket; otherwise returns
/// [`Error::NoRoot`]. The returned point always lies inside the final bracket.
pub fn solve_scalar<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<SolveReport>
where
    F: FnMut(f64) -> f64,
{
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    let mut history = Vec::new();
    if fa.abs() <= tol {
        return Ok(report(a, fa, 0, true, vec![fa.abs()]));
    }
    if fb.abs() <= tol {
        return Ok(report(b, fb, 0, true, vec![fb.abs()]));
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoRoot { lo, hi });
    }

    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    let mut last_width = b - a;
    for iter in 1..=MAX_SCALAR_ITERS {
        let width = b - a;
        // Secant step, falling back to bisection when it lands too close to an
        // end or the bracket is not shrinking fast enough.
        let mut x = b - fb * (b - a) / (fb - fa);
        let guard = 0.01 * width;
        if !x.is_finite() || x <= a + guard || x >= b - guard || width > 0.5 * last_width {
            x = 0.5 * (a + b);
        }
        last_width = width;
        let fx = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        history.push(fx.abs());
        if fx.abs() <= tol {
            return Ok(report(x, fx, iter, true, history));
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            return Ok(report(best.0, best.1, iter, false, history));
        }
    }
    Ok(report(best.0, best.1, MAX_SCALAR_ITERS, false, history))
}

/// Grows `hi` geometrically by `factor` until `f` changes sign over
/// `[lo, hi]` or `hi` exceeds `cap`.
pub fn expand_bracket<F>(mut f: F, lo: f64, mut hi: f64, factor: f64, cap: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    loop {
        let fhi = f(hi);
        if flo.signum() != fhi.signum() || fhi == 0.0 || flo == 0.0 {
            return Ok((lo, hi));
        }
        if hi >= cap {
            return Err(Error::NoRoot { lo, hi });
        }
        hi = (hi * factor).min(cap);
    }
}

fn report(x: f64, fx: f64, iterations: usize, converged: bool, history: Vec<f64>) -> SolveReport {
    SolveReport {
        solution: vec![x],
        residual_norm: fx.abs(),
        iterations,
        converged,
        residual_history: history,
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Damped Newton iteration on a square system `f(x) = 0`.
///
/// The Jacobian is built by central differences with step
/// `max(1e-8, 1e-8 |x_i|)`. A step is accepted only if it lowers the residual
/// max-norm, halving the step length up to 40 times.
pub fn solve_system<F>(mut f: F, x0: &[f64], tol: f64, max_iter: usize) -> SolveReport
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut norm = max_norm(&fx);
    let mut history = vec![norm];
    let mut iterations = 0;

    while norm >= tol && iterations < max_iter {
        let mut jac = DMatrix::<f64>::zeros(fx.len(), n);
        let mut probe = x.clone();
        for j in 0..n {
            let h = 6e-6 * x[j].abs().max(1.0);
            probe[j] = x[j] + h;
            let fp = f(&probe);
            probe[j] = x[j] - h;
            let fm = f(&probe);
            probe[j] = x[j];
            for i in 0..fx.len() {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(fx.len(), fx.iter().map(|v| -v));
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => match jac.svd(true, true).solve(&rhs, 1e-14) {
                Ok(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => break,
            },
        };

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + t * si).collect();
            let ft = f(&trial);
            let nt = max_norm(&ft);
            if nt < norm {
                x = trial;
                fx = ft;
                norm = nt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        history.push(norm);
    }

    SolveReport {
        solution: x,
        residual_norm: norm,
        iterations,
        converged: norm < tol,
        residual_history: history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let r = solve_scalar(|x| x - 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!(r.converged);
        assert!((r.root() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_two() {
        let r = solve_scalar(|x| x * x - 2.0, 0.0, 2.0, SCALAR_TOL).unwrap();
        assert!(r.converged);
        assert!((r.root() - std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!(r.iterations <= 200);
    }

    #[test]
    fn positive_function_has_no_root() {
        let err = solve_scalar(|x| x * x + 1.0, -1.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::NoRoot { .. }));
    }

    #[test]
    fn root_stays_inside_bracket() {
        // Steep exponential: secant steps overshoot without the safeguard.
        let r = solve_scalar(|x| (20.0 * x).exp() - 2.0, 0.0, 3.0, 1e-12).unwrap();
        assert!(r.root() >= 0.0 && r.root() <= 3.0);
        assert!((r.root() - 2f64.ln() / 20.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_expansion_finds_crossing() {
        let (lo, hi) = expand_bracket(|x| x - 100.0, 0.0, 1.0, 2.0, 1e6).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi >= 100.0);
        assert!(expand_bracket(|x| x + 1.0, 0.0, 1.0, 2.0, 1e3).is_err());
    }

    #[test]
    fn identity_system_one_step() {
        let b = [3.0, -2.0, 0.5];
        let r = solve_system(|x| x.iter().zip(b).map(|(xi, bi)| xi - bi).collect(), &[0.0; 3], SYSTEM_TOL, 20);
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        for (xi, bi) in r.solution.iter().zip(b) {
            assert!((xi - bi).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_line_intersection() {
        let r = solve_system(|v| vec![v[0] * v[0] + v[1] * v[1] - 1.0, v[0] - v[1]], &[1.0, 0.5], SYSTEM_TOL, 50);
        assert!(r.converged);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.solution[0] - h).abs() < 1e-8 && (r.solution[1] - h).abs() < 1e-8);
        assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn starting_at_root_needs_no_steps() {
        let r = solve_system(|v| vec![v[0] - 2.0], &[2.0], SYSTEM_TOL, 10);
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }
}
