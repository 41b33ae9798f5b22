//! Bounded Levenberg–Marquardt.
//!
//! Damping uses Marquardt's diagonal scaling, (JᵀJ + λ·diag(JᵀJ))δ = −Jᵀr,
//! so parameters of very different magnitude share one trust strategy.
//! Trial points are projected onto the box bounds. A trial is accepted only
//! if it lowers χ², so χ² is non-increasing over the accepted sequence.

use nalgebra::{DMatrix, DVector};

use super::{FitOutcome, FitParameter};
use crate::error::{domain, input, Result};

/// A weighted residual model: `residuals` returns (model − data)/σ.
pub trait LeastSquaresProblem {
    fn residual_count(&self) -> usize;

    /// Weighted residuals at `params` (all parameters, fixed ones included).
    /// An `Err` or any non-finite entry marks the point as infeasible.
    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>>;

    /// Analytic Jacobian ∂r/∂p (rows: residuals, columns: all parameters).
    /// `None` falls back to central finite differences.
    fn jacobian(&self, _params: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// Initial value, box bounds and fixed flag of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub fixed: bool,
}

impl ParamSpec {
    pub fn free(name: impl Into<String>, initial: f64) -> Self {
        Self::bounded(name, initial, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn bounded(name: impl Into<String>, initial: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            initial,
            lower,
            upper,
            fixed: false,
        }
    }

    pub fn fixed(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            initial: value,
            lower: value,
            upper: value,
            fixed: true,
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative χ² decrease below which an accepted step counts as converged.
    pub ftol: f64,
    /// Relative step norm below which the fit counts as converged.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            xtol: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

const LAMBDA_MAX: f64 = 1e16;

fn chi2_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn feasible<P: LeastSquaresProblem + ?Sized>(problem: &P, x: &[f64]) -> Option<Vec<f64>> {
    match problem.residuals(x) {
        Ok(r) if r.iter().all(|v| v.is_finite()) => Some(r),
        _ => None,
    }
}

fn fd_step(x: f64, initial: f64) -> f64 {
    let scale = x.abs().max(initial.abs());
    if scale > 0.0 {
        1e-6 * scale
    } else {
        1e-6
    }
}

/// Central-difference Jacobian over the free parameters of `specs`.
/// Steps are shortened to one side at a bound.
pub fn finite_difference_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    specs: &[ParamSpec],
) -> Result<DMatrix<f64>> {
    let free: Vec<usize> = (0..specs.len()).filter(|&i| !specs[i].fixed).collect();
    let m = problem.residual_count();
    let mut jac = DMatrix::zeros(m, free.len());
    let mut work = x.to_vec();
    let base = feasible(problem, x);
    for (col, &j) in free.iter().enumerate() {
        let h = fd_step(x[j], specs[j].initial);
        let up = (x[j] + h).min(specs[j].upper);
        let down = (x[j] - h).max(specs[j].lower);
        let (hi_x, lo_x) = if up > x[j] && down < x[j] {
            (up, down)
        } else if up > x[j] {
            (up, x[j])
        } else {
            (x[j], down)
        };
        let eval = |v: f64, work: &mut Vec<f64>| -> Result<Vec<f64>> {
            if v == x[j] {
                return base
                    .clone()
                    .ok_or_else(|| domain("residuals not finite at the current point"));
            }
            work[j] = v;
            let r = feasible(problem, work).ok_or_else(|| {
                domain(format!(
                    "residuals not finite near parameter {}",
                    specs[j].name
                ))
            });
            work[j] = x[j];
            r
        };
        let r_hi = eval(hi_x, &mut work)?;
        let r_lo = eval(lo_x, &mut work)?;
        let dx = hi_x - lo_x;
        for i in 0..m {
            jac[(i, col)] = (r_hi[i] - r_lo[i]) / dx;
        }
    }
    Ok(jac)
}

fn free_jacobian<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    specs: &[ParamSpec],
    free: &[usize],
) -> Result<DMatrix<f64>> {
    match problem.jacobian(x) {
        Some(full) => {
            if full.nrows() != problem.residual_count() || full.ncols() != specs.len() {
                return Err(input("supplied Jacobian has the wrong shape"));
            }
            Ok(full.select_columns(free))
        }
        None => finite_difference_jacobian(problem, x, specs),
    }
}

/// Damped step solve; falls back to LU if Cholesky fails.
fn solve_damped(jtj: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = jtj.nrows();
    let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    let floor = if max_diag > 0.0 {
        max_diag * 1e-12
    } else {
        1.0
    };
    let mut a = jtj.clone();
    for i in 0..n {
        a[(i, i)] += lambda * jtj[(i, i)].max(floor);
    }
    let rhs = -g;
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    a.lu().solve(&rhs)
}

/// Minimizes Σr² over the free parameters of `specs`.
///
/// Never fails on non-convergence: the outcome carries `converged = false`.
/// Errors are reserved for invalid setups (initials outside bounds, fewer
/// residuals than free parameters, infeasible starting point).
pub fn nonlinear_least_squares<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    specs: &[ParamSpec],
    options: &LmOptions,
) -> Result<FitOutcome> {
    for s in specs {
        if !(s.lower <= s.upper) {
            return Err(input(format!("{}: lower bound above upper bound", s.name)));
        }
        if !(s.initial >= s.lower && s.initial <= s.upper) || !s.initial.is_finite() {
            return Err(input(format!(
                "{}: initial value {} outside bounds [{}, {}]",
                s.name, s.initial, s.lower, s.upper
            )));
        }
    }
    let free: Vec<usize> = (0..specs.len()).filter(|&i| !specs[i].fixed).collect();
    let m = problem.residual_count();
    if m < free.len() {
        return Err(input(format!(
            "{} data points cannot determine {} free parameters",
            m,
            free.len()
        )));
    }

    let mut x: Vec<f64> = specs.iter().map(|s| s.initial).collect();
    let mut r = feasible(problem, &x)
        .ok_or_else(|| domain("model is not finite at the initial parameters"))?;
    if r.len() != m {
        return Err(input(
            "residual vector length disagrees with residual_count",
        ));
    }
    let mut chi2 = chi2_of(&r);
    let mut lambda = options.initial_lambda;
    let mut iterations = 0;
    let mut converged = free.is_empty() || chi2 == 0.0;

    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let jac = free_jacobian(problem, &x, specs, &free)?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        if g.amax() == 0.0 {
            converged = true;
            break;
        }
        loop {
            let Some(delta) = solve_damped(&jtj, &g, lambda) else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    converged = true;
                    break;
                }
                continue;
            };
            let mut trial = x.clone();
            for (k, &j) in free.iter().enumerate() {
                trial[j] = specs[j].clamp(x[j] + delta[k]);
            }
            let step_norm = free
                .iter()
                .map(|&j| (trial[j] - x[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            let x_norm = free.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
            if step_norm <= options.xtol * (x_norm + options.xtol) {
                converged = true;
                break;
            }
            match feasible(problem, &trial) {
                Some(rt) if chi2_of(&rt) < chi2 => {
                    let chi2_t = chi2_of(&rt);
                    let rel = (chi2 - chi2_t) / chi2;
                    x = trial;
                    r = rt;
                    chi2 = chi2_t;
                    lambda = (lambda / 10.0).max(1e-12);
                    if rel < options.ftol || chi2 == 0.0 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        // No representable step lowers χ²: the relative change is zero.
                        converged = true;
                        break;
                    }
                }
            }
        }
    }

    let dof = m - free.len();
    let reduced_chi2 = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let (stderrs, singular) = covariance_stderrs(problem, &x, specs, &free, reduced_chi2, dof)?;

    let parameters = specs
        .iter()
        .enumerate()
        .map(|(i, s)| FitParameter {
            name: s.name.clone(),
            value: x[i],
            stderr: free
                .iter()
                .position(|&j| j == i)
                .and_then(|k| stderrs.as_ref().map(|v| v[k])),
            fixed: s.fixed,
        })
        .collect();

    Ok(FitOutcome {
        parameters,
        chi2,
        reduced_chi2,
        degrees_of_freedom: dof,
        residuals: r,
        iterations,
        converged,
        singular,
    })
}

fn covariance_stderrs<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    specs: &[ParamSpec],
    free: &[usize],
    reduced_chi2: f64,
    dof: usize,
) -> Result<(Option<Vec<f64>>, bool)> {
    if free.is_empty() {
        return Ok((Some(Vec::new()), false));
    }
    let jac = free_jacobian(problem, x, specs, free)?;
    let jtj = jac.transpose() * &jac;
    let scale = if dof > 0 { reduced_chi2 } else { 1.0 };
    let Some(ch) = jtj.cholesky() else {
        return Ok((None, true));
    };
    let cov = ch.inverse();
    let mut out = Vec::with_capacity(free.len());
    for k in 0..free.len() {
        let v = cov[(k, k)] * scale;
        if !(v >= 0.0) || !v.is_finite() {
            return Ok((None, true));
        }
        out.push(v.sqrt());
    }
    Ok((Some(out), false))
}
