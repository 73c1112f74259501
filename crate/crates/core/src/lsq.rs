//! Least-squares machinery shared by the fitters: weighted straight-line
//! regression, a damped Gauss-Newton (Levenberg-Marquardt) solver with an
//! accepted-step objective trace, and a Nelder-Mead fallback.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Convergence is declared when an accepted step lowers the objective by
/// less than this fraction.
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;
const SIMPLEX_MAX_ITERATIONS: usize = 5000;
const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Weighted sum of squared residuals.
    pub ssr: f64,
    /// Unweighted root-mean-square residual.
    pub residual_rms: f64,
    pub n: usize,
}

/// Straight-line least squares `y = intercept + slope * x`.
///
/// Standard errors are the residual-variance-scaled covariance of the
/// estimator; with two points they are reported as zero.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    if x.len() != y.len() || weights.is_some_and(|w| w.len() != x.len()) {
        return Err(Error::Shape(format!(
            "x has {} entries, y has {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "line fit needs at least 2 points, got {n}"
        )));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..n).map(w).sum();
    let x_mean = (0..n).map(|i| w(i) * x[i]).sum::<f64>() / total;
    let y_mean = (0..n).map(|i| w(i) * y[i]).sum::<f64>() / total;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - x_mean;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * (y[i] - y_mean);
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateSample(
            "all abscissae coincide; slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;

    let mut ssr = 0.0;
    let mut sq = 0.0;
    for i in 0..n {
        let r = y[i] - intercept - slope * x[i];
        ssr += w(i) * r * r;
        sq += r * r;
    }
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = ssr / (n - 2) as f64;
        (
            (s2 / sxx).sqrt(),
            (s2 * (1.0 / total + x_mean * x_mean / sxx)).sqrt(),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        ssr,
        residual_rms: (sq / n as f64).sqrt(),
        n,
    })
}

/// A nonlinear least-squares problem in residual form.
///
/// `residuals` returns `None` when the parameters leave the model's domain.
pub trait Residuals {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64]) -> Option<DVector<f64>>;
    fn jacobian(&self, params: &[f64]) -> Option<DMatrix<f64>>;

    fn objective(&self, params: &[f64]) -> f64 {
        self.residuals(params)
            .map(|r| r.norm_squared())
            .filter(|f| f.is_finite())
            .unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub params: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after the start point and after every accepted step.
    pub trace: Vec<f64>,
    pub used_simplex: bool,
}

/// Minimizes the sum of squared residuals from `start`.
///
/// Damped Gauss-Newton steps are taken while the Jacobian is usable; if it
/// becomes non-finite or rank deficient the search continues with
/// Nelder-Mead from the current point.
pub fn minimize<P: Residuals + ?Sized>(problem: &P, start: &[f64]) -> Result<Minimum> {
    let mut params = DVector::from_column_slice(start);
    let mut residuals = problem.residuals(start).ok_or_else(|| {
        Error::Domain(format!("start point {start:?} is outside the model domain"))
    })?;
    let mut objective = residuals.norm_squared();
    if !objective.is_finite() {
        return Err(Error::Domain("objective is not finite at start point".into()));
    }
    let mut trace = vec![objective];
    let mut damping = 1e-3;

    for iteration in 1..=MAX_ITERATIONS {
        if objective == 0.0 {
            return Ok(done(params, objective, iteration - 1, trace, false));
        }
        let jac = match problem.jacobian(params.as_slice()) {
            Some(j) if j.iter().all(|v| v.is_finite()) => j,
            _ => return simplex_fallback(problem, params.as_slice(), trace, iteration - 1),
        };
        let jtj = jac.transpose() * &jac;
        if jtj.clone().cholesky().is_none() {
            return simplex_fallback(problem, params.as_slice(), trace, iteration - 1);
        }
        let gradient = jac.transpose() * &residuals;

        let mut accepted = None;
        while damping < MAX_DAMPING {
            let mut damped = jtj.clone();
            for k in 0..damped.nrows() {
                damped[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&gradient));
            let candidate = &params + &step;
            match problem.residuals(candidate.as_slice()) {
                Some(r) if r.norm_squared() < objective => {
                    accepted = Some((candidate, r));
                    damping = (damping / 10.0).max(1e-12);
                    break;
                }
                _ => damping *= 10.0,
            }
        }

        let Some((candidate, r)) = accepted else {
            // no descent direction left at working precision
            return Ok(done(params, objective, iteration, trace, false));
        };
        let new_objective = r.norm_squared();
        let decrease = (objective - new_objective) / objective;
        params = candidate;
        residuals = r;
        objective = new_objective;
        trace.push(objective);
        if decrease < RELATIVE_TOLERANCE {
            return Ok(done(params, objective, iteration, trace, false));
        }
    }
    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        objective,
        best_params: params.as_slice().to_vec(),
    })
}

fn done(
    params: DVector<f64>,
    objective: f64,
    iterations: usize,
    trace: Vec<f64>,
    used_simplex: bool,
) -> Minimum {
    Minimum {
        params: params.as_slice().to_vec(),
        objective,
        iterations,
        trace,
        used_simplex,
    }
}

fn simplex_fallback<P: Residuals + ?Sized>(
    problem: &P,
    start: &[f64],
    mut trace: Vec<f64>,
    iterations_so_far: usize,
) -> Result<Minimum> {
    let simplex = nelder_mead(|p| problem.objective(p), start)?;
    trace.extend(simplex.trace.iter().skip(1));
    Ok(Minimum {
        iterations: iterations_so_far + simplex.iterations,
        trace,
        used_simplex: true,
        ..simplex
    })
}

/// Derivative-free simplex minimization of `f` from `start`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64]) -> Result<Minimum> {
    let dim = start.len();
    let mut vertices: Vec<Vec<f64>> = vec![start.to_vec()];
    for k in 0..dim {
        let mut v = start.to_vec();
        v[k] += if v[k].abs() > 1e-8 { 0.1 * v[k] } else { 0.1 };
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| f(v)).collect();
    if !values[0].is_finite() {
        return Err(Error::Domain("objective is not finite at start point".into()));
    }
    let mut trace = vec![values[0]];

    for iteration in 1..=SIMPLEX_MAX_ITERATIONS {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        if trace.last().is_some_and(|&last| best < last) {
            trace.push(best);
        }
        let worst = values[dim];
        if worst - best <= RELATIVE_TOLERANCE * best.abs() + 1e-300 {
            return Ok(Minimum {
                params: vertices[0].clone(),
                objective: best,
                iterations: iteration,
                trace,
                used_simplex: true,
            });
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| vertices[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..dim)
                .map(|k| centroid[k] + t * (vertices[dim][k] - centroid[k]))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                vertices[dim] = expanded;
                values[dim] = fe;
            } else {
                vertices[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            vertices[dim] = reflected;
            values[dim] = fr;
        } else {
            let contracted = if fr < values[dim] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            if fc < values[dim].min(fr) {
                vertices[dim] = contracted;
                values[dim] = fc;
            } else {
                for i in 1..=dim {
                    for k in 0..dim {
                        vertices[i][k] = vertices[0][k] + 0.5 * (vertices[i][k] - vertices[0][k]);
                    }
                    values[i] = f(&vertices[i]);
                }
            }
        }
    }
    let (best_index, best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, f64::INFINITY));
    Err(Error::Convergence {
        iterations: SIMPLEX_MAX_ITERATIONS,
        objective: best,
        best_params: vertices[best_index].clone(),
    })
}

/// Residual-variance-scaled parameter standard errors `sqrt(diag(s² (JᵀJ)⁻¹))`
/// with `s² = ssr / (m - p)`. Falls back to the pseudo-inverse when `JᵀJ`
/// is singular.
pub fn standard_errors(jacobian: &DMatrix<f64>, ssr: f64) -> Vec<f64> {
    let (m, p) = jacobian.shape();
    let jtj = jacobian.transpose() * jacobian;
    let inverse = jtj
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .or_else(|| jtj.pseudo_inverse(1e-12).ok())
        .unwrap_or_else(|| DMatrix::zeros(p, p));
    let s2 = if m > p { ssr / (m - p) as f64 } else { 0.0 };
    (0..p).map(|k| (s2 * inverse[(k, k)]).max(0.0).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_residual() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let fit = fit_line(&x, &y, None).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.5).abs() < 1e-14);
        assert!(fit.residual_rms < 1e-14);
        assert!(fit.slope_se < 1e-7);
    }

    #[test]
    fn line_standard_errors_match_closed_form() {
        // y = (1, 3, 2, 5, 4) at x = 0..5: slope 0.8, ssr 3.6, sxx 10
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let fit = fit_line(&x, &y, None).unwrap();
        assert!((fit.slope - 0.8).abs() < 1e-12);
        assert!((fit.intercept - 1.4).abs() < 1e-12);
        assert!((fit.ssr - 3.6).abs() < 1e-12);
        let s2 = 3.6 / 3.0;
        assert!((fit.slope_se - (s2 / 10.0_f64).sqrt()).abs() < 1e-12);
        assert!((fit.intercept_se - (s2 * (0.2 + 4.0 / 10.0_f64)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vertical_data_is_degenerate() {
        let err = fit_line(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], None).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }

    struct Exponential {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl Residuals for Exponential {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            self.t.len()
        }
        fn residuals(&self, p: &[f64]) -> Option<DVector<f64>> {
            Some(DVector::from_iterator(
                self.t.len(),
                self.t.iter().zip(&self.y).map(|(t, y)| p[0] * (p[1] * t).exp() - y),
            ))
        }
        fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
            Some(DMatrix::from_fn(self.t.len(), 2, |i, k| {
                let e = (p[1] * self.t[i]).exp();
                if k == 0 { e } else { p[0] * self.t[i] * e }
            }))
        }
    }

    #[test]
    fn levenberg_marquardt_recovers_exponential() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let problem = Exponential { t, y };
        let min = minimize(&problem, &[1.0, 0.0]).unwrap();
        assert!((min.params[0] - 3.0).abs() < 1e-8);
        assert!((min.params[1] + 0.7).abs() < 1e-8);
        assert!(!min.used_simplex);
        assert!(min.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let rosen = |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2);
        let min = nelder_mead(rosen, &[-1.2, 1.0]).unwrap();
        assert!((min.params[0] - 1.0).abs() < 1e-3);
        assert!((min.params[1] - 1.0).abs() < 1e-3);
        assert!(min.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
