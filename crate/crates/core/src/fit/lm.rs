//! Levenberg-Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector};

/// Stop when an accepted step changes the RSS by less than this fraction.
pub const RSS_REL_TOL: f64 = 1e-12;
/// Stop when the gradient `J^T r` is this small in the infinity norm.
pub const GRADIENT_TOL: f64 = 1e-10;

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_inf: f64,
}

/// Central-difference Jacobian of `residuals` at `p`.
pub fn central_jacobian<F>(residuals: &F, p: &[f64], m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let step_scale = f64::EPSILON.cbrt();
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = step_scale * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        let up = residuals(&q);
        q[j] = p[j] - h;
        let down = residuals(&q);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Forward-difference Jacobian, used to cross-check the central one.
pub fn forward_jacobian<F>(residuals: &F, p: &[f64], m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let step_scale = f64::EPSILON.sqrt();
    let base = residuals(p);
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = step_scale * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        let up = residuals(&q);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - base[i]) / h;
        }
    }
    jac
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes `sum r_i(p)^2` from `p0`.
///
/// The damping is Marquardt's diagonal scaling. When no damped step can
/// lower the RSS any further the current point is a numerical minimum and
/// the run is reported as converged.
pub fn levenberg_marquardt<F>(residuals: F, p0: Vec<f64>, max_iterations: usize) -> LmOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut p = p0;
    let mut r = residuals(&p);
    let m = r.len();
    let mut rss = sum_sq(&r);
    let mut lambda = LAMBDA_INIT;
    let mut gradient_inf = f64::INFINITY;

    if !rss.is_finite() {
        return LmOutcome {
            params: p,
            rss,
            iterations: 0,
            converged: false,
            gradient_inf,
        };
    }

    let mut iterations = 0;
    let mut need_jacobian = true;
    let mut jtj = DMatrix::zeros(0, 0);
    let mut grad = DVector::zeros(0);
    while iterations < max_iterations {
        iterations += 1;
        if need_jacobian {
            let jac = central_jacobian(&residuals, &p, m);
            let rv = DVector::from_column_slice(&r);
            grad = jac.transpose() * rv;
            jtj = jac.transpose() * &jac;
            gradient_inf = grad.amax();
            if gradient_inf < GRADIENT_TOL || rss == 0.0 {
                return LmOutcome {
                    params: p,
                    rss,
                    iterations,
                    converged: true,
                    gradient_inf,
                };
            }
        }

        let mut damped = jtj.clone();
        for j in 0..damped.nrows() {
            let d = jtj[(j, j)].max(1e-300);
            damped[(j, j)] += lambda * d;
        }
        let step = damped
            .clone()
            .cholesky()
            .map(|c| c.solve(&(-&grad)))
            .or_else(|| damped.lu().solve(&(-&grad)));

        let trial = step.map(|delta| {
            let q: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rq = residuals(&q);
            let rss_q = sum_sq(&rq);
            (q, rq, rss_q)
        });

        match trial {
            Some((q, rq, rss_q)) if rss_q.is_finite() && rss_q <= rss => {
                let rel = (rss - rss_q) / rss;
                p = q;
                r = rq;
                rss = rss_q;
                lambda = (lambda / 10.0).max(1e-12);
                need_jacobian = true;
                if rel < RSS_REL_TOL {
                    return LmOutcome {
                        params: p,
                        rss,
                        iterations,
                        converged: true,
                        gradient_inf,
                    };
                }
            }
            _ => {
                lambda *= 10.0;
                need_jacobian = false;
                if lambda > LAMBDA_MAX {
                    return LmOutcome {
                        params: p,
                        rss,
                        iterations,
                        converged: true,
                        gradient_inf,
                    };
                }
            }
        }
    }
    LmOutcome {
        params: p,
        rss,
        iterations,
        converged: false,
        gradient_inf,
    }
}
