//! Small dense Levenberg-Marquardt solver for the calibration and histogram
//! fits. Problems here have at most a handful of parameters.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when the relative step size falls below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-14,
            xtol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Half the sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimize `½ Σ r_i(p)²` from `p0`. `jacobian` returns the
/// `n_residuals × n_params` matrix `∂r_i/∂p_k`.
pub fn levenberg_marquardt<R, J>(
    p0: &[f64],
    residuals: R,
    jacobian: J,
    opts: LmOptions,
) -> Result<LmSolution>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    if r.len() < n {
        return Err(Error::Fit(alloc::format!(
            "{} residuals for {n} parameters",
            r.len()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit(
            "non-finite residual at the initial guess".into(),
        ));
    }
    let mut cost = cost_of(&r);
    let mut lambda = -1.0;

    for iteration in 0..opts.max_iterations {
        let jac = jacobian(&p);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        if grad.amax() == 0.0 {
            return Ok(LmSolution {
                params: p,
                cost,
                iterations: iteration,
            });
        }
        if lambda < 0.0 {
            lambda = 1e-3 * (0..n).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = residuals(&trial);
            let c_trial = cost_of(&r_trial);
            if c_trial.is_finite() && c_trial <= cost {
                let step_norm = step.norm();
                let p_norm = libm::sqrt(p.iter().map(|v| v * v).sum::<f64>());
                let decrease = cost - c_trial;
                p = trial;
                r = r_trial;
                let old = cost;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-300);
                accepted = true;
                if decrease <= opts.ftol * old || step_norm <= opts.xtol * (p_norm + opts.xtol) {
                    return Ok(LmSolution {
                        params: p,
                        cost,
                        iterations: iteration + 1,
                    });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no downhill step at any damping: at a minimum to working precision
            return Ok(LmSolution {
                params: p,
                cost,
                iterations: iteration + 1,
            });
        }
    }
    Ok(LmSolution {
        params: p,
        cost,
        iterations: opts.max_iterations,
    })
}

/// Forward-difference Jacobian, for models without a convenient derivative.
pub fn numeric_jacobian<R>(residuals: &R, p: &[f64]) -> DMatrix<f64>
where
    R: Fn(&[f64]) -> Vec<f64>,
{
    let r0 = residuals(p);
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-7 * p[k].abs().max(1e-7);
        q[k] = p[k] + h;
        let r1 = residuals(&q);
        for i in 0..r0.len() {
            jac[(i, k)] = (r1[i] - r0[i]) / h;
        }
        q[k] = p[k];
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_recovered() {
        let xs: Vec<f64> = (0..40).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * libm::exp(-1.3 * x)).collect();
        let res = |p: &[f64]| -> Vec<f64> {
            xs.iter()
                .zip(&ys)
                .map(|(x, y)| p[0] * libm::exp(-p[1] * x) - y)
                .collect()
        };
        let sol = levenberg_marquardt(
            &[1.0, 0.5],
            &res,
            |p| numeric_jacobian(&res, p),
            LmOptions::default(),
        )
        .unwrap();
        assert!((sol.params[0] - 2.5).abs() < 1e-6);
        assert!((sol.params[1] - 1.3).abs() < 1e-6);
    }

    #[test]
    fn underdetermined_rejected() {
        let res = |_: &[f64]| alloc::vec![0.0];
        assert!(levenberg_marquardt(
            &[1.0, 2.0],
            res,
            |_| DMatrix::zeros(1, 2),
            LmOptions::default()
        )
        .is_err());
    }
}
