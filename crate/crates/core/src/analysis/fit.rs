//! Small dense Levenberg-Marquardt solver and the model fits built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopping criteria for [`levenberg_marquardt`].
#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative reduction of the cost below which the fit has converged.
    pub ftol: f64,
    /// Relative step size below which the fit has converged.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-15,
            xtol: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    /// (J^T J)^-1 at the solution, when invertible.
    pub normal_inverse: Option<DMatrix<f64>>,
}

/// Minimizes `sum r_i(x)^2`. `model` fills residuals and, when asked, the
/// Jacobian `d r_i / d x_k` (row-major, `m x n`).
pub fn levenberg_marquardt<F>(model: F, x0: &[f64], m: usize, opts: LmOptions) -> Result<LmReport>
where
    F: Fn(&[f64], &mut [f64], Option<&mut DMatrix<f64>>),
{
    let n = x0.len();
    if m < n {
        return Err(Error::FitRejected(format!(
            "{m} data points cannot determine {n} parameters"
        )));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    model(&x, &mut r, Some(&mut jac));
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::FitRejected(
            "initial guess gives non-finite residuals".into(),
        ));
    }
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        if grad.amax() == 0.0 || cost == 0.0 {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            model(&x_new, &mut trial, None);
            let new_cost = sum_sq(&trial);
            if new_cost.is_finite() && new_cost <= cost {
                let rel_drop = (cost - new_cost) / cost.max(1e-300);
                let step_norm = step.norm();
                let x_norm = DVector::from_column_slice(&x).norm();
                x = x_new;
                cost = new_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel_drop < opts.ftol || step_norm <= opts.xtol * (x_norm + opts.xtol) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        model(&x, &mut r, Some(&mut jac));
        if converged {
            break;
        }
        if !improved {
            // No downhill step at any damping: a (local) minimum to machine precision.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "no convergence after {iterations} iterations (cost {cost:e})"
        )));
    }
    let jtj = jac.transpose() * &jac;
    Ok(LmReport {
        params: x,
        residual_norm: cost.sqrt(),
        iterations,
        normal_inverse: jtj.try_inverse(),
    })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Fitted saturating rise `A(tau) = a_inf (1 - exp(-tau / t_rise))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseFit {
    /// Characteristic time (s).
    #[serde(rename = "T")]
    pub t_rise: f64,
    #[serde(rename = "A_inf")]
    pub a_inf: f64,
    pub residual_norm: f64,
    /// Correlation between the fitted `a_inf` and `t_rise`.
    pub correlation: f64,
    /// Set when the data do not constrain the time scale: the sampled range
    /// spans less than two time constants or the parameters are degenerate.
    pub low_confidence: bool,
}

/// Least-squares fit of a saturating exponential to `(hold_times, amplitudes)`.
pub fn fit_rise(hold_times: &[f64], amplitudes: &[f64]) -> Result<RiseFit> {
    if hold_times.len() != amplitudes.len() {
        return Err(Error::Structure(
            "hold times and amplitudes differ in length".into(),
        ));
    }
    if hold_times.len() < 3 {
        return Err(Error::FitRejected(
            "need at least 3 points for a rise fit".into(),
        ));
    }
    let tmax = hold_times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tmin = hold_times.iter().cloned().fold(f64::INFINITY, f64::min);
    let amax = amplitudes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(tmax > tmin) || !(amax > 0.0) {
        return Err(Error::FitRejected("degenerate rise data".into()));
    }
    // Initial time scale: where the data first reach (1 - 1/e) of their max.
    let target = amax * (1.0 - (-1.0f64).exp());
    let mut order: Vec<usize> = (0..hold_times.len()).collect();
    order.sort_by(|&i, &j| hold_times[i].total_cmp(&hold_times[j]));
    let t0 = order
        .iter()
        .find(|&&i| amplitudes[i] >= target)
        .map(|&i| hold_times[i])
        .filter(|&t| t > 0.0)
        .unwrap_or(0.5 * tmax);

    // Parameterized by ln T so the time scale stays positive.
    let model = |x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>| {
        let (a, t) = (x[0], x[1].exp());
        let mut jac = jac;
        for i in 0..hold_times.len() {
            let e = (-hold_times[i] / t).exp();
            r[i] = a * (1.0 - e) - amplitudes[i];
            if let Some(j) = jac.as_deref_mut() {
                j[(i, 0)] = 1.0 - e;
                j[(i, 1)] = -a * e * hold_times[i] / t;
            }
        }
    };
    let report = levenberg_marquardt(
        model,
        &[amax, t0.ln()],
        hold_times.len(),
        LmOptions::default(),
    )?;
    let a_inf = report.params[0];
    let t_rise = report.params[1].exp();
    let correlation = report
        .normal_inverse
        .as_ref()
        .map(|c| c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt())
        .unwrap_or(1.0);
    let low_confidence = !correlation.is_finite()
        || correlation.abs() > 0.995
        || (tmax - tmin.min(0.0)) < 2.0 * t_rise;
    Ok(RiseFit {
        t_rise,
        a_inf,
        residual_norm: report.residual_norm,
        correlation,
        low_confidence,
    })
}

/// Gaussian `amplitude exp(-(t - center)^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub residual_norm: f64,
}

impl GaussianFit {
    pub fn fwhm(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.sigma
    }
}

/// Fits a zero-baseline Gaussian; time is internally rescaled around the
/// initial center so the solver sees O(1) parameters.
pub fn fit_gaussian(t: &[f64], y: &[f64], guess: (f64, f64, f64)) -> Result<GaussianFit> {
    let (a0, c0, s0) = guess;
    if !(s0 > 0.0 && a0 != 0.0) {
        return Err(Error::FitRejected("invalid Gaussian guess".into()));
    }
    let scale = s0;
    let ys = a0;
    let u: Vec<f64> = t.iter().map(|&ti| (ti - c0) / scale).collect();
    let v: Vec<f64> = y.iter().map(|&yi| yi / ys).collect();
    let model = |x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>| {
        let (a, c, s) = (x[0], x[1], x[2]);
        let mut jac = jac;
        for i in 0..u.len() {
            let d = u[i] - c;
            let e = (-d * d / (2.0 * s * s)).exp();
            r[i] = a * e - v[i];
            if let Some(j) = jac.as_deref_mut() {
                j[(i, 0)] = e;
                j[(i, 1)] = a * e * d / (s * s);
                j[(i, 2)] = a * e * d * d / (s * s * s);
            }
        }
    };
    let report = levenberg_marquardt(model, &[1.0, 0.0, 1.0], u.len(), LmOptions::default())?;
    let [a, c, s] = [report.params[0], report.params[1], report.params[2]];
    Ok(GaussianFit {
        amplitude: a * ys,
        center: c0 + c * scale,
        sigma: s.abs() * scale,
        residual_norm: report.residual_norm * ys.abs(),
    })
}
