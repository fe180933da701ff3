//! Dormand-Prince 5(4) with Hairer's step-size control and 4th-order dense
//! output. Steps never cross the end of the current interval, so control
//! discontinuities placed on interval boundaries are hit exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "Tolerances::default_rtol")]
    pub rtol: f64,
    #[serde(default = "Tolerances::default_atol")]
    pub atol: f64,
    /// Upper bound on accepted plus rejected steps for one run.
    #[serde(default = "Tolerances::default_max_steps")]
    pub max_steps: usize,
}

impl Tolerances {
    fn default_rtol() -> f64 {
        1e-8
    }
    fn default_atol() -> f64 {
        1e-10
    }
    fn default_max_steps() -> usize {
        50_000_000
    }

    /// Both tolerances scaled by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Domain(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        Ok(())
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: Self::default_rtol(),
            atol: Self::default_atol(),
            max_steps: Self::default_max_steps(),
        }
    }
}

/// Step counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

pub(crate) struct Dopri5 {
    tol: Tolerances,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
    cont: [Vec<f64>; 5],
    fac_old: f64,
    pub(crate) h: f64,
    pub(crate) stats: IntegrationStats,
}

impl Dopri5 {
    pub(crate) fn new(dim: usize, tol: Tolerances) -> Self {
        let v = || vec![0.0; dim];
        Self {
            tol,
            k: [v(), v(), v(), v(), v(), v(), v()],
            y_stage: v(),
            y_new: v(),
            err: v(),
            cont: [v(), v(), v(), v(), v()],
            fac_old: 1e-4,
            h: 0.0,
            stats: IntegrationStats::default(),
        }
    }

    fn weighted_rms(&self, v: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (vi, yi) in v.iter().zip(y) {
            let sk = self.tol.atol + self.tol.rtol * yi.abs();
            acc += (vi / sk).powi(2);
        }
        (acc / v.len() as f64).sqrt()
    }

    /// Hairer's starting step heuristic. Expects `k[0] = f(t, y)`.
    fn initial_step<F>(&mut self, f: &F, t: f64, y: &[f64], span: f64) -> f64
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let dnf = self.weighted_rms(&self.k[0], y);
        let dny = self.weighted_rms(y, y);
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6 * span
        } else {
            0.01 * dny / dnf
        };
        h = h.min(span);
        for ((ys, &yi), &ki) in self.y_stage.iter_mut().zip(y).zip(&self.k[0]) {
            *ys = yi + h * ki;
        }
        let (k0, rest) = self.k.split_at_mut(1);
        f(t + h, &self.y_stage, &mut rest[0]);
        self.stats.evaluations += 1;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sk = self.tol.atol + self.tol.rtol * y[i].abs();
            acc += ((rest[0][i] - k0[0][i]) / sk).powi(2);
        }
        let der2 = (acc / y.len() as f64).sqrt() / h;
        let der12 = dnf.max(der2);
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(span)
    }

    /// Integrates from `t0` to exactly `t1`, calling `on_step(t, h, self)`
    /// after every accepted step so that dense output can be sampled with
    /// [`Dopri5::dense`]. On return `y` holds the state at `t1`.
    pub(crate) fn run<F, S>(
        &mut self,
        f: &F,
        t0: f64,
        t1: f64,
        y: &mut [f64],
        mut on_step: S,
    ) -> Result<()>
    where
        F: Fn(f64, &[f64], &mut [f64]),
        S: FnMut(f64, f64, &Dopri5) -> Result<()>,
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        f(t0, y, &mut self.k[0]);
        self.stats.evaluations += 1;
        if self.h <= 0.0 {
            self.h = self.initial_step(f, t0, y, span);
        }
        self.fac_old = 1e-4;
        let mut t = t0;
        let mut last_rejected = false;
        let h_min = 16.0 * f64::EPSILON * t1.abs().max(span);

        loop {
            if self.stats.accepted + self.stats.rejected >= self.tol.max_steps {
                return Err(Error::TooManySteps {
                    steps: self.tol.max_steps,
                    t,
                    t_target: t1,
                });
            }
            let mut h = self.h;
            let last = t + h >= t1 - h_min;
            if last {
                h = t1 - t;
            }
            if h < h_min && !last {
                return Err(Error::StepUnderflow {
                    t,
                    h,
                    max_abs: y.iter().fold(0.0, |m, v| m.max(v.abs())),
                });
            }

            self.stages(f, t, h, y);
            let err = self.step_error(y);
            if !err.is_finite() {
                return Err(Error::NonFinite {
                    t,
                    what: "trial step".into(),
                });
            }

            let fac11 = err.powf(EXPO1);
            let fac =
                (fac11 / self.fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;

            if err <= 1.0 {
                self.fac_old = err.max(1e-4);
                self.stats.accepted += 1;
                self.prepare_dense(h, y);
                let t_new = if last { t1 } else { t + h };
                y.copy_from_slice(&self.y_new);
                // FSAL: k7 at the new point becomes k1 of the next step.
                let (k0, rest) = self.k.split_at_mut(6);
                k0[0].copy_from_slice(&rest[0]);
                on_step(t, t_new - t, self)?;
                t = t_new;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
                // Keep the unclamped step for the next interval.
                if !last || h_new < self.h {
                    self.h = h_new;
                }
                if last {
                    return Ok(());
                }
            } else {
                h_new = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                self.stats.rejected += 1;
                last_rejected = true;
                self.h = h_new;
            }
        }
    }

    fn step_error(&self, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&yi, &yn), &e) in y.iter().zip(&self.y_new).zip(&self.err) {
            let sk = self.tol.atol + self.tol.rtol * yi.abs().max(yn.abs());
            acc += (e / sk).powi(2);
        }
        (acc / y.len() as f64).sqrt()
    }

    fn stages<F>(&mut self, f: &F, t: f64, h: f64, y: &[f64])
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ys = &mut self.y_stage;
        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, ys, k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, ys, k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, ys, k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, ys, k5);
        for i in 0..n {
            ys[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, ys, k6);
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, yn, k7);
        self.stats.evaluations += 6;
        for i in 0..n {
            self.err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
    }

    fn prepare_dense(&mut self, h: f64, y: &[f64]) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.cont;
        for i in 0..y.len() {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            r1[i] = y[i];
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - h * k7[i] - bspl;
            r5[i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
    }

    /// Dense output at fraction `theta` of the last accepted step.
    #[cfg(test)]
    pub(crate) fn dense(&self, theta: f64, out: &mut [f64]) {
        self.dense_range(theta, 0, out);
    }

    /// Dense output of components `offset..offset + out.len()`.
    pub(crate) fn dense_range(&self, theta: f64, offset: usize, out: &mut [f64]) {
        let th1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.cont;
        for (k, o) in out.iter_mut().enumerate() {
            let i = offset + k;
            *o = r1[i] + theta * (r2[i] + th1 * (r3[i] + theta * (r4[i] + th1 * r5[i])));
        }
    }

    /// Continuous-extension coefficients of the last accepted step.
    pub(crate) fn cont(&self) -> &[Vec<f64>; 5] {
        &self.cont
    }

    /// Evaluates the dense polynomial for one set of (possibly reduced)
    /// coefficients.
    pub(crate) fn dense_scalar(theta: f64, r: &[f64; 5]) -> f64 {
        let th1 = 1.0 - theta;
        r[0] + theta * (r[1] + th1 * (r[2] + theta * (r[3] + th1 * r[4])))
    }
}
