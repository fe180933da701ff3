use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Inversion snapshots over packets, one row per snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaZSnapshots {
    /// Packet detunings (rad/s).
    pub detunings: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl SigmaZSnapshots {
    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<(f64, &[f64])> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, &ts)| (ts, self.values[i].as_slice()))
    }
}

/// Uniformly sampled complex cavity amplitude with optional derived traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub a: Vec<Complex64>,
    /// Mean inversion p(t).
    pub p: Option<Vec<f64>>,
    /// Weighted instability figure over time.
    pub pbar_c: Option<Vec<f64>>,
    pub sigma_z: Option<SigmaZSnapshots>,
    pub metadata: BTreeMap<String, String>,
}

impl TimeSeries {
    /// Builds a series, checking that `t` is strictly increasing and uniform.
    pub fn new(t: Vec<f64>, a: Vec<Complex64>) -> Result<Self> {
        let series = Self {
            t,
            a,
            p: None,
            pbar_c: None,
            sigma_z: None,
            metadata: BTreeMap::new(),
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if n == 0 {
            return Err(Error::Structure("time series is empty".into()));
        }
        if self.a.len() != n {
            return Err(Error::Structure(format!(
                "{} times but {} amplitudes",
                n,
                self.a.len()
            )));
        }
        for (name, trace) in [("p", &self.p), ("pbarC", &self.pbar_c)] {
            if let Some(v) = trace {
                if v.len() != n {
                    return Err(Error::Structure(format!(
                        "trace {name} has {} samples, expected {n}",
                        v.len()
                    )));
                }
            }
        }
        if n > 1 {
            let dt = self.sample_interval();
            if !(dt > 0.0) {
                return Err(Error::Structure("times must be strictly increasing".into()));
            }
            for w in self.t.windows(2) {
                let step = w[1] - w[0];
                if !(step > 0.0) || (step - dt).abs() > 1e-6 * dt {
                    return Err(Error::Structure(format!(
                        "times are not uniformly spaced near t = {:e}",
                        w[0]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sampling interval derived from the end points of `t`.
    pub fn sample_interval(&self) -> f64 {
        let n = self.t.len();
        if n < 2 {
            return 0.0;
        }
        (self.t[n - 1] - self.t[0]) / (n - 1) as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_interval()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.a.iter().map(|z| z.norm()).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.t.partition_point(|&x| x < t)
    }

    /// Samples with `t0 <= t < t1` (traces included, snapshots dropped).
    pub fn window(&self, t0: f64, t1: f64) -> Result<TimeSeries> {
        let i0 = self.index_at(t0);
        let i1 = self.index_at(t1).max(i0);
        if i1 <= i0 {
            return Err(Error::Range {
                start: t0,
                end: t1,
                data_start: self.t_start(),
                data_end: self.t_end(),
            });
        }
        Ok(TimeSeries {
            t: self.t[i0..i1].to_vec(),
            a: self.a[i0..i1].to_vec(),
            p: self.p.as_ref().map(|v| v[i0..i1].to_vec()),
            pbar_c: self.pbar_c.as_ref().map(|v| v[i0..i1].to_vec()),
            sigma_z: None,
            metadata: self.metadata.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, dt: f64) -> TimeSeries {
        let t = (0..n).map(|k| k as f64 * dt).collect();
        TimeSeries::new(t, vec![Complex64::new(1.0, 0.0); n]).unwrap()
    }

    #[test]
    fn rejects_inconsistent_input() {
        assert!(TimeSeries::new(vec![], vec![]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![Complex64::new(0.0, 0.0)]).is_err());
        let a = vec![Complex64::new(0.0, 0.0); 3];
        assert!(TimeSeries::new(vec![0.0, 1.0, 3.0], a.clone()).is_err());
        assert!(TimeSeries::new(vec![0.0, -1.0, -2.0], a).is_err());
    }

    #[test]
    fn window_and_rate() {
        let s = series(101, 0.01);
        assert!((s.sample_rate() - 100.0).abs() < 1e-9);
        let w = s.window(0.2, 0.3).unwrap();
        assert_eq!(w.len(), 10);
        assert!(s.window(2.0, 3.0).is_err());
    }
}
