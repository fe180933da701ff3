//! Demodulation, power spectra and Lorentzian line fits.
//!
//! Spectra follow the signal-processing convention: a component
//! `exp(+i 2 pi f t)` appears at `+f`. A field oscillating at a positive
//! offset `delta` from the simulation frame evolves as `exp(-i delta t)` and
//! therefore shows up at `-delta / 2 pi`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fit::{levenberg_marquardt, LmOptions};
use super::pulses::{flanks, half_width};
use super::{PulseFeature, TimeSeries};
use crate::error::{Error, Result};

/// Multiplies the series by `exp(-i 2 pi f_if t)`.
pub fn demodulate(series: &TimeSeries, f_if: f64) -> Result<TimeSeries> {
    if series.len() > 1 {
        let rate = series.sample_rate();
        if !(rate > 2.0 * f_if.abs()) {
            return Err(Error::Aliasing { rate, f_if });
        }
    }
    let mut out = series.clone();
    if f_if != 0.0 {
        for (a, &t) in out.a.iter_mut().zip(&series.t) {
            *a *= Complex64::from_polar(1.0, -2.0 * PI * f_if * t);
        }
    }
    let previous: f64 = series
        .metadata
        .get("demodulation_hz")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.0);
    out.metadata
        .insert("demodulation_hz".into(), format!("{:e}", previous + f_if));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending frequencies (Hz).
    pub freq_hz: Vec<f64>,
    /// |X(f)|^2 / N, so the total equals the windowed sample energy.
    pub power: Vec<f64>,
    pub resolution_hz: f64,
    pub t_start: f64,
    pub duration: f64,
    pub window: Window,
}

/// Power spectrum of the samples in `[t_start, t_start + duration)`.
pub fn power_spectrum(
    series: &TimeSeries,
    t_start: f64,
    duration: f64,
    window: Window,
) -> Result<Spectrum> {
    let dt = series.sample_interval();
    let range_err = || Error::Range {
        start: t_start,
        end: t_start + duration,
        data_start: series.t_start(),
        data_end: series.t_end(),
    };
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(range_err());
    }
    let offset = (t_start - series.t_start()) / dt;
    let n = (duration / dt).round() as usize;
    if offset < -1e-6 || n < 2 {
        return Err(range_err());
    }
    let i0 = offset.round() as usize;
    if i0 + n > series.len() {
        return Err(range_err());
    }

    let mut buf: Vec<Complex64> = series.a[i0..i0 + n].to_vec();
    if window == Window::Hann {
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos();
        }
    }
    // The forward transform correlates with exp(-i 2 pi j k / n), which puts
    // exp(+i 2 pi f t) at +f.
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let resolution = 1.0 / (n as f64 * dt);
    let half = n / 2;
    let mut freq_hz = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);
    // Negative frequencies first: bins half+1..n map to -(n-half-1)..-1.
    for j in (half + 1..n).chain(0..=half) {
        let k = if j > half {
            j as f64 - n as f64
        } else {
            j as f64
        };
        freq_hz.push(k * resolution);
        power.push(buf[j].norm_sqr() / n as f64);
    }
    Ok(Spectrum {
        freq_hz,
        power,
        resolution_hz: resolution,
        t_start: series.t[i0],
        duration: n as f64 * dt,
        window,
    })
}

/// Power-spectrum FWHM (Hz) of one pulse, gated to `t_peak +/- 2 fwhm`
/// within its bounding valleys and zero-padded so the width spans many bins.
pub fn pulse_bandwidth(series: &TimeSeries, pulse: &PulseFeature) -> Result<f64> {
    let dt = series.sample_interval();
    let x = series.abs();
    let near = series.index_at(pulse.t_peak - dt)..series.index_at(pulse.t_peak + dt).min(x.len());
    let p = near
        .max_by(|&i, &j| x[i].total_cmp(&x[j]))
        .ok_or_else(|| Error::NotFound(format!("no sample near {:e} s", pulse.t_peak)))?;
    let (vl, vr) = flanks(&x, p);
    let lo = series.index_at(pulse.t_peak - 2.0 * pulse.fwhm).max(vl);
    let hi = series
        .index_at(pulse.t_peak + 2.0 * pulse.fwhm + 0.5 * dt)
        .min(series.len())
        .min(vr + 1);
    if hi < lo + 4 {
        return Err(Error::FitRejected(format!(
            "pulse at {:e} s spans fewer than 4 samples",
            pulse.t_peak
        )));
    }
    let n = ((hi - lo) * 32).next_power_of_two().max(4096);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..hi - lo].copy_from_slice(&series.a[lo..hi]);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    // Unwrap to ascending frequency so the peak's neighbourhood is contiguous.
    let half = n / 2;
    let order: Vec<usize> = (half + 1..n).chain(0..=half).collect();
    let power: Vec<f64> = order.iter().map(|&j| buf[j].norm_sqr()).collect();
    let freq: Vec<f64> = order
        .iter()
        .map(|&j| {
            let k = if j > half {
                j as f64 - n as f64
            } else {
                j as f64
            };
            k / (n as f64 * dt)
        })
        .collect();
    let p = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(half_width(&power, &freq, p, -1) + half_width(&power, &freq, p, 1))
}

/// Lorentzian line `amplitude / (1 + ((f - f_center)/hwhm)^2) + baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit {
    pub f_center: f64,
    pub hwhm: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub residual_norm: f64,
}

impl SpectrumFit {
    pub fn fwhm(&self) -> f64 {
        2.0 * self.hwhm
    }

    pub fn eval(&self, f: f64) -> f64 {
        self.amplitude / (1.0 + ((f - self.f_center) / self.hwhm).powi(2)) + self.baseline
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Fits a single Lorentzian (plus constant baseline) around the dominant
/// peak of `spectrum`.
pub fn fit_lorentzian(spectrum: &Spectrum) -> Result<SpectrumFit> {
    let f = &spectrum.freq_hz;
    let p = &spectrum.power;
    if f.len() < 5 {
        return Err(Error::FitRejected("spectrum has fewer than 5 bins".into()));
    }
    let (ipk, &peak) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let med = median(p);
    if !(peak > 10.0 * med) || !(peak > 0.0) {
        return Err(Error::FitRejected(format!(
            "no dominant peak (peak {peak:e}, median {med:e})"
        )));
    }

    let half = med + 0.5 * (peak - med);
    let res = spectrum.resolution_hz;
    let crossing = |dir: isize| -> f64 {
        let mut i = ipk as isize;
        loop {
            let next = i + dir;
            if next < 0 || next as usize >= p.len() {
                return (f[i as usize] - f[ipk]).abs();
            }
            let (pi, pn) = (p[i as usize], p[next as usize]);
            if pn <= half {
                let frac = (pi - half) / (pi - pn);
                let fi = f[i as usize];
                let fx = fi + frac * (f[next as usize] - fi);
                return (fx - f[ipk]).abs();
            }
            i = next;
        }
    };
    let hwhm0 = (0.5 * (crossing(-1) + crossing(1))).max(0.25 * res);

    // Fit on a neighbourhood of the peak wide enough to pin down the wings.
    let reach = ((40.0 * hwhm0 / res).ceil() as usize).max(20);
    let lo = ipk.saturating_sub(reach);
    let hi = (ipk + reach + 1).min(p.len());
    let fs = &f[lo..hi];
    let ps = &p[lo..hi];

    // Scaled coordinates: u = (f - f_peak)/hwhm0, v = power/peak.
    let f_ref = f[ipk];
    let u: Vec<f64> = fs.iter().map(|x| (x - f_ref) / hwhm0).collect();
    let v: Vec<f64> = ps.iter().map(|x| x / peak).collect();
    let model = |x: &[f64], r: &mut [f64], jac: Option<&mut DMatrix<f64>>| {
        let (a, c, h, b) = (x[0], x[1], x[2], x[3]);
        let mut jac = jac;
        for i in 0..u.len() {
            let d = (u[i] - c) / h;
            let den = 1.0 + d * d;
            r[i] = a / den + b - v[i];
            if let Some(j) = jac.as_deref_mut() {
                let den2 = den * den;
                j[(i, 0)] = 1.0 / den;
                j[(i, 1)] = 2.0 * a * d / (h * den2);
                j[(i, 2)] = 2.0 * a * d * d / (h * den2);
                j[(i, 3)] = 1.0;
            }
        }
    };
    let guess = [(peak - med) / peak, 0.0, 1.0, med / peak];
    let report = levenberg_marquardt(model, &guess, u.len(), LmOptions::default())?;
    let [a, c, h, b] = [
        report.params[0],
        report.params[1],
        report.params[2],
        report.params[3],
    ];
    let hwhm = h.abs() * hwhm0;
    if !(hwhm > 0.0 && hwhm.is_finite()) {
        return Err(Error::NoConvergence("fitted width is not positive".into()));
    }
    Ok(SpectrumFit {
        f_center: f_ref + c * hwhm0,
        hwhm,
        amplitude: a * peak,
        baseline: b * peak,
        residual_norm: report.residual_norm * peak,
    })
}

/// One window of a sliding spectral analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingFit {
    /// Window start time (s).
    pub t_f: f64,
    pub fit: Option<SpectrumFit>,
    pub error: Option<String>,
}

/// Lorentzian fits of consecutive windows starting every `stride` seconds.
pub fn sliding_spectrum(
    series: &TimeSeries,
    window_duration: f64,
    stride: f64,
    window: Window,
) -> Result<Vec<SlidingFit>> {
    if !(window_duration > 0.0 && stride > 0.0) {
        return Err(Error::Domain(
            "window duration and stride must be positive".into(),
        ));
    }
    let dt = series.sample_interval();
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t_f = series.t_start() + k as f64 * stride;
        // A window of n samples ends one sample interval before t_f + duration.
        if t_f + window_duration - dt > series.t_end() + dt * 0.5 {
            break;
        }
        let result =
            power_spectrum(series, t_f, window_duration, window).and_then(|s| fit_lorentzian(&s));
        out.push(match result {
            Ok(fit) => SlidingFit {
                t_f,
                fit: Some(fit),
                error: None,
            },
            Err(e) => SlidingFit {
                t_f,
                fit: None,
                error: Some(e.to_string()),
            },
        });
        k += 1;
    }
    if out.is_empty() {
        return Err(Error::Range {
            start: series.t_start(),
            end: series.t_start() + window_duration,
            data_start: series.t_start(),
            data_end: series.t_end(),
        });
    }
    Ok(out)
}
