//! Pulse detection on |a(t)|.

use serde::{Deserialize, Serialize};

use super::fit::fit_gaussian;
use super::TimeSeries;
use crate::error::{Error, Result};

/// Default minimum prominence as a fraction of the global maximum.
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.05;
/// Default minimum peak separation (s).
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseFeature {
    pub t_peak: f64,
    pub peak_amplitude: f64,
    /// Full-width at half-maximum of the fitted Gaussian (s).
    pub fwhm: f64,
    /// Circular mean of arg a over the FWHM window (rad).
    pub phase_mean: f64,
    /// Circular standard deviation of arg a over the FWHM window (rad).
    pub phase_flatness: f64,
}

impl PulseFeature {
    /// Power-spectrum FWHM (Hz) of a transform-limited Gaussian pulse whose
    /// |a| has this FWHM: `2 sqrt(2) ln 2 / (pi fwhm)`.
    pub fn transform_limited_bandwidth(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * std::f64::consts::LN_2 / (std::f64::consts::PI * self.fwhm)
    }
}

/// Local maxima with their topographic prominence.
fn peaks_with_prominence(x: &[f64]) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            // Walk across a plateau.
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
        .into_iter()
        .map(|p| {
            let h = x[p];
            let mut left_min = h;
            let mut k = p;
            while k > 0 {
                k -= 1;
                if x[k] > h {
                    break;
                }
                left_min = left_min.min(x[k]);
            }
            let mut right_min = h;
            let mut k = p;
            while k + 1 < n {
                k += 1;
                if x[k] > h {
                    break;
                }
                right_min = right_min.min(x[k]);
            }
            (p, h - left_min.max(right_min))
        })
        .collect()
}

fn circular_stats(phases: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut c, mut s, mut m) = (0.0, 0.0, 0usize);
    for ph in phases {
        c += ph.cos();
        s += ph.sin();
        m += 1;
    }
    if m == 0 {
        return (0.0, 0.0);
    }
    let r = ((c * c + s * s).sqrt() / m as f64).min(1.0);
    let std = (-2.0 * r.ln()).max(0.0).sqrt();
    (s.atan2(c), std)
}

/// Half-maximum crossing distance from peak `p` in direction `dir`, stopping
/// at the next valley.
pub(super) fn half_width(x: &[f64], t: &[f64], p: usize, dir: isize) -> f64 {
    let half = 0.5 * x[p];
    let mut i = p as isize;
    loop {
        let next = i + dir;
        if next < 0 || next as usize >= x.len() {
            return (t[i as usize] - t[p]).abs();
        }
        let (xi, xn) = (x[i as usize], x[next as usize]);
        if xn <= half {
            let frac = (xi - half) / (xi - xn);
            let ti = t[i as usize];
            return (ti + frac * (t[next as usize] - ti) - t[p]).abs();
        }
        if xn > xi && (i - p as isize).abs() > 1 {
            // Climbing into the neighbouring pulse.
            return (t[i as usize] - t[p]).abs();
        }
        i = next;
    }
}

/// Indices of the valleys bounding the peak at `p`.
pub(super) fn flanks(x: &[f64], p: usize) -> (usize, usize) {
    let mut vl = p;
    while vl > 0 && x[vl - 1] <= x[vl] {
        vl -= 1;
    }
    let mut vr = p;
    while vr + 1 < x.len() && x[vr + 1] <= x[vr] {
        vr += 1;
    }
    (vl, vr)
}

fn characterize(series: &TimeSeries, x: &[f64], p: usize) -> PulseFeature {
    let t = &series.t;
    let est_fwhm = (half_width(x, t, p, -1) + half_width(x, t, p, 1)).max(series.sample_interval());
    // Stay on this pulse's flanks.
    let (vl, vr) = flanks(x, p);
    let lo = series.index_at(t[p] - 2.0 * est_fwhm).max(vl);
    let hi = series
        .index_at(t[p] + 2.0 * est_fwhm + 0.5 * series.sample_interval())
        .min(x.len())
        .min(vr + 1);
    let sigma0 = est_fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());

    let fwhm = match fit_gaussian(&t[lo..hi], &x[lo..hi], (x[p], t[p], sigma0)) {
        Ok(g)
            if g.sigma > 0.0 && (g.center - t[p]).abs() < est_fwhm && g.fwhm() < 4.0 * est_fwhm =>
        {
            g.fwhm()
        }
        _ => est_fwhm,
    };
    // Peak time from the parabola through the three highest samples, so that
    // delays run maximum to maximum even for skewed pulses.
    let t_peak = if p > 0 && p + 1 < x.len() {
        let (l, c, r) = (x[p - 1], x[p], x[p + 1]);
        let den = l - 2.0 * c + r;
        let shift = if den < 0.0 { 0.5 * (l - r) / den } else { 0.0 };
        t[p] + shift.clamp(-0.5, 0.5) * series.sample_interval()
    } else {
        t[p]
    };
    let w0 = series.index_at(t_peak - 0.5 * fwhm).max(vl);
    let w1 = series
        .index_at(t_peak + 0.5 * fwhm)
        .min(vr + 1)
        .max(w0 + 1)
        .min(x.len());
    let (phase_mean, phase_flatness) = circular_stats(series.a[w0..w1].iter().map(|z| z.arg()));
    PulseFeature {
        t_peak,
        peak_amplitude: x[p],
        fwhm,
        phase_mean,
        phase_flatness,
    }
}

/// Finds pulses in |a(t)|: local maxima whose prominence exceeds
/// `min_prominence` times the global maximum, thinned so that no two kept
/// peaks are closer than `min_separation` (higher peaks win).
pub fn detect_pulses(
    series: &TimeSeries,
    min_prominence: f64,
    min_separation: f64,
) -> Result<Vec<PulseFeature>> {
    if !(min_prominence > 0.0 && min_separation > 0.0) {
        return Err(Error::Domain(
            "prominence and separation thresholds must be positive".into(),
        ));
    }
    let x = series.abs();
    let global = x.iter().cloned().fold(0.0, f64::max);
    if !(global > 0.0) {
        return Ok(Vec::new());
    }
    let mut candidates: Vec<usize> = peaks_with_prominence(&x)
        .into_iter()
        .filter(|&(_, prom)| prom >= min_prominence * global)
        .map(|(p, _)| p)
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|&k| (series.t[k] - series.t[c]).abs() >= min_separation)
        {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    Ok(kept
        .into_iter()
        .map(|p| characterize(series, &x, p))
        .collect())
}

/// Peak-to-peak delay between the first two pulses.
pub fn revival_delay(pulses: &[PulseFeature]) -> Result<f64> {
    match pulses {
        [first, second, ..] => Ok(second.t_peak - first.t_peak),
        _ => Err(Error::NotFound(format!(
            "need at least two pulses, found {}",
            pulses.len()
        ))),
    }
}

/// Whether |a| stays below `level` for at least `min_len` seconds somewhere
/// between samples `i0` and `i1`.
fn quiet_between(x: &[f64], t: &[f64], i0: usize, i1: usize, level: f64, min_len: f64) -> bool {
    let mut start: Option<f64> = None;
    for i in i0..=i1.min(x.len() - 1) {
        if x[i] < level {
            let s = *start.get_or_insert(t[i]);
            if t[i] - s >= min_len {
                return true;
            }
        } else {
            start = None;
        }
    }
    false
}

/// Delay from the initial burst to the first revival, using the default
/// detection thresholds. Pulses reached from the burst without a quiescent
/// gap (|a| below the prominence threshold for at least the minimum
/// separation) are its ringing and are skipped.
pub fn first_revival_delay(series: &TimeSeries) -> Result<f64> {
    let pulses = detect_pulses(series, DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION)?;
    let first = pulses
        .first()
        .ok_or_else(|| Error::NotFound("no pulses".into()))?;
    let x = series.abs();
    let level = DEFAULT_MIN_PROMINENCE * x.iter().cloned().fold(0.0, f64::max);
    let i0 = series.index_at(first.t_peak);
    pulses[1..]
        .iter()
        .find(|p| {
            let i1 = series.index_at(p.t_peak);
            quiet_between(&x, &series.t, i0, i1, level, DEFAULT_MIN_SEPARATION)
        })
        .map(|p| p.t_peak - first.t_peak)
        .ok_or_else(|| {
            Error::NotFound(format!(
                "no revival after a quiescent gap among {} pulses",
                pulses.len()
            ))
        })
}

/// For each pair of consecutive pulses, the minimum of |a| between their
/// peaks divided by the smaller of the two peak amplitudes.
pub fn valley_ratios(series: &TimeSeries, pulses: &[PulseFeature]) -> Vec<f64> {
    let x = series.abs();
    pulses
        .windows(2)
        .map(|w| {
            let i0 = series.index_at(w[0].t_peak);
            let i1 = series.index_at(w[1].t_peak).min(x.len() - 1);
            let valley = x[i0..=i1.max(i0)]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            valley / w[0].peak_amplitude.min(w[1].peak_amplitude)
        })
        .collect()
}
