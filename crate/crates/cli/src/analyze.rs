//! The `analyze` verb: configurable analyses of a recorded trace.

use maser_bloch_core::analysis::{
    demodulate, detect_pulses, first_revival_delay, fit_lorentzian, hole_profile_from,
    power_spectrum, pulse_bandwidth, sliding_spectrum, SigmaZSnapshots, SpectrumFit, TimeSeries,
    Window, DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION,
};
use maser_bloch_core::ensemble::{hz, to_hz};
use maser_bloch_core::protocol::ParamsConfig;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// Which analyses to run. Each present table enables one analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub pulses: Option<PulsesSpec>,
    pub revival_delay: Option<RevivalSpec>,
    pub spectrum: Option<SpectrumSpec>,
    pub sliding_spectrum: Option<SlidingSpec>,
    pub hole_profile: Option<HoleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsesSpec {
    #[serde(default = "default_prominence")]
    pub min_prominence: f64,
    #[serde(default = "default_separation")]
    pub min_separation: f64,
}

fn default_prominence() -> f64 {
    DEFAULT_MIN_PROMINENCE
}

fn default_separation() -> f64 {
    DEFAULT_MIN_SEPARATION
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevivalSpec {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    /// Window start (s); defaults to the last `duration` of the trace.
    pub t_start: Option<f64>,
    pub duration: f64,
    #[serde(default)]
    pub window: Window,
    /// Intermediate frequency removed before the transform (Hz).
    #[serde(default)]
    pub demodulate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingSpec {
    pub window_duration: f64,
    pub stride: f64,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub demodulate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    /// Snapshot time (s); defaults to the last snapshot.
    pub time: Option<f64>,
    #[serde(default = "default_center")]
    pub center_hz: f64,
    #[serde(default = "default_w")]
    pub w_hz: f64,
}

fn default_center() -> f64 {
    ParamsConfig::default().omega0_hz
}

fn default_w() -> f64 {
    ParamsConfig::default().w_hz
}

fn spectrum_json(fit: &SpectrumFit) -> Value {
    json!({
        "f_center": fit.f_center,
        "hwhm": fit.hwhm,
        "fwhm": fit.fwhm(),
        "amplitude": fit.amplitude,
        "baseline": fit.baseline,
        "residual_norm": fit.residual_norm,
    })
}

fn shifted(series: &TimeSeries, f_if: f64) -> Result<TimeSeries, String> {
    if f_if == 0.0 {
        Ok(series.clone())
    } else {
        demodulate(series, f_if).map_err(|e| e.to_string())
    }
}

fn pulses(series: &TimeSeries, spec: &PulsesSpec) -> Result<Value, String> {
    let found = detect_pulses(series, spec.min_prominence, spec.min_separation)
        .map_err(|e| e.to_string())?;
    Ok(Value::Array(
        found
            .iter()
            .map(|p| {
                json!({
                    "t_peak": p.t_peak,
                    "peak_amplitude": p.peak_amplitude,
                    "fwhm": p.fwhm,
                    "phase_mean": p.phase_mean,
                    "phase_flatness": p.phase_flatness,
                    "transform_limited_bandwidth_hz": p.transform_limited_bandwidth(),
                    "spectral_bandwidth_hz": pulse_bandwidth(series, p).ok(),
                })
            })
            .collect(),
    ))
}

fn spectrum(series: &TimeSeries, spec: &SpectrumSpec) -> Result<Value, String> {
    let s = shifted(series, spec.demodulate_hz)?;
    let dt = s.sample_interval();
    let t_start = spec
        .t_start
        .unwrap_or(s.t_end() + dt - spec.duration)
        .max(s.t_start());
    let sp = power_spectrum(&s, t_start, spec.duration, spec.window).map_err(|e| e.to_string())?;
    let fit = fit_lorentzian(&sp).map_err(|e| e.to_string())?;
    let mut v = spectrum_json(&fit);
    let m = v.as_object_mut().expect("object");
    m.insert("resolution_hz".into(), json!(sp.resolution_hz));
    m.insert("t_start".into(), json!(sp.t_start));
    m.insert("duration".into(), json!(sp.duration));
    m.insert("window".into(), json!(sp.window));
    Ok(v)
}

fn sliding(series: &TimeSeries, spec: &SlidingSpec) -> Result<Value, String> {
    let s = shifted(series, spec.demodulate_hz)?;
    let fits = sliding_spectrum(&s, spec.window_duration, spec.stride, spec.window)
        .map_err(|e| e.to_string())?;
    Ok(Value::Array(
        fits.iter()
            .map(|w| {
                let mut v = w.fit.as_ref().map(spectrum_json).unwrap_or(json!({}));
                let m = v.as_object_mut().expect("object");
                m.insert("t_f".into(), json!(w.t_f));
                if let Some(e) = &w.error {
                    m.insert("error".into(), json!(e));
                }
                v
            })
            .collect(),
    ))
}

fn hole(snaps: Option<&SigmaZSnapshots>, spec: &HoleSpec) -> Result<Value, String> {
    let snaps = snaps.ok_or("no sigma_z snapshots available")?;
    let (t, z) = match spec.time {
        Some(t) => snaps.nearest(t).ok_or("sigma_z file has no snapshots")?,
        None => match (snaps.times.last(), snaps.values.last()) {
            (Some(&t), Some(z)) => (t, z.as_slice()),
            _ => return Err("sigma_z file has no snapshots".into()),
        },
    };
    let h = hole_profile_from(z, &snaps.detunings, hz(spec.center_hz), hz(spec.w_hz))
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "snapshot_time": t,
        "depth": h.depth,
        "width_hz": to_hz(h.width),
        "center_hz": to_hz(h.center),
        "reference": h.reference,
    }))
}

/// Result of an analysis run. `errors` maps each failed analysis to its message.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub value: Value,
    pub errors: Vec<(String, String)>,
}

pub fn analyze(
    series: &TimeSeries,
    snaps: Option<&SigmaZSnapshots>,
    spec: &AnalysisSpec,
) -> AnalysisReport {
    let mut out = Map::new();
    let mut errors = Vec::new();
    out.insert(
        "metadata".into(),
        json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "samples": series.len(),
            "t_start": series.t_start(),
            "t_end": series.t_end(),
            "sample_rate_hz": series.sample_rate(),
            "source": series.metadata.get("source"),
            "spec": spec,
        }),
    );
    let mut record = |key: &str, result: Result<Value, String>| match result {
        Ok(v) => {
            out.insert(key.into(), v);
        }
        Err(e) => errors.push((key.to_string(), e)),
    };
    if let Some(p) = &spec.pulses {
        record("pulses", pulses(series, p));
    }
    if spec.revival_delay.is_some() {
        record(
            "first_revival_delay",
            first_revival_delay(series)
                .map(|d| json!(d))
                .map_err(|e| e.to_string()),
        );
    }
    if let Some(s) = &spec.spectrum {
        record("spectrum", spectrum(series, s));
    }
    if let Some(s) = &spec.sliding_spectrum {
        record("sliding_spectrum", sliding(series, s));
    }
    if let Some(h) = &spec.hole_profile {
        record("hole_profile", hole(snaps, h));
    }
    if !errors.is_empty() {
        let map: Map<String, Value> = errors.iter().map(|(k, e)| (k.clone(), json!(e))).collect();
        out.insert("errors".into(), Value::Object(map));
    }
    AnalysisReport {
        value: Value::Object(out),
        errors,
    }
}
