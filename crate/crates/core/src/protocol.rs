//! Declarative experiment sequences, presets and parameter sweeps.
//!
//! Scenario files are TOML. All frequencies are in Hz, times in seconds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    detect_pulses, first_revival_delay, fit_rise, linear_fit, LinearFit, RiseFit, TimeSeries,
    DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION,
};
use crate::dynamics::{
    integrate_full, DriveSegment, HoldSegment, NoiseConfig, Simulation, Tolerances,
};
use crate::ensemble::{
    discretize, hz, EnsembleGrid, PhysicalParams, DEFAULT_ETA, DEFAULT_SPAN_FACTOR,
};
use crate::error::{Error, Result};

/// Physical parameters as they appear in scenario files (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub omega_c_hz: f64,
    pub kappa_hz: f64,
    pub gamma_perp_hz: f64,
    pub g_coll_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0_hz: Option<f64>,
    pub w_hz: f64,
    pub q: f64,
    pub omega0_hz: f64,
    pub j_fill_hz: f64,
    /// Constant cavity drive (field units per second).
    pub eta: f64,
    pub cavity_detuning_hz: f64,
    pub n_rho: usize,
    /// Half-width of the packet grid in units of the distribution FWHM.
    pub span_factor: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            omega_c_hz: 3.1e9,
            kappa_hz: 418e3,
            gamma_perp_hz: 0.2e6,
            g_coll_hz: 4.6e6,
            g0_hz: Some(2.0),
            w_hz: 9.2e6,
            q: 1.39,
            omega0_hz: 0.0,
            j_fill_hz: 16e3,
            eta: DEFAULT_ETA,
            cavity_detuning_hz: 0.0,
            n_rho: 501,
            span_factor: DEFAULT_SPAN_FACTOR,
        }
    }
}

impl ParamsConfig {
    pub fn to_physical(&self) -> PhysicalParams {
        PhysicalParams {
            omega_c: hz(self.omega_c_hz),
            kappa: hz(self.kappa_hz),
            gamma_perp: hz(self.gamma_perp_hz),
            g_coll: hz(self.g_coll_hz),
            g0: self.g0_hz.map(hz),
            w: hz(self.w_hz),
            q: self.q,
            omega0: hz(self.omega0_hz),
            j_fill: hz(self.j_fill_hz),
            eta: self.eta,
            cavity_detuning: hz(self.cavity_detuning_hz),
            n_rho: self.n_rho,
        }
    }

    /// Physical parameters and the discretized ensemble.
    pub fn build(&self) -> Result<(PhysicalParams, EnsembleGrid)> {
        let params = self.to_physical();
        params.validate()?;
        if !(self.span_factor.is_finite() && self.span_factor > 0.0) {
            return Err(Error::Domain(format!(
                "span_factor must be positive, got {}",
                self.span_factor
            )));
        }
        let grid = discretize(&params, self.span_factor * params.w)?;
        Ok((params, grid))
    }
}

/// Instantaneous Lorentzian hole applied at preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub center_hz: f64,
    /// Half-width at half-maximum (Hz).
    pub width_hz: f64,
    /// Inversion removed at the hole center, in [0, 2].
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preparation {
    pub p0: f64,
    #[serde(default = "Preparation::default_seed")]
    pub seed_coherence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole: Option<HoleSpec>,
}

impl Preparation {
    fn default_seed() -> f64 {
        crate::dynamics::DEFAULT_SEED_COHERENCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Hold(HoldSegment),
    Drive(DriveSegment),
}

impl Segment {
    pub fn t_start(&self) -> f64 {
        match self {
            Segment::Hold(h) => h.t_start,
            Segment::Drive(d) => d.t_start,
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Segment::Hold(h) => h.t_end,
            Segment::Drive(d) => d.t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    /// Samples per second.
    pub output_rate: f64,
    /// Keep every n-th sample's packet inversions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_z_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub t_end: f64,
    #[serde(default)]
    pub params: ParamsConfig,
    pub initial: Preparation,
    #[serde(default)]
    pub segments: Vec<Segment>,
    pub record: RecordSpec,
    #[serde(default)]
    pub solver: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(format!("{}: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Scenario("scenario name is empty".into()));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.record.output_rate.is_finite() && self.record.output_rate > 0.0) {
            return bad("record.output_rate must be positive".into());
        }
        for (i, s) in self.segments.iter().enumerate() {
            let (a, b) = (s.t_start(), s.t_end());
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
                return bad(format!(
                    "segment {i} has an empty or invalid interval [{a}, {b}]"
                ));
            }
            if b > self.t_end {
                return bad(format!(
                    "segment {i} ends at {b} after t_end {}",
                    self.t_end
                ));
            }
            if i > 0 && a < self.segments[i - 1].t_start() {
                return bad(format!("segment {i} is not sorted by t_start"));
            }
            if let Segment::Hold(h) = s {
                if !(h.ramp >= 0.0 && 2.0 * h.ramp <= b - a) {
                    return bad(format!("segment {i} ramp does not fit its interval"));
                }
            }
            for (j, other) in self.segments[..i].iter().enumerate() {
                let same_kind = matches!(
                    (s, other),
                    (Segment::Hold(_), Segment::Hold(_)) | (Segment::Drive(_), Segment::Drive(_))
                );
                if same_kind && other.t_end() > a {
                    return bad(format!("segments {j} and {i} overlap"));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.initial.p0.abs()) {
            return bad(format!(
                "initial.p0 must lie in [-1, 1], got {}",
                self.initial.p0
            ));
        }
        self.solver.validate()
    }

    /// End of the last hold, or 0 when the scenario has no hold.
    pub fn release_time(&self) -> f64 {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Hold(h) => Some(h.t_end),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let s: Scenario = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Applies a `key=value` style override, e.g. `initial.p0` or
    /// `segments[1].duration`.
    pub fn with_override(&self, path: &str, value: toml::Value) -> Result<Self> {
        let mut doc = self.to_value()?;
        set_path(&mut doc, path, value)?;
        Self::from_value(doc)
    }
}

/// Runs a scenario with its own parameters.
pub fn run(scenario: &Scenario) -> Result<Simulation> {
    scenario.validate()?;
    let (params, grid) = scenario.params.build()?;
    integrate_full(scenario, &grid, &params)
}

enum Step<'a> {
    Key(&'a str),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Step<'_>>> {
    let err = || Error::Scenario(format!("malformed parameter path '{path}'"));
    let mut steps = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !key.is_empty() {
            if key.chars().all(|c| c.is_ascii_digit()) {
                steps.push(Step::Index(key.parse().map_err(|_| err())?));
            } else {
                steps.push(Step::Key(key));
            }
        } else if rest.is_empty() {
            return Err(err());
        }
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(err)?;
            if !rest.starts_with('[') {
                return Err(err());
            }
            steps.push(Step::Index(
                rest[1..close].trim().parse().map_err(|_| err())?,
            ));
            rest = &rest[close + 1..];
        }
    }
    if steps.is_empty() {
        return Err(err());
    }
    Ok(steps)
}

/// Sets the entry at `path` in a TOML document. Missing keys are created in
/// tables (deserialization later rejects unknown ones). On a segment,
/// `duration` sets `t_end = t_start + value`.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let steps = parse_path(path)?;
    let unresolved = || Error::Scenario(format!("parameter path '{path}' does not resolve"));
    let mut node = doc;
    for (i, step) in steps.iter().enumerate() {
        let last = i + 1 == steps.len();
        match step {
            Step::Key(k) => {
                let table = node.as_table_mut().ok_or_else(unresolved)?;
                if last {
                    if *k == "duration"
                        && !table.contains_key("duration")
                        && table.contains_key("kind")
                    {
                        let start = table
                            .get("t_start")
                            .and_then(|v| v.as_float().or(v.as_integer().map(|i| i as f64)))
                            .ok_or_else(unresolved)?;
                        let d = value
                            .as_float()
                            .or(value.as_integer().map(|i| i as f64))
                            .ok_or_else(|| Error::Scenario(format!("'{path}' needs a number")))?;
                        table.insert("t_end".into(), toml::Value::Float(start + d));
                    } else {
                        table.insert((*k).to_string(), value);
                    }
                    return Ok(());
                }
                node = table
                    .entry((*k).to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
            Step::Index(idx) => {
                let arr = node.as_array_mut().ok_or_else(unresolved)?;
                let slot = arr.get_mut(*idx).ok_or_else(unresolved)?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                node = slot;
            }
        }
    }
    unreachable!("loop returns on the last step")
}

/// Parses the right-hand side of a `key=value` override as a TOML value,
/// falling back to a bare string.
pub fn parse_override_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Scalar observable computed from one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Maximum |a| over the whole run.
    PeakAmplitude,
    /// Maximum |a| after the last hold ends.
    PeakAfterRelease,
    /// Peak |a| of the first pulse detected after the last hold ends.
    RevivalAmplitude,
    /// Delay between the first two detected pulses.
    FirstRevivalDelay,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::PeakAmplitude => "peak_amplitude",
            Metric::PeakAfterRelease => "peak_after_release",
            Metric::RevivalAmplitude => "revival_amplitude",
            Metric::FirstRevivalDelay => "first_revival_delay",
        }
    }

    pub fn evaluate(self, scenario: &Scenario, series: &TimeSeries) -> Result<f64> {
        let release = scenario.release_time();
        let after = || -> Result<TimeSeries> {
            let dt = series.sample_interval();
            series.window(release, series.t_end() + dt)
        };
        match self {
            Metric::PeakAmplitude => Ok(series.abs().into_iter().fold(0.0, f64::max)),
            Metric::PeakAfterRelease => Ok(after()?.abs().into_iter().fold(0.0, f64::max)),
            Metric::RevivalAmplitude => {
                let w = after()?;
                let pulses = detect_pulses(&w, DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION)?;
                pulses
                    .first()
                    .map(|p| p.peak_amplitude)
                    .ok_or_else(|| Error::NotFound("no pulse after release".into()))
            }
            Metric::FirstRevivalDelay => first_revival_delay(series),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
    /// Added to each value before it is written into the scenario.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub offset: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Post-processing fit over the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepFit {
    /// Least-squares line of the metric against the product of the named
    /// axis values.
    Linear { product_of: Vec<String> },
    /// Saturating exponential of the metric against one axis.
    Rise { axis: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: Scenario,
    /// Axes are combined as a Cartesian product, first axis outermost.
    pub axes: Vec<SweepAxis>,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<SweepFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    /// One value per axis, without offsets.
    pub values: Vec<f64>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub values: Vec<f64>,
    pub metric: Option<f64>,
    pub error: Option<String>,
    /// Whether the error came from the integrator rather than the analysis.
    pub numerical_failure: bool,
    pub rtol: f64,
    pub atol: f64,
    pub noise_seed: Option<u64>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.metric.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FitSummary {
    Linear(LinearFit),
    Rise(RiseFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub metric: Metric,
    pub rows: Vec<SweepRow>,
    pub fit: Option<FitSummary>,
    pub fit_error: Option<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.axes.is_empty() {
            return Err(Error::Scenario("sweep has no axes".into()));
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::Scenario(format!(
                    "axis '{}' has no values",
                    axis.path
                )));
            }
        }
        let names: Vec<&str> = self.axes.iter().map(|a| a.path.as_str()).collect();
        let check = |p: &String| {
            if names.contains(&p.as_str()) {
                Ok(())
            } else {
                Err(Error::Scenario(format!("fit refers to unknown axis '{p}'")))
            }
        };
        match &self.fit {
            Some(SweepFit::Linear { product_of }) => product_of.iter().try_for_each(check)?,
            Some(SweepFit::Rise { axis }) => check(axis)?,
            None => {}
        }
        // Resolve every point once so bad paths fail before any run.
        self.points().map(|_| ())
    }

    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let total: usize = self.axes.iter().map(|a| a.values.len()).product();
        let base = self.base.to_value()?;
        let mut out = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut values = vec![0.0; self.axes.len()];
            for (k, axis) in self.axes.iter().enumerate().rev() {
                values[k] = axis.values[rem % axis.values.len()];
                rem /= axis.values.len();
            }
            let mut doc = base.clone();
            for (axis, &v) in self.axes.iter().zip(&values) {
                set_path(
                    &mut doc,
                    &axis.path,
                    toml_number(&axis.path, v + axis.offset),
                )?;
            }
            let mut scenario = Scenario::from_value(doc)?;
            scenario.name = format!("{}_{index:03}", self.base.name);
            out.push(SweepPoint {
                index,
                values,
                scenario,
            });
        }
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SweepSpec = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Evaluates one point, capturing failures in the row.
    pub fn evaluate_point(&self, point: &SweepPoint) -> (SweepRow, Option<Simulation>) {
        let mut row = SweepRow {
            index: point.index,
            values: point.values.clone(),
            metric: None,
            error: None,
            numerical_failure: false,
            rtol: point.scenario.solver.rtol,
            atol: point.scenario.solver.atol,
            noise_seed: point.scenario.noise.as_ref().map(|n| n.seed),
        };
        match run(&point.scenario) {
            Ok(sim) => {
                match self.metric.evaluate(&point.scenario, &sim.series) {
                    Ok(m) => row.metric = Some(m),
                    Err(e) => row.error = Some(e.to_string()),
                }
                (row, Some(sim))
            }
            Err(e) => {
                row.numerical_failure = e.is_numerical();
                row.error = Some(e.to_string());
                (row, None)
            }
        }
    }

    /// Fits the configured model to the successful rows.
    pub fn summarize(&self, rows: Vec<SweepRow>) -> SweepTable {
        let column = |name: &str| self.axes.iter().position(|a| a.path == name);
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| !r.failed()).collect();
        let y: Vec<f64> = ok.iter().filter_map(|r| r.metric).collect();
        let fit = self.fit.as_ref().map(|f| match f {
            SweepFit::Linear { product_of } => {
                let cols: Vec<usize> = product_of.iter().filter_map(|p| column(p)).collect();
                let x: Vec<f64> = ok
                    .iter()
                    .map(|r| cols.iter().map(|&c| r.values[c]).product())
                    .collect();
                linear_fit(&x, &y).map(FitSummary::Linear)
            }
            SweepFit::Rise { axis } => {
                let c = column(axis).unwrap_or(0);
                let x: Vec<f64> = ok.iter().map(|r| r.values[c]).collect();
                fit_rise(&x, &y).map(FitSummary::Rise)
            }
        });
        let (fit, fit_error) = match fit {
            Some(Ok(f)) => (Some(f), None),
            Some(Err(e)) => (None, Some(e.to_string())),
            None => (None, None),
        };
        SweepTable {
            axes: self.axes.iter().map(|a| a.path.clone()).collect(),
            metric: self.metric,
            rows,
            fit,
            fit_error,
        }
    }
}

fn toml_number(path: &str, v: f64) -> toml::Value {
    // Integer-valued settings such as n_rho must stay integers.
    if path.ends_with("n_rho")
        || path.ends_with("stride")
        || path.ends_with("tones")
        || path.ends_with("seed")
    {
        toml::Value::Integer(v as i64)
    } else {
        toml::Value::Float(v)
    }
}

/// Runs every sweep point on up to `jobs` threads (all cores when `None`).
/// Rows come back in point order whatever the execution order.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepTable> {
    spec.validate()?;
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Scenario(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|p| spec.evaluate_point(p).0)
            .collect()
    });
    Ok(spec.summarize(rows))
}

/// A preset is either a single scenario or a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Scenario(Scenario),
    Sweep(SweepSpec),
}

pub const PRESET_NAMES: [&str; 6] = [
    "sr_decay",
    "revivals_long",
    "second_hold_sweep",
    "hole_burn_scan",
    "linewidth_run",
    "dt_vs_p0kappa",
];

/// Hold detuning used for storage and second holds (Hz).
pub const HOLD_DETUNING_HZ: f64 = 50e6;

fn base_scenario(name: &str, t_end: f64, output_rate: f64) -> Scenario {
    Scenario {
        name: name.into(),
        t_end,
        params: ParamsConfig::default(),
        initial: Preparation {
            p0: 0.3,
            seed_coherence: crate::dynamics::DEFAULT_SEED_COHERENCE,
            hole: None,
        },
        segments: Vec::new(),
        record: RecordSpec {
            output_rate,
            sigma_z_stride: None,
        },
        solver: Tolerances::default(),
        noise: None,
    }
}

/// Start of the second hold, after the initial burst has rung down (s).
pub const SECOND_HOLD_START: f64 = 7e-6;

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "sr_decay" => Preset::Scenario(base_scenario(name, 10e-6, 50e6)),
        "revivals_long" => Preset::Scenario(base_scenario(name, 500e-6, 5e6)),
        "linewidth_run" => Preset::Scenario(base_scenario(name, 500e-6, 2e6)),
        "second_hold_sweep" => {
            let mut base = base_scenario(name, 110e-6, 10e6);
            base.segments.push(Segment::Hold(HoldSegment {
                t_start: SECOND_HOLD_START,
                t_end: SECOND_HOLD_START + 10e-6,
                detuning_offset_hz: HOLD_DETUNING_HZ,
                ramp: 0.0,
            }));
            Preset::Sweep(SweepSpec {
                base,
                axes: vec![SweepAxis {
                    path: "segments[0].duration".into(),
                    values: vec![
                        1e-6, 2e-6, 4e-6, 6e-6, 8e-6, 10e-6, 13e-6, 16e-6, 20e-6, 25e-6, 30e-6,
                        40e-6, 50e-6, 60e-6,
                    ],
                    offset: 0.0,
                }],
                metric: Metric::RevivalAmplitude,
                fit: Some(SweepFit::Rise {
                    axis: "segments[0].duration".into(),
                }),
            })
        }
        "hole_burn_scan" => {
            let mut base = base_scenario(name, 15e-6, 20e6);
            base.segments = vec![
                Segment::Hold(HoldSegment {
                    t_start: 0.0,
                    t_end: 3e-6,
                    detuning_offset_hz: HOLD_DETUNING_HZ,
                    ramp: 0.0,
                }),
                Segment::Drive(DriveSegment {
                    t_start: 0.5e-6,
                    t_end: 2.5e-6,
                    amplitude: HOLE_BURN_AMPLITUDE,
                    frequency_offset_hz: HOLD_DETUNING_HZ,
                }),
            ];
            let w = base.params.w_hz;
            let n = 25;
            let values = (0..n)
                .map(|k| -1.5 * w + 3.0 * w * k as f64 / (n - 1) as f64)
                .collect();
            Preset::Sweep(SweepSpec {
                base,
                axes: vec![SweepAxis {
                    path: "segments[1].frequency_offset_hz".into(),
                    values,
                    offset: HOLD_DETUNING_HZ,
                }],
                metric: Metric::PeakAfterRelease,
                fit: None,
            })
        }
        "dt_vs_p0kappa" => {
            let base = base_scenario(name, 80e-6, 5e6);
            Preset::Sweep(SweepSpec {
                base,
                axes: vec![
                    SweepAxis {
                        path: "initial.p0".into(),
                        values: vec![0.15, 0.25, 0.35],
                        offset: 0.0,
                    },
                    SweepAxis {
                        path: "params.kappa_hz".into(),
                        values: vec![300e3, 418e3, 600e3],
                        offset: 0.0,
                    },
                ],
                metric: Metric::FirstRevivalDelay,
                fit: Some(SweepFit::Linear {
                    product_of: vec!["initial.p0".into(), "params.kappa_hz".into()],
                }),
            })
        }
        _ => {
            return Err(Error::UnknownPreset {
                name: name.into(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    };
    match &p {
        Preset::Scenario(s) => s.validate()?,
        Preset::Sweep(s) => s.validate()?,
    }
    Ok(p)
}

/// Drive amplitude of the hole-burning pulse (field units per second).
pub const HOLE_BURN_AMPLITUDE: f64 = 4e8;
