use std::collections::BTreeMap;

use num_complex::Complex64;

use super::dopri::{Dopri5, IntegrationStats, Tolerances};
use super::noise::NoiseDrive;
use super::{apply_instantaneous_hole, prepare_inversion, MaxwellBloch, SystemState};
use crate::analysis::{SigmaZSnapshots, TimeSeries};
use crate::ensemble::{hz, EnsembleGrid, PhysicalParams};
use crate::error::{Error, Result};
use crate::protocol::{Scenario, Segment};

/// Result of a scenario run: sampled trace, final state and step counters.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub series: TimeSeries,
    pub final_state: SystemState,
    pub stats: IntegrationStats,
}

/// Runs `scenario` on `grid` and returns the uniformly sampled trace.
pub fn integrate(
    scenario: &Scenario,
    grid: &EnsembleGrid,
    params: &PhysicalParams,
) -> Result<TimeSeries> {
    integrate_full(scenario, grid, params).map(|s| s.series)
}

/// Like [`integrate`], also returning the final state and step statistics.
pub fn integrate_full(
    scenario: &Scenario,
    grid: &EnsembleGrid,
    params: &PhysicalParams,
) -> Result<Simulation> {
    scenario.validate()?;
    params.validate()?;
    let prep = &scenario.initial;
    let mut state = prepare_inversion(
        &SystemState::ground(grid.len()),
        prep.p0,
        prep.seed_coherence,
    )?;
    if let Some(hole) = &prep.hole {
        state = apply_instantaneous_hole(
            &state,
            grid,
            hz(hole.center_hz),
            hz(hole.width_hz),
            hole.depth,
        )?;
    }

    let mut system = MaxwellBloch::new(grid, params);
    if let Some(cfg) = &scenario.noise {
        system.noise = Some(NoiseDrive::new(cfg)?);
    }
    let mut sampler = Sampler::new(grid, params, &scenario.record, 0.0, scenario.t_end)?;
    sampler.record_state(&state);
    let (final_state, stats) = propagate(
        &mut system,
        &scenario.segments,
        state,
        scenario.t_end,
        scenario.solver,
        Some(&mut sampler),
    )?;

    let mut metadata = BTreeMap::new();
    metadata.insert("scenario".into(), scenario.name.clone());
    metadata.insert("rtol".into(), format!("{:e}", scenario.solver.rtol));
    metadata.insert("atol".into(), format!("{:e}", scenario.solver.atol));
    metadata.insert(
        "output_rate_hz".into(),
        format!("{:e}", scenario.record.output_rate),
    );
    metadata.insert("accepted_steps".into(), stats.accepted.to_string());
    metadata.insert("rejected_steps".into(), stats.rejected.to_string());
    if let Some(noise) = &scenario.noise {
        metadata.insert("noise_seed".into(), noise.seed.to_string());
    }
    let series = sampler.finish(metadata)?;
    Ok(Simulation {
        series,
        final_state,
        stats,
    })
}

/// Evolves `state` from `state.t` to `t_final` under the given control
/// segments without sampling.
pub fn evolve(
    state: &SystemState,
    grid: &EnsembleGrid,
    params: &PhysicalParams,
    segments: &[Segment],
    t_final: f64,
    tolerances: Tolerances,
) -> Result<(SystemState, IntegrationStats)> {
    state.check_len(grid.len())?;
    state.check_finite()?;
    if !(t_final >= state.t) {
        return Err(Error::Domain(format!(
            "t_final {t_final:e} precedes the state time {:e}",
            state.t
        )));
    }
    let mut system = MaxwellBloch::new(grid, params);
    propagate(
        &mut system,
        segments,
        state.clone(),
        t_final,
        tolerances,
        None,
    )
}

/// Control breakpoints in `(t0, t1)`: segment edges and ramp corners.
fn breakpoints(segments: &[Segment], t0: f64, t1: f64) -> Vec<f64> {
    let mut points = vec![t0, t1];
    for seg in segments {
        match seg {
            Segment::Hold(h) => {
                points.extend([h.t_start, h.t_end]);
                if h.ramp > 0.0 {
                    points.extend([h.t_start + h.ramp, h.t_end - h.ramp]);
                }
            }
            Segment::Drive(d) => points.extend([d.t_start, d.t_end]),
        }
    }
    points.retain(|&t| t >= t0 && t <= t1);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

fn propagate(
    system: &mut MaxwellBloch,
    segments: &[Segment],
    state: SystemState,
    t_end: f64,
    tolerances: Tolerances,
    mut sampler: Option<&mut Sampler>,
) -> Result<(SystemState, IntegrationStats)> {
    tolerances.validate()?;
    let mut y = state.pack();
    if y.len() != system.dim() {
        return Err(Error::Structure("state does not match the grid".into()));
    }
    let mut solver = Dopri5::new(y.len(), tolerances);
    let points = breakpoints(segments, state.t, t_end);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        system.hold = segments.iter().find_map(|s| match s {
            Segment::Hold(h) if h.t_start <= mid && mid < h.t_end => Some(h.clone()),
            _ => None,
        });
        system.drive = segments.iter().find_map(|s| match s {
            Segment::Drive(d) if d.t_start <= mid && mid < d.t_end => Some(d.clone()),
            _ => None,
        });
        let sys = &*system;
        let f = |t: f64, y: &[f64], dy: &mut [f64]| sys.eval(t, y, dy);
        match sampler.as_deref_mut() {
            Some(s) => solver.run(&f, a, b, &mut y, |t, h, sol| s.on_step(t, h, sol))?,
            None => solver.run(&f, a, b, &mut y, |_, _, _| Ok(()))?,
        }
    }
    let out = SystemState::unpack(&y, t_end);
    out.check_finite()?;
    Ok((out, solver.stats))
}

/// Collects uniformly spaced samples from the dense output.
struct Sampler {
    n: usize,
    weights: Vec<f64>,
    coop: Vec<f64>,
    detunings: Vec<f64>,
    rate: f64,
    t0: f64,
    count: usize,
    next: usize,
    stride: Option<usize>,
    t: Vec<f64>,
    a: Vec<Complex64>,
    p: Vec<f64>,
    pbar_c: Vec<f64>,
    snap_times: Vec<f64>,
    snaps: Vec<Vec<f64>>,
}

impl Sampler {
    fn new(
        grid: &EnsembleGrid,
        params: &PhysicalParams,
        record: &crate::protocol::RecordSpec,
        t0: f64,
        t_end: f64,
    ) -> Result<Self> {
        let rate = record.output_rate;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Domain(format!(
                "output rate must be positive, got {rate}"
            )));
        }
        let count = ((t_end - t0) * rate + 1e-9).floor() as usize + 1;
        Ok(Self {
            n: grid.len(),
            weights: grid.weights().collect(),
            coop: grid.weighted_cooperativities(params.kappa, params.gamma_perp),
            detunings: grid.detunings().collect(),
            rate,
            t0,
            count,
            next: 0,
            stride: record.sigma_z_stride.filter(|&s| s > 0),
            t: Vec::with_capacity(count),
            a: Vec::with_capacity(count),
            p: Vec::with_capacity(count),
            pbar_c: Vec::with_capacity(count),
            snap_times: Vec::new(),
            snaps: Vec::new(),
        })
    }

    fn sample_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate
    }

    fn wants_snapshot(&self, k: usize) -> bool {
        self.stride.is_some_and(|s| k.is_multiple_of(s))
    }

    fn record_state(&mut self, s: &SystemState) {
        let k = self.next;
        self.t.push(self.sample_time(k));
        self.a.push(s.a);
        self.p.push(
            self.weights
                .iter()
                .zip(&s.sigma_z)
                .map(|(w, z)| w * z)
                .sum(),
        );
        self.pbar_c
            .push(self.coop.iter().zip(&s.sigma_z).map(|(c, z)| c * z).sum());
        if self.wants_snapshot(k) {
            self.snap_times.push(self.sample_time(k));
            self.snaps.push(s.sigma_z.clone());
        }
        self.next += 1;
    }

    fn on_step(&mut self, t: f64, h: f64, solver: &Dopri5) -> Result<()> {
        let t_hi = t + h;
        let slack = 1e-9 / self.rate;
        if self.next >= self.count || self.sample_time(self.next) > t_hi + slack {
            return Ok(());
        }
        // The dense polynomial is linear in its coefficients, so the weighted
        // inversion sums can be reduced once per step.
        let cont = solver.cont();
        let zoff = 2 + 2 * self.n;
        let mut a_re = [0.0; 5];
        let mut a_im = [0.0; 5];
        let mut pc = [0.0; 5];
        let mut cc = [0.0; 5];
        for r in 0..5 {
            a_re[r] = cont[r][0];
            a_im[r] = cont[r][1];
            let z = &cont[r][zoff..];
            pc[r] = self.weights.iter().zip(z).map(|(w, v)| w * v).sum();
            cc[r] = self.coop.iter().zip(z).map(|(w, v)| w * v).sum();
        }
        while self.next < self.count {
            let ts = self.sample_time(self.next);
            if ts > t_hi + slack {
                break;
            }
            let theta = ((ts - t) / h).clamp(0.0, 1.0);
            self.t.push(ts);
            self.a.push(Complex64::new(
                Dopri5::dense_scalar(theta, &a_re),
                Dopri5::dense_scalar(theta, &a_im),
            ));
            self.p.push(Dopri5::dense_scalar(theta, &pc));
            self.pbar_c.push(Dopri5::dense_scalar(theta, &cc));
            if self.wants_snapshot(self.next) {
                let mut z = vec![0.0; self.n];
                solver.dense_range(theta, zoff, &mut z);
                self.snap_times.push(ts);
                self.snaps.push(z);
            }
            self.next += 1;
        }
        Ok(())
    }

    fn finish(self, metadata: BTreeMap<String, String>) -> Result<TimeSeries> {
        let sigma_z = if self.stride.is_some() {
            Some(SigmaZSnapshots {
                detunings: self.detunings,
                times: self.snap_times,
                values: self.snaps,
            })
        } else {
            None
        };
        let mut series = TimeSeries::new(self.t, self.a)?;
        series.p = Some(self.p);
        series.pbar_c = Some(self.pbar_c);
        series.sigma_z = sigma_z;
        series.metadata = metadata;
        Ok(series)
    }
}
