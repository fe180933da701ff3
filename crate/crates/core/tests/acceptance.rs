//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use maser_bloch_core::analysis::{
    detect_pulses, first_revival_delay, fit_gaussian, fit_lorentzian, fit_rise, power_spectrum,
    spearman, valley_ratios, TimeSeries, Window, DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION,
};
use maser_bloch_core::dynamics::{evolve, prepare_inversion, rhs, SystemState, Tolerances};
use maser_bloch_core::ensemble::{
    discretize, ensemble_cooperativity, hz, nearest_neighbor_coupling, to_hz, EnsembleGrid,
    PhysicalParams, DEFAULT_SPAN_FACTOR,
};
use maser_bloch_core::protocol::{preset, run, run_sweep, FitSummary, Preset, Scenario, SweepSpec};
use num_complex::Complex64;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(name: &str) -> Scenario {
    match preset(name).expect("preset") {
        Preset::Scenario(s) => s,
        Preset::Sweep(_) => panic!("{name} is a sweep"),
    }
}

fn sweep(name: &str) -> SweepSpec {
    match preset(name).expect("preset") {
        Preset::Sweep(s) => s,
        Preset::Scenario(_) => panic!("{name} is a scenario"),
    }
}

fn reference_grid() -> (PhysicalParams, EnsembleGrid) {
    let p = PhysicalParams::reference();
    let g = discretize(&p, DEFAULT_SPAN_FACTOR * p.w).unwrap();
    (p, g)
}

fn max_abs(s: &TimeSeries) -> (usize, f64) {
    s.abs()
        .into_iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
}

fn static_parameters() -> Outcome {
    let (p, g) = reference_grid();
    let c = ensemble_cooperativity(&g, &p);
    let gamma_mhz = to_hz(c.gamma) / 1e6;
    check(
        (12.0..=16.0).contains(&c.c) && (3.1..=4.1).contains(&gamma_mhz),
        format!(
            "C = {:.3} (want [12, 16]), Gamma/2pi = {gamma_mhz:.3} MHz (want [3.1, 4.1])",
            c.c
        ),
    )
}

fn dipole_estimate() -> Outcome {
    let d = nearest_neighbor_coupling(6.0).map_err(|e| e.to_string())?;
    let j_khz = to_hz(d.coupling) / 1e3;
    let r_nm = d.distance * 1e9;
    check(
        (j_khz / 52.0 - 1.0).abs() <= 0.05 && (r_nm / 10.0 - 1.0).abs() <= 0.05,
        format!("J_n/2pi = {j_khz:.2} kHz (want 52 +/- 5%), r = {r_nm:.3} nm (want 10 +/- 5%)"),
    )
}

fn superradiant_burst() -> Outcome {
    let s = scenario("sr_decay");
    let params = s.params.to_physical();
    let series = run(&s).map_err(|e| e.to_string())?.series;
    let (ipk, peak) = max_abs(&series);
    let drive_level = params.eta / params.kappa;
    let t_peak = series.t[ipk];

    // Post-peak ringing: lobes after the main peak, before the field dies out.
    let after = series
        .window(t_peak, series.t_end() + series.sample_interval())
        .map_err(|e| e.to_string())?;
    let lobes: Vec<f64> = detect_pulses(&after, 0.01, 0.1e-6)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|p| p.t_peak > t_peak + 2.0 * series.sample_interval())
        .map(|p| p.peak_amplitude)
        .collect();
    let damped = lobes.len() >= 2 && lobes[0] < peak && lobes[1] < lobes[0];

    let pc = series.pbar_c.as_ref().ok_or("missing pbarC trace")?;
    let before = pc[..=ipk].iter().any(|&v| v > 1.0) && pc[0] > 1.0;
    let after_burst = pc[ipk..].iter().any(|&v| v < 1.0);
    check(
        peak > 1e3 * drive_level && damped && before && after_burst,
        format!(
            "peak/drive = {:.3e} (want > 1e3), post-peak lobes = {} (want >= 2, decreasing), \
             pbarC {:.2} -> min {:.2}",
            peak / drive_level,
            lobes.len(),
            pc[0],
            pc.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    )
}

fn revival_structure(series: &TimeSeries) -> Outcome {
    let pulses = detect_pulses(series, DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION)
        .map_err(|e| e.to_string())?;
    let delay = first_revival_delay(series).map_err(|e| e.to_string())?;
    let first = pulses[0].t_peak;
    let revivals: Vec<_> = pulses
        .iter()
        .filter(|p| p.t_peak >= first + delay - 1e-12)
        .collect();

    // Merging: valleys between successive revival pulses rise above half the
    // neighbouring peaks.
    let t_rev = first + delay;
    let tail = series
        .window(t_rev - 0.5e-6, series.t_end() + series.sample_interval())
        .map_err(|e| e.to_string())?;
    let tail_pulses =
        detect_pulses(&tail, 0.01, DEFAULT_MIN_SEPARATION).map_err(|e| e.to_string())?;
    let ratios = valley_ratios(&tail, &tail_pulses);
    let discrete_first = ratios.first().is_some_and(|&r| r < 0.5);
    let merge_at = ratios
        .iter()
        .position(|&r| r > 0.5)
        .map(|i| tail_pulses[i].t_peak);
    check(
        revivals.len() >= 3
            && (5e-6..=40e-6).contains(&delay)
            && discrete_first
            && merge_at.is_some(),
        format!(
            "revival pulses = {} (want >= 3), first revival delay = {:.2} us (want [5, 40]), \
             merging onset = {}",
            revivals.len(),
            delay * 1e6,
            merge_at.map_or("none".to_string(), |t| format!("{:.1} us", t * 1e6))
        ),
    )
}

fn hole_filling_timescale() -> Outcome {
    let spec = sweep("second_hold_sweep");
    let table = run_sweep(&spec, None).map_err(|e| e.to_string())?;
    let failed = table.rows.iter().filter(|r| r.failed()).count();
    let Some(FitSummary::Rise(fit)) = table.fit else {
        return Err(format!("no rise fit: {:?}", table.fit_error));
    };
    let inv_j = 1.0 / spec.base.params.to_physical().j_fill;
    check(
        failed == 0 && fit.t_rise >= 0.5 * inv_j && fit.t_rise <= 2.0 * inv_j,
        format!(
            "T = {:.2} us vs 1/J = {:.2} us (want within x2), A_inf = {:.3}, failed rows = {failed}",
            fit.t_rise * 1e6,
            inv_j * 1e6,
            fit.a_inf
        ),
    )
}

fn delay_scaling() -> Outcome {
    let spec = sweep("dt_vs_p0kappa");
    let table = run_sweep(&spec, None).map_err(|e| e.to_string())?;
    let ok_rows = table.rows.iter().filter(|r| !r.failed()).count();
    let Some(FitSummary::Linear(fit)) = table.fit else {
        return Err(format!("no linear fit: {:?}", table.fit_error));
    };
    check(
        table.rows.len() >= 9 && ok_rows == table.rows.len() && fit.r_squared > 0.95,
        format!(
            "{ok_rows}/{} points, slope = {:.3e} s/Hz, R^2 = {:.4} (want > 0.95)",
            table.rows.len(),
            fit.slope,
            fit.r_squared
        ),
    )
}

fn narrow_line(series: &TimeSeries, kappa_hz: f64) -> Outcome {
    // The last 200 us of the run lie in the quasi-continuous phase.
    let duration = 200e-6;
    let n = (duration * series.sample_rate()).round() as usize;
    let start = series.t[series.len() - n];
    let sp =
        power_spectrum(series, start, duration, Window::Rectangular).map_err(|e| e.to_string())?;
    let fit = fit_lorentzian(&sp).map_err(|e| e.to_string())?;
    check(
        fit.hwhm * 10.0 <= kappa_hz,
        format!(
            "HWHM = {:.2} kHz over [{:.0}, {:.0}] us (want <= {:.1} kHz), center {:.2} kHz",
            fit.hwhm / 1e3,
            start * 1e6,
            (start + duration) * 1e6,
            kappa_hz / 10e3,
            fit.f_center / 1e3
        ),
    )
}

fn hole_burn_probe() -> Outcome {
    let spec = sweep("hole_burn_scan");
    let table = run_sweep(&spec, None).map_err(|e| e.to_string())?;
    if let Some(bad) = table.rows.iter().find(|r| r.failed()) {
        return Err(format!("row {} failed: {:?}", bad.index, bad.error));
    }
    let f: Vec<f64> = table.rows.iter().map(|r| r.values[0]).collect();
    let peaks: Vec<f64> = table.rows.iter().filter_map(|r| r.metric).collect();
    let params = spec.base.params.to_physical();
    let density: Vec<f64> = f
        .iter()
        .map(|&x| {
            maser_bloch_core::ensemble::q_gaussian_density(hz(x), params.omega0, params.w, params.q)
                .unwrap()
        })
        .collect();
    let imin = peaks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let step = f[1] - f[0];
    let center = spec.base.params.omega0_hz;
    let rank = spearman(&peaks, &density).map_err(|e| e.to_string())?;
    check(
        (f[imin] - center).abs() <= step && rank < -0.8,
        format!(
            "minimum at {:.2} MHz (grid step {:.2} MHz), rank correlation = {rank:.3} (want < -0.8)",
            f[imin] / 1e6,
            step / 1e6
        ),
    )
}

fn lossless(params: &PhysicalParams) -> PhysicalParams {
    PhysicalParams {
        kappa: 0.0,
        gamma_perp: 0.0,
        j_fill: 0.0,
        eta: 0.0,
        ..params.clone()
    }
}

fn conservation_suite() -> Outcome {
    let tol = Tolerances::default();
    let mut notes = Vec::new();
    let mut ok = true;

    // Lossless runs on a coarser grid.
    let mut p = PhysicalParams::reference();
    p.n_rho = 101;
    let p = lossless(&p);
    let grid = discretize(&p, DEFAULT_SPAN_FACTOR * p.w).unwrap();
    let start = prepare_inversion(&SystemState::ground(grid.len()), 0.3, 1e-3).unwrap();
    let (end, _) = evolve(&start, &grid, &p, &[], 100e-6, tol).map_err(|e| e.to_string())?;
    let norm_err = start
        .sigma_z
        .iter()
        .zip(&start.sigma_minus)
        .zip(end.sigma_z.iter().zip(&end.sigma_minus))
        .map(|((z0, s0), (z1, s1))| {
            ((z1 * z1 + 4.0 * s1.norm_sqr()) - (z0 * z0 + 4.0 * s0.norm_sqr())).abs()
        })
        .fold(0.0, f64::max);
    let norm_bound = 10.0 * (tol.rtol + tol.atol);
    ok &= norm_err <= norm_bound;
    notes.push(format!(
        "Bloch norm drift {norm_err:.1e} (<= {norm_bound:.0e})"
    ));

    let n_rho = p.n_rho as f64;
    let excitation = |s: &SystemState| {
        s.a.norm_sqr()
            + grid
                .weights()
                .zip(&s.sigma_z)
                .map(|(w, z)| w * n_rho * z / 2.0)
                .sum::<f64>()
    };
    let (e0, e1) = (excitation(&start), excitation(&end));
    let exc_bound = 10.0 * (tol.rtol * e0.abs().max(end.a.norm_sqr()) + tol.atol);
    ok &= (e1 - e0).abs() <= exc_bound && end.a.norm() > 0.1;
    notes.push(format!(
        "excitation drift {:.1e} (<= {exc_bound:.1e}, final field {:.2})",
        (e1 - e0).abs(),
        end.a.norm()
    ));

    // Hole refilling alone: closed-form exponential relaxation to the mean.
    let mut pj = PhysicalParams::reference();
    pj.n_rho = 101;
    let pj = PhysicalParams {
        kappa: 0.0,
        gamma_perp: 0.0,
        eta: 0.0,
        g_coll: 0.0,
        ..pj
    };
    let gj = discretize(&pj, DEFAULT_SPAN_FACTOR * pj.w).unwrap();
    let mut s0 = SystemState::ground(gj.len());
    for (k, z) in s0.sigma_z.iter_mut().enumerate() {
        *z = 0.9 * ((k as f64) * 0.37).sin();
    }
    let mean0 = s0.mean_inversion(&gj);
    let t = 40e-6;
    let (s1, _) = evolve(&s0, &gj, &pj, &[], t, tol).map_err(|e| e.to_string())?;
    let decay = (-pj.j_fill * t).exp();
    let rel = s0
        .sigma_z
        .iter()
        .zip(&s1.sigma_z)
        .map(|(z0, z1)| {
            let exact = mean0 + (z0 - mean0) * decay;
            (z1 - exact).abs() / exact.abs().max(1e-3)
        })
        .fold(0.0, f64::max);
    let mean_drift = (s1.mean_inversion(&gj) - mean0).abs();
    ok &= rel < 1e-6 && mean_drift <= 10.0 * (tol.rtol + tol.atol);
    notes.push(format!(
        "relaxation error {rel:.1e} (< 1e-6), mean drift {mean_drift:.1e}"
    ));

    // Fixed point.
    let (pr, gr) = reference_grid();
    let pr0 = PhysicalParams {
        eta: 0.0,
        ..pr.clone()
    };
    let fixed = prepare_inversion(&SystemState::ground(gr.len()), 0.3, 0.0).unwrap();
    let d = rhs(&fixed, &gr, &pr0, None, None).map_err(|e| e.to_string())?;
    // The hole-filling term sees a weighted mean that is only rounded to p0.
    let eps = 16.0 * f64::EPSILON * 0.3;
    let zero = d.da == Complex64::new(0.0, 0.0)
        && d.dsigma_minus
            .iter()
            .all(|s| *s == Complex64::new(0.0, 0.0))
        && d.dsigma_z.iter().all(|&z| z.abs() <= eps * pr0.j_fill);
    let (held, _) = evolve(&fixed, &gr, &pr0, &[], 10e-6, tol).map_err(|e| e.to_string())?;
    let drift = held
        .sigma_z
        .iter()
        .map(|z| (z - 0.3).abs())
        .fold(0.0, f64::max);
    let still = held.a == fixed.a && held.sigma_minus == fixed.sigma_minus && drift <= eps;
    ok &= zero && still;
    notes.push(format!(
        "fixed point: exact zero field and coherence {}, inversion drift {drift:.1e} (<= {eps:.0e})",
        zero && still
    ));

    // Threshold gate over 100 us with default drive and seed.
    let c = ensemble_cooperativity(&gr, &pr).c;
    let drive_level = pr.eta / pr.kappa;
    let gate = |p0c: f64| -> Result<f64, String> {
        let mut s = scenario("sr_decay");
        s.t_end = 100e-6;
        s.record.output_rate = 20e6;
        s.initial.p0 = p0c / c;
        Ok(max_abs(&run(&s).map_err(|e| e.to_string())?.series).1 / drive_level)
    };
    let quiet = gate(0.8)?;
    let burst = gate(2.0)?;
    ok &= quiet < 10.0 && burst > 1e3;
    notes.push(format!(
        "p0C = 0.8 -> max|a| = {quiet:.2} eta/kappa (< 10), p0C = 2.0 -> {burst:.2e} (> 1e3)"
    ));
    check(ok, notes.join("; "))
}

fn numerical_hygiene() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let s = scenario("sr_decay");
    let base = run(&s).map_err(|e| e.to_string())?.series;
    let mut tight = s.clone();
    tight.solver.rtol /= 2.0;
    tight.solver.atol /= 2.0;
    let tighter = run(&tight).map_err(|e| e.to_string())?.series;
    let (p0, p1) = (max_abs(&base).1, max_abs(&tighter).1);
    let change = (p1 / p0 - 1.0).abs();
    ok &= change < 1e-3;
    notes.push(format!(
        "peak change on halved tolerances {change:.1e} (< 1e-3)"
    ));

    let again = run(&s).map_err(|e| e.to_string())?.series;
    let identical = again.a == base.a && again.pbar_c == base.pbar_c && again.t == base.t;
    ok &= identical;
    notes.push(format!("repeat run bit-identical: {identical}"));

    // Damped tone: HWHM = gamma_d / 2 pi.
    let gamma_d = 2.0 * PI * 20e3;
    let rate = 2e6;
    let n = 4000;
    let t: Vec<f64> = (0..n).map(|k| k as f64 / rate).collect();
    let a = t
        .iter()
        .map(|&x| Complex64::from_polar((-gamma_d * x).exp(), -2.0 * PI * 35e3 * x))
        .collect();
    let tone = TimeSeries::new(t, a).unwrap();
    let sp = power_spectrum(&tone, 0.0, n as f64 / rate, Window::Rectangular)
        .map_err(|e| e.to_string())?;
    let lw = fit_lorentzian(&sp).map_err(|e| e.to_string())?;
    let lw_err = (lw.hwhm / (gamma_d / (2.0 * PI)) - 1.0).abs();
    ok &= lw_err < 0.05;
    notes.push(format!("damped-tone HWHM error {lw_err:.1e} (< 5e-2)"));

    // Gaussian pulse recovery.
    let fwhm = 1.7e-6;
    let sigma = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let tt: Vec<f64> = (0..400).map(|k| k as f64 * 25e-9).collect();
    let yy: Vec<f64> = tt
        .iter()
        .map(|&x| 0.8 * (-(x - 5e-6).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let g = fit_gaussian(&tt, &yy, (0.7, 4.8e-6, 0.8 * sigma)).map_err(|e| e.to_string())?;
    let g_err = (g.fwhm() / fwhm - 1.0).abs();
    ok &= g_err < 0.02;
    notes.push(format!("Gaussian FWHM error {g_err:.1e} (< 2e-2)"));

    // Saturating exponential.
    let taus: Vec<f64> = (1..=12).map(|k| k as f64 * 5e-6).collect();
    let amps: Vec<f64> = taus
        .iter()
        .map(|&x| 1.3 * (1.0 - (-x / 13.7e-6).exp()))
        .collect();
    let r = fit_rise(&taus, &amps).map_err(|e| e.to_string())?;
    let r_err = (r.t_rise / 13.7e-6 - 1.0).abs();
    ok &= r_err < 1e-6;
    notes.push(format!("rise-time error {r_err:.1e} (< 1e-6)"));
    check(ok, notes.join("; "))
}

struct Criterion {
    number: usize,
    name: &'static str,
    budget: Duration,
}

fn report(c: &Criterion, started: Instant, outcome: Outcome) -> bool {
    let elapsed = started.elapsed();
    let in_time = elapsed <= c.budget;
    let (ok, detail) = match outcome {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    println!(
        "criterion {:>2} {:<28} {}  [{:.2} s of {} s]  {}",
        c.number,
        c.name,
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        c.budget.as_secs(),
        detail
    );
    ok
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut all = true;

    let c = Criterion {
        number: 1,
        name: "static parameters",
        budget: secs(1),
    };
    let t = Instant::now();
    all &= report(&c, t, static_parameters());

    let c = Criterion {
        number: 2,
        name: "dipole estimator",
        budget: secs(1),
    };
    let t = Instant::now();
    all &= report(&c, t, dipole_estimate());

    let c = Criterion {
        number: 3,
        name: "superradiant burst",
        budget: secs(30),
    };
    let t = Instant::now();
    all &= report(&c, t, superradiant_burst());

    let c = Criterion {
        number: 4,
        name: "revival structure",
        budget: secs(300),
    };
    let t = Instant::now();
    let long = scenario("revivals_long");
    let kappa_hz = long.params.kappa_hz;
    let long_run = run(&long).map(|s| s.series);
    let outcome = match &long_run {
        Ok(series) => revival_structure(series),
        Err(e) => Err(e.to_string()),
    };
    all &= report(&c, t, outcome);

    let c = Criterion {
        number: 5,
        name: "hole-filling timescale",
        budget: secs(600),
    };
    let t = Instant::now();
    all &= report(&c, t, hole_filling_timescale());

    let c = Criterion {
        number: 6,
        name: "delay scaling",
        budget: secs(900),
    };
    let t = Instant::now();
    all &= report(&c, t, delay_scaling());

    // Reuses the trace from criterion 4.
    let c = Criterion {
        number: 7,
        name: "narrow-line emission",
        budget: secs(300),
    };
    let t = Instant::now();
    let outcome = match &long_run {
        Ok(series) => narrow_line(series, kappa_hz),
        Err(e) => Err(e.to_string()),
    };
    all &= report(&c, t, outcome);

    let c = Criterion {
        number: 8,
        name: "hole-burn probe",
        budget: secs(600),
    };
    let t = Instant::now();
    all &= report(&c, t, hole_burn_probe());

    let c = Criterion {
        number: 9,
        name: "conservation suite",
        budget: secs(60),
    };
    let t = Instant::now();
    all &= report(&c, t, conservation_suite());

    let c = Criterion {
        number: 10,
        name: "numerical hygiene",
        budget: secs(120),
    };
    let t = Instant::now();
    all &= report(&c, t, numerical_hygiene());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
