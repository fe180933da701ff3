use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maser_bloch_cli::analyze::{analyze, AnalysisSpec};
use maser_bloch_cli::io::read_timeseries;
use maser_bloch_core::protocol::{preset, run, Preset, Scenario, PRESET_NAMES};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_maser-bloch"));
    c.env_remove("MASER_BLOCH_JOBS");
    c
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn column(csv_path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(csv_path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| rec.unwrap()[i].parse().unwrap())
        .collect()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["simulate", "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = exec(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trace_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = simulate(tmp.path(), "sr", &["--preset", "sr_decay"]);
    let abs = column(&out.join("timeseries.csv"), "abs_a");
    let (ipk, peak) = abs
        .iter()
        .enumerate()
        .fold((0, 0.0), |m, (i, &v)| if v > m.1 { (i, v) } else { m });
    assert!(ipk > 0 && ipk < abs.len() - 1);
    // Damped ringing: the tail never returns to the burst height.
    let tail_max = abs[ipk + abs.len() / 10..]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    assert!(tail_max < 0.8 * peak);

    let m = json(&out.join("manifest.json"));
    assert_eq!(m["preset"], "sr_decay");
    assert_eq!(m["scenario"]["params"]["kappa_hz"], 418e3);
    let kappa = m["params_rad_s"]["kappa"].as_f64().unwrap();
    assert!((kappa / (2.0 * std::f64::consts::PI * 418e3) - 1.0).abs() < 1e-12);
    for f in m["files"].as_array().unwrap() {
        let data = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&data)));
    }
}

#[test]
fn repeated_simulation_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let a = simulate(tmp.path(), "a", &["--preset", "sr_decay"]);
    let b = simulate(tmp.path(), "b", &["--preset", "sr_decay"]);
    assert_eq!(
        fs::read(a.join("timeseries.csv")).unwrap(),
        fs::read(b.join("timeseries.csv")).unwrap()
    );
    assert_eq!(
        json(&a.join("manifest.json"))["files"],
        json(&b.join("manifest.json"))["files"]
    );
}

#[test]
fn uninverted_run_stays_quiet() {
    let tmp = TempDir::new().unwrap();
    let out = simulate(
        tmp.path(),
        "idle",
        &["--preset", "sr_decay", "--set", "initial.p0=0"],
    );
    let m = json(&out.join("manifest.json"));
    let level =
        m["params_rad_s"]["eta"].as_f64().unwrap() / m["params_rad_s"]["kappa"].as_f64().unwrap();
    let max = column(&out.join("timeseries.csv"), "abs_a")
        .into_iter()
        .fold(0.0, f64::max);
    assert!(max <= 2.0 * level, "{max:e} vs {level:e}");
}

#[test]
fn config_errors_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let o = exec(&[
        "simulate",
        "--preset",
        "sr_decay",
        "--set",
        "initial.p00=1",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p00"));

    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "name = \"x\"\nt_end = 1e-6\n[initial]\np0 = 0.3\n[record]\noutput_rate = 1e7\nbogus = 1\n",
    )
    .unwrap();
    let o = exec(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("line"), "{err}");

    let o = exec(&["simulate", "--preset", "nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sr_decay"));
}

#[test]
fn config_file_matches_preset_and_overrides_win() {
    let tmp = TempDir::new().unwrap();
    let listing = exec(&["presets", "sr_decay"]);
    let cfg = tmp.path().join("sr.toml");
    fs::write(&cfg, &listing.stdout).unwrap();
    let from_file = simulate(tmp.path(), "file", &["--config", p(&cfg)]);
    let from_preset = simulate(tmp.path(), "preset", &["--preset", "sr_decay"]);
    assert_eq!(
        fs::read(from_file.join("timeseries.csv")).unwrap(),
        fs::read(from_preset.join("timeseries.csv")).unwrap()
    );

    let over = simulate(
        tmp.path(),
        "over",
        &["--config", p(&cfg), "--set", "initial.p0=0.2"],
    );
    assert_eq!(
        json(&over.join("manifest.json"))["scenario"]["initial"]["p0"],
        0.2
    );
}

#[test]
fn presets_are_listed() {
    let o = exec(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in PRESET_NAMES {
        assert!(text.contains(name), "{name}");
    }
}

fn write_sweep(dir: &Path, metric: &str) -> PathBuf {
    let listing = exec(&["presets", "sr_decay"]);
    let base = String::from_utf8(listing.stdout).unwrap();
    // Nest the scenario tables under `base`.
    let mut text = format!(
        "metric = \"{metric}\"\n\n[[axes]]\npath = \"initial.p0\"\nvalues = [0.3]\n\n[base]\n"
    );
    for line in base.lines() {
        if let Some(rest) = line.strip_prefix("[[") {
            text.push_str(&format!("[[base.{rest}\n"));
        } else if let Some(rest) = line.strip_prefix('[') {
            text.push_str(&format!("[base.{rest}\n"));
        } else {
            text.push_str(line);
            text.push('\n');
        }
    }
    let path = dir.join(format!("{metric}.toml"));
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn single_point_sweep_equals_simulate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_sweep(tmp.path(), "peak_amplitude");
    let out = tmp.path().join("sweep");
    let o = exec(&[
        "sweep",
        "--config",
        p(&cfg),
        "--out",
        p(&out),
        "--jobs",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let direct = simulate(tmp.path(), "direct", &["--preset", "sr_decay"]);
    assert_eq!(
        fs::read(out.join("point_0000/timeseries.csv")).unwrap(),
        fs::read(direct.join("timeseries.csv")).unwrap()
    );
    let peak = column(&out.join("summary.csv"), "peak_amplitude")[0];
    let max = column(&direct.join("timeseries.csv"), "abs_a")
        .into_iter()
        .fold(0.0, f64::max);
    assert_eq!(peak, max);
}

#[test]
fn failed_points_are_flagged() {
    let tmp = TempDir::new().unwrap();
    // A 10 us trace holds no revival, so the metric fails.
    let cfg = write_sweep(tmp.path(), "first_revival_delay");
    let out = tmp.path().join("sweep");
    let o = exec(&["sweep", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("analysis_failure"), "{summary}");
}

#[test]
fn bad_jobs_variable_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_sweep(tmp.path(), "peak_amplitude");
    let o = bin()
        .args([
            "sweep",
            "--config",
            p(&cfg),
            "--out",
            p(&tmp.path().join("s")),
        ])
        .env("MASER_BLOCH_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn delay_sweep_reports_linear_fit() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("dt");
    let o = exec(&["sweep", "--preset", "dt_vs_p0kappa", "--out", p(&out)]);
    // The fit quality is judged elsewhere; here only the table matters.
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    for key in ["fit,slope,", "fit,intercept,", "fit,r_squared,"] {
        assert!(summary.contains(key), "{summary}");
    }
    assert_eq!(summary.lines().filter(|l| l.ends_with(",ok,")).count(), 9);
    for i in 0..9 {
        assert!(out.join(format!("point_{i:04}/manifest.json")).exists());
    }
}

fn analyze_cli(trace: &Path, spec: &str, dir: &Path) -> (Output, Option<Value>) {
    let cfg = dir.join("spec.toml");
    fs::write(&cfg, spec).unwrap();
    let out = dir.join("analysis.json");
    let _ = fs::remove_file(&out);
    let o = exec(&["analyze", p(trace), "--config", p(&cfg), "--out", p(&out)]);
    let v = out.exists().then(|| json(&out));
    (o, v)
}

#[test]
fn analysis_of_revivals_finds_pulses_and_delay() {
    let tmp = TempDir::new().unwrap();
    let out = simulate(
        tmp.path(),
        "rev",
        &["--preset", "revivals_long", "--set", "t_end=1e-4"],
    );
    let (o, v) = analyze_cli(
        &out.join("timeseries.csv"),
        "[pulses]\n[revival_delay]\n",
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = v.unwrap();
    assert!(v["pulses"].as_array().unwrap().len() >= 3);
    let delay = v["first_revival_delay"].as_f64().unwrap();
    assert!((5e-6..=40e-6).contains(&delay));
}

#[test]
fn damped_tone_linewidth_from_csv() {
    let tmp = TempDir::new().unwrap();
    let gamma = 2.0 * std::f64::consts::PI * 15e3;
    let rate = 1e6;
    let mut text = String::from("t_s,re_a,im_a\n");
    for k in 0..3000 {
        let t = k as f64 / rate;
        let (s, c) = (2.0 * std::f64::consts::PI * 40e3 * t).sin_cos();
        let m = (-gamma * t).exp();
        text.push_str(&format!("{t:?},{:?},{:?}\n", m * c, m * s));
    }
    let trace = tmp.path().join("tone.csv");
    fs::write(&trace, text).unwrap();
    let (o, v) = analyze_cli(&trace, "[spectrum]\nduration = 3e-3\n", tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = v.unwrap();
    let hwhm = v["spectrum"]["hwhm"].as_f64().unwrap();
    assert!((hwhm / 15e3 - 1.0).abs() < 0.05, "{hwhm}");
    assert!((v["spectrum"]["f_center"].as_f64().unwrap() - 40e3).abs() < 1e3);
    assert_eq!(v["spectrum"]["fwhm"].as_f64().unwrap(), 2.0 * hwhm);
}

#[test]
fn empty_analysis_spec_reports_metadata_only() {
    let tmp = TempDir::new().unwrap();
    let out = simulate(tmp.path(), "sr", &["--preset", "sr_decay"]);
    let (o, v) = analyze_cli(&out.join("timeseries.csv"), "", tmp.path());
    assert!(o.status.success());
    let v = v.unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["metadata"]);
    assert_eq!(v["metadata"]["samples"], 501);
}

#[test]
fn schema_errors_name_the_column() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("t.csv");
    fs::write(&trace, "t_s,re_a,im_b\n0,1,0\n1,1,0\n").unwrap();
    let o = exec(&["analyze", p(&trace)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'im_b'"));

    fs::write(&trace, "t_s,re_a\n0,1\n1,1\n").unwrap();
    let o = exec(&["analyze", p(&trace)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'im_a'"));

    fs::write(&trace, "t_s,re_a,im_a\n0,1,0\n1,x,0\n").unwrap();
    let o = exec(&["analyze", p(&trace)]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("'re_a'"));
}

#[test]
fn analysis_failures_exit_with_status_four() {
    let tmp = TempDir::new().unwrap();
    let out = simulate(tmp.path(), "sr", &["--preset", "sr_decay"]);
    let (o, v) = analyze_cli(&out.join("timeseries.csv"), "[revival_delay]\n", tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(v.unwrap()["errors"]["first_revival_delay"].is_string());
}

#[test]
fn csv_round_trip_reproduces_in_process_analysis() {
    let tmp = TempDir::new().unwrap();
    let mut scenario: Scenario = match preset("sr_decay").unwrap() {
        Preset::Scenario(s) => s,
        Preset::Sweep(_) => unreachable!(),
    };
    scenario.record.sigma_z_stride = Some(50);
    let spec_text = "[pulses]\n[spectrum]\nduration = 5e-6\n[sliding_spectrum]\nwindow_duration = 4e-6\nstride = 2e-6\n[hole_profile]\ntime = 2e-6\n";
    let spec: AnalysisSpec = toml::from_str(spec_text).unwrap();

    let sim = run(&scenario).unwrap();
    let in_process = analyze(&sim.series, sim.series.sigma_z.as_ref(), &spec);

    let out = simulate(
        tmp.path(),
        "sr",
        &["--preset", "sr_decay", "--set", "record.sigma_z_stride=50"],
    );
    let trace = out.join("timeseries.csv");
    let reread = read_timeseries(&trace).unwrap();
    assert_eq!(reread.a, sim.series.a);
    assert_eq!(reread.t, sim.series.t);
    assert_eq!(reread.pbar_c, sim.series.pbar_c);

    let (o, v) = analyze_cli(&trace, spec_text, tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = v.unwrap();
    for key in ["pulses", "spectrum", "sliding_spectrum", "hole_profile"] {
        assert_eq!(v[key], in_process.value[key], "{key}");
    }
}
