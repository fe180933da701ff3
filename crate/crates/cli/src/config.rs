//! Scenario and sweep loading with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use maser_bloch_core::protocol::{
    parse_override_value, preset, set_path, Preset, Scenario, SweepSpec,
};

use crate::error::{io_error, CliError, CliResult};

/// Environment variable consulted when `--jobs` is absent.
pub const JOBS_ENV: &str = "MASER_BLOCH_JOBS";

#[derive(Debug, Clone, Default)]
pub struct Source {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: Vec<String>,
}

fn split_override(raw: &str) -> CliResult<(&str, toml::Value)> {
    let (key, value) = raw.split_once('=').ok_or_else(|| {
        CliError::config(format!("override '{raw}' is not of the form key=value"))
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::config(format!(
            "override '{raw}' has an empty key"
        )));
    }
    Ok((key, parse_override_value(value)))
}

fn read_config(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error("cannot read config", path, e))
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

fn check_one_source(source: &Source) -> CliResult<()> {
    match (&source.config, &source.preset) {
        (Some(_), Some(_)) => Err(CliError::config(
            "give either --config or --preset, not both",
        )),
        (None, None) => Err(CliError::config("one of --config or --preset is required")),
        _ => Ok(()),
    }
}

/// Resolves a single scenario. Overrides are applied in order after the
/// file or preset, so the last `--set` for a key wins.
pub fn load_scenario(source: &Source) -> CliResult<Scenario> {
    check_one_source(source)?;
    let mut scenario = if let Some(path) = &source.config {
        Scenario::from_toml(&read_config(path)?).map_err(|e| config_error(path, e))?
    } else {
        let name = source.preset.as_deref().unwrap_or_default();
        match preset(name).map_err(|e| CliError::config(e.to_string()))? {
            Preset::Scenario(s) => s,
            Preset::Sweep(_) => {
                return Err(CliError::config(format!(
                    "preset '{name}' is a sweep; use the sweep command"
                )))
            }
        }
    };
    for raw in &source.overrides {
        let (key, value) = split_override(raw)?;
        scenario = scenario
            .with_override(key, value)
            .map_err(|e| CliError::config(format!("--set {raw}: {e}")))?;
    }
    Ok(scenario)
}

/// Resolves a sweep. Override paths address the sweep document, so the base
/// scenario is reached through `base.`, e.g. `base.t_end=2e-5`.
pub fn load_sweep(source: &Source) -> CliResult<SweepSpec> {
    check_one_source(source)?;
    let spec = if let Some(path) = &source.config {
        SweepSpec::from_toml(&read_config(path)?).map_err(|e| config_error(path, e))?
    } else {
        let name = source.preset.as_deref().unwrap_or_default();
        match preset(name).map_err(|e| CliError::config(e.to_string()))? {
            Preset::Sweep(s) => s,
            Preset::Scenario(_) => {
                return Err(CliError::config(format!(
                    "preset '{name}' is a single scenario; use the simulate command"
                )))
            }
        }
    };
    if source.overrides.is_empty() {
        return Ok(spec);
    }
    let mut doc = toml::Value::try_from(&spec).map_err(|e| CliError::config(e.to_string()))?;
    for raw in &source.overrides {
        let (key, value) = split_override(raw)?;
        set_path(&mut doc, key, value)
            .map_err(|e| CliError::config(format!("--set {raw}: {e}")))?;
    }
    let text = toml::to_string(&doc).map_err(|e| CliError::config(e.to_string()))?;
    SweepSpec::from_toml(&text).map_err(|e| CliError::config(format!("after overrides: {e}")))
}

/// Worker count from `--jobs`, then the environment, else all cores.
pub fn resolve_jobs(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(j) = flag {
        return Ok(Some(j));
    }
    match std::env::var(JOBS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("{JOBS_ENV}='{v}' is not a worker count"))),
        _ => Ok(None),
    }
}
