//! Scenario files, overrides and output locations.

use std::path::{Path, PathBuf};

use roadlab::ScenarioConfig;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

/// Relative output directories are placed under this directory when set.
pub const OUTPUT_ROOT_ENV: &str = "ROADLAB_OUTPUT_ROOT";
/// Overrides `train.workers`.
pub const WORKERS_ENV: &str = "ROADLAB_WORKERS";

/// Sets `path` (dotted) to `value` inside `table`, creating tables as needed.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty override key `{path}`")))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{path}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back to
/// a bare string.
pub fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Builds a validated config from an optional file, the worker environment
/// variable and `key=value` overrides, in that order of precedence.
pub fn resolve_config(file: Option<&Path>, overrides: &[String]) -> CliResult<ScenarioConfig> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    if let Ok(w) = std::env::var(WORKERS_ENV) {
        let n: i64 = w
            .parse()
            .map_err(|_| CliError::Config(format!("{WORKERS_ENV}={w} is not an integer")))?;
        set_path(&mut table, "train.workers", Value::Integer(n))?;
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("config error at `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Fully resolved config as TOML.
pub fn to_toml(cfg: &ScenarioConfig) -> CliResult<String> {
    toml::to_string(cfg).map_err(CliError::runtime)
}

pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    let dir = PathBuf::from(&cfg.output_dir);
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}

/// Runs `f` on a rayon pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(CliError::runtime)?;
    Ok(pool.install(f))
}
