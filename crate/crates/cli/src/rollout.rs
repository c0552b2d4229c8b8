use std::io::Write;
use std::path::{Path, PathBuf};

use roadlab::optim::rollout::evaluation_seeds;
use roadlab::optim::{collect_rollouts, Env, RolloutSettings, RolloutStats};
use roadlab::policy::PolicyParams;
use roadlab::ScenarioConfig;

use crate::config::{output_dir, with_workers};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const ROLLOUT_FILE: &str = "rollout.jsonl";

#[derive(Debug, Clone)]
pub struct RolloutOptions {
    /// Untrained parameters (initialised from the config seed) when absent.
    pub checkpoint: Option<PathBuf>,
    pub episodes: usize,
    pub deterministic: bool,
    /// Store full observation vectors in the log.
    pub full_obs: bool,
    /// Root seed for episode seeds; defaults to the config seed.
    pub eval_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RolloutReport {
    pub log_path: PathBuf,
    pub stats: RolloutStats,
}

pub fn load_params(env: &Env, checkpoint: Option<&Path>) -> CliResult<PolicyParams> {
    let fresh = env.init_params();
    let Some(path) = checkpoint else { return Ok(fresh) };
    let params = PolicyParams::load(path)?;
    params.check_compatible(&fresh)?;
    Ok(params)
}

/// Runs evaluation episodes and writes them to one JSON Lines log.
pub fn cmd_rollout(cfg: &ScenarioConfig, opts: &RolloutOptions) -> CliResult<RolloutReport> {
    let env = Env::new(cfg)?;
    let params = load_params(&env, opts.checkpoint.as_deref())?;
    let dir = output_dir(cfg);
    std::fs::create_dir_all(&dir)?;
    let mut settings = RolloutSettings::evaluation(opts.deterministic, true);
    settings.log_observations = opts.full_obs;
    let seeds = evaluation_seeds(opts.eval_seed.unwrap_or(cfg.seed), opts.episodes);
    let outcomes = with_workers(cfg.train.workers, || collect_rollouts(&env, &params, &settings, &seeds))??;

    let log_path = dir.join(ROLLOUT_FILE);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    for o in &outcomes {
        let log = o
            .log
            .as_ref()
            .ok_or_else(|| CliError::Runtime("episode finished without a log".into()))?;
        log.write_jsonl(&mut w)?;
    }
    w.flush()?;
    let mut manifest = RunManifest::new("rollout", cfg);
    if let Some(c) = &opts.checkpoint {
        manifest.artifacts.push(c.display().to_string());
    }
    manifest.artifacts.push(ROLLOUT_FILE.into());
    manifest.write(&dir)?;
    Ok(RolloutReport {
        log_path,
        stats: roadlab::optim::rollout::summarize(&outcomes),
    })
}
