use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roadlab::ScenarioConfig;
use roadlab_cli::config::{resolve_config, to_toml};
use roadlab_cli::{cmd_metrics, cmd_render, cmd_rollout, cmd_train, CliResult, MetricName, MetricsOptions, RolloutOptions};

#[derive(Parser)]
#[command(name = "roadlab", version, about = "Multi-agent driving: training, rollouts, metrics and rendering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario file (TOML). Defaults apply to anything it leaves out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set agents.count=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bundled map name or map file.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    output_dir: Option<String>,
    /// Print the fully resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<ScenarioConfig> {
        let mut sets = Vec::new();
        let quote = |s: &str| format!("{:?}", s);
        if let Some(v) = self.seed {
            sets.push(format!("seed={v}"));
        }
        if let Some(v) = &self.map {
            sets.push(format!("map={}", quote(v)));
        }
        if let Some(v) = self.agents {
            sets.push(format!("agents.count={v}"));
        }
        if let Some(v) = self.iterations {
            sets.push(format!("train.iterations={v}"));
        }
        if let Some(v) = &self.output_dir {
            sets.push(format!("output_dir={}", quote(v)));
        }
        sets.extend(self.set.iter().cloned());
        resolve_config(self.config.as_deref(), &sets)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy, writing checkpoints, curves.csv and manifest.json.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run evaluation episodes and write a JSON Lines trajectory log.
    Rollout {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Checkpoint to load; untrained parameters when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Take the most likely action instead of sampling.
        #[arg(long)]
        deterministic: bool,
        /// Store full observation vectors instead of digests only.
        #[arg(long)]
        full_obs: bool,
        /// Root seed for evaluation episodes (defaults to the config seed).
        #[arg(long)]
        eval_seed: Option<u64>,
    },
    /// Compute metric reports from trajectory logs.
    Metrics {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Comma-separated metric names; all metrics when omitted.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<MetricName>,
        #[arg(short, long, default_value = "metrics")]
        out: PathBuf,
        /// Map override; defaults to the map named in the logs.
        #[arg(long)]
        map: Option<String>,
        /// Deceleration for stopping distances; defaults to the logged a_max.
        #[arg(long)]
        a_max: Option<f64>,
    },
    /// Render one episode of a log to numbered 800×800 PNG frames.
    Render {
        log: PathBuf,
        #[arg(short, long, default_value = "frames")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        episode: usize,
        #[arg(long, default_value_t = 4.0)]
        fps: f64,
        #[arg(long)]
        map: Option<String>,
    },
    /// Check a config and report the first problem.
    ValidateConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn print_config(cfg: &ScenarioConfig) -> CliResult<()> {
    print!("{}", to_toml(cfg)?);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { cfg: args } => {
            let cfg = args.resolve()?;
            if args.print_config {
                return print_config(&cfg);
            }
            let report = cmd_train(&cfg)?;
            if let Some(last) = report.curve.last() {
                println!(
                    "{} iterations: return {:.4}, collision rate {:.3}, goal rate {:.3}",
                    last.iteration, last.mean_return, last.collision_rate, last.goal_rate
                );
            }
            println!("outputs in {}", report.out_dir.display());
        }
        Command::Rollout {
            cfg: args,
            checkpoint,
            episodes,
            deterministic,
            full_obs,
            eval_seed,
        } => {
            let cfg = args.resolve()?;
            if args.print_config {
                return print_config(&cfg);
            }
            let opts = RolloutOptions {
                checkpoint,
                episodes,
                deterministic,
                full_obs,
                eval_seed,
            };
            let report = cmd_rollout(&cfg, &opts)?;
            let s = report.stats;
            println!(
                "{} episodes: return {:.4}, collision rate {:.3}, goal rate {:.3}",
                s.episodes, s.mean_return, s.collision_rate, s.goal_rate
            );
            println!("log written to {}", report.log_path.display());
        }
        Command::Metrics {
            logs,
            metrics,
            out,
            map,
            a_max,
        } => {
            let names = if metrics.is_empty() { MetricName::ALL.to_vec() } else { metrics };
            let rows = cmd_metrics(&logs, &names, &out, &MetricsOptions { map, a_max })?;
            for r in rows {
                let value = r.value.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                let tag = if r.skipped { "skipped: " } else { "" };
                println!("{:<20} {:>8}  {tag}{}", r.metric.as_str(), value, r.detail);
            }
        }
        Command::Render {
            log,
            out,
            episode,
            fps,
            map,
        } => {
            let frames = cmd_render(&log, &out, episode, fps, map.as_deref())?;
            println!("{} frames written to {}", frames.len(), out.display());
        }
        Command::ValidateConfig { cfg: args } => {
            let cfg = args.resolve()?;
            roadlab::MapSpec::resolve(&cfg.map).and_then(|m| cfg.validate_against(&m))?;
            if args.print_config {
                return print_config(&cfg);
            }
            println!("config ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
