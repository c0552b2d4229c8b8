use std::io::Write;
use std::path::PathBuf;

use roadlab::optim::{Env, IterationStats, Trainer};
use roadlab::ScenarioConfig;

use crate::config::{output_dir, with_workers};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const CURVES_FILE: &str = "curves.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub out_dir: PathBuf,
    pub curve: Vec<IterationStats>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainReport {
    pub fn last_checkpoint(&self) -> Option<&PathBuf> {
        self.checkpoints.last()
    }
}

pub fn checkpoint_name(iteration: usize) -> String {
    format!("{CHECKPOINT_DIR}/iter_{iteration:06}.ckpt")
}

/// Trains per `cfg`, writing curves, periodic checkpoints (plus one after the
/// last iteration) and a manifest into the output directory.
pub fn cmd_train(cfg: &ScenarioConfig) -> CliResult<TrainReport> {
    let dir = output_dir(cfg);
    std::fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
    let env = Env::new(cfg)?;
    let mut manifest = RunManifest::new("train", cfg);
    manifest.artifacts.push(CURVES_FILE.into());
    manifest.write(&dir)?;

    let mut curves = std::io::BufWriter::new(std::fs::File::create(dir.join(CURVES_FILE))?);
    writeln!(curves, "{}", IterationStats::CSV_HEADER)?;
    let every = cfg.train.checkpoint_every.max(1);
    let iterations = cfg.train.iterations;
    let mut checkpoints = Vec::new();
    let mut last_stats = None;
    let mut trainer = Trainer::new(env);
    let result = with_workers(cfg.train.workers, || {
        trainer.train(iterations, |t, st| {
            writeln!(curves, "{}", st.csv_row())?;
            curves.flush()?;
            last_stats = Some(*st);
            if st.iteration % every == 0 || st.iteration == iterations {
                let name = checkpoint_name(st.iteration);
                t.params.save(&dir.join(&name))?;
                checkpoints.push(name);
            }
            Ok(true)
        })
    })?;
    let curve = match result {
        Ok(c) => c,
        Err(e) => {
            let dump = serde_json::json!({
                "error": e.to_string(),
                "iteration": trainer.iteration,
                "last_stats": last_stats,
            });
            std::fs::write(dir.join("diagnostic.json"), dump.to_string())?;
            return Err(CliError::from(e));
        }
    };
    manifest.artifacts.extend(checkpoints.iter().cloned());
    manifest.write(&dir)?;
    Ok(TrainReport {
        checkpoints: checkpoints.iter().map(|c| dir.join(c)).collect(),
        out_dir: dir,
        curve,
    })
}
