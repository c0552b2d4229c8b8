//! Metric reports over trajectory logs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use roadlab::log::EpisodeLog;
use roadlab::metrics::{self, GapSample};
use roadlab::MapSpec;

use crate::error::{CliError, CliResult};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const LANE_DENSITY_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    SignalCompliance,
    LanePosition,
    RightOfWay,
    SpeakerConsistency,
    SafetyDistance,
    Crosswalk,
    FastLane,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::SignalCompliance,
        MetricName::LanePosition,
        MetricName::RightOfWay,
        MetricName::SpeakerConsistency,
        MetricName::SafetyDistance,
        MetricName::Crosswalk,
        MetricName::FastLane,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::SignalCompliance => "signal_compliance",
            MetricName::LanePosition => "lane_position",
            MetricName::RightOfWay => "right_of_way",
            MetricName::SpeakerConsistency => "speaker_consistency",
            MetricName::SafetyDistance => "safety_distance",
            MetricName::Crosswalk => "crosswalk",
            MetricName::FastLane => "fast_lane",
        }
    }
}

impl FromStr for MetricName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = MetricName::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown metric `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: MetricName,
    /// Headline value; `None` when the metric was skipped or undefined.
    pub value: Option<f64>,
    pub detail: String,
    pub skipped: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsOptions {
    /// Map name or path; defaults to the map recorded in the logs.
    pub map: Option<String>,
    /// Deceleration for stopping distances; defaults to the logged `a_max`.
    pub a_max: Option<f64>,
}

pub fn load_logs(paths: &[PathBuf]) -> CliResult<Vec<EpisodeLog>> {
    let mut logs = Vec::new();
    for p in paths {
        logs.extend(EpisodeLog::read_path(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?);
    }
    Ok(logs)
}

fn gaps_csv(samples: &[GapSample], first: &str) -> String {
    let mut s = format!("{first},required\n");
    for g in samples {
        let _ = writeln!(s, "{},{}", g.gap, g.required);
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Computes one metric, returning the summary row and the CSV body of its
/// detailed report.
fn compute(name: MetricName, logs: &[EpisodeLog], map: &MapSpec, a_max: f64) -> roadlab::Result<(MetricRow, String)> {
    let row = |value: Option<f64>, detail: String| MetricRow {
        metric: name,
        value,
        detail,
        skipped: false,
    };
    Ok(match name {
        MetricName::SignalCompliance => {
            let c = metrics::signal_compliance(logs, map)?;
            let mut csv = String::from("x,y,samples,green_fraction\n");
            for b in &c.histogram {
                let _ = writeln!(csv, "{},{},{},{}", b.x, b.y, b.samples, b.green_fraction);
            }
            (row(Some(c.fraction), format!("entries={} unobserved={}", c.entries, c.unobserved)), csv)
        }
        MetricName::LanePosition => {
            let samples = metrics::lane_position_series(logs, map)?;
            let density = metrics::lane_density(&samples, LANE_DENSITY_BINS);
            let mut csv = String::from("bin_center,density\n");
            for (i, d) in density.iter().enumerate() {
                let c = -1.0 + (i as f64 + 0.5) * 2.0 / LANE_DENSITY_BINS as f64;
                let _ = writeln!(csv, "{c},{d}");
            }
            let on: Vec<f64> = samples.iter().filter(|s| s.on_road).map(|s| s.value).collect();
            let mean = (!on.is_empty()).then(|| on.iter().sum::<f64>() / on.len() as f64);
            (row(mean, format!("samples={} on_road={}", samples.len(), on.len())), csv)
        }
        MetricName::RightOfWay => {
            let r = metrics::right_of_way_score(logs);
            let csv = format!(
                "per_pair,pairs,per_episode_mean,per_episode_std,episodes\n{},{},{},{},{}\n",
                r.per_pair, r.pairs, r.per_episode_mean, r.per_episode_std, r.episodes
            );
            let value = (r.pairs > 0).then_some(r.per_pair);
            (row(value, format!("pairs={} episode_mean={:.4}±{:.4}", r.pairs, r.per_episode_mean, r.per_episode_std)), csv)
        }
        MetricName::SpeakerConsistency => {
            let s = metrics::speaker_consistency(logs)?;
            let csv = format!(
                "mi_action_bits,mi_heading_bits,pearson_heading,pearson_heading_change,degenerate,samples\n{},{},{},{},{},{}\n",
                s.mi_action_bits, s.mi_heading_bits, s.pearson_heading, s.pearson_heading_change, s.degenerate, s.samples
            );
            let detail = format!("pearson_heading={:.4} degenerate={}", s.pearson_heading, s.degenerate);
            (row(Some(s.mi_action_bits), detail), csv)
        }
        MetricName::SafetyDistance => {
            let s = metrics::safety_distance_stats(logs, map, a_max);
            (row(Some(s.adherence), format!("pairs={}", s.samples.len())), gaps_csv(&s.samples, "gap"))
        }
        MetricName::Crosswalk => {
            let c = metrics::crosswalk_stats(logs, a_max)?;
            (row(Some(c.safe_fraction), format!("samples={}", c.samples.len())), gaps_csv(&c.samples, "distance"))
        }
        MetricName::FastLane => {
            let f = metrics::fast_lane_segregation(logs, map)?;
            let mut csv = String::from("rating,lane_position\n");
            for (r, p) in f.ratings.iter().zip(&f.positions) {
                let _ = writeln!(csv, "{r},{p}");
            }
            let detail = format!("agents={} undefined={}", f.ratings.len(), f.correlation.is_none());
            (row(f.correlation, detail), csv)
        }
    })
}

/// Writes `<metric>.csv` for each computable metric plus `summary.csv`.
/// Metrics that do not apply to the logs are skipped with their reason.
pub fn cmd_metrics(log_paths: &[PathBuf], names: &[MetricName], out_dir: &Path, opts: &MetricsOptions) -> CliResult<Vec<MetricRow>> {
    let logs = load_logs(log_paths)?;
    let first = logs
        .first()
        .ok_or_else(|| CliError::Runtime("no episodes in the supplied logs".into()))?;
    let map_name = opts.map.clone().unwrap_or_else(|| first.header.map.clone());
    let map = MapSpec::resolve(&map_name)?;
    let a_max = opts.a_max.unwrap_or(first.header.a_max);
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    for &name in names {
        match compute(name, &logs, &map, a_max) {
            Ok((row, csv)) => {
                std::fs::write(out_dir.join(format!("{}.csv", name.as_str())), csv)?;
                rows.push(row);
            }
            Err(roadlab::Error::Inapplicable { reason, .. }) => rows.push(MetricRow {
                metric: name,
                value: None,
                detail: reason,
                skipped: true,
            }),
            Err(e) => return Err(e.into()),
        }
    }
    let mut summary = String::from("metric,status,value,detail\n");
    for r in &rows {
        let status = if r.skipped { "skipped" } else { "ok" };
        let _ = writeln!(summary, "{},{},{},\"{}\"", r.metric.as_str(), status, fmt_opt(r.value), r.detail.replace('"', "'"));
    }
    std::fs::write(out_dir.join(SUMMARY_FILE), summary)?;
    Ok(rows)
}
