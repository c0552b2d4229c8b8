//! Trajectory logs as JSON Lines.
//!
//! A file holds one or more episodes. Each episode starts with a `header`
//! record, followed per tick by one `signals` record (when signals exist),
//! one `pedestrian` record per pedestrian and one `agent` record per acting
//! agent, and ends with one `summary` record per agent.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::ModelKind;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec2};
use crate::reward::RewardBreakdown;
use crate::world::{Phase, Status};

pub const LOG_SCHEMA: &str = "roadlab-trajectory";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub version: u32,
    /// Map name or path, resolvable with `MapSpec::resolve`.
    pub map: String,
    pub model: ModelKind,
    pub episode: u64,
    pub seed: u64,
    pub dt: f64,
    pub horizon: u32,
    pub a_max: f64,
    pub v_max: f64,
    pub comm_enabled: bool,
    pub n_rays: usize,
    pub noise_pct: f64,
}

/// State of one agent before a tick, the action it took, and the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSample {
    pub tick: u32,
    pub pose: Pose,
    pub speed: f64,
    /// Acceleration category index.
    pub accel: usize,
    /// Applied acceleration (m/s²), including the rating scale.
    pub accel_value: f64,
    /// Bit broadcast this tick.
    pub message: u8,
    /// Bit received in this tick's observation.
    pub received: u8,
    pub signal_code: f64,
    pub in_intersection: bool,
    pub reward: RewardBreakdown,
    /// Status after the tick.
    pub status: Status,
    pub obs_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: usize,
    pub road: usize,
    pub goal_road: usize,
    pub rating: f64,
    pub spawn_tick: u32,
    pub goal_distance_init: f64,
    /// Tick at which the footprint first overlapped the intersection region.
    pub arrival_tick: Option<u32>,
    /// Tick at which the footprint first left the region after arriving.
    pub departure_tick: Option<u32>,
    pub status: Status,
    pub end_pose: Pose,
    /// Spline points the agent followed (route stations or decoded stations).
    pub path: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSample {
    pub tick: u32,
    pub id: usize,
    pub position: Vec2,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    pub tick: u32,
    /// Phase facing each road, indexed by road id.
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    pub summary: AgentSummary,
    pub samples: Vec<AgentSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub agents: Vec<AgentTrack>,
    pub pedestrians: Vec<PedestrianSample>,
    pub signals: Vec<SignalSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Header(LogHeader),
    Signals(SignalSample),
    Pedestrian(PedestrianSample),
    Agent {
        agent: usize,
        #[serde(flatten)]
        sample: AgentSample,
    },
    Summary(AgentSummary),
}

impl EpisodeLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |r: &Record| -> Result<()> {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&Record::Header(self.header.clone()))?;
        let last_tick = self
            .agents
            .iter()
            .flat_map(|a| a.samples.last().map(|s| s.tick))
            .chain(self.signals.iter().map(|s| s.tick))
            .chain(self.pedestrians.iter().map(|p| p.tick))
            .max();
        // Emit in tick order so the file streams chronologically.
        let mut cursors = vec![0usize; self.agents.len()];
        let (mut si, mut pi) = (0, 0);
        if let Some(last) = last_tick {
            for t in 0..=last {
                while si < self.signals.len() && self.signals[si].tick == t {
                    line(&Record::Signals(self.signals[si].clone()))?;
                    si += 1;
                }
                while pi < self.pedestrians.len() && self.pedestrians[pi].tick == t {
                    line(&Record::Pedestrian(self.pedestrians[pi].clone()))?;
                    pi += 1;
                }
                for (a, c) in self.agents.iter().zip(cursors.iter_mut()) {
                    while *c < a.samples.len() && a.samples[*c].tick == t {
                        line(&Record::Agent {
                            agent: a.summary.agent,
                            sample: a.samples[*c].clone(),
                        })?;
                        *c += 1;
                    }
                }
            }
        }
        for a in &self.agents {
            line(&Record::Summary(a.summary.clone()))?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
    }

    /// Parses every episode in a JSON Lines stream.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<EpisodeLog>> {
        let mut episodes: Vec<EpisodeLog> = Vec::new();
        let mut pending: Vec<Vec<(usize, AgentSample)>> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::LogParse { line: i + 1, message };
            let rec: Record = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            if let Record::Header(h) = rec {
                if h.schema != LOG_SCHEMA || h.version != LOG_VERSION {
                    return Err(err(format!("unsupported schema {} v{}", h.schema, h.version)));
                }
                episodes.push(EpisodeLog {
                    header: h,
                    agents: Vec::new(),
                    pedestrians: Vec::new(),
                    signals: Vec::new(),
                });
                pending.push(Vec::new());
                continue;
            }
            let ep = episodes.last_mut().ok_or_else(|| err("record before header".into()))?;
            let samples = pending.last_mut().unwrap();
            match rec {
                Record::Header(_) => unreachable!(),
                Record::Signals(s) => ep.signals.push(s),
                Record::Pedestrian(p) => ep.pedestrians.push(p),
                Record::Agent { agent, sample } => samples.push((agent, sample)),
                Record::Summary(s) => ep.agents.push(AgentTrack {
                    summary: s,
                    samples: Vec::new(),
                }),
            }
        }
        for (ep, samples) in episodes.iter_mut().zip(pending) {
            for (agent, s) in samples {
                let track = ep
                    .agents
                    .iter_mut()
                    .find(|a| a.summary.agent == agent)
                    .ok_or_else(|| Error::LogParse {
                        line: 0,
                        message: format!("samples for agent {agent} without a summary"),
                    })?;
                track.samples.push(s);
            }
        }
        Ok(episodes)
    }

    pub fn read_path(path: &std::path::Path) -> Result<Vec<EpisodeLog>> {
        let f = std::fs::File::open(path)?;
        EpisodeLog::read_jsonl(std::io::BufReader::new(f))
    }

    /// Last tick present in the log plus one, i.e. the number of frames.
    pub fn n_ticks(&self) -> u32 {
        self.agents
            .iter()
            .flat_map(|a| a.samples.last().map(|s| s.tick + 1))
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn header() -> LogHeader {
        LogHeader {
            schema: LOG_SCHEMA.into(),
            version: LOG_VERSION,
            map: "intersection4".into(),
            model: ModelKind::FixedTrack,
            episode: 0,
            seed: 1,
            dt: 0.25,
            horizon: 200,
            a_max: 2.5,
            v_max: 10.0,
            comm_enabled: true,
            n_rays: 64,
            noise_pct: 0.0,
        }
    }

    pub fn sample(tick: u32, x: f64, speed: f64) -> AgentSample {
        AgentSample {
            tick,
            pose: Pose::new(Vec2::new(x, 0.1 * tick as f64), 0.3),
            speed,
            accel: 4,
            accel_value: 2.5,
            message: 1,
            received: 0,
            signal_code: 0.75,
            in_intersection: false,
            reward: RewardBreakdown::default(),
            status: Status::Active,
            obs_digest: "0123456789abcdef".into(),
            obs: None,
        }
    }

    pub fn summary(agent: usize) -> AgentSummary {
        AgentSummary {
            agent,
            road: 0,
            goal_road: 2,
            rating: 1.0,
            spawn_tick: 0,
            goal_distance_init: 60.0,
            arrival_tick: Some(3),
            departure_tick: None,
            status: Status::Collided,
            end_pose: Pose::new(Vec2::new(1.0 / 3.0, 2.0), -1.0),
            path: vec![Vec2::new(0.1, 0.2), Vec2::new(1.0, 2.0)],
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut s2 = sample(1, 0.7, 1e-17);
        s2.obs = Some(vec![0.1, 1.0 / 3.0]);
        let log = EpisodeLog {
            header: header(),
            agents: vec![
                AgentTrack {
                    summary: summary(0),
                    samples: vec![sample(0, 0.1, 0.0), s2],
                },
                AgentTrack {
                    summary: summary(1),
                    samples: vec![sample(1, 5.0, 2.0)],
                },
            ],
            pedestrians: vec![PedestrianSample {
                tick: 0,
                id: 0,
                position: Vec2::new(20.0, -3.3),
                active: true,
            }],
            signals: vec![SignalSample {
                tick: 0,
                phases: vec![Phase::Green, Phase::Red],
            }],
        };
        let text = log.to_jsonl_string().unwrap();
        let back = EpisodeLog::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, vec![log.clone()]);
        // Two episodes back to back.
        let twice = format!("{text}{text}");
        assert_eq!(EpisodeLog::read_jsonl(twice.as_bytes()).unwrap().len(), 2);
        assert_eq!(log.n_ticks(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{}\n{{\"kind\": \"agent\"}}\n", serde_json::to_string(&Record::Header(header())).unwrap());
        match EpisodeLog::read_jsonl(text.as_bytes()) {
            Err(Error::LogParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
