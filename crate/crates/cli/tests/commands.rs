use std::path::Path;
use std::process::Command;

use image::Rgb;
use roadlab::geometry::Pose;
use roadlab::log::{AgentSample, AgentSummary, AgentTrack, EpisodeLog, LogHeader, LOG_SCHEMA, LOG_VERSION};
use roadlab::reward::RewardBreakdown;
use roadlab::world::Status;
use roadlab::{ModelKind, ScenarioConfig, Vec2};
use roadlab_cli::render::{render_frames, FRAME_SIZE, PX_PER_M};
use roadlab_cli::{cmd_metrics, cmd_render, cmd_rollout, cmd_train, CliError, MetricName, MetricsOptions, RolloutOptions, RunManifest};

fn small(dir: &Path, map: &str, agents: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        map: map.into(),
        ..Default::default()
    };
    c.agents.count = agents;
    c.train.hidden = 16;
    c.train.episodes_per_round = 2;
    c.output_dir = dir.display().to_string();
    c
}

fn opts(episodes: usize, deterministic: bool) -> RolloutOptions {
    RolloutOptions {
        checkpoint: None,
        episodes,
        deterministic,
        full_obs: false,
        eval_seed: None,
    }
}

#[test]
fn train_writes_curves_checkpoint_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), "intersection4", 4);
    cfg.train.iterations = 5;
    let report = cmd_train(&cfg).unwrap();
    assert_eq!(report.checkpoints.len(), 1);
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 6);
    let manifest = RunManifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.config, cfg);
    assert!(manifest.artifacts.iter().any(|a| a.ends_with("iter_000005.ckpt")));

    // Rerunning from the manifest reproduces the curves byte for byte.
    let again = tempfile::tempdir().unwrap();
    let mut cfg2 = manifest.config.clone();
    cfg2.output_dir = again.path().display().to_string();
    cmd_train(&cfg2).unwrap();
    assert_eq!(std::fs::read(again.path().join("curves.csv")).unwrap(), curves.as_bytes());
}

#[test]
fn spline_model_needs_road_widths() {
    let dir = tempfile::tempdir().unwrap();
    let mut map: serde_json::Value = serde_json::from_str(&roadlab::MapSpec::bundled("highway").unwrap().to_json().unwrap()).unwrap();
    for road in map["roads"].as_array_mut().unwrap() {
        road.as_object_mut().unwrap().remove("width");
    }
    let path = dir.path().join("widthless.json");
    std::fs::write(&path, map.to_string()).unwrap();
    let mut cfg = small(dir.path(), path.to_str().unwrap(), 1);
    cfg.model = ModelKind::Spline;
    match cmd_train(&cfg) {
        Err(e @ CliError::Config(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn rollout_records_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), "highway", 1);
    let r = cmd_rollout(&cfg, &opts(1, true)).unwrap();
    let text = std::fs::read_to_string(&r.log_path).unwrap();
    let logs = EpisodeLog::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(logs.len(), 1);
    assert!(logs[0].agents[0].samples.len() <= 200);
    // Every field survives a parse and re-serialise.
    assert_eq!(logs[0].to_jsonl_string().unwrap(), text);
    let again = cmd_rollout(&cfg, &opts(1, true)).unwrap();
    assert_eq!(std::fs::read_to_string(again.log_path).unwrap(), text);
}

#[test]
fn rollout_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), "highway", 1);
    cfg.train.iterations = 1;
    let t = cmd_train(&cfg).unwrap();
    cfg.train.hidden = 8;
    let mut o = opts(1, true);
    o.checkpoint = t.last_checkpoint().cloned();
    assert!(matches!(cmd_rollout(&cfg, &o), Err(CliError::Runtime(_))));
}

#[test]
fn untrained_intersection_logs_feed_every_metric() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), "intersection4", 8);
    cfg.comm_enabled = true;
    cfg.agents.ratings = true;
    let r = cmd_rollout(&cfg, &opts(2, false)).unwrap();
    let out = dir.path().join("metrics");
    let rows = cmd_metrics(&[r.log_path], &MetricName::ALL, &out, &MetricsOptions::default()).unwrap();
    assert_eq!(rows.len(), MetricName::ALL.len());
    for row in &rows {
        if row.metric == MetricName::Crosswalk {
            assert!(row.skipped, "no pedestrians on this map");
            assert!(!row.detail.is_empty());
        } else {
            assert!(!row.skipped, "{row:?}");
            assert!(out.join(format!("{}.csv", row.metric.as_str())).exists());
        }
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), MetricName::ALL.len() + 1);
    assert!(summary.contains("crosswalk,skipped"));
}

#[test]
fn crosswalk_logs_have_pedestrian_stats() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), "crosswalk", 2);
    cfg.pedestrians.enabled = true;
    let r = cmd_rollout(&cfg, &opts(2, false)).unwrap();
    let rows = cmd_metrics(&[r.log_path], &[MetricName::Crosswalk, MetricName::SignalCompliance], &dir.path().join("m"), &MetricsOptions::default()).unwrap();
    assert!(!rows[0].skipped);
    assert!(rows[1].skipped, "highway-style map has no intersection");
}

fn sample(tick: u32, x: f64, status: Status) -> AgentSample {
    AgentSample {
        tick,
        pose: Pose::new(Vec2::new(x, -3.0), 0.0),
        speed: 5.0,
        accel: 2,
        accel_value: 0.0,
        message: 0,
        received: 0,
        signal_code: 0.75,
        in_intersection: false,
        reward: RewardBreakdown::default(),
        status,
        obs_digest: "0".into(),
        obs: None,
    }
}

fn synthetic(ticks: u32, collide_at: u32) -> EpisodeLog {
    let samples = (0..=collide_at.min(ticks - 1))
        .map(|t| sample(t, -20.0 + t as f64, if t == collide_at { Status::Collided } else { Status::Active }))
        .collect::<Vec<_>>();
    let end = samples.last().unwrap().pose;
    let other: Vec<AgentSample> = (0..ticks).map(|t| sample(t, 10.0, Status::Active)).collect();
    let summary = |agent, status, end_pose| AgentSummary {
        agent,
        road: 0,
        goal_road: 0,
        rating: 1.0,
        spawn_tick: 0,
        goal_distance_init: 50.0,
        arrival_tick: None,
        departure_tick: None,
        status,
        end_pose,
        path: vec![],
    };
    EpisodeLog {
        header: LogHeader {
            schema: LOG_SCHEMA.into(),
            version: LOG_VERSION,
            map: "highway".into(),
            model: ModelKind::FixedTrack,
            episode: 0,
            seed: 0,
            dt: 0.25,
            horizon: 200,
            a_max: 2.5,
            v_max: 10.0,
            comm_enabled: false,
            n_rays: 64,
            noise_pct: 0.0,
        },
        agents: vec![
            AgentTrack {
                summary: summary(0, Status::Collided, end),
                samples,
            },
            AgentTrack {
                summary: summary(1, Status::Active, other.last().unwrap().pose),
                samples: other,
            },
        ],
        pedestrians: vec![],
        signals: vec![],
    }
}

fn pixel_at(img: &image::RgbImage, p: Vec2, center: Vec2) -> Rgb<u8> {
    let half = FRAME_SIZE as f64 / 2.0;
    let px = ((p.x - center.x) * PX_PER_M + half) as u32;
    let py = (half - (p.y - center.y) * PX_PER_M) as u32;
    *img.get_pixel(px, py)
}

#[test]
fn render_frames_and_collision_color() {
    let dir = tempfile::tempdir().unwrap();
    let log = synthetic(10, 4);
    let path = dir.path().join("log.jsonl");
    log.write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
    let frames = cmd_render(&path, &dir.path().join("frames"), 0, 4.0, None).unwrap();
    assert_eq!(frames.len(), 10);
    let mut names: Vec<String> = frames.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
    let sorted = {
        let mut s = names.clone();
        s.sort();
        s
    };
    assert_eq!(names, sorted);
    names.dedup();
    assert_eq!(names.len(), 10);

    let map = roadlab::MapSpec::bundled("highway").unwrap();
    let (lo, hi) = map.bounds();
    let center = (lo + hi) * 0.5;
    let imgs = render_frames(&log, &map);
    let crash = log.agents[0].summary.end_pose.position;
    assert_ne!(pixel_at(&imgs[3], Vec2::new(-17.0, -3.0), center), roadlab_cli::render::COLLISION);
    for img in &imgs[4..] {
        assert_eq!(pixel_at(img, crash, center), roadlab_cli::render::COLLISION);
    }
    assert_eq!(pixel_at(&imgs[9], Vec2::new(10.0, -3.0), center), roadlab_cli::render::ACTIVE);
    // Same input, same pixels.
    assert_eq!(render_frames(&log, &map), imgs);
}

#[test]
fn render_empty_log_has_no_frames() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.jsonl");
    std::fs::write(&path, "").unwrap();
    assert!(cmd_render(&path, &dir.path().join("f"), 0, 4.0, None).unwrap().is_empty());
}

fn roadlab_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roadlab"))
}

#[test]
fn binary_exit_codes_and_print_config() {
    let out = roadlab_bin().args(["validate-config", "--set", "agents.count=0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("agents.count"));

    let out = roadlab_bin().args(["render", "/nonexistent/log.jsonl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = roadlab_bin().args(["train", "--print-config", "--seed", "7", "--map", "highway"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("resolved.toml");
    std::fs::write(&p, &text).unwrap();
    let cfg = roadlab_cli::resolve_config(Some(&p), &[]).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.map, "highway");
    assert_eq!(cfg.train, roadlab::HyperParams::default());
}

#[test]
fn output_root_env_places_relative_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let out = roadlab_bin()
        .env("ROADLAB_OUTPUT_ROOT", dir.path())
        .env("ROADLAB_WORKERS", "2")
        .args(["rollout", "--map", "highway", "--agents", "1", "--episodes", "1", "--output-dir", "runs/x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = RunManifest::read(&dir.path().join("runs/x/manifest.json")).unwrap();
    assert_eq!(manifest.config.train.workers, 2);
    assert!(dir.path().join("runs/x/rollout.jsonl").exists());
}
