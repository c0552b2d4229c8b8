//! Declarative scenario configuration shared by the library and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::MapSpec;
use crate::optim::HyperParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Acceleration-only control along a pre-computed lane path.
    FixedTrack,
    /// Single-step spline subpolicy plus acceleration subpolicy.
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteMode {
    /// Goal on the road opposite the spawn road (or the same road on single-road maps).
    Straight,
    /// Any goal pocket on a road other than the spawn road.
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub count: usize,
    /// Keep `count` agents active by spawning into freed pockets.
    pub continuous_spawn: bool,
    /// Sample per-agent acceleration ratings.
    pub ratings: bool,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        AgentsConfig {
            count: 4,
            continuous_spawn: false,
            ratings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub n_rays: usize,
    /// Percentage of rays zeroed every tick.
    pub noise_pct: f64,
    pub stack: usize,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            n_rays: 64,
            noise_pct: 0.0,
            stack: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PedestrianConfig {
    pub enabled: bool,
    pub max_count: usize,
}

impl Default for PedestrianConfig {
    fn default() -> Self {
        PedestrianConfig {
            enabled: false,
            max_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Seconds per tick.
    pub dt: f64,
    /// Episode length in ticks.
    pub horizon: u32,
    /// Maximum acceleration magnitude (m/s²) at rating 1.
    pub a_max: f64,
    /// Speed limit (m/s) at rating 1.
    pub v_max: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            dt: 0.25,
            horizon: 200,
            a_max: 2.5,
            v_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Bundled map name or path to a map JSON file.
    pub map: String,
    pub model: ModelKind,
    pub route: RouteMode,
    pub agents: AgentsConfig,
    pub lidar: LidarConfig,
    pub comm_enabled: bool,
    pub signals_enabled: bool,
    pub pedestrians: PedestrianConfig,
    pub dynamics: DynamicsConfig,
    pub train: HyperParams,
    pub seed: u64,
    pub output_dir: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            map: "intersection4".into(),
            model: ModelKind::FixedTrack,
            route: RouteMode::Straight,
            agents: AgentsConfig::default(),
            lidar: LidarConfig::default(),
            comm_enabled: false,
            signals_enabled: true,
            pedestrians: PedestrianConfig::default(),
            dynamics: DynamicsConfig::default(),
            train: HyperParams::default(),
            seed: 0,
            output_dir: "runs/default".into(),
        }
    }
}

impl ScenarioConfig {
    /// Checks every field; errors carry the dotted field path.
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, m: &str| Err(Error::config(f, m));
        if self.agents.count == 0 {
            return bad("agents.count", "must be at least 1");
        }
        if self.lidar.n_rays == 0 {
            return bad("lidar.n_rays", "must be at least 1");
        }
        if !(0.0..=100.0).contains(&self.lidar.noise_pct) {
            return bad("lidar.noise_pct", "must lie in [0, 100]");
        }
        if self.lidar.stack == 0 {
            return bad("lidar.stack", "must be at least 1");
        }
        if self.pedestrians.enabled && self.pedestrians.max_count == 0 {
            return bad("pedestrians.max_count", "must be at least 1 when pedestrians are enabled");
        }
        let d = &self.dynamics;
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return bad("dynamics.dt", "must be positive");
        }
        if d.horizon == 0 {
            return bad("dynamics.horizon", "must be at least 1");
        }
        if !(d.a_max > 0.0) {
            return bad("dynamics.a_max", "must be positive");
        }
        if !(d.v_max > 0.0) {
            return bad("dynamics.v_max", "must be positive");
        }
        self.train.validate()?;
        let map = self.load_map()?;
        self.validate_against(&map)
    }

    /// Checks that need the resolved map.
    pub fn validate_against(&self, map: &MapSpec) -> Result<()> {
        if self.model == ModelKind::Spline && !map.supports_splines() {
            return Err(Error::config(
                "model",
                format!("spline model needs a map whose roads all declare a width; `{}` does not", map.name),
            ));
        }
        if self.agents.count > map.spawn_pockets.len() {
            return Err(Error::config(
                "agents.count",
                format!("{} agents but map `{}` has {} spawn pockets", self.agents.count, map.name, map.spawn_pockets.len()),
            ));
        }
        if self.pedestrians.enabled && map.crosswalk.is_none() {
            return Err(Error::config("pedestrians.enabled", format!("map `{}` has no crosswalk", map.name)));
        }
        Ok(())
    }

    pub fn load_map(&self) -> Result<MapSpec> {
        MapSpec::resolve(&self.map).map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("map", other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn spline_on_widthless_map_rejected() {
        let cfg = ScenarioConfig {
            model: ModelKind::Spline,
            ..Default::default()
        };
        let mut map = MapSpec::bundled("intersection4").unwrap();
        cfg.validate_against(&map).unwrap();
        map.roads[0].width = None;
        let err = cfg.validate_against(&map).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "model"));
    }

    #[test]
    fn field_paths_in_errors() {
        let mut cfg = ScenarioConfig::default();
        cfg.lidar.noise_pct = 120.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("lidar.noise_pct"));
        let mut cfg = ScenarioConfig::default();
        cfg.agents.count = 20;
        assert!(cfg.validate().unwrap_err().to_string().contains("agents.count"));
        let mut cfg = ScenarioConfig::default();
        cfg.train.clip = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("train.clip"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"agents": {"cnt": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("cnt"));
    }
}
