//! Flat `key = value` scenario files.
//!
//! ```text
//! # three robots in the store
//! world = bookstore
//! robots = 3
//! start.0 = 1.5, 1.5, 0
//! seed = 7
//! steps = 5000
//! ```

use crate::geometry::Pose2D;
use crate::world::{MotionLimits, RssiChannel, SensorSpec, WorldError, WorldMap};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("world: {0}")]
    World(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl From<WorldError> for ConfigError {
    fn from(e: WorldError) -> Self {
        ConfigError::World(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalizationMode {
    /// Map-corrected particle belief with the range-graph prior.
    Seal,
    /// Odometry corrected by the range graph only.
    RlocOnly,
    DeadReckoning,
}

impl LocalizationMode {
    pub fn name(self) -> &'static str {
        match self {
            LocalizationMode::Seal => "seal",
            LocalizationMode::RlocOnly => "rloc",
            LocalizationMode::DeadReckoning => "dead_reckoning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NavigationMode {
    /// Hull prediction and peer-aware goal scoring.
    Hull,
    /// Nearest free cell bordering unobserved space.
    NearestFrontier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WorldSource {
    Bookstore,
    House,
    File(PathBuf),
}

/// Everything a run needs. Defaults describe the three-robot bookstore run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub world: WorldSource,
    pub resolution: f64,
    pub robots: usize,
    /// Explicit start poses by robot index; the rest are placed automatically.
    pub starts: BTreeMap<usize, Pose2D>,
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    pub limits: MotionLimits,
    pub sensor: SensorSpec,
    pub channel: RssiChannel,
    pub connectivity_threshold_dbm: f64,
    pub odometry_sigma_v: f64,
    pub odometry_sigma_w: f64,
    pub particles: usize,
    /// Particle motion noise as a multiple of the odometry noise.
    pub particle_noise_scale: f64,
    pub beam_stride: usize,
    /// Observation confidence when the pose belief is certain.
    pub confidence_max: f64,
    pub gp_lengthscale: f64,
    pub gp_signal_var: f64,
    pub gp_noise_var: f64,
    pub gp_bin: f64,
    pub gp_radius: f64,
    pub k_share: usize,
    pub exploration_threshold: f64,
    pub inflation_depth: usize,
    pub max_corner_distance: f64,
    pub hough_threshold: usize,
    pub peer_weight: f64,
    pub replan_every: usize,
    pub candidates_k: usize,
    pub rloc_gain: f64,
    /// Spread of the range-graph position prior on the particle belief (m).
    pub rloc_sigma: f64,
    pub localization: LocalizationMode,
    pub navigation: NavigationMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "bookstore".into(),
            world: WorldSource::Bookstore,
            resolution: 0.25,
            robots: 3,
            starts: BTreeMap::new(),
            seed: 0,
            steps: 5000,
            dt: 0.1,
            limits: MotionLimits::default(),
            sensor: SensorSpec::default(),
            channel: RssiChannel::default(),
            connectivity_threshold_dbm: -75.0,
            odometry_sigma_v: 0.02,
            odometry_sigma_w: 0.02,
            particles: 25,
            particle_noise_scale: 1.0,
            beam_stride: 10,
            confidence_max: 0.6,
            gp_lengthscale: 1.0,
            gp_signal_var: 1.0,
            gp_noise_var: 0.1,
            gp_bin: 1.0,
            gp_radius: 6.0,
            k_share: 5,
            exploration_threshold: 0.65,
            inflation_depth: 2,
            max_corner_distance: 3.0,
            hough_threshold: 8,
            peer_weight: 0.5,
            replan_every: 5,
            candidates_k: 3,
            rloc_gain: 0.1,
            rloc_sigma: 2.0,
            localization: LocalizationMode::Seal,
            navigation: NavigationMode::Hull,
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a number, got `{v}`"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_pose(v: &str) -> Result<Pose2D, String> {
    let parts: Vec<&str> = v.split([',', ' ']).filter(|s| !s.is_empty()).collect();
    if parts.len() != 3 {
        return Err(format!("expected `x, y, theta`, got `{v}`"));
    }
    Ok(Pose2D::new(parse_f64(parts[0])?, parse_f64(parts[1])?, parse_f64(parts[2])?))
}

impl ScenarioConfig {
    /// Parses scenario text. Relative world paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            c.apply(key, value, base_dir).map_err(err)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path.parent())
    }

    fn apply(&mut self, key: &str, value: &str, base_dir: Option<&Path>) -> Result<(), String> {
        if let Some(idx) = key.strip_prefix("start.") {
            let i = parse_usize(idx)?;
            self.starts.insert(i, parse_pose(value)?);
            return Ok(());
        }
        match key {
            "name" => self.name = value.to_string(),
            "world" => {
                self.world = match value {
                    "bookstore" => WorldSource::Bookstore,
                    "house" => WorldSource::House,
                    path => {
                        let p = PathBuf::from(path);
                        WorldSource::File(match base_dir {
                            Some(d) if p.is_relative() => d.join(p),
                            _ => p,
                        })
                    }
                }
            }
            "resolution" => self.resolution = parse_f64(value)?,
            "robots" => self.robots = parse_usize(value)?,
            "seed" => self.seed = value.parse().map_err(|_| format!("expected a u64 seed, got `{value}`"))?,
            "steps" => self.steps = parse_usize(value)?,
            "dt" => self.dt = parse_f64(value)?,
            "v_max" => self.limits.v_max = parse_f64(value)?,
            "w_max" => self.limits.w_max = parse_f64(value)?,
            "lidar_fov_deg" => self.sensor.fov = parse_f64(value)?.to_radians(),
            "lidar_range" => self.sensor.range_max = parse_f64(value)?,
            "lidar_beams" => self.sensor.beam_count = parse_usize(value)?,
            "lidar_noise" => self.sensor.range_noise_sigma = parse_f64(value)?,
            "rssi_p0" => self.channel.p0_dbm = parse_f64(value)?,
            "rssi_d0" => self.channel.d0 = parse_f64(value)?,
            "path_loss_exponent" => self.channel.path_loss_exponent = parse_f64(value)?,
            "shadowing_sigma_db" => self.channel.shadowing_sigma_db = parse_f64(value)?,
            "connectivity_threshold_dbm" => self.connectivity_threshold_dbm = parse_f64(value)?,
            "odometry_sigma_v" => self.odometry_sigma_v = parse_f64(value)?,
            "odometry_sigma_w" => self.odometry_sigma_w = parse_f64(value)?,
            "particles" => self.particles = parse_usize(value)?,
            "particle_noise_scale" => self.particle_noise_scale = parse_f64(value)?,
            "beam_stride" => self.beam_stride = parse_usize(value)?,
            "confidence_max" => self.confidence_max = parse_f64(value)?,
            "gp_lengthscale" => self.gp_lengthscale = parse_f64(value)?,
            "gp_signal_var" => self.gp_signal_var = parse_f64(value)?,
            "gp_noise_var" => self.gp_noise_var = parse_f64(value)?,
            "gp_bin" => self.gp_bin = parse_f64(value)?,
            "gp_radius" => self.gp_radius = parse_f64(value)?,
            "k_share" => self.k_share = parse_usize(value)?,
            "exploration_threshold" => self.exploration_threshold = parse_f64(value)?,
            "inflation_depth" => self.inflation_depth = parse_usize(value)?,
            "max_corner_distance" => self.max_corner_distance = parse_f64(value)?,
            "hough_threshold" => self.hough_threshold = parse_usize(value)?,
            "peer_weight" => self.peer_weight = parse_f64(value)?,
            "replan_every" => self.replan_every = parse_usize(value)?,
            "candidates_k" => self.candidates_k = parse_usize(value)?,
            "rloc_gain" => self.rloc_gain = parse_f64(value)?,
            "rloc_sigma" => self.rloc_sigma = parse_f64(value)?,
            "localization" => {
                self.localization = match value {
                    "seal" => LocalizationMode::Seal,
                    "rloc" => LocalizationMode::RlocOnly,
                    "dead_reckoning" => LocalizationMode::DeadReckoning,
                    _ => return Err(format!("unknown localization `{value}` (seal, rloc, dead_reckoning)")),
                }
            }
            "navigation" => {
                self.navigation = match value {
                    "hull" => NavigationMode::Hull,
                    "frontier" => NavigationMode::NearestFrontier,
                    _ => return Err(format!("unknown navigation `{value}` (hull, frontier)")),
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.robots == 0 {
            return bad("robots must be at least 1");
        }
        if !(self.resolution > 0.0) || !(self.dt > 0.0) {
            return bad("resolution and dt must be positive");
        }
        if self.particles == 0 || self.k_share == 0 || self.replan_every == 0 || self.candidates_k == 0 {
            return bad("particles, k_share, replan_every and candidates_k must be positive");
        }
        if !(0.0..=1.0).contains(&self.exploration_threshold) {
            return bad("exploration_threshold must lie in [0, 1]");
        }
        if !(self.gp_lengthscale > 0.0 && self.gp_signal_var > 0.0 && self.gp_noise_var >= 0.0 && self.gp_bin > 0.0) {
            return bad("invalid GP parameters");
        }
        if !(self.confidence_max > 0.0 && self.confidence_max <= 1.0) {
            return bad("confidence_max must lie in (0, 1]");
        }
        if !(self.particle_noise_scale >= 0.0) {
            return bad("particle_noise_scale must be non-negative");
        }
        if !(self.rloc_sigma > 0.0) {
            return bad("rloc_sigma must be positive");
        }
        if !(0.0..=1.0).contains(&self.rloc_gain) {
            return bad("rloc_gain must lie in [0, 1]");
        }
        if let Some(i) = self.starts.keys().find(|i| **i >= self.robots) {
            return Err(ConfigError::Invalid(format!("start.{i} given but only {} robots", self.robots)));
        }
        self.sensor.validate()?;
        self.channel.validate()?;
        Ok(())
    }

    pub fn build_world(&self) -> Result<WorldMap, ConfigError> {
        Ok(match &self.world {
            WorldSource::Bookstore => WorldMap::bookstore(self.resolution),
            WorldSource::House => WorldMap::house(self.resolution),
            WorldSource::File(p) => WorldMap::load(p, self.resolution)?,
        })
    }

    /// Start poses for every robot. Unlisted robots are placed one meter
    /// apart along the first free row of the world, facing +x.
    pub fn start_poses(&self, world: &WorldMap) -> Result<Vec<Pose2D>, ConfigError> {
        let g = world.geometry();
        let mut auto = Vec::new();
        let mut y = 1.5;
        while auto.len() < self.robots && y < g.height_m() {
            let mut x = 1.5;
            while auto.len() < self.robots && x < g.width_m() {
                let p = Pose2D::new(x, y, 0.0);
                if g.cells_within(&p.position(), 0.5).iter().all(|c| world.is_free(*c)) {
                    auto.push(p);
                }
                x += 1.0;
            }
            y += 1.0;
        }
        let mut poses = Vec::with_capacity(self.robots);
        for i in 0..self.robots {
            let p = match self.starts.get(&i) {
                Some(p) => *p,
                None => *auto
                    .get(i)
                    .ok_or_else(|| ConfigError::Invalid("no room for automatic start poses".into()))?,
            };
            if !world.is_free_point(&p.position()) {
                return Err(ConfigError::World(format!("start pose of robot {i} at ({}, {}) is not free", p.x, p.y)));
            }
            poses.push(p);
        }
        Ok(poses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let c = ScenarioConfig::parse(
            "# demo\nworld = house\nrobots = 2 # two\nstart.1 = 3, 4, 1.57\nlocalization = rloc\n",
            None,
        )
        .unwrap();
        assert_eq!(c.world, WorldSource::House);
        assert_eq!(c.robots, 2);
        assert_eq!(c.starts[&1].x, 3.0);
        assert_eq!(c.localization, LocalizationMode::RlocOnly);
    }

    #[test]
    fn reports_line_numbers() {
        let e = ScenarioConfig::parse("robots = 2\n\nsteps = many\n", None).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 3, .. }), "{e}");
        let e = ScenarioConfig::parse("colour = blue\n", None).unwrap_err();
        assert_eq!(e.to_string(), "line 1: unknown key `colour`");
        let e = ScenarioConfig::parse("robots 2\n", None).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 1, .. }));
    }

    #[test]
    fn automatic_starts_are_free_and_distinct() {
        let c = ScenarioConfig {
            robots: 7,
            ..Default::default()
        };
        let w = c.build_world().unwrap();
        let s = c.start_poses(&w).unwrap();
        assert_eq!(s.len(), 7);
        for i in 0..7 {
            for j in i + 1..7 {
                assert!(s[i].position().distance(&s[j].position()) >= 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn start_in_wall_is_rejected() {
        let c = ScenarioConfig::parse("robots = 1\nstart.0 = 3.75, 5.0, 0\n", None).unwrap();
        let w = c.build_world().unwrap();
        assert!(matches!(c.start_poses(&w), Err(ConfigError::World(_))));
    }
}
