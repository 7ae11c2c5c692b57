//! Per-robot exploration and localization loop, plus the simulation driver.
//!
//! Each step an agent runs two independent pipelines on its own data: the
//! map pipeline refits its local occupancy-evidence GP and fuses the models
//! received from peers into an exploration belief, and the localization
//! pipeline solves the range graph built from RSSI beacons. Both feed the
//! joint pose/map update, after which the agent predicts the explorable
//! boundary, picks a goal and steers toward it.

pub mod bus;
pub mod config;
pub mod sim;

pub use bus::{Beacon, Bus, GpShare, Message, MessageKind};
pub use config::{ConfigError, LocalizationMode, NavigationMode, ScenarioConfig, WorldSource};
pub use sim::{run_simulation, RunOutput, SimError, Simulation};

use crate::geometry::{wrap_angle, Cell, GridGeometry, Point2, Pose2D};
use crate::gp::{bin_samples, exploration_grid, fit_gp, fuse_gps, BeliefGrid, FusionConfig, GpModel, Kernel, QueryGrid};
use crate::hull::{
    inflate, predict_boundary, select_next_region, BoundaryConfig, CellSets, CostField, GoalConfig, HoughConfig,
    HullError, HullModel,
};
use crate::raoblackwell::{
    joint_update, particle_evidence, JointBelief, MotionNoise, ObservationModel, OccupancyBelief, OdometryDelta,
    PoseBelief, UpdateReport,
};
use crate::rloc::{
    build_rpmg, expand_to_erpmg, optimize_graph, ErpmgConfig, MotionBound, RangeMeasurement, RobotId, Workspace,
};
use crate::world::{LidarScan, MotionLimits, RssiChannel, SensorSpec, VelocityCommand};
use crate::SimRng;
use rand::SeedableRng;
use std::collections::BTreeMap;

/// Per-robot parameters, derived from the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub geometry: GridGeometry,
    pub sensor: SensorSpec,
    pub channel: RssiChannel,
    pub connectivity_threshold_dbm: f64,
    pub limits: MotionLimits,
    pub dt: f64,
    pub particles: usize,
    pub particle_noise: MotionNoise,
    pub observation: ObservationModel,
    pub beam_stride: usize,
    pub kernel: Kernel,
    pub fusion: FusionConfig,
    pub gp_bin: f64,
    pub gp_radius: f64,
    pub gp_cap: usize,
    pub k_share: usize,
    pub exploration_threshold: f64,
    pub boundary: BoundaryConfig,
    pub goal: GoalConfig,
    pub replan_every: usize,
    pub goal_timeout: usize,
    pub free_below: f64,
    pub occupied_above: f64,
    /// Open-space hull points are placed this far past the sensor range.
    pub open_extension: f64,
    pub motion_bound: MotionBound,
    pub erpmg: ErpmgConfig,
    pub rloc_gain: f64,
    /// Spread of the position prior the range graph puts on the particles.
    pub rloc_sigma: f64,
    pub localization: LocalizationMode,
    pub navigation: NavigationMode,
}

impl AgentConfig {
    pub fn from_scenario(c: &ScenarioConfig, geometry: GridGeometry) -> Self {
        Self {
            geometry,
            sensor: c.sensor,
            channel: c.channel,
            connectivity_threshold_dbm: c.connectivity_threshold_dbm,
            limits: c.limits,
            dt: c.dt,
            particles: c.particles,
            particle_noise: MotionNoise {
                sigma_v: c.particle_noise_scale * c.odometry_sigma_v,
                sigma_w: c.particle_noise_scale * c.odometry_sigma_w,
            },
            observation: ObservationModel {
                confidence_max: c.confidence_max,
                ..ObservationModel::default()
            },
            beam_stride: c.beam_stride,
            kernel: Kernel {
                lengthscale: c.gp_lengthscale,
                signal_var: c.gp_signal_var,
                noise_var: c.gp_noise_var,
            },
            fusion: FusionConfig::default(),
            gp_bin: c.gp_bin,
            gp_radius: c.gp_radius,
            gp_cap: 400,
            k_share: c.k_share,
            exploration_threshold: c.exploration_threshold,
            boundary: BoundaryConfig {
                hough: HoughConfig {
                    vote_threshold: c.hough_threshold,
                    seed: c.seed,
                    ..HoughConfig::default()
                },
                max_corner_distance: c.max_corner_distance,
                inflation_depth: c.inflation_depth,
                ..BoundaryConfig::default()
            },
            goal: GoalConfig {
                peer_weight: c.peer_weight,
            },
            replan_every: c.replan_every,
            goal_timeout: 600,
            free_below: 0.35,
            occupied_above: 0.65,
            open_extension: 1.5,
            motion_bound: MotionBound {
                v_max: c.limits.v_max,
                dt: c.dt,
                margin: 0.1,
            },
            erpmg: ErpmgConfig {
                k: c.candidates_k,
                ..ErpmgConfig::default()
            },
            rloc_gain: c.rloc_gain,
            rloc_sigma: c.rloc_sigma,
            localization: c.localization,
            navigation: c.navigation,
        }
    }

    /// Workspace box known to every robot (the grid bounds).
    pub fn workspace(&self) -> Workspace {
        Workspace::new(
            Point2::new(0.0, 0.0),
            Point2::new(self.geometry.width_m(), self.geometry.height_m()),
        )
    }
}

/// What a peer last told us.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerState {
    pub position: Point2,
    pub goal: Option<Cell>,
    pub done: bool,
    pub last_step: usize,
}

/// Sensor data and messages handed to one agent step.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub step: usize,
    pub odometry: OdometryDelta,
    pub scan: &'a LidarScan,
    pub inbox: &'a [Message],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub command: VelocityCommand,
    pub outbox: Vec<Message>,
    pub events: Vec<String>,
}

/// Result of the map pipeline: the refit model and the new exploration flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationUpdate {
    pub model: Option<GpModel>,
    pub grid: Option<BeliefGrid>,
    /// Mean fusion weight per source (local first).
    pub source_share: Vec<f64>,
}

/// Result of the localization pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationPrior {
    /// Where the range graph puts this robot.
    pub target: Point2,
    pub peers: Vec<(RobotId, Point2)>,
    /// Belief of the best candidate graph.
    pub belief: f64,
    pub residual: f64,
    pub converged: bool,
}

/// One robot. It sees the world only through `StepInput` and other robots
/// only through messages.
#[derive(Debug, Clone)]
pub struct RobotAgent {
    id: RobotId,
    config: AgentConfig,
    rng: SimRng,
    belief: JointBelief,
    odom_pose: Pose2D,
    estimate: Pose2D,
    local_gp: Option<GpModel>,
    received: BTreeMap<RobotId, GpModel>,
    exploration: BeliefGrid,
    peers: BTreeMap<RobotId, PeerState>,
    heard: Vec<(RobotId, f64)>,
    open_cells: Vec<Cell>,
    hull: Option<HullModel>,
    goal: Option<Cell>,
    path: Vec<Cell>,
    goal_since: usize,
    last_plan: Option<usize>,
    excluded: Vec<Cell>,
    no_frontier: bool,
    recovery: usize,
    last_command: VelocityCommand,
    last_report: Option<UpdateReport>,
    last_prior: Option<LocalizationPrior>,
}

impl RobotAgent {
    pub fn new(id: RobotId, start: Pose2D, config: AgentConfig, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(1 + id as u64);
        let n = if config.localization == LocalizationMode::Seal {
            config.particles
        } else {
            1
        };
        let geometry = config.geometry;
        Self {
            id,
            rng,
            belief: JointBelief {
                pose: PoseBelief::at(start, n),
                map: OccupancyBelief::new(geometry, 0.5),
            },
            odom_pose: start,
            estimate: start,
            local_gp: None,
            received: BTreeMap::new(),
            exploration: BeliefGrid::new(geometry, 0.0),
            peers: BTreeMap::new(),
            heard: Vec::new(),
            open_cells: Vec::new(),
            hull: None,
            goal: None,
            path: Vec::new(),
            goal_since: 0,
            last_plan: None,
            excluded: Vec::new(),
            no_frontier: false,
            recovery: 0,
            last_command: VelocityCommand::STOP,
            last_report: None,
            last_prior: None,
            config,
        }
    }

    pub fn id(&self) -> RobotId {
        self.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn estimate(&self) -> Pose2D {
        self.estimate
    }

    pub fn odometry_pose(&self) -> Pose2D {
        self.odom_pose
    }

    pub fn belief(&self) -> &JointBelief {
        &self.belief
    }

    pub fn exploration(&self) -> &BeliefGrid {
        &self.exploration
    }

    pub fn local_gp(&self) -> Option<&GpModel> {
        self.local_gp.as_ref()
    }

    pub fn hull(&self) -> Option<&HullModel> {
        self.hull.as_ref()
    }

    pub fn goal(&self) -> Option<Cell> {
        self.goal
    }

    pub fn peers(&self) -> &BTreeMap<RobotId, PeerState> {
        &self.peers
    }

    /// Set while the agent has no frontier left.
    pub fn reports_no_frontier(&self) -> bool {
        self.no_frontier
    }

    pub fn last_update(&self) -> Option<UpdateReport> {
        self.last_report
    }

    /// The range-graph result of the latest step, if peers were heard.
    pub fn last_localization(&self) -> Option<&LocalizationPrior> {
        self.last_prior.as_ref()
    }

    /// Integrates a first scan before any motion.
    pub fn observe_initial(&mut self, scan: &LidarScan) {
        self.update_map(scan);
        let update = self.pipeline_a();
        self.apply_exploration(update);
    }

    /// Reads the inbox into peer state, received models and heard RSSI.
    fn read_inbox(&mut self, step: usize, inbox: &[Message]) -> Vec<(RobotId, Beacon)> {
        self.heard.clear();
        let mut beacons = Vec::new();
        for m in inbox {
            match &m.kind {
                MessageKind::RssiBeacon(b) => {
                    let p = self.peers.entry(m.sender).or_insert(PeerState {
                        position: b.position,
                        goal: None,
                        done: false,
                        last_step: step,
                    });
                    p.position = b.position;
                    p.last_step = step;
                    self.heard.push((m.sender, b.rssi_dbm));
                    beacons.push((m.sender, b.clone()));
                }
                MessageKind::GpShare(share) => {
                    if let Ok(model) = share.rebuild() {
                        self.received.insert(m.sender, model);
                    }
                }
                MessageKind::HullShare { goal, done } => {
                    if let Some(p) = self.peers.get_mut(&m.sender) {
                        p.goal = *goal;
                        p.done = *done;
                    }
                }
            }
        }
        beacons
    }

    /// Map pipeline: refit the local GP on binned map beliefs near the robot
    /// and fuse it with the received models over the not-yet-explored cells.
    pub fn pipeline_a(&self) -> ExplorationUpdate {
        let g = self.config.geometry;
        let center = self.estimate.position();
        let map = &self.belief.map;
        let samples: Vec<(Point2, f64)> = g
            .cells_within(&center, self.config.gp_radius)
            .into_iter()
            .filter(|c| map.is_observed(g.index(*c)))
            .map(|c| (g.center(c), map.value(g.index(c))))
            .collect();
        let binned = bin_samples(&samples, self.config.gp_bin, self.config.gp_cap, &center);
        let Ok(model) = fit_gp(&binned, self.config.kernel) else {
            return ExplorationUpdate {
                model: None,
                grid: None,
                source_share: Vec::new(),
            };
        };
        let reach = self.config.gp_radius + self.config.fusion.support_radius;
        let cells: Vec<Cell> = g
            .cells_within(&center, reach)
            .into_iter()
            .filter(|c| !self.exploration.is_explored(*c))
            .collect();
        if cells.is_empty() {
            return ExplorationUpdate {
                model: Some(model),
                grid: None,
                source_share: Vec::new(),
            };
        }
        let observations: Vec<Option<f64>> = cells
            .iter()
            .map(|c| {
                let i = g.index(*c);
                map.is_observed(i).then(|| map.value(i))
            })
            .collect();
        let received: Vec<GpModel> = self.received.values().cloned().collect();
        let grid = QueryGrid::new(g, cells);
        let field = fuse_gps(&model, &received, &grid, &observations, &self.config.fusion);
        let source_share = field.source_share();
        ExplorationUpdate {
            model: Some(model),
            grid: Some(exploration_grid(&field, self.config.exploration_threshold)),
            source_share,
        }
    }

    fn apply_exploration(&mut self, update: ExplorationUpdate) {
        if let Some(m) = update.model {
            self.local_gp = Some(m);
        }
        if let Some(grid) = update.grid {
            self.exploration.accumulate(&grid);
        }
    }

    /// Localization pipeline: range graph over this robot and the beacon
    /// senders, anchored at the odometry prediction.
    pub fn pipeline_b(&self, beacons: &[(RobotId, Beacon)]) -> Option<LocalizationPrior> {
        if self.config.localization == LocalizationMode::DeadReckoning || beacons.is_empty() {
            return None;
        }
        let mut vertices: Vec<RobotId> = beacons.iter().map(|(id, _)| *id).collect();
        vertices.push(self.id);
        vertices.sort_unstable();
        vertices.dedup();
        let mut measurements = Vec::new();
        for (j, b) in beacons {
            measurements.push(RangeMeasurement::from_rssi(self.id, *j, b.rssi_dbm, &self.config.channel));
            for (k, rssi) in &b.heard {
                if *k != *j && vertices.contains(k) {
                    measurements.push(RangeMeasurement::from_rssi(*j, *k, *rssi, &self.config.channel));
                }
            }
        }
        let rpmg = build_rpmg(&vertices, &measurements, self.config.connectivity_threshold_dbm);
        let previous: Vec<Point2> = vertices
            .iter()
            .map(|v| {
                if *v == self.id {
                    self.estimate.position()
                } else {
                    beacons.iter().find(|(id, _)| id == v).map(|(_, b)| b.position).unwrap_or_default()
                }
            })
            .collect();
        let erpmg = expand_to_erpmg(&rpmg, &previous, self.id, &self.config.motion_bound, &self.config.erpmg);
        let est = optimize_graph(&erpmg, &self.config.workspace());
        let ego = self.estimate.position();
        let mut shift = Point2::default();
        let mut peers = Vec::new();
        for (v, prev) in vertices.iter().zip(&previous) {
            if *v == self.id {
                continue;
            }
            let p = est.mean_position(*v)?;
            // the peer sits at ego + (true relative offset); its self-estimate
            // differs from that by our error minus its error
            shift = shift.add(&p.sub(prev));
            peers.push((*v, p));
        }
        let m = peers.len() as f64;
        let target = ego.sub(&shift.scale(1.0 / (m + 1.0)));
        Some(LocalizationPrior {
            target,
            peers,
            belief: est.graphs[est.best].belief,
            residual: est.best_residual(),
            converged: est.converged(),
        })
    }

    fn update_map(&mut self, scan: &LidarScan) {
        let evidence = particle_evidence(
            scan,
            &self.config.sensor,
            &self.belief.pose,
            &self.config.geometry,
            self.config.beam_stride,
        );
        self.last_report = Some(joint_update(&mut self.belief, &evidence, &self.config.observation));
        if self.config.localization == LocalizationMode::Seal {
            self.estimate = self.belief.pose.estimate();
        }
        self.record_open_space(scan);
    }

    fn record_open_space(&mut self, scan: &LidarScan) {
        let g = self.config.geometry;
        let reach = self.config.sensor.range_max + self.config.open_extension;
        let half = 0.5 * g.resolution;
        for beam in (0..scan.ranges.len()).step_by(self.config.beam_stride.max(1)) {
            if scan.hit[beam] {
                continue;
            }
            let a = self.estimate.theta + self.config.sensor.beam_offset(beam);
            let p = Point2::new(
                (self.estimate.x + reach * a.cos()).clamp(half, g.width_m() - half),
                (self.estimate.y + reach * a.sin()).clamp(half, g.height_m() - half),
            );
            if let Some(c) = g.cell_of(&p) {
                if !self.belief.map.is_observed(g.index(c)) {
                    self.open_cells.push(c);
                }
            }
        }
        self.open_cells.sort();
        self.open_cells.dedup();
    }

    /// One full step: predict, both pipelines, joint update, plan, command.
    pub fn step(&mut self, input: StepInput<'_>) -> StepOutput {
        let mut events = Vec::new();
        let dt = self.config.dt;
        self.odom_pose = input.odometry.apply(&self.odom_pose);
        match self.config.localization {
            LocalizationMode::Seal => {
                let noise = self.config.particle_noise;
                self.belief.pose.predict(input.odometry, &noise, dt, &mut self.rng);
                self.estimate = self.belief.pose.estimate();
            }
            _ => {
                self.estimate = input.odometry.apply(&self.estimate);
            }
        }

        let beacons = self.read_inbox(input.step, input.inbox);

        let refit = input.step % self.config.k_share == 0 || self.local_gp.is_none();
        let exploration = refit.then(|| self.pipeline_a());
        let prior = self.pipeline_b(&beacons);

        if let Some(update) = exploration {
            self.apply_exploration(update);
        }
        match (self.config.localization, &prior) {
            (LocalizationMode::Seal, Some(p)) => {
                self.belief.pose.reweight_by_position(&p.target, self.config.rloc_sigma);
            }
            (LocalizationMode::RlocOnly, Some(p)) => {
                let pos = self.estimate.position();
                let moved = pos.add(&p.target.sub(&pos).scale(self.config.rloc_gain));
                self.estimate = Pose2D::new(moved.x, moved.y, self.estimate.theta);
            }
            _ => {}
        }
        if self.config.localization != LocalizationMode::Seal {
            self.belief.pose = PoseBelief::at(self.estimate, 1);
        }
        self.last_prior = prior;
        self.update_map(input.scan);
        if self.config.localization == LocalizationMode::Seal {
            self.belief.pose.resample_if_needed(0.5, &mut self.rng);
        }

        let blocked = input.odometry.distance == 0.0 && self.last_command.v.abs() > 0.0;
        if blocked {
            self.recovery = 5;
            self.path.clear();
            events.push(format!("robot {} blocked", self.id));
        }
        if self.needs_plan(input.step) {
            self.plan(input.step, &mut events);
        }
        let command = self.steer();
        self.last_command = command;

        let mut outbox = Vec::with_capacity(3);
        let ahead = crate::world::integrate_unicycle(self.estimate, command, dt, &self.config.limits);
        outbox.push(Message {
            sender: self.id,
            step: input.step,
            kind: MessageKind::RssiBeacon(Beacon {
                position: ahead.position(),
                heard: self.heard.clone(),
                rssi_dbm: 0.0,
            }),
        });
        if input.step % self.config.k_share == 0 {
            if let Some(m) = &self.local_gp {
                outbox.push(Message {
                    sender: self.id,
                    step: input.step,
                    kind: MessageKind::GpShare(GpShare::from_model(m)),
                });
            }
        }
        outbox.push(Message {
            sender: self.id,
            step: input.step,
            kind: MessageKind::HullShare {
                goal: self.goal,
                done: self.no_frontier,
            },
        });
        StepOutput {
            command,
            outbox,
            events,
        }
    }

    fn needs_plan(&self, step: usize) -> bool {
        let Some(last) = self.last_plan else { return true };
        if step >= last + self.config.replan_every {
            return true;
        }
        match self.goal {
            None => !self.no_frontier,
            Some(g) => self.exploration.is_explored(g) || self.path.is_empty(),
        }
    }

    fn plan(&mut self, step: usize, events: &mut Vec<String>) {
        self.last_plan = Some(step);
        let g = self.config.geometry;
        if let Some(goal) = self.goal {
            if step.saturating_sub(self.goal_since) > self.config.goal_timeout {
                self.excluded.push(goal);
                events.push(format!("robot {} gave up on goal ({}, {})", self.id, goal.row, goal.col));
                self.goal = None;
            }
        }
        let mut sets = CellSets::from_belief(&self.belief.map, self.config.free_below, self.config.occupied_above);
        let map = &self.belief.map;
        self.open_cells.retain(|c| !map.is_observed(g.index(*c)));
        sets.open = self.open_cells.iter().map(|c| g.center(*c)).collect();

        let mut peers: Vec<Point2> = Vec::new();
        for p in self.peers.values() {
            peers.push(p.position);
            if let Some(goal) = p.goal {
                peers.push(g.center(goal));
            }
        }
        let ego = self.estimate.position();
        let chosen = match self.config.navigation {
            NavigationMode::Hull => {
                let mut model = predict_boundary(&mut sets, &self.config.boundary);
                let r = select_next_region(
                    &mut model,
                    &self.exploration,
                    &ego,
                    &peers,
                    &self.excluded,
                    &self.config.goal,
                );
                self.hull = Some(model);
                r.map(|goal| (goal.cell, goal.path))
            }
            NavigationMode::NearestFrontier => nearest_frontier(&self.belief.map, &sets, &ego, &self.excluded, &self.config),
        };
        match chosen {
            Ok((cell, path)) => {
                if self.goal != Some(cell) {
                    self.goal_since = step;
                    events.push(format!("robot {} goal ({}, {})", self.id, cell.row, cell.col));
                }
                if self.no_frontier {
                    events.push(format!("robot {} found new frontier", self.id));
                }
                self.no_frontier = false;
                self.goal = Some(cell);
                self.path = path;
            }
            Err(_) => {
                if !self.no_frontier {
                    events.push(format!("robot {} reports no frontier", self.id));
                }
                self.no_frontier = true;
                self.goal = None;
                self.path.clear();
            }
        }
    }

    /// Pure pursuit along the planned path.
    fn steer(&mut self) -> VelocityCommand {
        let limits = self.config.limits;
        if self.recovery > 0 {
            self.recovery -= 1;
            return VelocityCommand::new(-0.5 * limits.v_max, 0.0);
        }
        let g = self.config.geometry;
        let pos = self.estimate.position();
        while self.path.len() > 1 && g.center(self.path[0]).distance(&pos) < 0.35 {
            self.path.remove(0);
        }
        let Some(target) = self
            .path
            .iter()
            .map(|c| g.center(*c))
            .find(|p| p.distance(&pos) >= 0.5)
            .or_else(|| self.path.last().map(|c| g.center(*c)))
        else {
            return VelocityCommand::STOP;
        };
        let d = target.distance(&pos);
        if self.path.len() <= 1 && d < 0.15 {
            self.path.clear();
            return VelocityCommand::STOP;
        }
        let bearing = (target.y - pos.y).atan2(target.x - pos.x);
        let err = wrap_angle(bearing - self.estimate.theta);
        let w = (2.0 * err).clamp(-limits.w_max, limits.w_max);
        let v = if err.abs() > 0.6 {
            0.0
        } else {
            limits.v_max * err.cos() * (d / 0.3).min(1.0)
        };
        VelocityCommand::new(v, w)
    }
}

/// Nearest observed-free cell that borders unobserved space.
fn nearest_frontier(
    map: &OccupancyBelief,
    sets: &CellSets,
    ego: &Point2,
    excluded: &[Cell],
    config: &AgentConfig,
) -> Result<(Cell, Vec<Cell>), HullError> {
    let g = *map.geometry();
    let start = g.cell_of(ego).ok_or(HullError::NoFrontier)?;
    let mut walls = vec![false; g.len()];
    for c in &sets.occupied {
        walls[g.index(*c)] = true;
    }
    walls[g.index(start)] = false;
    let mut inflated = vec![false; g.len()];
    for c in inflate(&sets.occupied, config.boundary.inflation_depth, &g) {
        inflated[g.index(c)] = true;
    }
    let field = CostField::new(g, start, &walls, &inflated);
    let mut best: Option<(f64, Cell)> = None;
    for c in &sets.free {
        if inflated[g.index(*c)] || excluded.contains(c) || !field.reachable(*c) {
            continue;
        }
        let frontier = g.neighbors4(*c).any(|n| !map.is_observed(g.index(n)));
        if !frontier {
            continue;
        }
        let cost = field.cost_to(*c);
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, *c));
        }
    }
    let (_, cell) = best.ok_or(HullError::NoFrontier)?;
    Ok((cell, field.path_to(cell)))
}
