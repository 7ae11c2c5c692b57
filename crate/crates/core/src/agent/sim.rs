//! Lockstep simulation of a robot team in a known world.

use super::{AgentConfig, Bus, ConfigError, Message, RobotAgent, ScenarioConfig, StepInput};
use crate::geometry::{Point2, Pose2D};
use crate::metrics::{self, RobotReport, RunReport, StepSample};
use crate::raoblackwell::{OdometryDelta, UpdateReport};
use crate::world::{cast_lidar, sample_rssi, step_kinematics, LidarScan, VelocityCommand, WorldError, WorldMap};
use crate::SimRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("metrics: {0}")]
    Metrics(#[from] metrics::MetricsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Consecutive all-idle steps that end a run.
const COMPLETION_STREAK: usize = 3;

/// World, robots and the bus between them.
pub struct Simulation {
    config: ScenarioConfig,
    world: WorldMap,
    agents: Vec<RobotAgent>,
    truth: Vec<Pose2D>,
    commands: Vec<VelocityCommand>,
    sensing_rng: SimRng,
    odometry_rng: SimRng,
    bus: Bus,
    step: usize,
    idle_streak: usize,
    completed: bool,
    events: Vec<String>,
    truth_track: Vec<Vec<Pose2D>>,
    estimate_track: Vec<Vec<Pose2D>>,
    /// Range-graph position, best-graph belief and residual per step.
    rloc_track: Vec<Vec<Option<(Point2, f64, f64)>>>,
    distance: Vec<f64>,
    samples: Vec<StepSample>,
    /// Wall-clock seconds of each agent step, per robot. Not part of any report.
    step_times: Vec<Vec<f64>>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let world = config.build_world()?;
        let truth = config.start_poses(&world)?;
        let agent_config = AgentConfig::from_scenario(&config, *world.geometry());
        let agents: Vec<RobotAgent> = truth
            .iter()
            .enumerate()
            .map(|(i, p)| RobotAgent::new(i, *p, agent_config.clone(), config.seed))
            .collect();
        let mut sensing_rng = SimRng::seed_from_u64(config.seed);
        sensing_rng.set_stream(1 << 32);
        let mut odometry_rng = SimRng::seed_from_u64(config.seed);
        odometry_rng.set_stream((1 << 32) + 1);
        let n = agents.len();
        let mut sim = Self {
            world,
            commands: vec![VelocityCommand::STOP; n],
            agents,
            sensing_rng,
            odometry_rng,
            bus: Bus::new(),
            step: 0,
            idle_streak: 0,
            completed: false,
            events: Vec::new(),
            truth_track: vec![Vec::new(); n],
            estimate_track: vec![Vec::new(); n],
            rloc_track: vec![Vec::new(); n],
            distance: vec![0.0; n],
            samples: Vec::new(),
            step_times: vec![Vec::new(); n],
            truth,
            config,
        };
        for i in 0..n {
            let scan = cast_lidar(&sim.world, sim.truth[i], &sim.config.sensor, &mut sim.sensing_rng)?;
            sim.agents[i].observe_initial(&scan);
        }
        let explored = sim.explored_pct()?;
        sim.samples.push(StepSample {
            step: 0,
            explored_pct: explored,
            ale_m: 0.0,
            distance_m: 0.0,
            entropy_nats: 0.0,
            log_evidence: 0.0,
        });
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldMap {
        &self.world
    }

    pub fn agents(&self) -> &[RobotAgent] {
        &self.agents
    }

    pub fn truth(&self) -> &[Pose2D] {
        &self.truth
    }

    pub fn steps_run(&self) -> usize {
        self.step
    }

    pub fn is_complete(&self) -> bool {
        self.completed
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn step_times(&self) -> &[Vec<f64>] {
        &self.step_times
    }

    /// Explored share of the true free space, OR-ed over the team.
    pub fn explored_pct(&self) -> Result<f64, metrics::MetricsError> {
        let n = self.world.geometry().len();
        let mut any = vec![false; n];
        for a in &self.agents {
            for (o, e) in any.iter_mut().zip(a.exploration().explored_flags()) {
                *o |= *e;
            }
        }
        metrics::explored_pct(&any, &self.world)
    }

    fn measure_odometry(&mut self, cmd: VelocityCommand, blocked: bool) -> OdometryDelta {
        let dt = self.config.dt;
        let nv = Normal::new(0.0, self.config.odometry_sigma_v).expect("finite sigma");
        let nw = Normal::new(0.0, self.config.odometry_sigma_w).expect("finite sigma");
        // draw unconditionally so the stream does not depend on collisions
        let (ev, ew) = (nv.sample(&mut self.odometry_rng), nw.sample(&mut self.odometry_rng));
        if blocked {
            return OdometryDelta::default();
        }
        let c = self.config.limits.clamp(cmd);
        if c.v == 0.0 && c.w == 0.0 {
            return OdometryDelta::default();
        }
        OdometryDelta {
            distance: (c.v + ev) * dt,
            rotation: (c.w + ew) * dt,
        }
    }

    /// Advances one synchronous round. Returns false once the run is over.
    pub fn step_once(&mut self) -> Result<bool, SimError> {
        if self.completed || self.step >= self.config.steps {
            return Ok(false);
        }
        let n = self.agents.len();
        let dt = self.config.dt;
        self.step += 1;
        let step = self.step;

        let mut odometry = Vec::with_capacity(n);
        for i in 0..n {
            let motion = step_kinematics(&self.world, self.truth[i], self.commands[i], dt, &self.config.limits);
            self.distance[i] += self.truth[i].position().distance(&motion.pose.position());
            self.truth[i] = motion.pose;
            let cmd = self.commands[i];
            odometry.push(self.measure_odometry(cmd, motion.blocked));
        }
        let mut scans: Vec<LidarScan> = Vec::with_capacity(n);
        for i in 0..n {
            scans.push(cast_lidar(&self.world, self.truth[i], &self.config.sensor, &mut self.sensing_rng)?);
        }
        // rssi[to][from]
        let mut rssi = vec![vec![f64::NEG_INFINITY; n]; n];
        for to in 0..n {
            for from in 0..n {
                if from != to {
                    rssi[to][from] = sample_rssi(&self.config.channel, &self.truth[from], &self.truth[to], &mut self.sensing_rng);
                }
            }
        }
        let threshold = self.config.connectivity_threshold_dbm;
        let ids: Vec<usize> = (0..n).collect();
        let inboxes = self.bus.deliver(&ids, |from, to| {
            let r = rssi[to][from];
            (r >= threshold).then_some(r)
        });

        let mut outgoing: Vec<Message> = Vec::new();
        for i in 0..n {
            let input = StepInput {
                step,
                odometry: odometry[i],
                scan: &scans[i],
                inbox: &inboxes[i],
            };
            let t0 = Instant::now();
            let out = self.agents[i].step(input);
            self.step_times[i].push(t0.elapsed().as_secs_f64());
            self.commands[i] = out.command;
            outgoing.extend(out.outbox);
            for e in out.events {
                self.events.push(format!("step {step}: {e}"));
            }
        }
        self.bus.post(outgoing);

        for i in 0..n {
            self.truth_track[i].push(self.truth[i]);
            self.estimate_track[i].push(self.agents[i].estimate());
            let rloc = self.agents[i].last_localization().map(|p| (p.target, p.belief, p.residual));
            self.rloc_track[i].push(rloc);
        }
        let ale_now = (0..n)
            .map(|i| self.truth[i].position().distance(&self.agents[i].estimate().position()))
            .sum::<f64>()
            / n as f64;
        let explored = self.explored_pct()?;
        let updates: Vec<_> = self.agents.iter().filter_map(|a| a.last_update()).collect();
        let team_mean = |f: fn(&UpdateReport) -> f64| {
            if updates.is_empty() {
                0.0
            } else {
                updates.iter().map(f).sum::<f64>() / updates.len() as f64
            }
        };
        self.samples.push(StepSample {
            step,
            explored_pct: explored,
            ale_m: ale_now,
            distance_m: self.distance.iter().sum(),
            entropy_nats: team_mean(|u| u.entropy),
            log_evidence: team_mean(|u| u.log_evidence),
        });

        if self.agents.iter().all(|a| a.reports_no_frontier()) {
            self.idle_streak += 1;
            if self.idle_streak >= COMPLETION_STREAK {
                self.completed = true;
                self.events.push(format!("step {step}: all robots idle, exploration complete"));
            }
        } else {
            self.idle_streak = 0;
        }
        Ok(!self.completed && self.step < self.config.steps)
    }

    pub fn run(&mut self) -> Result<(), SimError> {
        while self.step_once()? {}
        Ok(())
    }

    /// Team occupancy: per cell the value from the most confident robot.
    pub fn merged_occupancy(&self) -> Vec<f64> {
        let n = self.world.geometry().len();
        (0..n)
            .map(|c| {
                let mut best = 0.5;
                for a in &self.agents {
                    let v = a.belief().map.value(c);
                    if (v - 0.5).abs() > (best - 0.5f64).abs() {
                        best = v;
                    }
                }
                best
            })
            .collect()
    }

    pub fn report(&self) -> Result<RunReport, SimError> {
        let n = self.agents.len();
        let occupancy = self.merged_occupancy();
        let map_ssim = metrics::map_ssim(&occupancy, &self.world)?;
        let map_ssim_unthresholded = metrics::ssim(&occupancy, &metrics::truth_image(&self.world), self.world.geometry())?;
        let mut per_robot = Vec::with_capacity(n);
        for i in 0..n {
            let est: Vec<Point2> = self.estimate_track[i].iter().map(|p| p.position()).collect();
            let tru: Vec<Point2> = self.truth_track[i].iter().map(|p| p.position()).collect();
            let (ate_m, ale_m) = if est.is_empty() {
                (0.0, 0.0)
            } else {
                (metrics::ate(&est, &tru)?, metrics::ale(&est, &tru)?)
            };
            per_robot.push(RobotReport {
                id: i,
                distance_m: self.distance[i],
                explored_pct: metrics::explored_pct(self.agents[i].exploration().explored_flags(), &self.world)?,
                ate_m,
                ale_m,
            });
        }
        let mean = |f: fn(&RobotReport) -> f64| per_robot.iter().map(f).sum::<f64>() / n as f64;
        Ok(RunReport {
            scenario: self.config.name.clone(),
            seed: self.config.seed,
            robots: n,
            mode: format!(
                "{}+{}",
                self.config.localization.name(),
                match self.config.navigation {
                    super::NavigationMode::Hull => "hull",
                    super::NavigationMode::NearestFrontier => "frontier",
                }
            ),
            steps: self.step,
            completed: self.completed,
            mapping_time_s: self.step as f64 * self.config.dt,
            total_distance_m: self.distance.iter().sum(),
            explored_pct: self.explored_pct()?,
            map_ssim,
            map_ssim_unthresholded,
            ate_m: mean(|r| r.ate_m),
            ale_m: mean(|r| r.ale_m),
            per_robot,
            series: "series.csv".into(),
            samples: self.samples.clone(),
        })
    }

    /// True and estimated pose of every robot per step, plus the range-graph
    /// position, belief and residual when peers were heard (empty otherwise).
    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from(
            "step,robot,true_x,true_y,true_theta,est_x,est_y,est_theta,rloc_x,rloc_y,rloc_belief,rloc_residual\n",
        );
        let steps = self.truth_track.first().map_or(0, |t| t.len());
        for k in 0..steps {
            for i in 0..self.agents.len() {
                let t = self.truth_track[i][k];
                let e = self.estimate_track[i][k];
                let _ = write!(
                    s,
                    "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                    k + 1,
                    i,
                    t.x,
                    t.y,
                    t.theta,
                    e.x,
                    e.y,
                    e.theta
                );
                match self.rloc_track[i][k] {
                    Some((p, belief, residual)) => {
                        let _ = writeln!(s, ",{:.4},{:.4},{:.6},{:.6}", p.x, p.y, belief, residual);
                    }
                    None => s.push_str(",,,,\n"),
                }
            }
        }
        s
    }

    /// Writes maps, trajectory, metrics, series and the event log into `dir`.
    pub fn write_outputs(&self, dir: &Path, report: &RunReport) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        let g = *self.world.geometry();
        for a in &self.agents {
            let map = &a.belief().map;
            let pgm = crate::io::grid_to_pgm(&g, |c| crate::io::unit_to_gray(1.0 - map.value(g.index(c))));
            std::fs::write(dir.join(format!("map_{}.pgm", a.id())), pgm)?;
            let belief = match a.hull() {
                Some(h) => h.prediction_pgm(),
                None => a.exploration().to_pgm(),
            };
            std::fs::write(dir.join(format!("belief_{}.pgm", a.id())), belief)?;
            if let Some(h) = a.hull() {
                std::fs::write(dir.join(format!("hull_{}.geojson", a.id())), h.to_geojson())?;
            }
        }
        std::fs::write(dir.join("trajectory.csv"), self.trajectory_csv())?;
        std::fs::write(dir.join("metrics.json"), report.to_json())?;
        std::fs::write(dir.join(&report.series), report.series_csv())?;
        let mut log = self.events.join("\n");
        log.push('\n');
        std::fs::write(dir.join("events.log"), log)?;
        Ok(())
    }
}

/// Output of a finished run.
pub struct RunOutput {
    pub report: RunReport,
    pub simulation: Simulation,
}

/// Runs a scenario to completion or to its step budget.
pub fn run_simulation(config: &ScenarioConfig) -> Result<RunOutput, SimError> {
    let mut simulation = Simulation::new(config.clone())?;
    simulation.run()?;
    let report = simulation.report()?;
    Ok(RunOutput { report, simulation })
}
