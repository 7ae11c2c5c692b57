//! Ground-truth 2-D world: obstacle grid, lidar ray casting, the RSSI
//! channel and unicycle kinematics.
//!
//! The world is immutable once loaded. Sensing functions take `&WorldMap`
//! and a caller-owned rng, so every robot can sense concurrently with its own
//! stream.

use crate::geometry::{Cell, GridGeometry, Point2, Pose2D};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("pose ({x:.3}, {y:.3}) is inside an obstacle or outside the map")]
    PoseInsideObstacle { x: f64, y: f64 },
    #[error("world has no free cell")]
    NoFreeCell,
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("malformed world file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
}

/// Ground-truth occupancy grid. Boundary cells are always occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    geometry: GridGeometry,
    cells: Vec<CellState>,
}

impl WorldMap {
    /// Builds a world, closing the boundary ring so the world is sealed.
    pub fn new(geometry: GridGeometry, mut cells: Vec<CellState>) -> Result<Self, WorldError> {
        if !(geometry.resolution > 0.0) {
            return Err(WorldError::Invalid("resolution must be positive".into()));
        }
        if geometry.width < 3 || geometry.height < 3 {
            return Err(WorldError::Invalid("world must be at least 3x3 cells".into()));
        }
        if cells.len() != geometry.len() {
            return Err(WorldError::Invalid(format!(
                "expected {} cells, got {}",
                geometry.len(),
                cells.len()
            )));
        }
        for cell in geometry.cells() {
            if cell.row == 0
                || cell.col == 0
                || cell.row + 1 == geometry.height
                || cell.col + 1 == geometry.width
            {
                cells[geometry.index(cell)] = CellState::Occupied;
            }
        }
        if !cells.iter().any(|c| *c == CellState::Free) {
            return Err(WorldError::NoFreeCell);
        }
        Ok(Self { geometry, cells })
    }

    /// Empty rectangular room of the given size in meters.
    pub fn empty_room(width_m: f64, height_m: f64, resolution: f64) -> Result<Self, WorldError> {
        let geometry = GridGeometry::new(
            (width_m / resolution).round() as usize,
            (height_m / resolution).round() as usize,
            resolution,
        );
        Self::new(geometry, vec![CellState::Free; geometry.len()])
    }

    /// Marks every cell whose center lies in the axis-aligned rectangle as occupied.
    pub fn add_block(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        for cell in self.geometry.cells().collect::<Vec<_>>() {
            let c = self.geometry.center(cell);
            if c.x >= xa && c.x <= xb && c.y >= ya && c.y <= yb {
                let i = self.geometry.index(cell);
                self.cells[i] = CellState::Occupied;
            }
        }
    }

    /// 20×20 m store floor with rows of shelves.
    pub fn bookstore(resolution: f64) -> Self {
        let mut w = Self::empty_room(20.0, 20.0, resolution).expect("valid room");
        let shelves = [
            (3.5, 4.0, 4.0, 8.5),
            (3.5, 11.5, 4.0, 16.0),
            (7.5, 4.0, 8.0, 8.5),
            (7.5, 11.5, 8.0, 16.0),
            (12.0, 3.0, 16.5, 3.5),
            (12.0, 7.5, 16.5, 8.0),
            (11.5, 12.0, 12.0, 16.5),
            (15.5, 12.0, 16.0, 16.5),
            (1.0, 18.5, 5.0, 19.0),
            (9.75, 9.75, 10.25, 10.25),
        ];
        for (x0, y0, x1, y1) in shelves {
            w.add_block(x0, y0, x1, y1);
        }
        w
    }

    /// 20×15 m floor plan: four rooms off a central corridor.
    pub fn house(resolution: f64) -> Self {
        let mut w = Self::empty_room(20.0, 15.0, resolution).expect("valid room");
        let t = 0.25;
        // corridor walls along y = 6 and y = 9 with door gaps
        for (x0, x1) in [(0.0, 3.0), (4.5, 12.0), (13.5, 20.0)] {
            w.add_block(x0, 6.0, x1, 6.0 + t);
        }
        for (x0, x1) in [(0.0, 6.0), (7.5, 15.0), (16.5, 20.0)] {
            w.add_block(x0, 9.0, x1, 9.0 + t);
        }
        // room dividers
        w.add_block(9.0, 0.0, 9.0 + t, 6.0);
        w.add_block(11.0, 9.0, 11.0 + t, 15.0);
        // furniture
        w.add_block(3.0, 2.0, 5.0, 2.5);
        w.add_block(14.0, 11.5, 14.5, 13.5);
        w
    }

    /// Parses an ASCII grid: `#` occupied, `.` (or space) free. The first text
    /// line is the top row of the world.
    pub fn from_ascii(text: &str, resolution: f64) -> Result<Self, WorldError> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(WorldError::Parse("empty ascii grid".into()));
        }
        let width = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0);
        let height = lines.len();
        let geometry = GridGeometry::new(width, height, resolution);
        let mut cells = vec![CellState::Occupied; geometry.len()];
        for (i, line) in lines.iter().enumerate() {
            let row = height - 1 - i;
            for (col, ch) in line.chars().enumerate() {
                let state = match ch {
                    '#' => CellState::Occupied,
                    '.' | ' ' => CellState::Free,
                    other => {
                        return Err(WorldError::Parse(format!(
                            "line {}: unexpected character {other:?}",
                            i + 1
                        )))
                    }
                };
                cells[geometry.index(Cell::new(row, col))] = state;
            }
        }
        Self::new(geometry, cells)
    }

    /// Parses a PGM image (P2 or P5). Pixels above 127 are free; the first
    /// image row is the top row of the world.
    pub fn from_pgm(bytes: &[u8], resolution: f64) -> Result<Self, WorldError> {
        let image = crate::io::read_pgm(bytes).map_err(WorldError::Parse)?;
        let geometry = GridGeometry::new(image.width, image.height, resolution);
        let mut cells = vec![CellState::Occupied; geometry.len()];
        for i in 0..image.height {
            for col in 0..image.width {
                let v = image.pixels[i * image.width + col] as u32 * 255 / image.max_value.max(1);
                let row = image.height - 1 - i;
                cells[geometry.index(Cell::new(row, col))] = if v > 127 {
                    CellState::Free
                } else {
                    CellState::Occupied
                };
            }
        }
        Self::new(geometry, cells)
    }

    /// Loads `.pgm` files as PGM and anything else as an ASCII grid.
    pub fn load(path: &Path, resolution: f64) -> Result<Self, WorldError> {
        let bytes = std::fs::read(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) || bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            Self::from_pgm(&bytes, resolution)
        } else {
            let text = String::from_utf8(bytes).map_err(|e| WorldError::Parse(e.to_string()))?;
            Self::from_ascii(&text, resolution)
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn state(&self, cell: Cell) -> CellState {
        self.cells[self.geometry.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.state(cell) == CellState::Free
    }

    /// Points outside the grid count as occupied.
    pub fn is_free_point(&self, p: &Point2) -> bool {
        self.geometry.cell_of(p).is_some_and(|c| self.is_free(c))
    }

    pub fn states(&self) -> &[CellState] {
        &self.cells
    }

    pub fn free_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == CellState::Free).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Field of view in radians, centered on the heading.
    pub fov: f64,
    pub range_max: f64,
    pub beam_count: usize,
    pub range_noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            fov: PI,
            range_max: 5.0,
            beam_count: 1500,
            range_noise_sigma: 0.01,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.beam_count == 0 {
            return Err(WorldError::Invalid("beam_count must be at least 1".into()));
        }
        if !(self.range_max > 0.0) {
            return Err(WorldError::Invalid("range_max must be positive".into()));
        }
        if !(self.fov > 0.0 && self.fov <= TAU + 1e-12) {
            return Err(WorldError::Invalid("fov must lie in (0, 2π]".into()));
        }
        if !(self.range_noise_sigma >= 0.0) {
            return Err(WorldError::Invalid("range noise must be non-negative".into()));
        }
        Ok(())
    }

    /// Beam angle relative to the heading.
    pub fn beam_offset(&self, beam: usize) -> f64 {
        if self.beam_count == 1 {
            0.0
        } else if self.fov >= TAU - 1e-12 {
            -PI + TAU * beam as f64 / self.beam_count as f64
        } else {
            -self.fov / 2.0 + self.fov * beam as f64 / (self.beam_count - 1) as f64
        }
    }
}

/// Log-distance path loss with Gaussian shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiChannel {
    pub p0_dbm: f64,
    pub d0: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for RssiChannel {
    fn default() -> Self {
        Self {
            p0_dbm: -40.0,
            d0: 1.0,
            path_loss_exponent: 2.0,
            shadowing_sigma_db: 2.0,
        }
    }
}

impl RssiChannel {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.d0 > 0.0) || !(self.path_loss_exponent > 0.0) || !(self.shadowing_sigma_db >= 0.0) {
            return Err(WorldError::Invalid(
                "channel needs d0 > 0, exponent > 0, sigma >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free received power at distance `d`.
    pub fn mean_rssi(&self, d: f64) -> f64 {
        self.p0_dbm - 10.0 * self.path_loss_exponent * (d.max(self.d0) / self.d0).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub origin: Pose2D,
    /// Range per beam in meters; `range_max` when nothing was hit.
    pub ranges: Vec<f64>,
    pub hit: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub w: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    pub v_max: f64,
    pub w_max: f64,
}

impl Default for MotionLimits {
    fn default() -> Self {
        Self {
            v_max: 0.2,
            w_max: 0.8,
        }
    }
}

impl MotionLimits {
    pub fn clamp(&self, cmd: VelocityCommand) -> VelocityCommand {
        VelocityCommand {
            v: cmd.v.clamp(-self.v_max, self.v_max),
            w: cmd.w.clamp(-self.w_max, self.w_max),
        }
    }
}

/// Outcome of one kinematic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub pose: Pose2D,
    pub blocked: bool,
}

/// Exact unicycle integration of a clamped command, ignoring obstacles.
pub fn integrate_unicycle(pose: Pose2D, cmd: VelocityCommand, dt: f64, limits: &MotionLimits) -> Pose2D {
    let VelocityCommand { v, w } = limits.clamp(cmd);
    let theta1 = pose.theta + w * dt;
    if w.abs() < 1e-12 {
        let (s, c) = pose.theta.sin_cos();
        Pose2D::new(pose.x + v * dt * c, pose.y + v * dt * s, theta1)
    } else {
        let r = v / w;
        Pose2D::new(
            pose.x + r * (theta1.sin() - pose.theta.sin()),
            pose.y - r * (theta1.cos() - pose.theta.cos()),
            theta1,
        )
    }
}

/// Unicycle step with collision stop: if any point of the swept path lies in
/// an occupied cell the robot stays at `pose` and `blocked` is set.
pub fn step_kinematics(
    world: &WorldMap,
    pose: Pose2D,
    cmd: VelocityCommand,
    dt: f64,
    limits: &MotionLimits,
) -> Motion {
    assert!(dt > 0.0, "dt must be positive");
    let target = integrate_unicycle(pose, cmd, dt, limits);
    let travel = pose.position().distance(&target.position());
    let step = world.geometry().resolution / 4.0;
    let samples = ((travel / step).ceil() as usize).max(1);
    let clamped = limits.clamp(cmd);
    for i in 1..=samples {
        let frac = i as f64 / samples as f64;
        let p = integrate_unicycle(pose, clamped, dt * frac, limits);
        if !world.is_free_point(&p.position()) {
            return Motion { pose, blocked: true };
        }
    }
    Motion {
        pose: target,
        blocked: false,
    }
}

/// Distance to the first occupied cell along a ray, or `None` within `max_range`.
///
/// Exact grid traversal: the returned distance is where the ray enters the
/// occupied cell.
pub fn ray_distance(world: &WorldMap, origin: &Point2, angle: f64, max_range: f64) -> Option<f64> {
    let g = world.geometry();
    let res = g.resolution;
    let (dy, dx) = angle.sin_cos();
    let mut col = (origin.x / res).floor() as i64;
    let mut row = (origin.y / res).floor() as i64;
    let step_c: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dy > 0.0 { 1 } else { -1 };
    let next_boundary = |idx: i64, d: f64, o: f64| {
        if d.abs() < 1e-15 {
            f64::INFINITY
        } else {
            let edge = if d > 0.0 { (idx + 1) as f64 * res } else { idx as f64 * res };
            (edge - o) / d
        }
    };
    let mut t_max_c = next_boundary(col, dx, origin.x);
    let mut t_max_r = next_boundary(row, dy, origin.y);
    let t_delta_c = if dx.abs() < 1e-15 { f64::INFINITY } else { res / dx.abs() };
    let t_delta_r = if dy.abs() < 1e-15 { f64::INFINITY } else { res / dy.abs() };
    loop {
        let t;
        if t_max_c < t_max_r {
            col += step_c;
            t = t_max_c;
            t_max_c += t_delta_c;
        } else {
            row += step_r;
            t = t_max_r;
            t_max_r += t_delta_r;
        }
        if t > max_range {
            return None;
        }
        if row < 0 || col < 0 || row >= g.height as i64 || col >= g.width as i64 {
            return Some(t);
        }
        if !world.is_free(Cell::new(row as usize, col as usize)) {
            return Some(t);
        }
    }
}

/// Simulates one lidar scan. Noise is drawn for every beam so the rng stream
/// advances identically regardless of what was hit.
pub fn cast_lidar<R: Rng + ?Sized>(
    world: &WorldMap,
    pose: Pose2D,
    spec: &SensorSpec,
    rng: &mut R,
) -> Result<LidarScan, WorldError> {
    if !world.is_free_point(&pose.position()) {
        return Err(WorldError::PoseInsideObstacle { x: pose.x, y: pose.y });
    }
    let noise = Normal::new(0.0, spec.range_noise_sigma.max(0.0)).expect("finite sigma");
    let origin = pose.position();
    let mut ranges = Vec::with_capacity(spec.beam_count);
    let mut hit = Vec::with_capacity(spec.beam_count);
    for beam in 0..spec.beam_count {
        let angle = pose.theta + spec.beam_offset(beam);
        let eps = noise.sample(rng);
        match ray_distance(world, &origin, angle, spec.range_max) {
            Some(d) => {
                ranges.push((d + eps).clamp(1e-6, spec.range_max));
                hit.push(true);
            }
            None => {
                ranges.push((spec.range_max + eps).clamp(1e-6, spec.range_max));
                hit.push(false);
            }
        }
    }
    Ok(LidarScan {
        origin: pose,
        ranges,
        hit,
    })
}

/// Received power in dBm between two poses.
pub fn sample_rssi<R: Rng + ?Sized>(channel: &RssiChannel, tx: &Pose2D, rx: &Pose2D, rng: &mut R) -> f64 {
    let d = tx.position().distance(&rx.position());
    let shadow = if channel.shadowing_sigma_db > 0.0 {
        Normal::new(0.0, channel.shadowing_sigma_db)
            .expect("finite sigma")
            .sample(rng)
    } else {
        0.0
    };
    channel.mean_rssi(d) + shadow
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn straight_line_at_clamp() {
        let l = MotionLimits::default();
        let p = integrate_unicycle(Pose2D::new(0.0, 0.0, 0.0), VelocityCommand::new(0.2, 0.0), 1.0, &l);
        assert!((p.x - 0.2).abs() < 1e-12 && p.y.abs() < 1e-12 && p.theta.abs() < 1e-12);
        let p = integrate_unicycle(Pose2D::new(0.0, 0.0, 0.0), VelocityCommand::new(5.0, 0.0), 1.0, &l);
        assert!((p.x - 0.2).abs() < 1e-12);
    }

    #[test]
    fn turning_matches_closed_form() {
        let l = MotionLimits::default();
        let start = Pose2D::new(0.0, 0.0, PI / 2.0);
        let p = integrate_unicycle(start, VelocityCommand::new(0.1, 0.8), 0.5, &l);
        assert!((p.theta - (PI / 2.0 + 0.4)).abs() < 1e-12);
        // fine Euler integration as an independent check of position
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, PI / 2.0);
        let n = 200_000;
        let h = 0.5 / n as f64;
        for _ in 0..n {
            x += 0.1 * th.cos() * h;
            y += 0.1 * th.sin() * h;
            th += 0.8 * h;
        }
        assert!((p.x - x).abs() < 1e-6 && (p.y - y).abs() < 1e-6);
    }

    #[test]
    fn blocked_motion_keeps_pose() {
        let w = WorldMap::empty_room(2.0, 2.0, 0.25).unwrap();
        let start = Pose2D::new(1.6, 1.0, 0.0);
        let m = step_kinematics(&w, start, VelocityCommand::new(0.2, 0.0), 1.0, &MotionLimits::default());
        assert!(m.blocked);
        assert_eq!(m.pose, start);
        let m = step_kinematics(&w, Pose2D::new(1.0, 1.0, 0.0), VelocityCommand::new(0.2, 0.0), 1.0, &MotionLimits::default());
        assert!(!m.blocked);
    }

    #[test]
    fn empty_world_beams_miss() {
        let w = WorldMap::empty_room(10.0, 10.0, 0.1).unwrap();
        let spec = SensorSpec {
            range_noise_sigma: 0.0,
            range_max: 4.5,
            ..SensorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scan = cast_lidar(&w, Pose2D::new(5.0, 5.0, 0.3), &spec, &mut rng).unwrap();
        assert_eq!(scan.ranges.len(), 1500);
        assert!(scan.hit.iter().all(|h| !h));
    }

    #[test]
    fn wall_ahead_range() {
        let mut w = WorldMap::empty_room(10.0, 10.0, 0.1).unwrap();
        w.add_block(7.0, 0.0, 7.5, 10.0);
        let spec = SensorSpec {
            beam_count: 1,
            range_noise_sigma: 0.0,
            ..SensorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // wall face at x = 7.0 (cells whose centers lie at >= 7.05)
        let scan = cast_lidar(&w, Pose2D::new(5.0, 5.0, 0.0), &spec, &mut rng).unwrap();
        assert!(scan.hit[0]);
        assert!((scan.ranges[0] - 2.0).abs() <= 0.05 + 1e-9);
    }

    #[test]
    fn lidar_is_deterministic() {
        let w = WorldMap::bookstore(0.25);
        let spec = SensorSpec::default();
        let pose = Pose2D::new(2.0, 2.0, 0.4);
        let a = cast_lidar(&w, pose, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = cast_lidar(&w, pose, &spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lidar_rejects_pose_in_obstacle() {
        let w = WorldMap::empty_room(4.0, 4.0, 0.25).unwrap();
        let err = cast_lidar(&w, Pose2D::new(0.1, 0.1, 0.0), &SensorSpec::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(WorldError::PoseInsideObstacle { .. })));
    }

    #[test]
    fn rssi_formula() {
        let ch = RssiChannel {
            shadowing_sigma_db: 0.0,
            ..RssiChannel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let at = |d: f64, rng: &mut ChaCha8Rng| sample_rssi(&ch, &Pose2D::new(0.0, 0.0, 0.0), &Pose2D::new(d, 0.0, 0.0), rng);
        assert!((at(1.0, &mut rng) + 40.0).abs() < 1e-12);
        assert!((at(10.0, &mut rng) + 60.0).abs() < 1e-12);
        assert!((at(100.0, &mut rng) + 80.0).abs() < 1e-12);
        // floored below d0
        assert!((at(0.3, &mut rng) + 40.0).abs() < 1e-12);
    }

    #[test]
    fn ascii_loader_closes_boundary() {
        let w = WorldMap::from_ascii("....\n....\n.#..\n....\n", 0.5).unwrap();
        assert_eq!(w.geometry().width, 4);
        assert!(!w.is_free(Cell::new(0, 0)));
        assert!(w.is_free(Cell::new(2, 2)));
        assert!(!w.is_free(Cell::new(1, 1)));
        assert!(WorldMap::from_ascii("###\n###\n###\n", 0.5).is_err());
    }
}
