//! Boundary prediction from partial observations and next-region selection.
//!
//! The explorable space is predicted optimistically as the convex hull of the
//! observed cells, extended by wall corners inferred from Hough lines found
//! near the hull. The hull is turned into half-plane inequalities, obstacles
//! are inflated, and the next goal is the cheapest unexplored reachable cell
//! inside the hull that keeps away from the other robots.

use crate::geometry::{Cell, GridGeometry, Point2};
use crate::gp::BeliefGrid;
use crate::io::grid_to_pgm;
use crate::raoblackwell::OccupancyBelief;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    /// Fewer than three hull vertices; the hull is a point or a segment.
    #[error("hull has {} vertices, cannot linearize", .0.len())]
    DegenerateHull(Vec<Point2>),
    #[error("no unexplored reachable cell inside the hull")]
    NoFrontier,
}

/// Convex hull by monotone chain. Counter-clockwise, starting at the lowest
/// x (then lowest y); collinear and duplicate points are dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &Point2, a: &Point2, b: &Point2| a.sub(o).cross(&b.sub(o));
    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Polygon area via the shoelace formula (positive for counter-clockwise).
pub fn polygon_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    (0..n).map(|i| vertices[i].cross(&vertices[(i + 1) % n])).sum::<f64>() * 0.5
}

fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&a.add(&ab.scale(t)))
}

/// Distance from `p` to the hull boundary (or to the point/segment for degenerate hulls).
pub fn boundary_distance(vertices: &[Point2], p: &Point2) -> f64 {
    match vertices.len() {
        0 => f64::INFINITY,
        1 => p.distance(&vertices[0]),
        n => (0..n)
            .map(|i| segment_distance(p, &vertices[i], &vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Wall line in normal form `x cos(theta) + y sin(theta) = rho`, theta in [0, pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallLine {
    pub rho: f64,
    pub theta: f64,
    pub start: Point2,
    pub end: Point2,
    /// Number of cells that support the segment.
    pub support: usize,
}

impl WallLine {
    pub fn length(&self) -> f64 {
        self.start.distance(&self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughConfig {
    pub vote_threshold: usize,
    /// Maximum run of empty cells bridged along a line.
    pub max_gap_cells: usize,
    pub min_length_cells: usize,
    pub max_lines: usize,
    pub seed: u64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            vote_threshold: 8,
            max_gap_cells: 2,
            min_length_cells: 6,
            max_lines: 32,
            seed: 0,
        }
    }
}

const THETA_BINS: usize = 180;

/// Least-squares line through `points` (principal axis).
fn fit_line(points: &[Point2]) -> (f64, f64, Point2, Point2) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Point2::default(), |a, p| a.add(p)).scale(1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p.sub(&mean);
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = Point2::new(phi.cos(), phi.sin());
    let mut normal = Point2::new(-dir.y, dir.x);
    let mut theta = normal.y.atan2(normal.x);
    if theta < 0.0 {
        theta += std::f64::consts::PI;
        normal = normal.scale(-1.0);
    }
    if theta >= std::f64::consts::PI {
        theta -= std::f64::consts::PI;
        normal = normal.scale(-1.0);
    }
    let rho = normal.dot(&mean);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        let t = p.sub(&mean).dot(&dir);
        lo = lo.min(t);
        hi = hi.max(t);
    }
    (rho, theta, mean.add(&dir.scale(lo)), mean.add(&dir.scale(hi)))
}

/// Progressive probabilistic Hough transform over cell centers.
///
/// Cells are visited in a seeded random order and vote into a (rho, theta)
/// accumulator with one-cell rho bins and one-degree theta bins. When a bin
/// reaches the threshold, the line is traced through the grid, its cells are
/// consumed (and their votes withdrawn), and the segment is refit by least squares.
pub fn hough_lines(cells: &[Cell], geometry: &GridGeometry, config: &HoughConfig) -> Vec<WallLine> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    hough_lines_with(cells, geometry, config, &mut rng)
}

pub fn hough_lines_with<R: Rng + ?Sized>(
    cells: &[Cell],
    geometry: &GridGeometry,
    config: &HoughConfig,
    rng: &mut R,
) -> Vec<WallLine> {
    if cells.len() < 2 {
        return Vec::new();
    }
    let res = geometry.resolution;
    let diag = geometry.width_m().hypot(geometry.height_m());
    let rho_bins = (2.0 * diag / res).ceil() as usize + 1;
    let trig: Vec<(f64, f64)> = (0..THETA_BINS)
        .map(|k| (k as f64 * std::f64::consts::PI / THETA_BINS as f64).sin_cos())
        .collect();
    let bin_of = |p: &Point2, k: usize| -> usize {
        let (s, c) = trig[k];
        (((p.x * c + p.y * s) + diag) / res).round() as usize
    };

    let mut mask = vec![false; geometry.len()];
    let mut order: Vec<Cell> = cells.to_vec();
    order.sort();
    order.dedup();
    for c in &order {
        mask[geometry.index(*c)] = true;
    }
    order.shuffle(rng);
    let mut voted = vec![false; geometry.len()];
    let mut acc = vec![0u32; THETA_BINS * rho_bins];
    let mut lines = Vec::new();

    for cell in order {
        if lines.len() >= config.max_lines {
            break;
        }
        let idx = geometry.index(cell);
        if !mask[idx] {
            continue;
        }
        let p = geometry.center(cell);
        voted[idx] = true;
        let (mut best_k, mut best_v) = (0, 0u32);
        for k in 0..THETA_BINS {
            let a = &mut acc[k * rho_bins + bin_of(&p, k)];
            *a += 1;
            if *a > best_v {
                best_v = *a;
                best_k = k;
            }
        }
        if (best_v as usize) < config.vote_threshold {
            continue;
        }

        let (s, c) = trig[best_k];
        let dir = Point2::new(-s, c);
        let step = res / dir.x.abs().max(dir.y.abs());
        let mut members: Vec<Cell> = vec![cell];
        for sign in [-1.0, 1.0] {
            let mut gap = 0;
            let mut t = step;
            loop {
                let q = p.add(&dir.scale(sign * t));
                let Some(qc) = geometry.cell_of(&q) else { break };
                if mask[geometry.index(qc)] {
                    if !members.contains(&qc) {
                        members.push(qc);
                    }
                    gap = 0;
                } else {
                    gap += 1;
                    if gap > config.max_gap_cells {
                        break;
                    }
                }
                t += step;
            }
        }
        let pts: Vec<Point2> = members.iter().map(|m| geometry.center(*m)).collect();
        let (rho, theta, start, end) = fit_line(&pts);
        let long_enough = start.distance(&end) + 1e-9 >= config.min_length_cells.saturating_sub(1) as f64 * res;
        // consume the traced cells either way so a failed trace does not retrigger
        for m in &members {
            let mi = geometry.index(*m);
            if !long_enough && *m != cell {
                continue;
            }
            mask[mi] = false;
            if voted[mi] {
                let mp = geometry.center(*m);
                for k in 0..THETA_BINS {
                    acc[k * rho_bins + bin_of(&mp, k)] -= 1;
                }
                voted[mi] = false;
            }
        }
        if long_enough {
            lines.push(WallLine {
                rho,
                theta,
                start,
                end,
                support: members.len(),
            });
        }
    }
    lines
}

/// Intersection of two lines in normal form; `None` when they are (nearly) parallel.
pub fn intersect(a: &WallLine, b: &WallLine) -> Option<Point2> {
    let (sa, ca) = a.theta.sin_cos();
    let (sb, cb) = b.theta.sin_cos();
    let det = ca * sb - sa * cb;
    // below ~10 degrees the crossing is too sensitive to be a useful corner
    if det.abs() < 0.17 {
        return None;
    }
    Some(Point2::new((a.rho * sb - b.rho * sa) / det, (ca * b.rho - cb * a.rho) / det))
}

/// Pairwise line crossings kept when inside the grid and within
/// `max_corner_distance` of an observed cell, snapped to cells.
pub fn line_intersections(lines: &[WallLine], max_corner_distance: f64, observed: &CellSets) -> Vec<Cell> {
    let g = &observed.geometry;
    let mut seen = vec![false; g.len()];
    for c in observed.free.iter().chain(&observed.occupied) {
        seen[g.index(*c)] = true;
    }
    let mut out = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let Some(p) = intersect(&lines[i], &lines[j]) else { continue };
            let Some(cell) = g.cell_of(&p) else { continue };
            let near = g.cells_within(&p, max_corner_distance).into_iter().any(|c| seen[g.index(c)]);
            if near {
                out.push(cell);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Observed and inferred cell sets used to predict the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSets {
    pub geometry: GridGeometry,
    /// Observed free.
    pub free: Vec<Cell>,
    /// Observed occupied.
    pub occupied: Vec<Cell>,
    /// Inferred corners.
    pub corners: Vec<Cell>,
    /// Inflated obstacles (filled by `inflate`).
    pub inflated: Vec<Cell>,
    /// Points beyond beams that returned nothing; they stretch the hull
    /// into open space that has not been seen yet.
    pub open: Vec<Point2>,
}

impl CellSets {
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            free: Vec::new(),
            occupied: Vec::new(),
            corners: Vec::new(),
            inflated: Vec::new(),
            open: Vec::new(),
        }
    }

    /// Thresholds an occupancy belief; only observed cells are classified.
    pub fn from_belief(map: &OccupancyBelief, free_below: f64, occupied_above: f64) -> Self {
        let g = *map.geometry();
        let mut s = Self::new(g);
        for (i, &b) in map.values().iter().enumerate() {
            if !map.is_observed(i) {
                continue;
            }
            if b < free_below {
                s.free.push(g.cell_at(i));
            } else if b > occupied_above {
                s.occupied.push(g.cell_at(i));
            }
        }
        s
    }
}

/// Chebyshev dilation of `sources` by `depth` cells.
pub fn inflate(sources: &[Cell], depth: usize, geometry: &GridGeometry) -> Vec<Cell> {
    let mut mask = vec![false; geometry.len()];
    let d = depth as i64;
    for c in sources {
        for dr in -d..=d {
            for dc in -d..=d {
                if let Some(n) = geometry.offset(*c, dr, dc) {
                    mask[geometry.index(n)] = true;
                }
            }
        }
    }
    mask.iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(i, _)| geometry.cell_at(i))
        .collect()
}

/// Half-plane `normal . x <= offset` with a unit outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Point2,
    pub offset: f64,
}

impl Facet {
    /// Signed distance; positive outside.
    pub fn violation(&self, p: &Point2) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// One inequality per hull edge; requires at least three vertices.
pub fn linearize_hull(vertices: &[Point2]) -> Result<Vec<Facet>, HullError> {
    if vertices.len() < 3 {
        return Err(HullError::DegenerateHull(vertices.to_vec()));
    }
    let n = vertices.len();
    Ok((0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let e = b.sub(&a);
            let normal = Point2::new(e.y, -e.x).scale(1.0 / e.norm());
            Facet {
                normal,
                offset: normal.dot(&a),
            }
        })
        .collect())
}

/// True when `p` satisfies every facet within `tol`.
pub fn facets_contain(facets: &[Facet], p: &Point2, tol: f64) -> bool {
    facets.iter().all(|f| f.violation(p) <= tol)
}

/// Per-cell prediction layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellPrediction {
    ObservedFree,
    PredictedFree,
    Unknown,
    PredictedWall,
    ObservedWall,
}

impl CellPrediction {
    pub fn gray(self) -> u8 {
        match self {
            CellPrediction::ObservedFree => 255,
            CellPrediction::PredictedFree => 200,
            CellPrediction::Unknown => 128,
            CellPrediction::PredictedWall => 64,
            CellPrediction::ObservedWall => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub hough: HoughConfig,
    pub max_corner_distance: f64,
    pub inflation_depth: usize,
    /// Occupied cells within this many cells of the hull boundary feed the line search.
    pub contour_band_cells: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            hough: HoughConfig::default(),
            max_corner_distance: 3.0,
            inflation_depth: 2,
            contour_band_cells: 2.0,
        }
    }
}

/// Predicted explorable region.
#[derive(Debug, Clone, PartialEq)]
pub struct HullModel {
    pub geometry: GridGeometry,
    /// Counter-clockwise hull of observations, open points and corners.
    pub vertices: Vec<Point2>,
    pub wall_lines: Vec<WallLine>,
    pub corners: Vec<Cell>,
    /// `None` when the hull is degenerate.
    pub facets: Option<Vec<Facet>>,
    pub prediction: Vec<CellPrediction>,
    /// Inflated obstacles plus regions found unreachable.
    pub blocked: Vec<bool>,
    /// Observed walls: never traversed.
    pub walls: Vec<bool>,
}

impl HullModel {
    pub fn contains(&self, p: &Point2) -> bool {
        match &self.facets {
            Some(f) => facets_contain(f, p, 1e-9),
            None => false,
        }
    }

    pub fn prediction_at(&self, cell: Cell) -> CellPrediction {
        self.prediction[self.geometry.index(cell)]
    }

    /// Prediction layer as PGM with one gray band per class.
    pub fn prediction_pgm(&self) -> Vec<u8> {
        grid_to_pgm(&self.geometry, |c| self.prediction_at(c).gray())
    }

    /// GeoJSON feature collection: hull polygon, wall segments and corner points.
    pub fn to_geojson(&self) -> String {
        use serde_json::json;
        let mut ring: Vec<[f64; 2]> = self.vertices.iter().map(|p| [p.x, p.y]).collect();
        if let Some(first) = ring.first().copied() {
            ring.push(first);
        }
        let mut features = vec![json!({
            "type": "Feature",
            "properties": {"kind": "hull"},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })];
        for l in &self.wall_lines {
            features.push(json!({
                "type": "Feature",
                "properties": {"kind": "wall", "rho": l.rho, "theta": l.theta},
                "geometry": {"type": "LineString", "coordinates": [[l.start.x, l.start.y], [l.end.x, l.end.y]]},
            }));
        }
        for c in &self.corners {
            let p = self.geometry.center(*c);
            features.push(json!({
                "type": "Feature",
                "properties": {"kind": "corner"},
                "geometry": {"type": "Point", "coordinates": [p.x, p.y]},
            }));
        }
        json!({"type": "FeatureCollection", "features": features}).to_string()
    }
}

/// Hull of observations, wall lines near it, corners, re-hull, inflation and
/// the prediction layer. Observed cells keep their observed class.
pub fn predict_boundary(observed: &mut CellSets, config: &BoundaryConfig) -> HullModel {
    let g = observed.geometry;
    let mut pts: Vec<Point2> = observed
        .free
        .iter()
        .chain(&observed.occupied)
        .map(|c| g.center(*c))
        .collect();
    pts.extend(observed.open.iter().copied());
    let first = convex_hull(&pts);

    let band = config.contour_band_cells * g.resolution;
    let contour: Vec<Cell> = observed
        .occupied
        .iter()
        .copied()
        .filter(|c| boundary_distance(&first, &g.center(*c)) <= band)
        .collect();
    let wall_lines = hough_lines(&contour, &g, &config.hough);
    let corners = line_intersections(&wall_lines, config.max_corner_distance, observed);
    observed.corners = corners.clone();

    pts.extend(corners.iter().map(|c| g.center(*c)));
    let vertices = convex_hull(&pts);
    let facets = linearize_hull(&vertices).ok();

    let mut sources = observed.occupied.clone();
    sources.extend(corners.iter().copied());
    observed.inflated = inflate(&sources, config.inflation_depth, &g);

    let mut prediction = vec![CellPrediction::Unknown; g.len()];
    let mut walls = vec![false; g.len()];
    let edge_tol = 0.75 * g.resolution;
    if let Some(f) = &facets {
        for cell in g.cells() {
            let p = g.center(cell);
            if facets_contain(f, &p, 0.5 * g.resolution) {
                prediction[g.index(cell)] = if boundary_distance(&vertices, &p) <= edge_tol {
                    CellPrediction::PredictedWall
                } else {
                    CellPrediction::PredictedFree
                };
            }
        }
    }
    for c in &observed.free {
        prediction[g.index(*c)] = CellPrediction::ObservedFree;
    }
    for c in &observed.occupied {
        prediction[g.index(*c)] = CellPrediction::ObservedWall;
        walls[g.index(*c)] = true;
    }
    let mut blocked = vec![false; g.len()];
    for c in &observed.inflated {
        blocked[g.index(*c)] = true;
    }

    HullModel {
        geometry: g,
        vertices,
        wall_lines,
        corners,
        facets,
        prediction,
        blocked,
        walls,
    }
}

/// Travel costs from one start cell. Walls are impassable; inflated cells
/// are passable at a penalty so a robot that ends up next to a wall can leave.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub geometry: GridGeometry,
    pub start: Cell,
    pub cost: Vec<f64>,
    parent: Vec<usize>,
}

const INFLATED_PENALTY: f64 = 8.0;

#[derive(PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl CostField {
    /// Dijkstra over 8-connected cells; diagonal moves may not cut wall corners.
    pub fn new(geometry: GridGeometry, start: Cell, walls: &[bool], inflated: &[bool]) -> Self {
        let n = geometry.len();
        let mut cost = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let s = geometry.index(start);
        cost[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Node(0.0, s));
        while let Some(Node(d, i)) = heap.pop() {
            if d > cost[i] {
                continue;
            }
            let cell = geometry.cell_at(i);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let Some(nb) = geometry.offset(cell, dr, dc) else { continue };
                    let j = geometry.index(nb);
                    if walls[j] {
                        continue;
                    }
                    if dr != 0 && dc != 0 {
                        let a = geometry.offset(cell, dr, 0).map(|c| walls[geometry.index(c)]);
                        let b = geometry.offset(cell, 0, dc).map(|c| walls[geometry.index(c)]);
                        if a != Some(false) || b != Some(false) {
                            continue;
                        }
                    }
                    let mut step = if dr != 0 && dc != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                    if inflated[j] {
                        step += INFLATED_PENALTY;
                    }
                    let nd = d + step * geometry.resolution;
                    if nd < cost[j] {
                        cost[j] = nd;
                        parent[j] = i;
                        heap.push(Node(nd, j));
                    }
                }
            }
        }
        Self {
            geometry,
            start,
            cost,
            parent,
        }
    }

    pub fn reachable(&self, cell: Cell) -> bool {
        self.cost[self.geometry.index(cell)].is_finite()
    }

    pub fn cost_to(&self, cell: Cell) -> f64 {
        self.cost[self.geometry.index(cell)]
    }

    /// Cells from the start to `goal` inclusive; empty when unreachable.
    pub fn path_to(&self, goal: Cell) -> Vec<Cell> {
        if !self.reachable(goal) {
            return Vec::new();
        }
        let mut path = vec![goal];
        let mut i = self.geometry.index(goal);
        while self.parent[i] != usize::MAX {
            i = self.parent[i];
            path.push(self.geometry.cell_at(i));
        }
        path.reverse();
        path
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalConfig {
    /// Weight on the distance to the nearest peer pose or goal.
    pub peer_weight: f64,
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self { peer_weight: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub cell: Cell,
    pub score: f64,
    pub path: Vec<Cell>,
}

/// Picks the unexplored, unblocked, reachable cell inside the hull with the
/// lowest `travel cost - peer_weight * distance to nearest peer`. Unreachable
/// in-hull cells are marked blocked in `model`. Ties go to the smaller (row, col).
pub fn select_next_region(
    model: &mut HullModel,
    belief: &BeliefGrid,
    ego: &Point2,
    peers: &[Point2],
    excluded: &[Cell],
    config: &GoalConfig,
) -> Result<Goal, HullError> {
    let g = model.geometry;
    let Some(facets) = model.facets.clone() else {
        return Err(HullError::NoFrontier);
    };
    let Some(start) = g.cell_of(ego) else {
        return Err(HullError::NoFrontier);
    };
    let mut walls = model.walls.clone();
    walls[g.index(start)] = false;
    let field = CostField::new(g, start, &walls, &model.blocked);
    let tol = 0.5 * g.resolution;
    let mut best: Option<(f64, Cell)> = None;
    for cell in g.cells() {
        let i = g.index(cell);
        if belief.is_explored(cell) || model.walls[i] {
            continue;
        }
        let p = g.center(cell);
        if !facets_contain(&facets, &p, tol) {
            continue;
        }
        if !field.reachable(cell) {
            model.blocked[i] = true;
            continue;
        }
        if model.blocked[i] || excluded.contains(&cell) {
            continue;
        }
        let peer = peers.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min);
        let peer_term = if peer.is_finite() { config.peer_weight * peer } else { 0.0 };
        let score = field.cost_to(cell) - peer_term;
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, cell));
        }
    }
    let (score, cell) = best.ok_or(HullError::NoFrontier)?;
    Ok(Goal {
        cell,
        score,
        path: field.path_to(cell),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_center() {
        let h = convex_hull(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ]);
        assert_eq!(h.len(), 4);
        assert!(!h.contains(&Point2::new(0.5, 0.5)));
        assert!(polygon_area(&h) > 0.0);
    }

    #[test]
    fn collinear_points_reduce_to_endpoints() {
        let pts: Vec<Point2> = (0..10).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        let h = convex_hull(&pts);
        assert_eq!(h, vec![Point2::new(0.0, 0.0), Point2::new(9.0, 18.0)]);
        assert_eq!(convex_hull(&[Point2::new(1.0, 1.0)]).len(), 1);
    }

    #[test]
    fn unit_square_facets() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let f = linearize_hull(&sq).unwrap();
        let want = [((0.0, -1.0), 0.0), ((1.0, 0.0), 1.0), ((0.0, 1.0), 1.0), ((-1.0, 0.0), 0.0)];
        for (facet, ((nx, ny), b)) in f.iter().zip(want) {
            assert!((facet.normal.x - nx).abs() < 1e-12 && (facet.normal.y - ny).abs() < 1e-12);
            assert!((facet.offset - b).abs() < 1e-12);
        }
        assert!(matches!(linearize_hull(&sq[..2]), Err(HullError::DegenerateHull(v)) if v.len() == 2));
    }

    #[test]
    fn horizontal_wall_line() {
        let g = GridGeometry::new(40, 40, 0.25);
        let cells: Vec<Cell> = (5..25).map(|c| Cell::new(12, c)).collect();
        let lines = hough_lines(&cells, &g, &HoughConfig::default());
        assert_eq!(lines.len(), 1);
        let l = lines[0];
        assert!((l.theta - std::f64::consts::FRAC_PI_2).abs() < 1f64.to_radians());
        assert!((l.rho - 3.125).abs() < g.resolution);
    }

    #[test]
    fn sparse_cells_give_no_lines() {
        let g = GridGeometry::new(40, 40, 0.25);
        let cells = [Cell::new(3, 7), Cell::new(20, 31), Cell::new(33, 2)];
        assert!(hough_lines(&cells, &g, &HoughConfig::default()).is_empty());
    }

    #[test]
    fn parallel_lines_do_not_intersect() {
        let a = WallLine {
            rho: 1.0,
            theta: 0.3,
            start: Point2::default(),
            end: Point2::default(),
            support: 10,
        };
        let b = WallLine { rho: 2.0, ..a };
        assert!(intersect(&a, &b).is_none());
    }

    #[test]
    fn inflation_bounds() {
        let g = GridGeometry::new(10, 10, 1.0);
        let out = inflate(&[Cell::new(5, 5)], 2, &g);
        assert_eq!(out.len(), 25);
        assert!(out.iter().all(|c| c.chebyshev(&Cell::new(5, 5)) <= 2));
        assert_eq!(inflate(&[Cell::new(0, 0)], 1, &g).len(), 4);
    }

    #[test]
    fn path_avoids_wall() {
        let g = GridGeometry::new(5, 5, 1.0);
        let mut walls = vec![false; 25];
        for r in 0..4 {
            walls[g.index(Cell::new(r, 2))] = true;
        }
        let f = CostField::new(g, Cell::new(0, 0), &walls, &vec![false; 25]);
        let path = f.path_to(Cell::new(0, 4));
        assert!(path.iter().all(|c| !walls[g.index(*c)]));
        assert!(path.iter().any(|c| c.row == 4));
    }
}
