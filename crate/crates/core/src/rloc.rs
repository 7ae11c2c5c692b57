//! Range-only relative localization over the robots' measurement graph.
//!
//! RSSI readings are inverted into range estimates, assembled into a weighted
//! undirected graph (RPMG), expanded into per-robot candidate positions that
//! respect the motion bound (ERPMG), and every surviving candidate graph is
//! refined by projected, damped Gauss-Newton. The refined graphs become
//! position hypotheses weighted by `exp(-residual / 2)`.

use crate::geometry::Point2;
use crate::world::RssiChannel;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type RobotId = usize;

/// Floor on range variance so edge weights stay finite on noise-free links.
pub const MIN_RANGE_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeEstimate {
    pub range: f64,
    pub variance: f64,
}

/// Inverts the log-distance channel. Readings stronger than `p0` floor at `d0`.
pub fn rssi_to_range(rssi_dbm: f64, channel: &RssiChannel) -> RangeEstimate {
    let n = channel.path_loss_exponent;
    let exponent = ((channel.p0_dbm - rssi_dbm) / (10.0 * n)).max(0.0);
    let range = channel.d0 * 10f64.powf(exponent);
    let sd = range * std::f64::consts::LN_10 * channel.shadowing_sigma_db / (10.0 * n);
    RangeEstimate {
        range,
        variance: (sd * sd).max(MIN_RANGE_VARIANCE),
    }
}

/// One directed RSSI observation, already converted to range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub from: RobotId,
    pub to: RobotId,
    pub rssi_dbm: f64,
    pub range: f64,
    pub variance: f64,
}

impl RangeMeasurement {
    pub fn from_rssi(from: RobotId, to: RobotId, rssi_dbm: f64, channel: &RssiChannel) -> Self {
        let r = rssi_to_range(rssi_dbm, channel);
        Self {
            from,
            to,
            rssi_dbm,
            range: r.range,
            variance: r.variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Vertex indices with `a < b`.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    pub range: f64,
    pub variance: f64,
}

/// Relative position measurement graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Rpmg {
    vertices: Vec<RobotId>,
    adjacency: DMatrix<f64>,
    edges: Vec<Edge>,
    components: usize,
}

impl Rpmg {
    pub fn vertices(&self) -> &[RobotId] {
        &self.vertices
    }

    pub fn vertex_index(&self, id: RobotId) -> Option<usize> {
        self.vertices.iter().position(|v| *v == id)
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weighted degree.
    pub fn degree(&self, index: usize) -> f64 {
        self.adjacency.row(index).sum()
    }

    /// Number of incident edges.
    pub fn edge_count(&self, index: usize) -> usize {
        self.adjacency.row(index).iter().filter(|a| **a > 0.0).count()
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.vertices.len();
        let mut l = -self.adjacency.clone();
        for i in 0..n {
            l[(i, i)] = self.degree(i);
        }
        l
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    /// Set when the graph has more than one connected component.
    pub fn is_disconnected(&self) -> bool {
        self.components > 1
    }
}

/// Builds the graph over `vertices`. Both directions of a link are averaged;
/// an edge exists iff the (averaged) RSSI reaches `connectivity_threshold_dbm`.
pub fn build_rpmg(vertices: &[RobotId], measurements: &[RangeMeasurement], connectivity_threshold_dbm: f64) -> Rpmg {
    let n = vertices.len();
    let index: BTreeMap<RobotId, usize> = vertices.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut pooled: BTreeMap<(usize, usize), (f64, f64, f64, usize)> = BTreeMap::new();
    for m in measurements {
        let (Some(&i), Some(&j)) = (index.get(&m.from), index.get(&m.to)) else {
            continue;
        };
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        let e = pooled.entry(key).or_insert((0.0, 0.0, 0.0, 0));
        e.0 += m.rssi_dbm;
        e.1 += m.range;
        e.2 += m.variance;
        e.3 += 1;
    }
    let mut adjacency = DMatrix::zeros(n, n);
    let mut edges = Vec::new();
    for ((a, b), (rssi, range, var, count)) in pooled {
        let c = count as f64;
        if rssi / c < connectivity_threshold_dbm {
            continue;
        }
        let variance = (var / c).max(MIN_RANGE_VARIANCE);
        let weight = 1.0 / variance;
        adjacency[(a, b)] = weight;
        adjacency[(b, a)] = weight;
        edges.push(Edge {
            a,
            b,
            weight,
            range: range / c,
            variance,
        });
    }
    let components = count_components(n, &edges);
    Rpmg {
        vertices: vertices.to_vec(),
        adjacency,
        edges,
        components,
    }
}

fn count_components(n: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for e in edges {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// How far a robot can move between two graph updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBound {
    pub v_max: f64,
    pub dt: f64,
    /// Slack for odometry and estimation error.
    pub margin: f64,
}

impl Default for MotionBound {
    fn default() -> Self {
        Self {
            v_max: 0.2,
            dt: 0.1,
            margin: 0.1,
        }
    }
}

impl MotionBound {
    pub fn radius(&self) -> f64 {
        self.v_max * self.dt + self.margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErpmgConfig {
    /// Candidates per robot.
    pub k: usize,
    /// Upper bound on enumerated candidate graphs.
    pub max_graphs: usize,
    /// Lattice spacing of candidate positions, as a fraction of the motion radius.
    pub lattice_fraction: f64,
}

impl Default for ErpmgConfig {
    fn default() -> Self {
        Self {
            k: 3,
            max_graphs: 64,
            lattice_fraction: 0.5,
        }
    }
}

/// One assignment of a candidate to every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGraph {
    pub assignment: Vec<usize>,
    pub cost: f64,
}

/// Expanded graph: per-vertex candidate positions and the candidate graphs
/// that survived cost-ordered pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct Erpmg {
    pub rpmg: Rpmg,
    pub anchor: usize,
    pub previous: Vec<Point2>,
    pub motion: MotionBound,
    pub candidates: Vec<Vec<Point2>>,
    /// Annulus-agreement cost of each candidate; lower is better.
    pub candidate_costs: Vec<Vec<f64>>,
    pub graphs: Vec<CandidateGraph>,
}

fn edge_cost(e: &Edge, pa: &Point2, pb: &Point2) -> f64 {
    e.weight * (pa.distance(pb) - e.range).powi(2)
}

fn lattice(center: &Point2, radius: f64, spacing: f64) -> Vec<Point2> {
    let steps = (radius / spacing).floor() as i64;
    let mut out = Vec::new();
    for i in -steps..=steps {
        for j in -steps..=steps {
            let p = Point2::new(center.x + i as f64 * spacing, center.y + j as f64 * spacing);
            if p.distance(center) <= radius + 1e-12 {
                out.push(p);
            }
        }
    }
    out
}

/// Expands `rpmg` into candidate positions. `previous[i]` is vertex `i`'s last
/// position estimate; for the anchor it is the fixed predicted position and
/// the anchor keeps it as its only candidate.
pub fn expand_to_erpmg(
    rpmg: &Rpmg,
    previous: &[Point2],
    anchor: RobotId,
    motion: &MotionBound,
    config: &ErpmgConfig,
) -> Erpmg {
    let n = rpmg.vertices.len();
    assert_eq!(previous.len(), n, "one previous position per vertex");
    assert!(config.k >= 1, "k must be at least 1");
    let anchor = rpmg.vertex_index(anchor).expect("anchor is a vertex");
    let radius = motion.radius();
    let spacing = (radius * config.lattice_fraction).max(1e-9);

    let mut candidates = Vec::with_capacity(n);
    let mut candidate_costs = Vec::with_capacity(n);
    for v in 0..n {
        if v == anchor {
            candidates.push(vec![previous[v]]);
            candidate_costs.push(vec![0.0]);
            continue;
        }
        let incident: Vec<&Edge> = rpmg.edges.iter().filter(|e| e.a == v || e.b == v).collect();
        let mut scored: Vec<(f64, Point2)> = lattice(&previous[v], radius, spacing)
            .into_iter()
            .map(|c| {
                let cost: f64 = incident
                    .iter()
                    .map(|e| {
                        let other = if e.a == v { e.b } else { e.a };
                        edge_cost(e, &c, &previous[other])
                    })
                    .sum();
                (cost, c)
            })
            .collect();
        if scored.is_empty() {
            scored.push((0.0, previous[v]));
        }
        // stable: ties keep lattice order
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        scored.truncate(config.k);
        candidate_costs.push(scored.iter().map(|s| s.0).collect());
        candidates.push(scored.into_iter().map(|s| s.1).collect());
    }

    // Beam search over vertices; partial cost counts edges between assigned vertices.
    let width = config.max_graphs.max(1);
    let mut beam: Vec<CandidateGraph> = vec![CandidateGraph {
        assignment: Vec::new(),
        cost: 0.0,
    }];
    for v in 0..n {
        let mut next = Vec::with_capacity(beam.len() * candidates[v].len());
        for g in &beam {
            for (ci, c) in candidates[v].iter().enumerate() {
                let mut cost = g.cost;
                for e in rpmg.edges.iter().filter(|e| e.b == v || e.a == v) {
                    let other = if e.a == v { e.b } else { e.a };
                    if other < v {
                        cost += edge_cost(e, c, &candidates[other][g.assignment[other]]);
                    }
                }
                let mut assignment = g.assignment.clone();
                assignment.push(ci);
                next.push(CandidateGraph { assignment, cost });
            }
        }
        next.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.assignment.cmp(&b.assignment)));
        next.truncate(width);
        beam = next;
    }

    Erpmg {
        rpmg: rpmg.clone(),
        anchor,
        previous: previous.to_vec(),
        motion: *motion,
        candidates,
        candidate_costs,
        graphs: beam,
    }
}

/// Axis-aligned workspace known to every robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: Point2,
    pub max: Point2,
}

impl Workspace {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn unbounded() -> Self {
        Self {
            min: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            max: Point2::new(f64::INFINITY, f64::INFINITY),
        }
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.y >= self.min.y && p.x <= self.max.x && p.y <= self.max.y
    }

    pub fn clamp(&self, p: &Point2) -> Point2 {
        Point2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }
}

/// A robot's position in one candidate graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub robot: RobotId,
    pub position: Point2,
    pub belief: f64,
}

/// Gauss-Newton result for one candidate graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedGraph {
    pub positions: Vec<Point2>,
    pub residual: f64,
    pub belief: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEstimate {
    pub vertices: Vec<RobotId>,
    pub graphs: Vec<SolvedGraph>,
    pub best: usize,
}

impl GraphEstimate {
    /// False when the best graph hit the iteration cap (the best iterate is still returned).
    pub fn converged(&self) -> bool {
        self.graphs[self.best].converged
    }

    pub fn best_residual(&self) -> f64 {
        self.graphs[self.best].residual
    }

    /// Best-graph position for every robot, tagged with that graph's belief.
    pub fn estimates(&self) -> Vec<PositionEstimate> {
        let g = &self.graphs[self.best];
        self.vertices
            .iter()
            .zip(&g.positions)
            .map(|(r, p)| PositionEstimate {
                robot: *r,
                position: *p,
                belief: g.belief,
            })
            .collect()
    }

    /// One hypothesis per candidate graph for `robot`; beliefs sum to one.
    pub fn hypotheses(&self, robot: RobotId) -> Vec<PositionEstimate> {
        let Some(i) = self.vertices.iter().position(|v| *v == robot) else {
            return Vec::new();
        };
        self.graphs
            .iter()
            .map(|g| PositionEstimate {
                robot,
                position: g.positions[i],
                belief: g.belief,
            })
            .collect()
    }

    /// Belief-weighted mean position of `robot` over all graphs.
    pub fn mean_position(&self, robot: RobotId) -> Option<Point2> {
        let h = self.hypotheses(robot);
        if h.is_empty() {
            return None;
        }
        let mut p = Point2::default();
        for e in &h {
            p = p.add(&e.position.scale(e.belief));
        }
        Some(p)
    }
}

const MAX_ITERS: usize = 50;
const GRAD_TOL: f64 = 1e-8;

fn graph_cost(edges: &[Edge], x: &[Point2]) -> f64 {
    edges.iter().map(|e| edge_cost(e, &x[e.a], &x[e.b])).sum()
}

fn project(x: &mut [Point2], centers: &[Point2], radius: f64, anchor: usize, ws: &Workspace) {
    for (i, p) in x.iter_mut().enumerate() {
        if i == anchor {
            continue;
        }
        let mut q = ws.clamp(p);
        let d = q.sub(&centers[i]);
        let len = d.norm();
        if len > radius {
            q = centers[i].add(&d.scale(radius / len));
        }
        *p = q;
    }
}

fn solve_one(erpmg: &Erpmg, init: Vec<Point2>, ws: &Workspace) -> SolvedGraph {
    let edges = erpmg.rpmg.edges();
    let n = init.len();
    let anchor = erpmg.anchor;
    let radius = erpmg.motion.radius();
    let free: Vec<usize> = (0..n).filter(|&i| i != anchor).collect();
    let slot: Vec<Option<usize>> = (0..n).map(|i| free.iter().position(|&f| f == i)).collect();
    let dim = 2 * free.len();

    let mut x = init;
    project(&mut x, &erpmg.previous, radius, anchor, ws);
    let mut cost = graph_cost(edges, &x);
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut converged = dim == 0 || edges.is_empty();
    let mut iterations = 0;

    while !converged && iterations < MAX_ITERS {
        iterations += 1;
        let mut jtj = DMatrix::<f64>::zeros(dim, dim);
        let mut jtr = DVector::<f64>::zeros(dim);
        for e in edges {
            let d = x[e.a].sub(&x[e.b]);
            let len = d.norm().max(1e-12);
            let r = e.weight.sqrt() * (len - e.range);
            let u = d.scale(e.weight.sqrt() / len);
            // dr/dx_a = u, dr/dx_b = -u
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(4);
            if let Some(s) = slot[e.a] {
                entries.push((2 * s, u.x));
                entries.push((2 * s + 1, u.y));
            }
            if let Some(s) = slot[e.b] {
                entries.push((2 * s, -u.x));
                entries.push((2 * s + 1, -u.y));
            }
            for &(i, ji) in &entries {
                jtr[i] += ji * r;
                for &(j, jj) in &entries {
                    jtj[(i, j)] += ji * jj;
                }
            }
        }
        // projected gradient as the stationarity test
        let grad = jtr.scale(2.0);
        let mut probe = x.clone();
        for (s, &i) in free.iter().enumerate() {
            probe[i] = Point2::new(x[i].x - grad[2 * s], x[i].y - grad[2 * s + 1]);
        }
        project(&mut probe, &erpmg.previous, radius, anchor, ws);
        let pg: f64 = free.iter().map(|&i| probe[i].distance_sq(&x[i])).sum::<f64>().sqrt();
        if pg < GRAD_TOL {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..10 {
            let mut a = jtj.clone();
            for i in 0..dim {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = x.clone();
            for (s, &i) in free.iter().enumerate() {
                trial[i] = Point2::new(x[i].x + step[2 * s], x[i].y + step[2 * s + 1]);
            }
            project(&mut trial, &erpmg.previous, radius, anchor, ws);
            let trial_cost = graph_cost(edges, &trial);
            if trial_cost <= cost {
                let moved: f64 = free.iter().map(|&i| trial[i].distance_sq(&x[i])).sum::<f64>().sqrt();
                x = trial;
                let gain = cost - trial_cost;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if moved < 1e-12 || gain <= 1e-15 * (1.0 + cost) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left inside the feasible set
            converged = true;
        }
    }

    SolvedGraph {
        positions: x,
        residual: cost,
        belief: 0.0,
        iterations,
        converged,
        cost_history: history,
    }
}

/// Refines every candidate graph and weights them by `exp(-residual / 2)`.
/// The anchor vertex never moves; all others stay inside the workspace and
/// within the motion radius of their previous estimate.
pub fn optimize_graph(erpmg: &Erpmg, workspace: &Workspace) -> GraphEstimate {
    assert!(!erpmg.graphs.is_empty(), "need at least one candidate graph");
    let mut graphs: Vec<SolvedGraph> = erpmg
        .graphs
        .iter()
        .map(|g| {
            let init = g
                .assignment
                .iter()
                .enumerate()
                .map(|(v, &c)| erpmg.candidates[v][c])
                .collect();
            solve_one(erpmg, init, workspace)
        })
        .collect();
    let min = graphs.iter().map(|g| g.residual).fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for g in &mut graphs {
        g.belief = (-(g.residual - min) / 2.0).exp();
        total += g.belief;
    }
    for g in &mut graphs {
        g.belief /= total;
    }
    let best = graphs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual))
        .map(|(i, _)| i)
        .unwrap_or(0);
    GraphEstimate {
        vertices: erpmg.rpmg.vertices().to_vec(),
        graphs,
        best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{sample_rssi, RssiChannel};
    use crate::geometry::Pose2D;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> RssiChannel {
        RssiChannel {
            shadowing_sigma_db: 0.0,
            ..RssiChannel::default()
        }
    }

    #[test]
    fn inverse_at_reference_and_ten_meters() {
        let ch = RssiChannel::default();
        assert!((rssi_to_range(-40.0, &ch).range - 1.0).abs() < 1e-12);
        assert!((rssi_to_range(-60.0, &ch).range - 10.0).abs() < 1e-9);
        assert!((rssi_to_range(-20.0, &ch).range - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_recovers_distance() {
        let ch = quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [1.0, 1.7, 3.2, 9.9, 42.0] {
            let s = sample_rssi(&ch, &Pose2D::new(0.0, 0.0, 0.0), &Pose2D::new(d, 0.0, 0.0), &mut rng);
            assert!((rssi_to_range(s, &ch).range - d).abs() < 1e-9);
        }
    }

    #[test]
    fn variance_propagation() {
        let ch = RssiChannel::default();
        let r = rssi_to_range(-60.0, &ch);
        let sd = 10.0 * std::f64::consts::LN_10 * 2.0 / 20.0;
        assert!((r.variance - sd * sd).abs() < 1e-9);
    }

    fn meas(a: RobotId, b: RobotId, rssi: f64) -> RangeMeasurement {
        RangeMeasurement::from_rssi(a, b, rssi, &RssiChannel::default())
    }

    #[test]
    fn complete_triangle() {
        let g = build_rpmg(&[0, 1, 2], &[meas(0, 1, -50.0), meas(1, 2, -52.0), meas(0, 2, -51.0)], -75.0);
        assert_eq!(g.edges().len(), 3);
        for i in 0..3 {
            assert_eq!(g.edge_count(i), 2);
        }
        assert!(!g.is_disconnected());
        let a = g.adjacency();
        for i in 0..3 {
            assert_eq!(a[(i, i)], 0.0);
            for j in 0..3 {
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
    }

    #[test]
    fn out_of_range_robot_disconnects() {
        let g = build_rpmg(&[0, 1, 2], &[meas(0, 1, -50.0), meas(1, 2, -90.0), meas(0, 2, -91.0)], -75.0);
        assert_eq!(g.component_count(), 2);
        assert!(g.is_disconnected());
    }

    #[test]
    fn both_directions_are_averaged() {
        let g = build_rpmg(&[0, 1], &[meas(0, 1, -60.0), meas(1, 0, -60.0)], -75.0);
        assert_eq!(g.edges().len(), 1);
        assert!((g.edges()[0].range - 10.0).abs() < 1e-9);
    }

    #[test]
    fn candidate_graph_counts() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(3.0, 0.0), Point2::new(1.5, 2.6)];
        let ms = [meas(0, 1, -50.0), meas(1, 2, -50.0), meas(0, 2, -50.0)];
        let g = build_rpmg(&[0, 1, 2], &ms, -75.0);
        let one = expand_to_erpmg(&g, &pts, 0, &MotionBound::default(), &ErpmgConfig { k: 1, ..Default::default() });
        assert_eq!(one.graphs.len(), 1);
        let two = expand_to_erpmg(&g, &pts, 0, &MotionBound::default(), &ErpmgConfig { k: 2, ..Default::default() });
        assert!(two.graphs.len() <= 8);
        for c in &two.candidates {
            assert!(!c.is_empty() && c.len() <= 2);
        }
    }

    #[test]
    fn isolated_robot_keeps_prediction() {
        let g = build_rpmg(&[4], &[], -75.0);
        let e = expand_to_erpmg(&g, &[Point2::new(2.0, 3.0)], 4, &MotionBound::default(), &ErpmgConfig::default());
        let est = optimize_graph(&e, &Workspace::unbounded());
        let only = est.estimates();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].position, Point2::new(2.0, 3.0));
        assert!((only[0].belief - 1.0).abs() < 1e-15);
    }
}
