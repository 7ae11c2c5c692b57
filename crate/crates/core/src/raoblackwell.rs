//! Rao-Blackwellized joint pose and map belief.
//!
//! The pose belief is a weighted particle set; the map belief is a per-cell
//! occupancy probability. Conditioned on a pose hypothesis the cells are
//! independent, so the exact joint posterior factors into a pose posterior
//! (computed in closed form from per-cell marginal likelihoods) and per-cell
//! posteriors that are mixed by the new pose weights.

use crate::geometry::{wrap_angle, GridGeometry, Point2, Pose2D};
use crate::world::{LidarScan, SensorSpec};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Shannon entropy (nats) of a weight vector. Zero weights contribute nothing.
pub fn pose_entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Odometry noise as velocity standard deviations (m/s, rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub sigma_v: f64,
    pub sigma_w: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            sigma_v: 0.02,
            sigma_w: 0.02,
        }
    }
}

/// Body-frame displacement reported by odometry over one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub distance: f64,
    pub rotation: f64,
}

impl OdometryDelta {
    /// Applies the delta with the midpoint heading.
    pub fn apply(&self, pose: &Pose2D) -> Pose2D {
        let mid = pose.theta + 0.5 * self.rotation;
        Pose2D::new(
            pose.x + self.distance * mid.cos(),
            pose.y + self.distance * mid.sin(),
            pose.theta + self.rotation,
        )
    }
}

/// Weighted particle set over poses.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseBelief {
    particles: Vec<Pose2D>,
    weights: Vec<f64>,
    /// Entropy of the most recent posterior; drives observation confidence.
    last_entropy: f64,
}

impl PoseBelief {
    /// Normalizes `weights`; falls back to uniform if they do not sum to a positive number.
    pub fn new(particles: Vec<Pose2D>, weights: Vec<f64>) -> Self {
        assert!(!particles.is_empty(), "pose belief needs at least one particle");
        assert_eq!(particles.len(), weights.len());
        let mut b = Self {
            particles,
            weights,
            last_entropy: 0.0,
        };
        b.normalize();
        b.last_entropy = pose_entropy(&b.weights);
        b
    }

    pub fn uniform(particles: Vec<Pose2D>) -> Self {
        let n = particles.len();
        Self::new(particles, vec![1.0; n])
    }

    /// `n` identical particles at `pose` (a known start).
    pub fn at(pose: Pose2D, n: usize) -> Self {
        Self::uniform(vec![pose; n.max(1)])
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        if total.is_finite() && total > 0.0 {
            for w in &mut self.weights {
                *w /= total;
            }
        } else {
            let u = 1.0 / self.weights.len() as f64;
            self.weights.iter_mut().for_each(|w| *w = u);
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Pose2D] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn entropy(&self) -> f64 {
        pose_entropy(&self.weights)
    }

    pub fn last_entropy(&self) -> f64 {
        self.last_entropy
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Weighted mean position with circular-mean heading.
    pub fn estimate(&self) -> Pose2D {
        let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
        for (p, w) in self.particles.iter().zip(&self.weights) {
            x += w * p.x;
            y += w * p.y;
            s += w * p.theta.sin();
            c += w * p.theta.cos();
        }
        Pose2D::new(x, y, s.atan2(c))
    }

    /// Propagates every particle through the odometry delta with sampled noise.
    pub fn predict<R: Rng + ?Sized>(&mut self, delta: OdometryDelta, noise: &MotionNoise, dt: f64, rng: &mut R) {
        let nv = Normal::new(0.0, (noise.sigma_v * dt).max(0.0)).expect("finite sigma");
        let nw = Normal::new(0.0, (noise.sigma_w * dt).max(0.0)).expect("finite sigma");
        for p in &mut self.particles {
            let d = OdometryDelta {
                distance: delta.distance + nv.sample(rng),
                rotation: delta.rotation + nw.sample(rng),
            };
            *p = d.apply(p);
        }
    }

    /// Systematic resampling; weights become uniform.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.particles.len();
        let step = 1.0 / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cum = self.weights[0];
        let mut i = 0;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            while u > cum && i + 1 < n {
                i += 1;
                cum += self.weights[i];
            }
            out.push(self.particles[i]);
            u += step;
        }
        self.particles = out;
        self.weights = vec![step; n];
    }

    /// Resamples when the effective sample size drops below `fraction * n`.
    pub fn resample_if_needed<R: Rng + ?Sized>(&mut self, fraction: f64, rng: &mut R) -> bool {
        if self.effective_sample_size() < fraction * self.len() as f64 {
            self.resample(rng);
            true
        } else {
            false
        }
    }

    /// Multiplies weights by an isotropic Gaussian prior on position.
    pub fn reweight_by_position(&mut self, mean: &Point2, sigma: f64) {
        let inv = 1.0 / (2.0 * sigma * sigma);
        let logs: Vec<f64> = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w.ln() - p.position().distance_sq(mean) * inv)
            .collect();
        if let Some(w) = normalize_log(&logs) {
            self.weights = w;
        }
    }

    /// Shifts every particle by `offset` (frame alignment).
    pub fn translate(&mut self, offset: &Point2) {
        for p in &mut self.particles {
            p.x += offset.x;
            p.y += offset.y;
        }
    }

    pub fn set_last_entropy(&mut self, h: f64) {
        self.last_entropy = h;
    }
}

/// Normalizes log-masses; `None` if no entry is finite.
pub fn normalize_log(logs: &[f64]) -> Option<Vec<f64>> {
    let max = logs.iter().copied().filter(|l| l.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = logs
        .iter()
        .map(|l| if l.is_finite() { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / total).collect())
}

/// Per-cell occupancy probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyBelief {
    geometry: GridGeometry,
    values: Vec<f64>,
    hits: Vec<u32>,
}

impl OccupancyBelief {
    pub fn new(geometry: GridGeometry, prior: f64) -> Self {
        Self {
            geometry,
            values: vec![prior; geometry.len()],
            hits: vec![0; geometry.len()],
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), geometry.len());
        Self {
            geometry,
            hits: vec![0; values.len()],
            values,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Number of updates that observed each cell.
    pub fn observation_counts(&self) -> &[u32] {
        &self.hits
    }

    pub fn is_observed(&self, index: usize) -> bool {
        self.hits[index] > 0
    }
}

/// Robust observation model `p(e|g) = alpha * N(e; g, sigma^2) + (1 - alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel {
    pub sigma: f64,
    /// Confidence when the pose belief is certain.
    pub confidence_max: f64,
    /// Map beliefs are clamped into this interval after each update.
    pub belief_bounds: (f64, f64),
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            sigma: 0.2,
            confidence_max: 0.6,
            belief_bounds: (0.02, 0.98),
        }
    }
}

impl ObservationModel {
    /// Observation confidence for a pose belief with entropy `h` over `n` particles.
    pub fn confidence(&self, h: f64, n: usize) -> f64 {
        if n <= 1 {
            return self.confidence_max;
        }
        self.confidence_max * (-h / (n as f64).ln()).exp()
    }

    /// `(p(e|occupied), p(e|free))`.
    pub fn likelihoods(&self, e: f64, alpha: f64) -> (f64, f64) {
        let k = 1.0 / (self.sigma * (2.0 * std::f64::consts::PI).sqrt());
        let g = |mu: f64| k * (-(e - mu).powi(2) / (2.0 * self.sigma * self.sigma)).exp();
        (alpha * g(1.0) + (1.0 - alpha), alpha * g(0.0) + (1.0 - alpha))
    }
}

/// Cell evidence for one pose hypothesis: `(cell index, e)` with e = 1 for a
/// return and 0 for free space along the beam. Sorted by index, one entry per cell.
pub type CellEvidence = Vec<(usize, f64)>;

/// Projects a scan from `pose` onto the grid, using every `stride`-th beam.
pub fn scan_evidence(scan: &LidarScan, spec: &SensorSpec, pose: &Pose2D, geometry: &GridGeometry, stride: usize) -> CellEvidence {
    let stride = stride.max(1);
    let step = geometry.resolution * 0.5;
    let origin = pose.position();
    let mut out: Vec<(usize, f64)> = Vec::new();
    for beam in (0..scan.ranges.len()).step_by(stride) {
        let angle = pose.theta + spec.beam_offset(beam);
        let (s, c) = angle.sin_cos();
        let range = scan.ranges[beam].min(spec.range_max);
        let free_until = if scan.hit[beam] { range - geometry.resolution * 0.5 } else { range };
        let mut t = step;
        while t < free_until {
            if let Some(cell) = geometry.cell_of(&Point2::new(origin.x + t * c, origin.y + t * s)) {
                out.push((geometry.index(cell), 0.0));
            }
            t += step;
        }
        if scan.hit[beam] {
            // a quarter cell past the return so range noise cannot leave the
            // endpoint in the free cell in front of a one-cell wall
            let depth = range + 0.25 * geometry.resolution;
            let end = Point2::new(origin.x + depth * c, origin.y + depth * s);
            if let Some(cell) = geometry.cell_of(&end) {
                out.push((geometry.index(cell), 1.0));
            }
        }
    }
    // a return wins over free-space evidence for the same cell
    out.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
    out.dedup_by_key(|e| e.0);
    out
}

/// Log marginal likelihood of `evidence` given map belief `map`.
fn log_marginal(evidence: &CellEvidence, map: &OccupancyBelief, model: &ObservationModel, alpha: f64) -> f64 {
    evidence
        .iter()
        .map(|&(i, e)| {
            let b = map.values[i];
            let (l1, l0) = model.likelihoods(e, alpha);
            (l1 * b + l0 * (1.0 - b)).ln()
        })
        .sum()
}

/// Unnormalized log posterior mass of every particle: `ln w + ln p(z | x, b)`.
pub fn sample_weights(pose: &PoseBelief, evidence: &[CellEvidence], map: &OccupancyBelief, model: &ObservationModel) -> Vec<f64> {
    assert_eq!(evidence.len(), pose.len(), "one evidence set per particle");
    let alpha = model.confidence(pose.last_entropy, pose.len());
    pose.weights
        .iter()
        .zip(evidence)
        .map(|(w, ev)| w.ln() + log_marginal(ev, map, model, alpha))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    /// Weights could not be normalized and were reset to uniform.
    pub degenerate: bool,
    pub alpha: f64,
    pub entropy: f64,
    pub log_evidence: f64,
}

/// Replaces the pose weights with their posterior. Returns the report; on a
/// degenerate posterior the weights fall back to uniform.
pub fn update_pose_belief(pose: &mut PoseBelief, log_masses: &[f64]) -> UpdateReport {
    let max = log_masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_evidence = if max.is_finite() {
        max + log_masses.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    } else {
        f64::NEG_INFINITY
    };
    let degenerate = match normalize_log(log_masses) {
        Some(w) if w.iter().all(|x| x.is_finite()) => {
            pose.weights = w;
            false
        }
        _ => {
            let n = pose.weights.len();
            pose.weights = vec![1.0 / n as f64; n];
            true
        }
    };
    pose.last_entropy = pose.entropy();
    UpdateReport {
        degenerate,
        alpha: 0.0,
        entropy: pose.last_entropy,
        log_evidence,
    }
}

/// Per-cell posterior mixed over pose hypotheses with the given posterior weights.
pub fn update_map_belief(
    map: &mut OccupancyBelief,
    posterior: &[f64],
    evidence: &[CellEvidence],
    model: &ObservationModel,
    alpha: f64,
) {
    assert_eq!(posterior.len(), evidence.len());
    // b' = b + sum_s w_s (b_s' - b) over the cells hypothesis s observed
    let mut delta: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    let mut seen: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (w, ev) in posterior.iter().zip(evidence) {
        if *w == 0.0 {
            continue;
        }
        for &(i, e) in ev {
            let b = map.values[i];
            let (l1, l0) = model.likelihoods(e, alpha);
            let post = l1 * b / (l1 * b + l0 * (1.0 - b));
            *delta.entry(i).or_insert(0.0) += w * (post - b);
            *seen.entry(i).or_insert(0.0) += w;
        }
    }
    let (lo, hi) = model.belief_bounds;
    for (i, d) in delta {
        map.values[i] = (map.values[i] + d).clamp(lo, hi);
        if seen[&i] >= 0.5 {
            map.hits[i] = map.hits[i].saturating_add(1);
        }
    }
}

/// Joint belief `p(x, g)` factored as particles plus per-cell occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBelief {
    pub pose: PoseBelief,
    pub map: OccupancyBelief,
}

/// Exact Bayes update of the joint belief with the per-particle evidence.
pub fn joint_update(belief: &mut JointBelief, evidence: &[CellEvidence], model: &ObservationModel) -> UpdateReport {
    let alpha = model.confidence(belief.pose.last_entropy, belief.pose.len());
    let logs = sample_weights(&belief.pose, evidence, &belief.map, model);
    let mut report = update_pose_belief(&mut belief.pose, &logs);
    report.alpha = alpha;
    let weights = belief.pose.weights.clone();
    update_map_belief(&mut belief.map, &weights, evidence, model, alpha);
    report
}

/// Evidence for every particle of `pose` from one scan.
pub fn particle_evidence(
    scan: &LidarScan,
    spec: &SensorSpec,
    pose: &PoseBelief,
    geometry: &GridGeometry,
    stride: usize,
) -> Vec<CellEvidence> {
    pose.particles
        .iter()
        .map(|p| scan_evidence(scan, spec, p, geometry, stride))
        .collect()
}

/// Heading difference helper for tests and metrics.
pub fn heading_error(a: &Pose2D, b: &Pose2D) -> f64 {
    wrap_angle(a.theta - b.theta).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn entropy_limits() {
        let n = 25;
        assert!((pose_entropy(&vec![1.0; n]) - (n as f64).ln()).abs() < 1e-12);
        let mut d = vec![0.0; n];
        d[3] = 1.0;
        assert_eq!(pose_entropy(&d), 0.0);
    }

    #[test]
    fn confidence_decreases_with_entropy() {
        let m = ObservationModel::default();
        assert!((m.confidence(0.0, 25) - 0.6).abs() < 1e-15);
        assert!(m.confidence(1.0, 25) > m.confidence(2.0, 25));
        assert!((m.confidence((25f64).ln(), 25) - 0.6 / std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn circular_mean_heading() {
        let b = PoseBelief::uniform(vec![Pose2D::new(0.0, 0.0, 3.1), Pose2D::new(2.0, 0.0, -3.1)]);
        let e = b.estimate();
        assert!((e.x - 1.0).abs() < 1e-12);
        assert!(e.theta.abs() > 3.1);
    }

    #[test]
    fn systematic_resampling_follows_weights() {
        let poses: Vec<Pose2D> = (0..4).map(|i| Pose2D::new(i as f64, 0.0, 0.0)).collect();
        let mut b = PoseBelief::new(poses, vec![0.0, 0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.resample(&mut rng);
        assert!(b.particles().iter().all(|p| p.x == 2.0));
        assert!((b.effective_sample_size() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_masses_reset_to_uniform() {
        let mut b = PoseBelief::new(vec![Pose2D::default(); 3], vec![0.2, 0.3, 0.5]);
        let r = update_pose_belief(&mut b, &[f64::NEG_INFINITY; 3]);
        assert!(r.degenerate);
        assert!(b.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn evidence_marks_hit_and_free() {
        let g = GridGeometry::new(20, 20, 0.25);
        let spec = SensorSpec {
            fov: 0.0,
            beam_count: 1,
            ..SensorSpec::default()
        };
        let pose = Pose2D::new(0.6, 2.6, 0.0);
        let scan = LidarScan {
            origin: pose,
            ranges: vec![2.0],
            hit: vec![true],
        };
        let ev = scan_evidence(&scan, &spec, &pose, &g, 1);
        let hit = g.index(g.cell_of(&Point2::new(2.6, 2.6)).unwrap());
        assert!(ev.iter().any(|&(i, e)| i == hit && e == 1.0));
        assert_eq!(ev.iter().filter(|e| e.1 == 1.0).count(), 1);
        assert!(ev.iter().filter(|e| e.1 == 0.0).count() >= 6);
    }

    #[test]
    fn consistent_particle_wins() {
        let g = GridGeometry::new(4, 1, 1.0);
        let mut map = OccupancyBelief::new(g, 0.5);
        map.values = vec![0.05, 0.05, 0.95, 0.05];
        let pose = PoseBelief::uniform(vec![Pose2D::default(); 2]);
        let mut belief = JointBelief { pose, map };
        let ev = vec![vec![(2, 1.0)], vec![(1, 1.0)]];
        joint_update(&mut belief, &ev, &ObservationModel::default());
        assert!(belief.pose.weights()[0] > 0.55);
        assert!(belief.map.value(2) > 0.95);
    }
}
