//! Gaussian-process field models and their neighbor-weighted fusion.
//!
//! Each robot fits a GP over the field values it has sampled, shares the
//! training set with connected peers, and fuses its own model with the
//! received ones into a per-cell Gaussian mixture. The mixture weights come
//! from a short EM loop that scores every model against the robot's own
//! observations. Thresholding the fused variance yields the exploration grid.

use crate::geometry::{Cell, GridGeometry, Point2};
use crate::io;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("a GP needs at least one training sample")]
    Empty,
    #[error("kernel parameters must be positive")]
    InvalidKernel,
    #[error("Gram matrix is not positive definite even with ridge {ridge:e}")]
    SingularGram { ridge: f64 },
}

/// Squared-exponential covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            lengthscale: 1.0,
            signal_var: 1.0,
            noise_var: 0.1,
        }
    }
}

impl Kernel {
    pub fn covariance(&self, a: &Point2, b: &Point2) -> f64 {
        self.signal_var * (-0.5 * a.distance_sq(b) / (self.lengthscale * self.lengthscale)).exp()
    }

    /// Variance of a fresh observation under the prior.
    pub fn prior_variance(&self) -> f64 {
        self.signal_var + self.noise_var
    }

    fn is_valid(&self) -> bool {
        self.lengthscale > 0.0 && self.signal_var > 0.0 && self.noise_var > 0.0
    }
}

/// Posterior mean and predictive variance at one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// A fitted GP. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Point2>,
    targets: Vec<f64>,
    kernel: Kernel,
    target_mean: f64,
    ridge: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

// The factorization is a pure function of the fields compared here.
impl PartialEq for GpModel {
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs && self.targets == other.targets && self.kernel == other.kernel && self.ridge == other.ridge
    }
}

const DUPLICATE_JITTER: f64 = 1e-6;
const MAX_RIDGE: f64 = 1e-4;

/// Fits an exact GP. Targets are centered on their empirical mean and the
/// zero-mean GP is fit to the residuals.
pub fn fit_gp(samples: &[(Point2, f64)], kernel: Kernel) -> Result<GpModel, GpError> {
    if samples.is_empty() {
        return Err(GpError::Empty);
    }
    if !kernel.is_valid() {
        return Err(GpError::InvalidKernel);
    }
    let mut inputs: Vec<Point2> = Vec::with_capacity(samples.len());
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (p, _) in samples {
        let key = (p.x.to_bits(), p.y.to_bits());
        let dup = seen.entry(key).or_insert(0);
        inputs.push(Point2::new(p.x + DUPLICATE_JITTER * *dup as f64, p.y));
        *dup += 1;
    }
    let targets: Vec<f64> = samples.iter().map(|(_, y)| *y).collect();
    let target_mean = targets.iter().sum::<f64>() / targets.len() as f64;

    let n = inputs.len();
    let gram = DMatrix::from_fn(n, n, |i, j| kernel.covariance(&inputs[i], &inputs[j]));
    let mut ridge = 0.0;
    let chol = loop {
        let mut k = gram.clone();
        for i in 0..n {
            k[(i, i)] += kernel.noise_var + ridge;
        }
        if let Some(c) = Cholesky::new(k) {
            break c;
        }
        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 10.0 };
        if ridge > MAX_RIDGE * 1.000001 {
            return Err(GpError::SingularGram { ridge: MAX_RIDGE });
        }
    };
    let centered = DVector::from_iterator(n, targets.iter().map(|y| y - target_mean));
    let alpha = chol.solve(&centered);
    Ok(GpModel {
        inputs,
        targets,
        kernel,
        target_mean,
        ridge,
        chol,
        alpha,
    })
}

impl GpModel {
    pub fn inputs(&self) -> &[Point2] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Mean the posterior reverts to far from the data.
    pub fn prior_mean(&self) -> f64 {
        self.target_mean
    }

    /// Ridge added to the diagonal beyond `noise_var` to make the Gram matrix factor.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Training set as `(position, value)` pairs, e.g. to share with peers.
    pub fn samples(&self) -> Vec<(Point2, f64)> {
        self.inputs.iter().copied().zip(self.targets.iter().copied()).collect()
    }

    /// Exact posterior at each query.
    pub fn predict(&self, queries: &[Point2]) -> Vec<Prediction> {
        if queries.is_empty() {
            return Vec::new();
        }
        let n = self.inputs.len();
        let q = queries.len();
        let cross = DMatrix::from_fn(n, q, |i, j| self.kernel.covariance(&self.inputs[i], &queries[j]));
        let mean = cross.tr_mul(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&cross)
            .expect("cholesky factor is invertible");
        let s2 = self.kernel.signal_var;
        (0..q)
            .map(|j| {
                let explained: f64 = v.column(j).iter().map(|x| x * x).sum();
                let latent = (s2 - explained).clamp(1e-12 * s2, s2);
                Prediction {
                    mean: self.target_mean + mean[j],
                    variance: latent + self.kernel.noise_var,
                }
            })
            .collect()
    }
}

/// Free-function form of [`GpModel::predict`].
pub fn predict(model: &GpModel, queries: &[Point2]) -> Vec<Prediction> {
    model.predict(queries)
}

/// Grid-binned downsampling: samples are averaged per `bin_size` square bin
/// and, past `cap` bins, only the bins nearest `center` are kept.
pub fn bin_samples(samples: &[(Point2, f64)], bin_size: f64, cap: usize, center: &Point2) -> Vec<(Point2, f64)> {
    let mut bins: BTreeMap<(i64, i64), (f64, f64, f64, usize)> = BTreeMap::new();
    for (p, y) in samples {
        let key = ((p.x / bin_size).floor() as i64, (p.y / bin_size).floor() as i64);
        let e = bins.entry(key).or_insert((0.0, 0.0, 0.0, 0));
        e.0 += p.x;
        e.1 += p.y;
        e.2 += y;
        e.3 += 1;
    }
    let mut out: Vec<(Point2, f64)> = bins
        .values()
        .map(|(sx, sy, sv, n)| {
            let n = *n as f64;
            (Point2::new(sx / n, sy / n), sv / n)
        })
        .collect();
    if out.len() > cap {
        // stable sort keeps bin order among equal distances
        out.sort_by(|a, b| a.0.distance_sq(center).total_cmp(&b.0.distance_sq(center)));
        out.truncate(cap);
    }
    out
}

/// Query cells for fusion, positioned at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<Cell>,
}

impl QueryGrid {
    pub fn new(geometry: GridGeometry, cells: Vec<Cell>) -> Self {
        Self { geometry, cells }
    }

    pub fn full(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            cells: geometry.cells().collect(),
        }
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.cells.iter().map(|c| self.geometry.center(*c)).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// EM iterations for the mixture weights.
    pub em_iters: usize,
    /// A model supports a cell if one of its inputs lies within this distance.
    pub support_radius: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            em_iters: 5,
            support_radius: 1.0,
        }
    }
}

/// Per-cell mixture weights; `weights[c][j]` is the weight of model `j` at cell `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights {
    pub weights: Vec<Vec<f64>>,
    /// Mixing proportions after the last M-step.
    pub proportions: Vec<f64>,
}

impl MixtureWeights {
    /// Average weight each source carries over the grid.
    pub fn source_share(&self) -> Vec<f64> {
        let n = self.proportions.len();
        let mut share = vec![0.0; n];
        if self.weights.is_empty() {
            return share;
        }
        for row in &self.weights {
            for (s, w) in share.iter_mut().zip(row) {
                *s += w;
            }
        }
        let cells = self.weights.len() as f64;
        share.iter_mut().for_each(|s| *s /= cells);
        share
    }
}

fn support_mask(model: &GpModel, grid: &QueryGrid, radius: f64) -> Vec<bool> {
    let g = &grid.geometry;
    let mut stamped = vec![false; g.len()];
    for p in model.inputs() {
        for cell in g.cells_within(p, radius) {
            stamped[g.index(cell)] = true;
        }
    }
    grid.cells.iter().map(|c| stamped[g.index(*c)]).collect()
}

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + (std::f64::consts::TAU * var).ln())
}

/// EM over per-cell responsibilities. `preds[j][c]` may be `None` only where
/// `support[j][c]` is false and some other model supports the cell.
fn em_weights(
    preds: &[Vec<Option<Prediction>>],
    support: &[Vec<bool>],
    observations: &[Option<f64>],
    iters: usize,
) -> MixtureWeights {
    let n = preds.len();
    let cells = support.first().map_or(0, |s| s.len());
    let mut proportions = vec![1.0 / n as f64; n];
    let mut weights = vec![vec![0.0; n]; cells];
    if n == 1 {
        weights.iter_mut().for_each(|w| w[0] = 1.0);
        return MixtureWeights {
            weights,
            proportions: vec![1.0],
        };
    }
    let active = |c: usize| -> Vec<bool> {
        let any = (0..n).any(|j| support[j][c]);
        (0..n).map(|j| if any { support[j][c] } else { true }).collect()
    };
    let masks: Vec<Vec<bool>> = (0..cells).map(active).collect();
    for _ in 0..iters.max(1) {
        // E-step
        for c in 0..cells {
            let mask = &masks[c];
            let mut logw = vec![f64::NEG_INFINITY; n];
            for j in 0..n {
                if !mask[j] || proportions[j] <= 0.0 {
                    continue;
                }
                let mut lw = proportions[j].ln();
                if let (Some(y), Some(p)) = (observations.get(c).copied().flatten(), preds[j][c]) {
                    lw += normal_log_pdf(y, p.mean, p.variance);
                }
                logw[j] = lw;
            }
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let row = &mut weights[c];
            if !max.is_finite() {
                let k = mask.iter().filter(|m| **m).count() as f64;
                for j in 0..n {
                    row[j] = if mask[j] { 1.0 / k } else { 0.0 };
                }
                continue;
            }
            let mut total = 0.0;
            for j in 0..n {
                row[j] = (logw[j] - max).exp();
                total += row[j];
            }
            row.iter_mut().for_each(|w| *w /= total);
        }
        // M-step
        let mut mass = vec![0.0; n];
        for row in &weights {
            for (m, w) in mass.iter_mut().zip(row) {
                *m += w;
            }
        }
        let total: f64 = mass.iter().sum();
        if total > 0.0 {
            for j in 0..n {
                proportions[j] = mass[j] / total;
            }
        }
    }
    MixtureWeights { weights, proportions }
}

fn predictions_on_support(
    models: &[&GpModel],
    grid: &QueryGrid,
    radius: f64,
) -> (Vec<Vec<Option<Prediction>>>, Vec<Vec<bool>>) {
    let positions = grid.positions();
    let support: Vec<Vec<bool>> = models.iter().map(|m| support_mask(m, grid, radius)).collect();
    let orphan: Vec<bool> = (0..grid.len()).map(|c| support.iter().all(|s| !s[c])).collect();
    let preds = models
        .iter()
        .zip(&support)
        .map(|(m, s)| {
            let wanted: Vec<usize> = (0..grid.len()).filter(|&c| s[c] || orphan[c]).collect();
            let q: Vec<Point2> = wanted.iter().map(|&c| positions[c]).collect();
            let mut out = vec![None; grid.len()];
            for (c, p) in wanted.into_iter().zip(m.predict(&q)) {
                out[c] = Some(p);
            }
            out
        })
        .collect();
    (preds, support)
}

/// Per-cell weights of each model. `observations[c]` is the robot's own
/// measurement at query cell `c`, if any; it drives the E-step likelihood.
pub fn compute_mixture_weights(
    models: &[&GpModel],
    grid: &QueryGrid,
    observations: &[Option<f64>],
    config: &FusionConfig,
) -> MixtureWeights {
    assert!(!models.is_empty(), "need at least one model");
    let (preds, support) = predictions_on_support(models, grid, config.support_radius);
    em_weights(&preds, &support, observations, config.em_iters)
}

/// Gaussian-mixture fusion of the local model with received ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedField {
    pub geometry: GridGeometry,
    pub cells: Vec<Cell>,
    pub weights: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Whether any model supports the cell.
    pub in_support: Vec<bool>,
    /// Variance the field would have with no data at all.
    pub prior_variance: f64,
}

impl FusedField {
    /// Assembles a field from per-cell moments and single-source weights.
    pub fn from_moments(
        geometry: GridGeometry,
        cells: Vec<Cell>,
        mean: Vec<f64>,
        variance: Vec<f64>,
        prior_variance: f64,
    ) -> Self {
        let n = cells.len();
        assert_eq!(mean.len(), n);
        assert_eq!(variance.len(), n);
        Self {
            geometry,
            cells,
            weights: vec![vec![1.0]; n],
            mean,
            variance,
            in_support: vec![true; n],
            prior_variance,
        }
    }

    /// Average mixture weight per source.
    pub fn source_share(&self) -> Vec<f64> {
        MixtureWeights {
            proportions: self.weights.first().map(|w| vec![0.0; w.len()]).unwrap_or_default(),
            weights: self.weights.clone(),
        }
        .source_share()
    }
}

/// Mixture moments from per-component moments and weights.
pub fn mixture_moments(weights: &[f64], components: &[Prediction]) -> Prediction {
    let mut mean = 0.0;
    for (w, p) in weights.iter().zip(components) {
        if *w > 0.0 {
            mean += w * p.mean;
        }
    }
    let mut variance = 0.0;
    for (w, p) in weights.iter().zip(components) {
        if *w > 0.0 {
            variance += w * (p.variance + (p.mean - mean).powi(2));
        }
    }
    Prediction { mean, variance }
}

/// Fuses `local` with `received` on `grid`. With no received models the
/// result is exactly the local posterior.
pub fn fuse_gps(
    local: &GpModel,
    received: &[GpModel],
    grid: &QueryGrid,
    observations: &[Option<f64>],
    config: &FusionConfig,
) -> FusedField {
    let mut models: Vec<&GpModel> = vec![local];
    models.extend(received.iter());
    let (preds, support) = predictions_on_support(&models, grid, config.support_radius);
    let mix = em_weights(&preds, &support, observations, config.em_iters);
    let n_cells = grid.len();
    let mut mean = Vec::with_capacity(n_cells);
    let mut variance = Vec::with_capacity(n_cells);
    let placeholder = Prediction {
        mean: 0.0,
        variance: 0.0,
    };
    for c in 0..n_cells {
        let comps: Vec<Prediction> = preds.iter().map(|p| p[c].unwrap_or(placeholder)).collect();
        let m = mixture_moments(&mix.weights[c], &comps);
        mean.push(m.mean);
        variance.push(m.variance.max(0.0));
    }
    let in_support = (0..n_cells).map(|c| support.iter().any(|s| s[c])).collect();
    FusedField {
        geometry: grid.geometry,
        cells: grid.cells.clone(),
        weights: mix.weights,
        mean,
        variance,
        in_support,
        prior_variance: local.kernel().prior_variance(),
    }
}

/// Per-cell value in [0, 1] on a full grid, with an explored flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    geometry: GridGeometry,
    values: Vec<f64>,
    explored: Vec<bool>,
}

impl BeliefGrid {
    pub fn new(geometry: GridGeometry, initial: f64) -> Self {
        Self {
            geometry,
            values: vec![initial.clamp(0.0, 1.0); geometry.len()],
            explored: vec![false; geometry.len()],
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>, explored: Vec<bool>) -> Self {
        assert_eq!(values.len(), geometry.len());
        assert_eq!(explored.len(), geometry.len());
        Self {
            geometry,
            values: values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            explored,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn value(&self, cell: Cell) -> f64 {
        self.values[self.geometry.index(cell)]
    }

    pub fn set_value(&mut self, cell: Cell, v: f64) {
        let i = self.geometry.index(cell);
        self.values[i] = v.clamp(0.0, 1.0);
    }

    pub fn is_explored(&self, cell: Cell) -> bool {
        self.explored[self.geometry.index(cell)]
    }

    pub fn set_explored(&mut self, cell: Cell, explored: bool) {
        let i = self.geometry.index(cell);
        self.explored[i] = explored;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn explored_flags(&self) -> &[bool] {
        &self.explored
    }

    pub fn explored_count(&self) -> usize {
        self.explored.iter().filter(|e| **e).count()
    }

    /// Keeps cells explored once they have been; the value follows `other`
    /// wherever `other` is explored.
    pub fn accumulate(&mut self, other: &BeliefGrid) {
        assert_eq!(self.geometry, other.geometry);
        for i in 0..self.values.len() {
            if other.explored[i] {
                self.explored[i] = true;
                self.values[i] = self.values[i].max(other.values[i]);
            }
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        io::grid_to_pgm(&self.geometry, |c| io::unit_to_gray(self.value(c)))
    }

    pub fn to_csv(&self) -> String {
        io::grid_to_csv(&self.geometry, &["belief", "explored"], |c| {
            vec![self.value(c), if self.is_explored(c) { 1.0 } else { 0.0 }]
        })
    }
}

/// Normalized confidence of a fused cell: 1 at zero variance, 0 at the prior.
pub fn normalized_belief(variance: f64, prior_variance: f64) -> f64 {
    (1.0 - variance / prior_variance).clamp(0.0, 1.0)
}

/// Thresholds the fused field: a cell is explored when some model supports it
/// and its normalized belief reaches `theta`.
pub fn exploration_grid(field: &FusedField, theta: f64) -> BeliefGrid {
    let mut grid = BeliefGrid::new(field.geometry, 0.0);
    for (i, cell) in field.cells.iter().enumerate() {
        let b = normalized_belief(field.variance[i], field.prior_variance);
        grid.set_value(*cell, b);
        grid.set_explored(*cell, field.in_support[i] && b >= theta);
    }
    grid
}
