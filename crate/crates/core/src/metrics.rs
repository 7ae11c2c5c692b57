//! Evaluation against ground truth: map SSIM, trajectory errors, coverage and
//! the machine-readable run report.

use crate::geometry::{GridGeometry, Point2};
use crate::world::{CellState, WorldMap};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("grid geometry mismatch")]
    GeometryMismatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
}

const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter over valid windows only.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w + 1 - WINDOW;
    let oh = h + 1 - WINDOW;
    let mut tmp = vec![0.0; ow * h];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = (0..WINDOW).map(|i| k[i] * img[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..WINDOW).map(|i| k[i] * tmp[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM of two images on the same grid with dynamic range 1.
///
/// Gaussian 11x11 window (sigma 1.5), `C1 = 0.01^2`, `C2 = 0.03^2`. Grids
/// smaller than the window are compared with a single global window.
pub fn ssim(a: &[f64], b: &[f64], geometry: &GridGeometry) -> Result<f64, MetricsError> {
    let (w, h) = (geometry.width, geometry.height);
    if a.len() != geometry.len() || b.len() != geometry.len() {
        return Err(MetricsError::GeometryMismatch);
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let c1 = 0.01f64.powi(2);
    let c2 = 0.03f64.powi(2);
    let index = |mx: f64, my: f64, sxx: f64, syy: f64, sxy: f64| {
        ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    };
    if w < WINDOW || h < WINDOW {
        let n = a.len() as f64;
        let mx = a.iter().sum::<f64>() / n;
        let my = b.iter().sum::<f64>() / n;
        let sxx = a.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n;
        let syy = b.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n;
        let sxy = a.iter().zip(b).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        return Ok(index(mx, my, sxx, syy, sxy));
    }
    let k = gaussian_kernel();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mx = filter_valid(a, w, h, &k);
    let my = filter_valid(b, w, h, &k);
    let exx = filter_valid(&sq(a), w, h, &k);
    let eyy = filter_valid(&sq(b), w, h, &k);
    let exy = filter_valid(&prod, w, h, &k);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            index(
                mx[i],
                my[i],
                exx[i] - mx[i] * mx[i],
                eyy[i] - my[i] * my[i],
                exy[i] - mx[i] * my[i],
            )
        })
        .sum();
    Ok(total / n as f64)
}

/// Ground truth as 1 = occupied, 0 = free.
pub fn truth_image(world: &WorldMap) -> Vec<f64> {
    world
        .states()
        .iter()
        .map(|s| if *s == CellState::Occupied { 1.0 } else { 0.0 })
        .collect()
}

/// Occupancy probabilities thresholded at 0.5 (occupied iff >= 0.5).
pub fn binarize(occupancy: &[f64]) -> Vec<f64> {
    occupancy.iter().map(|p| if *p >= 0.5 { 1.0 } else { 0.0 }).collect()
}

/// SSIM of a thresholded occupancy map against the true map.
pub fn map_ssim(occupancy: &[f64], truth: &WorldMap) -> Result<f64, MetricsError> {
    ssim(&binarize(occupancy), &truth_image(truth), truth.geometry())
}

/// Rigid 2-D alignment (rotation + translation, no scale) minimizing squared error.
/// Returns `(rotation angle, translation)` mapping `source` onto `target`.
pub fn umeyama_2d(source: &[Point2], target: &[Point2]) -> Result<(f64, Point2), MetricsError> {
    if source.len() != target.len() {
        return Err(MetricsError::LengthMismatch(source.len(), target.len()));
    }
    if source.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = source.len() as f64;
    let ms = source.iter().fold(Point2::default(), |a, p| a.add(p)).scale(1.0 / n);
    let mt = target.iter().fold(Point2::default(), |a, p| a.add(p)).scale(1.0 / n);
    let (mut dot, mut cross) = (0.0, 0.0);
    for (s, t) in source.iter().zip(target) {
        let a = s.sub(&ms);
        let b = t.sub(&mt);
        dot += a.dot(&b);
        cross += a.cross(&b);
    }
    let angle = cross.atan2(dot);
    let (sn, cs) = angle.sin_cos();
    let rotated = Point2::new(cs * ms.x - sn * ms.y, sn * ms.x + cs * ms.y);
    Ok((angle, mt.sub(&rotated)))
}

/// RMSE of positions after rigid alignment of `estimated` onto `truth`.
pub fn ate(estimated: &[Point2], truth: &[Point2]) -> Result<f64, MetricsError> {
    let (angle, t) = umeyama_2d(estimated, truth)?;
    let (s, c) = angle.sin_cos();
    let sum: f64 = estimated
        .iter()
        .zip(truth)
        .map(|(e, g)| Point2::new(c * e.x - s * e.y + t.x, s * e.x + c * e.y + t.y).distance_sq(g))
        .sum();
    Ok((sum / estimated.len() as f64).sqrt())
}

/// Mean Euclidean error without alignment.
pub fn ale(estimated: &[Point2], truth: &[Point2]) -> Result<f64, MetricsError> {
    if estimated.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(estimated.len(), truth.len()));
    }
    if estimated.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(estimated.iter().zip(truth).map(|(e, g)| e.distance(g)).sum::<f64>() / estimated.len() as f64)
}

/// Percentage of truly free cells that are flagged explored.
pub fn explored_pct(explored: &[bool], truth: &WorldMap) -> Result<f64, MetricsError> {
    if explored.len() != truth.geometry().len() {
        return Err(MetricsError::GeometryMismatch);
    }
    let free = truth.free_cell_count();
    if free == 0 {
        return Ok(0.0);
    }
    let hit = explored
        .iter()
        .zip(truth.states())
        .filter(|(e, s)| **e && **s == CellState::Free)
        .count();
    Ok(100.0 * hit as f64 / free as f64)
}

/// Per-robot results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReport {
    pub id: usize,
    pub distance_m: f64,
    pub explored_pct: f64,
    pub ate_m: f64,
    pub ale_m: f64,
}

/// One row of the per-step series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub step: usize,
    pub explored_pct: f64,
    pub ale_m: f64,
    pub distance_m: f64,
    /// Team mean of the pose-belief entropy, nats.
    pub entropy_nats: f64,
    /// Team mean of the last update's log evidence.
    pub log_evidence: f64,
}

/// Summary of a run, serialized as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub robots: usize,
    pub mode: String,
    pub steps: usize,
    pub completed: bool,
    /// Simulated seconds until completion or the step budget.
    pub mapping_time_s: f64,
    pub total_distance_m: f64,
    pub explored_pct: f64,
    pub map_ssim: f64,
    /// SSIM of the raw occupancy probabilities, a secondary diagnostic.
    pub map_ssim_unthresholded: f64,
    pub ate_m: f64,
    pub ale_m: f64,
    pub per_robot: Vec<RobotReport>,
    /// File holding the per-step series.
    pub series: String,
    #[serde(skip)]
    pub samples: Vec<StepSample>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn series_csv(&self) -> String {
        let mut s = String::from("step,explored_pct,ale_m,distance_m,entropy_nats,log_evidence\n");
        for r in &self.samples {
            let _ = writeln!(
                s,
                "{},{:.4},{:.6},{:.4},{:.6},{:.6}",
                r.step, r.explored_pct, r.ale_m, r.distance_m, r.entropy_nats, r.log_evidence
            );
        }
        s
    }
}

/// Side-by-side table of several reports.
pub fn comparison_table(runs: &[(String, RunReport)]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<24}", "metric");
    for (name, _) in runs {
        let _ = write!(s, "{name:>16}");
    }
    s.push('\n');
    let rows: [(&str, fn(&RunReport) -> f64); 6] = [
        ("mapping time (s)", |r| r.mapping_time_s),
        ("total distance (m)", |r| r.total_distance_m),
        ("explored (%)", |r| r.explored_pct),
        ("map SSIM", |r| r.map_ssim),
        ("ATE (m)", |r| r.ate_m),
        ("ALE (m)", |r| r.ale_m),
    ];
    for (label, f) in rows {
        let _ = write!(s, "{label:<24}");
        for (_, r) in runs {
            let _ = write!(s, "{:>16.3}", f(r));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssim_identity_and_complement() {
        let world = WorldMap::bookstore(0.25);
        let t = truth_image(&world);
        let g = world.geometry();
        assert!((ssim(&t, &t, g).unwrap() - 1.0).abs() < 1e-12);
        let inv: Vec<f64> = t.iter().map(|v| 1.0 - v).collect();
        let comp = ssim(&inv, &t, g).unwrap();
        assert!(comp < 0.1, "complement {comp}");
        let free = vec![0.0; t.len()];
        let mid = ssim(&free, &t, g).unwrap();
        assert!(comp < mid && mid < 1.0);
    }

    #[test]
    fn ssim_rejects_mismatch() {
        let g = GridGeometry::new(4, 4, 1.0);
        assert_eq!(ssim(&[0.0; 16], &[0.0; 15], &g), Err(MetricsError::GeometryMismatch));
    }

    #[test]
    fn ate_ignores_rigid_motion() {
        let truth: Vec<Point2> = (0..20).map(|i| Point2::new(i as f64 * 0.3, (i as f64 * 0.4).sin())).collect();
        let (s, c) = 0.7f64.sin_cos();
        let moved: Vec<Point2> = truth
            .iter()
            .map(|p| Point2::new(c * p.x - s * p.y + 3.0, s * p.x + c * p.y - 1.0))
            .collect();
        assert!(ate(&moved, &truth).unwrap() < 1e-9);
        assert!(ale(&moved, &truth).unwrap() > 1.0);
    }

    #[test]
    fn ale_arithmetic() {
        let truth = vec![Point2::default(); 4];
        let est = vec![
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 3.0),
            Point2::new(0.0, 3.0),
        ];
        assert!((ale(&est, &truth).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(ale(&est[..3], &truth), Err(MetricsError::LengthMismatch(3, 4))));
    }

    #[test]
    fn explored_counts() {
        let world = WorldMap::empty_room(3.0, 3.0, 1.0).unwrap();
        let free: Vec<bool> = world.states().iter().map(|s| *s == CellState::Free).collect();
        assert_eq!(explored_pct(&free, &world).unwrap(), 100.0);
        assert_eq!(explored_pct(&vec![false; free.len()], &world).unwrap(), 0.0);
    }
}
