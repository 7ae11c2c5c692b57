//! Test-side oracles. They recompute library results from first principles
//! without calling the code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use seal::geometry::Point2;

/// Exhaustive joint Bayes over (pose hypothesis, binary map) followed by
/// marginalization. Returns (pose posterior, per-cell occupancy posterior).
///
/// `evidence[s]` lists `(cell, e)` seen from hypothesis `s`; `alpha` and
/// `sigma` define `p(e|g) = alpha N(e; g, sigma^2) + 1 - alpha`.
pub fn brute_force_joint(
    prior_w: &[f64],
    prior_b: &[f64],
    evidence: &[Vec<(usize, f64)>],
    alpha: f64,
    sigma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let cells = prior_b.len();
    let lik = |e: f64, g: f64| {
        let n = (-(e - g).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        alpha * n + 1.0 - alpha
    };
    let mut post_w = vec![0.0; prior_w.len()];
    let mut post_b = vec![0.0; cells];
    let mut total = 0.0;
    for (s, w) in prior_w.iter().enumerate() {
        for map in 0..(1usize << cells) {
            let g = |c: usize| ((map >> c) & 1) as f64;
            let mut p = *w;
            for (c, b) in prior_b.iter().enumerate() {
                p *= if g(c) == 1.0 { *b } else { 1.0 - b };
            }
            for &(c, e) in &evidence[s] {
                p *= lik(e, g(c));
            }
            total += p;
            post_w[s] += p;
            for (c, pb) in post_b.iter_mut().enumerate() {
                if g(c) == 1.0 {
                    *pb += p;
                }
            }
        }
    }
    post_w.iter_mut().for_each(|x| *x /= total);
    post_b.iter_mut().for_each(|x| *x /= total);
    (post_w, post_b)
}

/// Shannon entropy in nats, written out directly.
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Squared-exponential covariance.
pub fn se(a: &Point2, b: &Point2, lengthscale: f64, signal_var: f64) -> f64 {
    let d2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    signal_var * (-0.5 * d2 / (lengthscale * lengthscale)).exp()
}

/// GP posterior by explicit matrix inversion: mean
/// `ybar + k^T (K + s_n I)^-1 (y - ybar)` and predictive variance
/// `s_f - k^T (K + s_n I)^-1 k + s_n`.
pub fn naive_gp(
    x: &[Point2],
    y: &[f64],
    queries: &[Point2],
    lengthscale: f64,
    signal_var: f64,
    noise_var: f64,
) -> Vec<(f64, f64)> {
    let n = x.len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let k = DMatrix::from_fn(n, n, |i, j| {
        se(&x[i], &x[j], lengthscale, signal_var) + if i == j { noise_var } else { 0.0 }
    });
    let kinv = k.try_inverse().expect("gram matrix invertible");
    let r = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let a = &kinv * r;
    queries
        .iter()
        .map(|q| {
            let ks = DVector::from_iterator(n, x.iter().map(|p| se(p, q, lengthscale, signal_var)));
            let mean = ybar + ks.dot(&a);
            let var = signal_var - ks.dot(&(&kinv * &ks)) + noise_var;
            (mean, var)
        })
        .collect()
}

/// First two moments of a mixture of Gaussians.
pub fn mixture(weights: &[f64], comps: &[(f64, f64)]) -> (f64, f64) {
    let mean: f64 = weights.iter().zip(comps).map(|(w, c)| w * c.0).sum();
    let second: f64 = weights.iter().zip(comps).map(|(w, c)| w * (c.1 + c.0 * c.0)).sum();
    (mean, second - mean * mean)
}

fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// O(n^3) hull: a pair (i, j) is an edge when every other point lies on its
/// left or strictly inside the segment. Returns the hull vertex set, sorted.
pub fn brute_hull(points: &[Point2]) -> Vec<(f64, f64)> {
    let mut pts: Vec<Point2> = Vec::new();
    for p in points {
        if !pts.iter().any(|q| q.x == p.x && q.y == p.y) {
            pts.push(*p);
        }
    }
    let n = pts.len();
    let mut verts: Vec<(f64, f64)> = Vec::new();
    if n < 3 {
        // degenerate: endpoints only
        verts = pts.iter().map(|p| (p.x, p.y)).collect();
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let ok = (0..n).all(|k| {
                if k == i || k == j {
                    return true;
                }
                let o = orient(&pts[i], &pts[j], &pts[k]);
                if o > 0.0 {
                    return true;
                }
                if o < 0.0 {
                    return false;
                }
                // collinear: must lie strictly between i and j
                let t = (pts[k].x - pts[i].x) * (pts[j].x - pts[i].x) + (pts[k].y - pts[i].y) * (pts[j].y - pts[i].y);
                let l = (pts[j].x - pts[i].x).powi(2) + (pts[j].y - pts[i].y).powi(2);
                t > 0.0 && t < l
            });
            if ok {
                for p in [pts[i], pts[j]] {
                    if !verts.contains(&(p.x, p.y)) {
                        verts.push((p.x, p.y));
                    }
                }
            }
        }
    }
    verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    verts
}

/// Point in convex polygon (CCW) by edge orientation, tolerance in area units.
pub fn inside_ccw(poly: &[Point2], p: &Point2) -> bool {
    let n = poly.len();
    (0..n).all(|i| orient(&poly[i], &poly[(i + 1) % n], p) >= 0.0)
}

/// Least-squares line fit; returns (slope, intercept, r^2).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}
