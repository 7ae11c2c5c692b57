mod common;

use common::brute_hull;
use proptest::prelude::*;
use seal::geometry::{GridGeometry, Point2, Pose2D};
use seal::gp::{fit_gp, mixture_moments, normalized_belief, BeliefGrid, Kernel, Prediction};
use seal::hull::{convex_hull, facets_contain, linearize_hull, polygon_area};
use seal::metrics::{ale, ate, ssim};
use seal::raoblackwell::{
    joint_update, normalize_log, pose_entropy, JointBelief, ObservationModel, OccupancyBelief, PoseBelief,
};
use seal::rloc::rssi_to_range;
use seal::world::RssiChannel;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn point() -> impl Strategy<Value = Point2> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

/// A small joint belief with random weights and map values, plus evidence
/// over its cells for every particle.
fn joint_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<Vec<(usize, f64)>>, f64)> {
    (1usize..6, 1usize..9).prop_flat_map(|(n, cells)| {
        (
            prop::collection::vec(0.01..1.0f64, n),
            prop::collection::vec(0.02..0.98f64, cells),
            prop::collection::vec(prop::collection::btree_map(0..cells, prop::bool::ANY, 0..=cells), n),
            0.0..3.0f64,
        )
            .prop_map(|(w, b, ev, h)| {
                let ev = ev
                    .into_iter()
                    .map(|m| m.into_iter().map(|(c, hit)| (c, if hit { 1.0 } else { 0.0 })).collect())
                    .collect();
                (w, b, ev, h)
            })
    })
}

proptest! {
    #[test]
    fn joint_update_keeps_a_distribution((w, b, ev, h) in joint_case()) {
        let n = w.len();
        let g = GridGeometry::new(b.len(), 1, 1.0);
        let mut pose = PoseBelief::new(vec![Pose2D::default(); n], w);
        pose.set_last_entropy(h.min((n as f64).ln()));
        let mut belief = JointBelief { pose, map: OccupancyBelief::from_values(g, b) };
        let model = ObservationModel::default();
        let report = joint_update(&mut belief, &ev, &model);
        let weights = belief.pose.weights();
        prop_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(weights.iter().all(|x| *x >= 0.0));
        prop_assert!(report.entropy >= 0.0 && report.entropy <= (n as f64).ln() + 1e-12);
        let (lo, hi) = model.belief_bounds;
        prop_assert!(belief.map.values().iter().all(|v| *v >= lo && *v <= hi));
        prop_assert!(report.alpha > 0.0 && report.alpha <= model.confidence_max);
    }

    #[test]
    fn entropy_is_bounded(w in prop::collection::vec(0.0..1.0f64, 1..50)) {
        let h = pose_entropy(&w);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (w.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn normalize_log_ignores_a_common_shift(
        logs in prop::collection::vec(-50.0..50.0f64, 1..20),
        shift in -500.0..500.0f64,
    ) {
        let a = normalize_log(&logs).unwrap();
        let shifted: Vec<f64> = logs.iter().map(|l| l + shift).collect();
        let b = normalize_log(&shifted).unwrap();
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn confidence_falls_with_entropy(h1 in 0.0..5.0f64, h2 in 0.0..5.0f64, n in 2usize..100) {
        let model = ObservationModel::default();
        let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let a = model.confidence(lo, n);
        let b = model.confidence(hi, n);
        prop_assert!(b <= a);
        prop_assert!(a <= model.confidence_max && b > 0.0);
    }

    #[test]
    fn likelihoods_stay_positive(e in unit(), alpha in unit()) {
        let (l1, l0) = ObservationModel::default().likelihoods(e, alpha);
        prop_assert!(l1 > 0.0 && l0 > 0.0);
        prop_assert!(l1 >= 1.0 - alpha && l0 >= 1.0 - alpha);
    }

    #[test]
    fn ssim_is_symmetric_and_reflexive(
        a in prop::collection::vec(unit(), 256),
        b in prop::collection::vec(unit(), 256),
    ) {
        let g = GridGeometry::new(16, 16, 0.25);
        let ab = ssim(&a, &b, &g).unwrap();
        let ba = ssim(&b, &a, &g).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert!((ssim(&a, &a, &g).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ate_ignores_rigid_motion(
        truth in prop::collection::vec(point(), 3..30),
        angle in -3.1..3.1f64,
        tx in -20.0..20.0f64,
        ty in -20.0..20.0f64,
    ) {
        let (s, c) = angle.sin_cos();
        let moved: Vec<Point2> = truth
            .iter()
            .map(|p| Point2::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty))
            .collect();
        prop_assert!(ate(&moved, &truth).unwrap() < 1e-6);
        prop_assert!(ale(&moved, &truth).unwrap() >= 0.0);
        prop_assert!(ale(&truth, &truth).unwrap() == 0.0);
    }

    #[test]
    fn explored_cells_stay_explored(
        steps in prop::collection::vec(prop::collection::vec((prop::bool::ANY, unit()), 20), 1..6),
    ) {
        let g = GridGeometry::new(5, 4, 0.25);
        let mut acc = BeliefGrid::new(g, 0.0);
        let mut before = 0;
        for step in steps {
            let (explored, values): (Vec<bool>, Vec<f64>) = step.into_iter().unzip();
            acc.accumulate(&BeliefGrid::from_values(g, values, explored));
            let now = acc.explored_count();
            prop_assert!(now >= before);
            before = now;
        }
    }

    #[test]
    fn normalized_belief_in_unit_interval(var in 0.0..10.0f64, prior in 0.01..10.0f64) {
        let b = normalized_belief(var, prior);
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn gp_variance_between_noise_and_prior(
        samples in prop::collection::vec((point(), unit()), 1..25),
        q in point(),
    ) {
        let k = Kernel::default();
        let model = fit_gp(&samples, k).unwrap();
        let p = model.predict(&[q])[0];
        prop_assert!(p.variance >= k.noise_var - 1e-9);
        prop_assert!(p.variance <= k.prior_variance() + 1e-9);
    }

    #[test]
    fn mixture_variance_covers_components(
        parts in prop::collection::vec((0.01..1.0f64, -3.0..3.0f64, 0.0..2.0f64), 1..6),
    ) {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let w: Vec<f64> = parts.iter().map(|p| p.0 / total).collect();
        let comps: Vec<Prediction> = parts.iter().map(|p| Prediction { mean: p.1, variance: p.2 }).collect();
        let m = mixture_moments(&w, &comps);
        // law of total variance: never below the weighted within-component variance
        let within: f64 = w.iter().zip(&comps).map(|(w, c)| w * c.variance).sum();
        prop_assert!(m.variance >= within - 1e-12);
        let lo = comps.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
        let hi = comps.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m.mean >= lo - 1e-12 && m.mean <= hi + 1e-12);
    }

    #[test]
    fn hull_contains_inputs_and_matches_oracle(pts in prop::collection::vec(point(), 1..40)) {
        let hull = convex_hull(&pts);
        let mut got: Vec<(f64, f64)> = hull.iter().map(|p| (p.x, p.y)).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(got, brute_hull(&pts));
        if hull.len() >= 3 {
            prop_assert!(polygon_area(&hull) > 0.0);
            let facets = linearize_hull(&hull).unwrap();
            for p in &pts {
                prop_assert!(facets_contain(&facets, p, 1e-9));
            }
            prop_assert_eq!(convex_hull(&hull), hull);
        }
    }

    #[test]
    fn stronger_signal_means_shorter_range(a in -90.0..-20.0f64, b in -90.0..-20.0f64) {
        let ch = RssiChannel::default();
        let (strong, weak) = if a >= b { (a, b) } else { (b, a) };
        let rs = rssi_to_range(strong, &ch);
        let rw = rssi_to_range(weak, &ch);
        prop_assert!(rs.range <= rw.range);
        prop_assert!(rs.range >= ch.d0);
        prop_assert!(rs.variance > 0.0);
    }
}
