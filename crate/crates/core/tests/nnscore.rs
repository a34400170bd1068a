use hypknn::hypgeom::*;
use hypknn::index::LayeredIndex;
use hypknn::limitlaw::{solve_regime, Regime, WRule};
use hypknn::nnscore::*;
use hypknn::sampler::{sample_region, PointConfig};
use hypknn::RngStream;
use rand::Rng;

fn vertical(ys: &[f64]) -> PointConfig {
    let w = Region::window(2, 10.0).unwrap();
    let pts: Vec<HPoint> = ys.iter().map(|&y| HPoint::new(vec![0.5], y).unwrap()).collect();
    PointConfig::from_points(w, &pts).unwrap()
}

fn with_point(cfg: &PointConfig, extra: HPoint) -> PointConfig {
    let mut pts: Vec<HPoint> = cfg.points().collect();
    pts.push(extra);
    PointConfig::from_points(Region::window(2, 10.0).unwrap(), &pts).unwrap()
}

fn box_region(d: usize) -> Region {
    Region::new(vec![0.0; d - 1], vec![1.0; d - 1], 0.05, Ceiling::Finite(2.0)).unwrap()
}

fn dense_region() -> Region {
    Region::new(vec![0.0], vec![1.0], 0.004, Ceiling::Finite(2.0)).unwrap()
}

#[test]
fn order_statistic_example() {
    // Other atoms at hyperbolic distances 0.5, 1.0 and 2.0 straight above.
    let cfg = vertical(&[0.1, 0.1 * 0.5f64.exp(), 0.1 * 1f64.exp(), 0.1 * 2f64.exp()]);
    let r = knn_radius(&cfg.point(0), &cfg, 2, 10.0).unwrap().exact().unwrap();
    assert!((r - 1.0).abs() < 1e-14);
    let r1 = knn_radius(&cfg.point(0), &cfg, 1, 10.0).unwrap().exact().unwrap();
    assert!((r1 - 0.5).abs() < 1e-14);
}

#[test]
fn score_zero_at_threshold_volume() {
    let v = 6.088;
    let regime = Regime::from_threshold(2, 1, 0.0, 10.0, v, WRule::Sqrt).unwrap();
    let r = (1.0 + v / (2.0 * std::f64::consts::PI)).acosh();
    let cfg = vertical(&[0.01, 0.01 * r.exp()]);
    let sp = score(&cfg.point(0), &cfg, &regime).unwrap();
    assert!(sp.score.exact().unwrap().abs() < 1e-9);
    assert!((sp.radius_k.exact().unwrap() - r).abs() < 1e-12);
}

#[test]
fn censored_score_exceeds() {
    let regime = Regime::from_threshold(2, 1, 0.0, 10.0, 6.0, WRule::Sqrt).unwrap();
    let cfg = vertical(&[0.01]);
    let sp = score(&cfg.point(0), &cfg, &regime).unwrap();
    assert!(sp.score.is_censored() && sp.radius_k.is_censored() && sp.exceeds);
}

#[test]
fn indexed_matches_brute_force() {
    let mut rng = RngStream::new(404).rng();
    for case in 0..1000u64 {
        let d = 2 + (case % 2) as usize;
        let cfg = sample_region(&box_region(d), d, &RngStream::new(405).child(case)).unwrap();
        if cfg.len() < 2 {
            continue;
        }
        let rho = 0.25 + 3.0 * rng.random::<f64>();
        let r_cap = 0.2 + 4.0 * rng.random::<f64>();
        let index = LayeredIndex::build(&cfg, 0, rho).unwrap();
        let k = 1 + rng.random_range(0..3usize);
        for i in 0..cfg.len() {
            let brute = knn_radius(&cfg.point(i), &cfg, k, r_cap).unwrap();
            let fast = knn_radius_indexed(&index, &cfg, i, k, r_cap).unwrap();
            assert_eq!(brute, fast, "case {case} atom {i}");
        }
    }
}

#[test]
fn exceedance_iff_few_points_in_threshold_ball() {
    let mut checked = 0;
    let mut exceed = 0;
    for (k, rep) in (0..50u64).map(|r| (1 + (r % 2) as usize, r)) {
        let regime = solve_regime(2, k, 0.0, 6.0, 20.0, WRule::Sqrt).unwrap();
        let cfg = sample_region(&dense_region(), 2, &RngStream::new(77).child(rep)).unwrap();
        let g_s0 = gap_from_dist(regime.r_s0);
        for i in 0..cfg.len().min(250) {
            let sp = score(&cfg.point(i), &cfg, &regime).unwrap();
            let inside = (0..cfg.len())
                .filter(|&j| gap(cfg.x(i), cfg.y(i), cfg.x(j), cfg.y(j)) <= g_s0)
                .count();
            // `inside` counts x itself.
            assert_eq!(sp.exceeds, inside <= k, "rep {rep} atom {i}");
            checked += 1;
            exceed += sp.exceeds as usize;
        }
    }
    assert!(checked >= 10_000, "{checked}");
    assert!(exceed > 0 && exceed < checked);
}

#[test]
fn localization_monotonicity_stabilization() {
    let regime = solve_regime(2, 1, 0.0, 6.0, 20.0, WRule::Sqrt).unwrap();
    let mut rng = RngStream::new(5150).rng();
    let mut cases = 0;
    for rep in 0..200u64 {
        let cfg = sample_region(&box_region(2), 2, &RngStream::new(5151).child(rep)).unwrap();
        for i in (0..cfg.len()).step_by(3) {
            let x = cfg.point(i);
            let Ok(ball) = stopping_set(&x, &cfg, regime.k) else { continue };
            let full = score(&x, &cfg, &regime).unwrap();

            // Random S containing the stopping set: its bounding box grown by a random factor.
            let bb = ball_bbox(&ball);
            let grow = rng.random::<f64>();
            let pad = grow * (bb.hi[0] - bb.lo[0]);
            let s = Region::new(
                vec![bb.lo[0] - pad],
                vec![bb.hi[0] + pad],
                bb.y_lo * (1.0 - 0.5 * grow),
                Ceiling::Finite(bb.y_hi.finite().unwrap() * (1.0 + grow)),
            )
            .unwrap();
            let restricted = cfg.filtered(|px, py| s.contains(px, py));
            let local = score(&x, &restricted, &regime).unwrap();
            assert_eq!(full.exceeds, local.exceeds);
            assert_eq!(full.score, local.score);

            let r = ball.radius;
            // Adding a point strictly inside the ball never increases the radius.
            let inner = HPoint::new(vec![x.x[0]], x.y * (0.5 * r * rng.random::<f64>()).exp()).unwrap();
            if inner != x {
                let more = with_point(&cfg, inner);
                let r2 = knn_radius(&x, &more, 1, 50.0).unwrap().exact().unwrap();
                assert!(r2 <= r);
            }
            // A point outside the ball leaves the radius unchanged.
            let outer = HPoint::new(vec![x.x[0]], x.y * (r * 1.01 + 0.1).exp()).unwrap();
            let more = with_point(&cfg, outer.clone());
            assert_eq!(knn_radius(&x, &more, 1, 50.0).unwrap().exact(), Some(r));
            // Deleting a point farther than the radius changes nothing.
            let fewer = more.filtered(|px, py| !(py == outer.y && px == outer.x.as_slice()));
            assert_eq!(knn_radius(&x, &fewer, 1, 50.0).unwrap().exact(), Some(r));

            // Nondecreasing in k.
            let radii: Vec<f64> = (1..4)
                .map_while(|k| knn_radius(&x, &cfg, k, 50.0).unwrap().exact())
                .collect();
            assert!(radii.windows(2).all(|w| w[0] <= w[1]));
            cases += 1;
        }
    }
    assert!(cases > 1000, "{cases}");
}

#[test]
fn score_strictly_increasing_in_radius() {
    let regime = Regime::from_threshold(3, 1, 0.0, 5.0, 4.0, WRule::Sqrt).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for i in 1..200 {
        let r = i as f64 * 0.0075;
        let cfg = {
            let w = Region::window(3, 10.0).unwrap();
            let pts = [HPoint::new(vec![0.5, 0.5], 0.01).unwrap(), HPoint::new(vec![0.5, 0.5], 0.01 * r.exp()).unwrap()];
            PointConfig::from_points(w, &pts).unwrap()
        };
        let s = score(&cfg.point(0), &cfg, &regime).unwrap().score.exact().unwrap();
        assert!(s > prev);
        prev = s;
    }
}

#[test]
fn usage_errors() {
    let cfg = vertical(&[0.1, 0.2]);
    let stranger = HPoint::new(vec![0.5], 0.3).unwrap();
    assert!(knn_radius(&stranger, &cfg, 1, 1.0).is_err());
    let index = LayeredIndex::build(&cfg, 0, 1.0).unwrap();
    assert!(knn_radius_indexed(&index, &cfg, 0, 0, 1.0).is_err());
    assert!(knn_radius_indexed(&index, &cfg, 5, 1, 1.0).is_err());
}
