//! Image-method reflection checked against a direct numerical search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terra_core::geometry::{ground_reflected_path, LinkGeometry, Point3};

/// Shortest tx → ground → rx length found by scanning and then narrowing the
/// bounce point along the ground projection of the link.
fn brute_force_length(tx: Point3, rx: Point3) -> f64 {
    let along = |s: f64| {
        let p = tx.xy() + (rx.xy() - tx.xy()) * s;
        let g = Point3::new(p.x, p.y, 0.0);
        (g - tx).norm() + (rx - g).norm()
    };
    let n = 2000;
    let best = (0..=n)
        .map(|i| i as f64 / n as f64)
        .min_by(|a, b| along(*a).total_cmp(&along(*b)))
        .unwrap();
    let (mut lo, mut hi) = ((best - 1.0 / n as f64).max(0.0), (best + 1.0 / n as f64).min(1.0));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if along(m1) < along(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    along(0.5 * (lo + hi))
}

fn random_geometry(rng: &mut ChaCha8Rng) -> LinkGeometry {
    let tx = Point3::new(
        rng.random_range(-50.0..50.0),
        rng.random_range(-50.0..50.0),
        rng.random_range(0.2..30.0),
    );
    loop {
        let rx = Point3::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(0.2..30.0),
        );
        if let Ok(g) = LinkGeometry::new(tx, rx) {
            if g.horizontal_distance() > 0.1 {
                return g;
            }
        }
    }
}

#[test]
fn reflected_length_matches_numerical_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let g = random_geometry(&mut rng);
        let path = ground_reflected_path(&g);
        let err = (path.length_m - brute_force_length(g.tx_pos(), g.rx_pos())).abs();
        worst = worst.max(err);
        assert!(err <= 1e-9, "length off by {err} for {g:?}");
    }
    assert!(worst <= 1e-9);
}

#[test]
fn bounce_is_specular() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let g = random_geometry(&mut rng);
        let path = ground_reflected_path(&g);
        let p = path.reflection_point().unwrap();
        assert_eq!(p.z, 0.0);
        let incidence = (p.xy() - g.tx_pos().xy()).norm().atan2(g.tx_height());
        let reflection = (g.rx_pos().xy() - p.xy()).norm().atan2(g.rx_height());
        assert!((incidence - reflection).abs() <= 1e-9, "{incidence} vs {reflection}");
        // The bounce stays in the vertical plane of the link.
        let d = g.rx_pos().xy() - g.tx_pos().xy();
        let off = p.xy() - g.tx_pos().xy();
        assert!((d.x * off.y - d.y * off.x).abs() / d.norm() <= 1e-9);
        // Vertex sum agrees with the closed form.
        let seg: f64 = path.segments().map(|(a, b)| (b - a).norm()).sum();
        assert!((seg - path.length_m).abs() <= 1e-9);
    }
}
