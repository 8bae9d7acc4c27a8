use proptest::prelude::*;
use terra_core::channel::{fspl_db, power_sum_dbm, two_ray_rss, RadioConfig, Surface, SurfaceKind};
use terra_core::codebook::{Beam, BeamPattern, Codebook};
use terra_core::geometry::{
    arrival_angles, direct_path, ground_reflected_path, occlusion, path_blocked, BlockerSlab, LinkGeometry, Point2,
};

fn geometry() -> impl Strategy<Value = LinkGeometry> {
    (0.3..10.0f64, 0.3..10.0f64, 0.5..60.0f64, -180.0..180.0f64)
        .prop_map(|(ht, hr, d, heading)| LinkGeometry::planar(ht, hr, d).unwrap().with_rx_heading(heading))
}

fn blocker(d: f64) -> impl Strategy<Value = BlockerSlab> {
    (0.0..1.0f64, -1.0..1.0f64, 0.05..1.0f64, 0.0..1.5f64, 0.1..2.0f64)
        .prop_map(move |(s, y, w, lo, span)| BlockerSlab::new(Point2::new(s * d, y), w, lo, lo + span).unwrap())
}

proptest! {
    #[test]
    fn power_sum_bounds(a in -150.0..50.0f64, b in -150.0..50.0f64) {
        let s = power_sum_dbm(a, b);
        let hi = a.max(b);
        prop_assert!(s >= hi - 1e-12);
        prop_assert!(s <= hi + 3.0103);
        prop_assert!((s - power_sum_dbm(b, a)).abs() < 1e-12);
    }

    #[test]
    fn combined_rss_within_path_bounds(
        g in geometry(),
        loss in 0.0..20.0f64,
        az in -60.0..60.0f64,
        zen in -60.0..60.0f64,
        tx_zen in -60.0..10.0f64,
    ) {
        let radio = RadioConfig::default();
        let surface = Surface::new(SurfaceKind::Custom, loss).unwrap();
        let tx = Beam::aimed(0.0, tx_zen, BeamPattern::default());
        let rx = Beam::aimed(az, zen, BeamPattern::default());
        let o = two_ray_rss(&radio, &g, &surface, &tx, &rx, &[]).unwrap();
        let hi = o.los_rss_dbm.max(o.ground_rss_dbm);
        prop_assert!(o.rss_dbm >= hi - 1e-9);
        prop_assert!(o.rss_dbm <= hi + 3.02);
    }

    #[test]
    fn gain_bounded_by_peak_and_floor(az in -360.0..360.0f64, el in -90.0..90.0f64, baz in -60.0..60.0f64, bzen in -45.0..45.0f64) {
        let p = BeamPattern::default();
        let b = Beam::aimed(baz, bzen, p);
        let g = b.gain_dbi(az, el);
        prop_assert!(g <= p.peak_gain_dbi);
        prop_assert!(g >= p.peak_gain_dbi - p.sidelobe_floor_db);
    }

    #[test]
    fn fspl_increases_with_distance(d in 0.1..1000.0f64, k in 1.001..10.0f64) {
        prop_assert!(fspl_db(d * k, 60e9).unwrap() > fspl_db(d, 60e9).unwrap());
    }

    #[test]
    fn reflected_path_is_longer_and_shares_azimuth(g in geometry()) {
        let d = direct_path(&g);
        let r = ground_reflected_path(&g);
        prop_assert!(r.length_m > d.length_m);
        let (ad, ar) = (arrival_angles(&g, &d), arrival_angles(&g, &r));
        prop_assert_eq!(ad.azimuth_deg, ar.azimuth_deg);
        prop_assert!(ar.elevation_deg < 0.0);
        prop_assert!(ar.elevation_deg < ad.elevation_deg);
    }

    #[test]
    fn ground_ray_steepens_with_height(ht in 0.3..10.0f64, hr in 0.3..10.0f64, d in 0.5..60.0f64, dh in 0.01..5.0f64) {
        let low = LinkGeometry::planar(ht, hr, d).unwrap();
        let high = LinkGeometry::planar(ht + dh, hr, d).unwrap();
        let el = |g: &LinkGeometry| arrival_angles(g, &ground_reflected_path(g)).elevation_deg;
        prop_assert!(el(&high) < el(&low));
        let far = LinkGeometry::planar(ht, hr, d + dh).unwrap();
        prop_assert!(ground_reflected_path(&far).length_m > ground_reflected_path(&low).length_m);
    }

    #[test]
    fn blocking_ignores_direction((g, slab) in geometry().prop_flat_map(|g| (Just(g), blocker(g.horizontal_distance())))) {
        for p in [direct_path(&g), ground_reflected_path(&g)] {
            prop_assert_eq!(path_blocked(&p, &slab), path_blocked(&p.reversed(), &slab));
            prop_assert_eq!(occlusion(&p, &slab), occlusion(&p.reversed(), &slab));
        }
    }

    #[test]
    fn nearest_beam_is_a_minimum(az in -90.0..90.0f64, el in -60.0..40.0f64) {
        let cb = Codebook::default_codebook();
        let best = cb.nearest_beam(az, el);
        let off = best.normalized_offset(az, el);
        prop_assert!(cb.beams().iter().all(|b| b.normalized_offset(az, el) >= off));
    }
}
