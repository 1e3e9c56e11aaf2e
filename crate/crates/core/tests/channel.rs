mod common;

use aeroswarm_core::channel::{a2g_pathloss_db, evaluate_links_at, fspl_db, gbs_pathloss_db, p_los, LinkGeometry};
use aeroswarm_core::geom::{Vec2, Vec3};
use common::*;

#[test]
fn fspl_closed_form() {
    let direct = 20.0 * (4.0 * std::f64::consts::PI * 1000.0 * 2e9 / C).log10();
    let got = fspl_db(1000.0, 2e9).unwrap();
    assert!((got - 98.46).abs() <= 0.02, "{got}");
    assert!((got - direct).abs() < 1e-12);
}

#[test]
fn p_los_at_the_inflection_and_zenith() {
    assert!((p_los(9.61, 9.61, 0.16) - 1.0 / 10.61).abs() < 1e-12);
    assert!((p_los(9.61, 9.61, 0.16) - 0.09425).abs() <= 1e-4);
    let z = 1.0 / (1.0 + 9.61 * (-0.16f64 * (90.0 - 9.61)).exp());
    assert!((p_los(90.0, 9.61, 0.16) - z).abs() < 1e-12);
    assert!((p_los(90.0, 9.61, 0.16) - 0.99997).abs() <= 1e-4);
}

#[test]
fn a2g_matches_composed_oracle() {
    let (cfg, ..) = link_fixture();
    let ch = &cfg.channel;
    for &(r, h) in &[(0.0, 100.0), (50.0, 80.0), (400.0, 120.0), (1500.0, 90.0)] {
        let dist = f64::hypot(r, h);
        let theta = if r == 0.0 { 90.0 } else { (h / r).atan().to_degrees() };
        let p = 1.0 / (1.0 + ch.a_env * (-ch.b_env * (theta - ch.a_env)).exp());
        let f = 20.0 * (4.0 * std::f64::consts::PI * dist * ch.carrier_hz / C).log10();
        let oracle = p * (f + ch.eta_los_db) + (1.0 - p) * (f + ch.eta_nlos_db);
        let got = a2g_pathloss_db(&LinkGeometry::from_parts(r, h), ch);
        assert!((got - oracle).abs() <= 0.05, "r={r} h={h}: {got} vs {oracle}");
    }
    let overhead = a2g_pathloss_db(&LinkGeometry::from_parts(0.0, 100.0), ch);
    assert!((overhead - 79.46).abs() <= 0.05, "{overhead}");
}

#[test]
fn gbs_loss_ten_reference_distances() {
    let (cfg, ..) = link_fixture();
    let ch = &cfg.channel;
    let pl0 = fspl_db(ch.d0_m, ch.carrier_hz).unwrap();
    let got = gbs_pathloss_db(10.0 * ch.d0_m, 0.0, ch);
    assert!((got - (pl0 + 10.0 * ch.kappa_gbs)).abs() < 1e-9);
}

#[test]
fn links_match_brute_force() {
    let (cfg, uavs, users, shadow) = link_fixture();
    let got = evaluate_links_at(&uavs, &users, &shadow, &cfg);
    let want = brute_links(&uavs, &users, &shadow, &cfg);
    assert_eq!(got.len(), want.len());
    let mut nodes_seen = std::collections::BTreeSet::new();
    for (g, (k, sinr, rate)) in got.iter().zip(want) {
        assert_eq!(g.serving_node, k);
        assert!(rel_err(g.sinr_linear, sinr) <= 1e-9, "{} vs {}", g.sinr_linear, sinr);
        assert!(rel_err(g.rate_bps, rate) <= 1e-9);
        nodes_seen.insert(k);
    }
    // the fixture exercises every node
    assert_eq!(nodes_seen.len(), 3);
}

#[test]
fn brute_force_agrees_on_random_layouts() {
    use rand::Rng;
    let (cfg, ..) = link_fixture();
    let mut rng = aeroswarm_core::rng::stream(17, aeroswarm_core::rng::Purpose::Eval, 0);
    for _ in 0..50 {
        let uavs: Vec<Vec3> = (0..3)
            .map(|_| Vec3::new(rng.random::<f64>() * 2000.0, rng.random::<f64>() * 2000.0, 80.0 + rng.random::<f64>() * 40.0))
            .collect();
        let users: Vec<Vec2> = (0..12).map(|_| Vec2::new(rng.random::<f64>() * 2000.0, rng.random::<f64>() * 2000.0)).collect();
        let shadow: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
        let got = evaluate_links_at(&uavs, &users, &shadow, &cfg);
        for (g, (k, sinr, rate)) in got.iter().zip(brute_links(&uavs, &users, &shadow, &cfg)) {
            assert_eq!(g.serving_node, k);
            assert!(rel_err(g.sinr_linear, sinr) <= 1e-9);
            assert!(rel_err(g.rate_bps, rate) <= 1e-9);
        }
    }
}
