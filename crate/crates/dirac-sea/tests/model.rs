use std::f64::consts::PI;

use dirac_sea::model::{
    compute_constraint_t, compute_m3, compute_m5, dm3_drho, dm5_drho, m3_of, m5_of, normalize_gauge,
    CouplingParams, Gauge, RunConfig, SeaConfig,
};
use dirac_sea::Error;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = SeaConfig> {
    (1usize..=4).prop_flat_map(|g| {
        (
            prop::collection::vec(0.1..20.0f64, g),
            prop::collection::vec(0.0..2.0f64, g),
        )
            .prop_map(|(mut m, w)| {
                m.sort_by(f64::total_cmp);
                SeaConfig::new(m, w).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn moment_signs(cfg in config()) {
        prop_assert!(compute_m3(&cfg) <= 0.0);
        prop_assert!(compute_m5(&cfg) >= 0.0);
        prop_assert!(compute_constraint_t(&cfg) >= 0.0);
    }

    #[test]
    fn moment_homogeneity(cfg in config(), l in 0.2..5.0f64, mu in 0.2..5.0f64) {
        let scaled = SeaConfig::new(
            cfg.masses().iter().map(|m| l * m).collect(),
            cfg.weights().iter().map(|r| mu * r).collect(),
        ).unwrap();
        let (m3, m5) = (compute_m3(&cfg), compute_m5(&cfg));
        let f = mu * mu;
        prop_assert!((compute_m3(&scaled) - f * l.powi(3) * m3).abs() <= 1e-12 * (f * l.powi(3) * m3).abs() + 1e-300);
        prop_assert!((compute_m5(&scaled) - f * l.powi(5) * m5).abs() <= 1e-12 * (f * l.powi(5) * m5).abs() + 1e-300);
    }

    #[test]
    fn moment_gradients(cfg in config(), m in 0.1..20.0f64, h in 1e-3..1e-2f64) {
        let mut masses = cfg.masses().to_vec();
        masses.push(m);
        let mut wp = cfg.weights().to_vec();
        wp.push(h);
        let mut wm = cfg.weights().to_vec();
        wm.push(-h);
        // Both moments are quadratic in the test weight.
        let d3 = (m3_of(&masses, &wp) - m3_of(&masses, &wm)) / (2.0 * h);
        let d5 = (m5_of(&masses, &wp) - m5_of(&masses, &wm)) / (2.0 * h);
        let e3 = dm3_drho(m, cfg.masses(), cfg.weights());
        let e5 = dm5_drho(m, cfg.masses(), cfg.weights());
        prop_assert!((d3 - e3).abs() <= 1e-9 * e3.abs().max(1e-12));
        prop_assert!((d5 - e5).abs() <= 1e-9 * e5.abs().max(d5.abs()).max(1e-9));
    }

    #[test]
    fn gauge_round_trip(cfg in config()) {
        prop_assume!(cfg.weights()[0] > 1e-3);
        let (n, s) = normalize_gauge(&cfg).unwrap();
        prop_assert!((n.masses()[0] - 1.0).abs() < 1e-15 && (n.weights()[0] - 1.0).abs() < 1e-15);
        let back = s.restore(&n).unwrap();
        for (a, b) in back.masses().iter().zip(cfg.masses()) {
            prop_assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn published_units_round_trip(c in prop::array::uniform4(-1e9..1e9f64)) {
        let p = CouplingParams::from_published_units(c[0], c[1], c[2], c[3], 10.0);
        prop_assert_eq!(p.gauge, Gauge::Natural);
        for (a, b) in p.to_published_units().iter().zip(c) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn two_generation_moments() {
    let cfg = SeaConfig::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
    let p5 = PI.powi(5);
    assert!((compute_m5(&cfg) - 54.0 / (512.0 * p5)).abs() < 1e-15);
    assert!((compute_m3(&cfg) + 36.0 / (64.0 * p5)).abs() < 1e-15);
    assert_eq!(compute_constraint_t(&cfg), 9.0);
}

#[test]
fn single_generation_m5_vanishes() {
    let cfg = SeaConfig::new(vec![1.7], vec![0.3]).unwrap();
    assert_eq!(compute_m5(&cfg), 0.0);
}

#[test]
fn invalid_configs_rejected() {
    for (m, w) in [
        (vec![], vec![]),
        (vec![1.0], vec![1.0, 2.0]),
        (vec![0.0], vec![1.0]),
        (vec![2.0, 1.0], vec![1.0, 1.0]),
        (vec![1.0], vec![-0.1]),
        (vec![f64::NAN], vec![1.0]),
    ] {
        assert!(matches!(SeaConfig::new(m, w), Err(Error::Validation { .. })));
    }
    let cfg = SeaConfig::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
    assert!(CouplingParams::new(0.0, 0.0, 0.0, 0.0, 3.9).validate_for(&cfg).is_err());
    assert!(CouplingParams::new(f64::INFINITY, 0.0, 0.0, 0.0, 5.0).validate_for(&cfg).is_err());
}

#[test]
fn run_config_parsing() {
    let rc = RunConfig::from_json(r#"{"masses":[1,2],"weights":[1,0.5],"c1":1e-6}"#).unwrap();
    let r = rc.resolve().unwrap();
    assert!(r.a_max_defaulted);
    assert_eq!(r.params.a_max, 6.0);
    assert_eq!(r.params.c1, 1e-6);
    assert!(RunConfig::from_json(r#"{"masses":[1],"weights":[1],"bogus":1}"#).is_err());
    let bad = RunConfig::from_json(r#"{"masses":[1],"weights":[1],"quad_tol":-1}"#).unwrap();
    assert!(bad.resolve().is_err());
}
