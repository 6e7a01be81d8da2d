use dirac_sea::action::{
    action_extended, action_quartic, action_quartic_direct, compensate_cutoff, pair_integral,
    regularized_action,
};
use dirac_sea::model::{quartic_norm, CouplingParams, Gauge, SeaConfig};
use dirac_sea::quad::QuadSettings;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = SeaConfig> {
    (1usize..=3).prop_flat_map(|g| {
        (
            prop::collection::vec(0.3..6.0f64, g),
            prop::collection::vec(0.05..1.5f64, g),
        )
            .prop_map(|(mut m, w)| {
                m.sort_by(f64::total_cmp);
                SeaConfig::new(m, w).unwrap()
            })
    })
}

fn q() -> QuadSettings {
    QuadSettings::with_tol(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn table_matches_direct_integral(cfg in config(), s in 1.1..3.0f64) {
        let a_max = s * cfg.max_mass().powi(2);
        let t = action_quartic(&cfg, a_max, &q()).unwrap();
        let d = action_quartic_direct(cfg.masses(), cfg.weights(), a_max, &q()).unwrap();
        prop_assert!((t - d).abs() <= 1e-9 * t.abs().max(d.abs()));
    }

    #[test]
    fn quartic_in_weights(cfg in config(), mu in 0.2..4.0f64) {
        let a_max = 1.5 * cfg.max_mass().powi(2);
        let scaled = SeaConfig::new(cfg.masses().to_vec(), cfg.weights().iter().map(|r| mu * r).collect()).unwrap();
        let s0 = action_quartic(&cfg, a_max, &q()).unwrap();
        let s1 = action_quartic(&scaled, a_max, &q()).unwrap();
        prop_assert!((s1 - mu.powi(4) * s0).abs() <= 1e-12 * s1.abs());
    }

    #[test]
    fn pair_integral_symmetries(x in 0.3..5.0f64, y in 0.3..5.0f64, u in 0.3..5.0f64, v in 0.3..5.0f64) {
        let a_max = 1.5 * 25.0;
        let g = pair_integral(x, y, u, v, a_max, &q()).unwrap();
        for other in [pair_integral(u, v, x, y, a_max, &q()).unwrap(), pair_integral(y, x, u, v, a_max, &q()).unwrap()] {
            prop_assert!((g - other).abs() <= 1e-10 * g.abs().max(1.0));
        }
    }

    #[test]
    fn natural_gauge_ignores_cutoff(cfg in config(), s in 1.1..4.0f64) {
        let m2 = cfg.max_mass().powi(2);
        let p = |a: f64| CouplingParams::new(0.0, 0.0, 1e-9, -1e-9, a).with_gauge(Gauge::Natural);
        let s0 = action_extended(&cfg, &p(1.05 * m2), &q()).unwrap();
        let s1 = action_extended(&cfg, &p(s * m2), &q()).unwrap();
        prop_assert!((s0 - s1).abs() <= 1e-9 * s0.abs());
    }
}

#[test]
fn single_equal_mass_action() {
    // H(a, x, x) = −4x³, so the pair integral is 16x⁶·a_max.
    let cfg = SeaConfig::new(vec![1.0], vec![1.0]).unwrap();
    let s = action_quartic(&cfg, 1.5, &q()).unwrap();
    assert!((s - 24.0 / quartic_norm()).abs() < 1e-14 * s);
}

#[test]
fn compensation_keeps_natural_params() {
    let cfg = SeaConfig::new(vec![1.0, 2.0], vec![1.0, 0.3]).unwrap();
    let p = CouplingParams::new(1e-5, -2e-5, 0.0, 0.0, 6.0).with_gauge(Gauge::Natural);
    let moved = compensate_cutoff(&cfg, &p, 9.0).unwrap();
    assert_eq!((moved.c0, moved.c1, moved.a_max), (p.c0, p.c1, 9.0));
    let t = CouplingParams { gauge: Gauge::Truncated, ..p };
    let moved = compensate_cutoff(&cfg, &t, 9.0).unwrap();
    assert!(moved.c0 != t.c0 && moved.c1 != t.c1);
    assert!(compensate_cutoff(&cfg, &t, 3.0).is_err());
}

#[test]
fn regularized_action_rejects_bad_eps() {
    let cfg = SeaConfig::new(vec![1.0], vec![1.0]).unwrap();
    assert!(regularized_action(&cfg, 0.0, &q()).is_err());
    assert!(regularized_action(&cfg, -1.0, &q()).is_err());
}

#[test]
fn cutoff_below_masses_rejected() {
    let cfg = SeaConfig::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
    assert!(action_quartic(&cfg, 8.0, &q()).is_err());
}
