use dirac_sea::action::action_effective_raw;
use dirac_sea::model::{CouplingParams, Gauge, SeaConfig};
use dirac_sea::quad::QuadSettings;
use dirac_sea::variation::{
    classify_stability, sample_vcurve, seam_limit_density, variation_density, variation_density_prime, GridSpec,
    VCurve,
};
use dirac_sea::Error;
use proptest::prelude::*;

fn q() -> QuadSettings {
    QuadSettings::with_tol(1e-12)
}

fn setup() -> impl Strategy<Value = (SeaConfig, CouplingParams)> {
    (1usize..=3)
        .prop_flat_map(|g| {
            (
                prop::collection::vec(0.5..4.0f64, g),
                prop::collection::vec(0.1..1.0f64, g),
                prop::array::uniform4(-1.0..1.0f64),
                1.1..2.0f64,
                any::<bool>(),
            )
        })
        .prop_map(|(mut m, w, c, s, natural)| {
            m.sort_by(f64::total_cmp);
            let cfg = SeaConfig::new(m, w).unwrap();
            let a = s * cfg.max_mass().powi(2);
            let p = CouplingParams::new(1e-5 * c[0], 1e-5 * c[1], 1e-9 * c[2], 1e-9 * c[3], a);
            (cfg, if natural { p.with_gauge(Gauge::Natural) } else { p })
        })
}

fn off_seam(cfg: &SeaConfig, u: f64) -> Option<f64> {
    let m = (2.0 * u - 1.0) * 2.0 * cfg.max_mass();
    let ok = m.abs() > 0.05 && cfg.masses().iter().all(|s| (m.abs() - s).abs() > 0.05);
    ok.then_some(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_is_weight_gradient((cfg, p) in setup(), u in 0.0..1.0f64) {
        let Some(m) = off_seam(&cfg, u) else { return Ok(()) };
        let mut masses = cfg.masses().to_vec();
        masses.push(m);
        let s = |h: f64| {
            let mut w = cfg.weights().to_vec();
            w.push(h);
            action_effective_raw(&masses, &w, &p, &q()).unwrap()
        };
        let d = |h: f64| (s(h) - s(-h)) / (2.0 * h);
        // The action is quartic in the test weight, so this combination is exact.
        let slope = (4.0 * d(0.05) - d(0.1)) / 3.0;
        let v = variation_density(m, &cfg, &p, &q()).unwrap();
        prop_assert!((slope / (2.0 * m.powi(3)) - v).abs() <= 1e-6 * v.abs());
    }

    #[test]
    fn derivative_matches_difference((cfg, p) in setup(), u in 0.0..1.0f64) {
        let Some(m) = off_seam(&cfg, u) else { return Ok(()) };
        let h = 1e-4;
        let v = |x: f64| variation_density(x, &cfg, &p, &q()).unwrap();
        let fd = (v(m + h) - v(m - h)) / (2.0 * h);
        let d = variation_density_prime(m, &cfg, &p, &q()).unwrap();
        let scale = v(m).abs() / m.abs();
        prop_assert!((fd - d).abs() <= 1e-5 * scale.max(d.abs()));
    }

    #[test]
    fn continuous_across_seams((cfg, p) in setup(), side in prop_oneof![Just(1.0), Just(-1.0)]) {
        for &mb in cfg.masses() {
            let s = side * mb;
            let at = seam_limit_density(s, &cfg, &p, &q()).unwrap();
            let d = variation_density_prime(s, &cfg, &p, &q()).unwrap();
            let h = 1e-7 * mb;
            let near = variation_density(s + h, &cfg, &p, &q()).unwrap();
            prop_assert!((near - at - d * h).abs() <= 1e-8 * (at.abs() + (d * mb).abs()));
        }
    }

    #[test]
    fn csv_round_trip(values in prop::collection::vec(-1e10..1e10f64, 3..50)) {
        let grid: Vec<f64> = (0..values.len()).map(|i| -1.0 + 0.01 * i as f64).collect();
        let curve = VCurve::new(grid.clone(), values.clone(), vec![], vec![], vec![]);
        let (g, v) = VCurve::from_csv(&curve.to_csv()).unwrap();
        prop_assert_eq!(g, grid);
        prop_assert_eq!(v, values);
    }

    #[test]
    fn grid_avoids_seams_and_zero(m in prop::collection::vec(0.1..5.0f64, 1..4), n in 2usize..400) {
        let mut m = m;
        m.sort_by(f64::total_cmp);
        let cfg = SeaConfig::new(m.clone(), vec![1.0; m.len()]).unwrap();
        let nodes = GridSpec::covering(&cfg, n).nodes(&m);
        prop_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(nodes.iter().all(|&x| x != 0.0 && m.iter().all(|&s| x.abs() != s)));
    }
}

#[test]
fn seam_and_zero_rejected() {
    let cfg = SeaConfig::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
    let p = CouplingParams::zero_for(&cfg);
    assert!(matches!(variation_density(2.0, &cfg, &p, &q()), Err(Error::Seam { .. })));
    assert!(matches!(variation_density(-1.0, &cfg, &p, &q()), Err(Error::Seam { .. })));
    assert!(variation_density(0.0, &cfg, &p, &q()).is_err());
    assert!(seam_limit_density(2.0, &cfg, &p, &q()).unwrap().is_finite());
}

#[test]
fn coupling_shifts_are_exact() {
    // c₃ and c₄ add m/2 and m²/2 to V.
    let cfg = SeaConfig::new(vec![1.0], vec![1.0]).unwrap();
    let p0 = CouplingParams::zero_for(&cfg);
    let p1 = CouplingParams { c3: 2.0, c4: -4.0, ..p0 };
    for m in [-2.5, 0.3, 1.7] {
        let d = variation_density(m, &cfg, &p1, &q()).unwrap() - variation_density(m, &cfg, &p0, &q()).unwrap();
        assert!((d - (m - 2.0 * m * m)).abs() < 1e-12);
    }
}

#[test]
fn grid_parse() {
    let g = GridSpec::parse("-3:3:11").unwrap();
    assert_eq!((g.min, g.max, g.n), (-3.0, 3.0, 11));
    for bad in ["1:2", "a:1:3", "3:1:5", "0:1:1"] {
        assert!(GridSpec::parse(bad).is_err());
    }
}

#[test]
fn free_single_generation_is_unstable() {
    // With no constants the sea is not a minimum of V.
    let cfg = SeaConfig::new(vec![1.0], vec![1.0]).unwrap();
    let p = CouplingParams::zero_for(&cfg).with_gauge(Gauge::Natural);
    let curve = sample_vcurve(&cfg, &p, &GridSpec::covering(&cfg, 201), &q()).unwrap();
    assert_eq!(curve.seam_points, vec![1.0]);
    let r = classify_stability(&curve, &cfg, 1e-6).unwrap();
    assert!(r.margins.len() == 3);
    assert_eq!(r.is_state_stable, r.violated_conditions.is_empty());
}
