use dirac_sea::action::action_effective;
use dirac_sea::model::{compute_constraint_t, CouplingParams, Gauge, SeaConfig};
use dirac_sea::quad::QuadSettings;
use dirac_sea::solve::{
    minimize_action, solve_critical, verify_solution, Mode, SolutionRecord, SolveProblem, Var,
};
use dirac_sea::variation::{variation_density, variation_density_prime};
use proptest::prelude::*;

fn two_generation(m2: f64) -> SolveProblem {
    let cfg = SeaConfig::new(vec![1.0, m2], vec![1.0, 0.1]).unwrap();
    let params = CouplingParams::new(0.0, 0.0, 0.0, 0.0, 1.5 * m2 * m2).with_gauge(Gauge::Natural);
    let mut p = SolveProblem::new(&cfg, params, vec![Var::Weight(1), Var::C0, Var::C1], Mode::CriticalPoint);
    p.quad = QuadSettings::with_tol(1e-11);
    p.seed = 3;
    p.grid_points = 0;
    p
}

#[test]
fn two_generation_critical_point() {
    let recs = solve_critical(&two_generation(10.0)).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert!(r.converged);
    // Frozen from a converged run; cross-checked below by off-seam evaluation.
    assert!((r.cfg.weights()[1] - 0.044033).abs() < 5e-6);
    let q = QuadSettings::with_tol(1e-12);
    let v = |m: f64| variation_density(m, &r.cfg, &r.params, &q).unwrap();
    // V is continuous with a two-sided slope at the seams; symmetric means
    // of off-seam values approach the seam value quadratically.
    let seam_value = |s: f64| {
        let h = 1e-4 * s;
        0.5 * (v(s + h) + v(s - h))
    };
    let (v1, v2) = (seam_value(1.0), seam_value(10.0));
    let scale = r.residual_scale;
    assert!((v1 - v2).abs() < 1e-8 * scale, "{v1} {v2}");
    for s in [1.0, 10.0] {
        let d = variation_density_prime(s, &r.cfg, &r.params, &q).unwrap();
        assert!(d.abs() * s < 1e-8 * scale);
    }
}

#[test]
fn solutions_are_deterministic() {
    let a = solve_critical(&two_generation(4.5)).unwrap();
    let b = solve_critical(&two_generation(4.5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn record_round_trip_and_verify() {
    let mut p = two_generation(10.0);
    p.grid_points = 241;
    let r = solve_critical(&p).unwrap().remove(0);
    let back = SolutionRecord::from_json(&r.to_json()).unwrap();
    assert_eq!(back, r);
    let v = verify_solution(&back, 1e-8).unwrap();
    assert!(v.passed, "{v:?}");
}

#[test]
fn problem_json() {
    let text = r#"{"masses":[1,2],"weights":[1,0.1],"params":{"c0":0,"c1":0,"c3":0,"c4":0,"a_max":6},
        "free_vars":["rho2","c0","c1"]}"#;
    let p = SolveProblem::from_json(text).unwrap();
    assert_eq!(p.free_vars, vec![Var::Weight(1), Var::C0, Var::C1]);
    assert_eq!(p.params.gauge, Gauge::Truncated);
    assert!(SolveProblem::from_json(&text.replace("\"rho2\"", "\"rho0\"")).is_err());
    assert!(SolveProblem::from_json(&text.replace("\"free_vars\"", "\"extra\":1,\"free_vars\"")).is_err());
}

#[test]
fn underdetermined_problem_rejected() {
    let mut p = two_generation(10.0);
    p.free_vars = vec![Var::C0];
    assert!(solve_critical(&p).is_err());
    p.free_vars = vec![Var::Weight(5), Var::C0, Var::C1];
    assert!(solve_critical(&p).is_err());
}

fn minimize_problem() -> SolveProblem {
    let cfg = SeaConfig::new(vec![1.0, 2.0], vec![0.5, 0.05]).unwrap();
    let params = CouplingParams::from_published_units(0.0, -1e9, 0.0, 0.0, 6.0);
    let mut p = SolveProblem::new(&cfg, params, vec![Var::Weight(1)], Mode::Minimize);
    p.grid_points = 0;
    p.starts = 4;
    p.seed = 11;
    p
}

fn feasible(rho2: f64) -> Option<SeaConfig> {
    let rho1 = 1.0 - 8.0 * rho2;
    (rho1 >= 0.0).then(|| SeaConfig::new(vec![1.0, 2.0], vec![rho1, rho2]).unwrap())
}

#[test]
fn minimizer_satisfies_constraint() {
    let r = minimize_action(&minimize_problem()).unwrap();
    assert!((compute_constraint_t(&r.cfg) - 1.0).abs() < 1e-12);
    assert_eq!(r.mode, Mode::Minimize);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn minimizer_beats_feasible_points(rho2 in 0.0..0.125f64) {
        let p = minimize_problem();
        let r = minimize_action(&p).unwrap();
        let cfg = feasible(rho2).unwrap();
        let s = action_effective(&cfg, &p.params, &p.quad).unwrap();
        prop_assert!(r.action <= s + 1e-9 * s.abs());
    }
}
