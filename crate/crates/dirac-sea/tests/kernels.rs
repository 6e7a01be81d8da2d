use dirac_sea::kernels::{
    delta_fn, h_fn, h_value, j_fn, k1_kernel, k_fn, kink, l1_kernel, l2_kernel, ConeRegion,
};
use proptest::prelude::*;

fn mass() -> impl Strategy<Value = f64> {
    prop_oneof![0.1..10.0f64, -10.0..-0.1f64]
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

fn region_a(region: ConeRegion, u: f64) -> f64 {
    match region {
        ConeRegion::OutsideCone => -50.0 * u - 1e-3,
        _ => 50.0 * u + 1e-3,
    }
}

fn region() -> impl Strategy<Value = ConeRegion> {
    prop_oneof![
        Just(ConeRegion::UpperCone),
        Just(ConeRegion::LowerCone),
        Just(ConeRegion::OutsideCone)
    ]
}

proptest! {
    #[test]
    fn j_symmetric_and_odd(x in mass(), y in mass(), u in 0.0..1.5f64) {
        let a = u * kink(x, y) + 1e-3;
        let j = j_fn(a, x, y);
        prop_assert!(close(j, j_fn(a, y, x), j.abs(), 1e-12));
        prop_assert!(close(j_fn(a, -x, -y), -j, j.abs(), 1e-12));
    }

    #[test]
    fn j_vanishes_above_kink(x in mass(), y in mass(), s in 1.0..4.0f64) {
        prop_assert_eq!(j_fn(kink(x, y) * s, x, y), 0.0);
    }

    #[test]
    fn k_symmetric(a in 0.0..30.0f64, x in mass(), y in mass()) {
        let k = k_fn(a, x, y);
        prop_assert!(close(k, k_fn(a, y, x), k.abs(), 1e-12));
    }

    #[test]
    fn jk_cancel_at_zero(x in mass(), y in mass()) {
        let (j, k) = (j_fn(0.0, x, y), k_fn(0.0, x, y));
        prop_assert!(close(j + k, 0.0, j.abs().max(k.abs()), 1e-12));
    }

    #[test]
    fn h_equal_masses(a in 0.01..50.0f64, x in mass()) {
        let e = -4.0 * x.powi(3);
        prop_assert!(close(h_fn(a, x, x).unwrap(), e, e.abs(), 1e-12));
    }

    #[test]
    fn h_stays_finite_near_zero(x in mass(), y in mass(), e in -12.0..-4.0f64) {
        let a = 10f64.powf(e);
        let h = h_value(a, x, y);
        prop_assert!(h.is_finite());
        // H is continuous at 0, where J + K has a simple zero.
        let h2 = h_value(2.0 * a, x, y);
        let scale = x.abs().max(y.abs()).powi(3);
        prop_assert!((h2 - h).abs() <= 1e-2 * scale);
    }

    #[test]
    fn delta_symmetric_and_homogeneous(a in -20.0..20.0f64, b in 0.0..20.0f64, c in 0.0..20.0f64, l in 0.2..5.0f64) {
        let d = delta_fn(a, b, c);
        let scale = (a.abs() + b + c).powi(2);
        prop_assert!(close(d, delta_fn(a, c, b), scale, 1e-13));
        prop_assert!(close(delta_fn(l * a, l * b, l * c), l * l * d, l * l * scale, 1e-12));
    }

    #[test]
    fn leibniz(r in region(), u in 0.0..1.0f64, b in 0.0..20.0f64, c in 0.0..20.0f64) {
        let a = region_a(r, u);
        let k1 = k1_kernel(r, a, b, c).unwrap();
        let l1 = l1_kernel(r, a, b, c).unwrap();
        let l2 = l2_kernel(r, a, b, c).unwrap();
        prop_assert!(close(k1 - l1 - l2, 0.0, k1.abs().max(l1.abs()).max(l2.abs()), 1e-12));
    }

    #[test]
    fn mirror(r in region(), u in 0.0..1.0f64, b in 0.0..20.0f64, c in 0.0..20.0f64) {
        let a = region_a(r, u);
        let l2 = l2_kernel(r, a, b, c).unwrap();
        let l1 = l1_kernel(r.mirrored(), a, c, b).unwrap();
        prop_assert!(close(l2, l1, l2.abs().max(l1.abs()), 1e-12));
    }

    #[test]
    fn classify_mirrors(q0 in -10.0..10.0f64, q in 0.0..10.0f64) {
        prop_assume!((q0.abs() - q).abs() > 1e-9);
        let r = ConeRegion::classify(q0, q).unwrap();
        prop_assert_eq!(ConeRegion::classify(-q0, q).unwrap(), r.mirrored());
    }
}

#[test]
fn j_example_value() {
    // Δ = 4.25 at (0.5, 1, 2).
    let v = j_fn(0.5, 1.0, 2.0);
    assert!((v + 4.25f64.sqrt() * 8.5).abs() < 1e-13);
}

#[test]
fn kernels_reject_wrong_region() {
    assert!(k1_kernel(ConeRegion::UpperCone, -1.0, 1.0, 2.0).is_err());
    assert!(l2_kernel(ConeRegion::OutsideCone, 1.0, 1.0, 2.0).is_err());
}
