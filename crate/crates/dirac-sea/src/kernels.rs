//! Closed-form radial kernels: `Δ`, `J`, `K`, `H`, the region-wise
//! convolution kernels `K1`, `K2`, `L1`, `L2` and the regularized `H_ε`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a momentum vector relative to the mass cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeRegion {
    UpperCone,
    LowerCone,
    OutsideCone,
}

impl ConeRegion {
    /// Classifies `q` by `q² = q0² − |q⃗|²` and the sign of `q0`.
    pub fn classify(q0: f64, qvec_norm: f64) -> Option<Self> {
        let a = q0 * q0 - qvec_norm * qvec_norm;
        if a > 0.0 {
            Some(if q0 > 0.0 {
                ConeRegion::UpperCone
            } else {
                ConeRegion::LowerCone
            })
        } else if a < 0.0 {
            Some(ConeRegion::OutsideCone)
        } else {
            None
        }
    }

    /// Region of `−q`.
    pub fn mirrored(self) -> Self {
        match self {
            ConeRegion::UpperCone => ConeRegion::LowerCone,
            ConeRegion::LowerCone => ConeRegion::UpperCone,
            ConeRegion::OutsideCone => ConeRegion::OutsideCone,
        }
    }

    fn check(self, a: f64) -> Result<()> {
        let ok = match self {
            ConeRegion::UpperCone | ConeRegion::LowerCone => a > 0.0,
            ConeRegion::OutsideCone => a < 0.0,
        };
        if ok && a.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("q² = {a} is inconsistent with {self:?}")))
        }
    }
}

/// `Θ` with `Θ(0) = 0`.
#[inline]
pub fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `ε` with `ε(0) = +1`.
#[inline]
pub fn sign_eps(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn prefactor() -> f64 {
    1.0 / (32.0 * PI.powi(3))
}

#[inline]
pub fn delta_fn(a: f64, b: f64, c: f64) -> f64 {
    let d = b - c;
    d * d + a * (a - 2.0 * (b + c))
}

// Δ(a, x², y²) with x² − y² formed as (x − y)(x + y).
#[inline]
fn delta_masses(a: f64, x: f64, y: f64) -> (f64, f64) {
    let d = (x - y) * (x + y);
    (d, d * d + a * (a - 2.0 * (x * x + y * y)))
}

/// Threshold `(|x| − |y|)²` above which `J` vanishes.
#[inline]
pub fn kink(x: f64, y: f64) -> f64 {
    let d = x.abs() - y.abs();
    d * d
}

pub fn j_fn(a: f64, x: f64, y: f64) -> f64 {
    if !(a < kink(x, y)) {
        return 0.0;
    }
    let (d, delta) = delta_masses(a, x, y);
    let sd = delta.max(0.0).sqrt();
    let s = x + y;
    -sd * (x - y) * sign_eps(d) * (s * s - a)
}

pub fn k_fn(a: f64, x: f64, y: f64) -> f64 {
    let d = x - y;
    let s = x + y;
    d * d * s * s * s - 2.0 * a * (x * x * x + y * y * y)
}

/// `H = (J + K)/a` without the domain check. Below the kink the `O(1)` parts
/// of `J` and `K` are cancelled analytically, so the value is accurate down to
/// `a → 0`.
#[inline]
pub fn h_value(a: f64, x: f64, y: f64) -> f64 {
    let (b, c) = (x * x, y * y);
    let cubes = 2.0 * (x * x * x + y * y * y);
    let s = x + y;
    if a < kink(x, y) {
        let (d, delta) = delta_masses(a, x, y);
        let sd = delta.max(0.0).sqrt();
        let sigma = (x - y) * sign_eps(d);
        (x - y) * d - cubes - (s * s - a) * sigma * (a - 2.0 * (b + c)) / (sd + d.abs())
    } else {
        let dd = x - y;
        dd * dd * s * s * s / a - cubes
    }
}

pub fn h_fn(a: f64, x: f64, y: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("H requires a > 0, got {a}")));
    }
    Ok(h_value(a, x, y))
}

/// Pieces of a region kernel that is inside/outside-cone dependent.
struct Parts {
    sqrt_delta: f64,
    /// Θ selecting the `√Δ` term inside the cone (1 outside).
    inner: f64,
    /// Θ of the light-cone term inside the cone, `ε(b − c)` outside.
    step: f64,
}

fn parts(region: ConeRegion, a: f64, b: f64, c: f64) -> Result<Parts> {
    region.check(a)?;
    if b < 0.0 || c < 0.0 {
        return Err(Error::Domain("b and c must be non-negative".into()));
    }
    let (sa, sb, sc) = (a.abs().sqrt(), b.sqrt(), c.sqrt());
    let (inner, step) = match region {
        ConeRegion::UpperCone => (theta(sb - sa - sc), theta(b - c)),
        ConeRegion::LowerCone => (theta(sc - sa - sb), theta(c - b)),
        ConeRegion::OutsideCone => (1.0, sign_eps(b - c)),
    };
    let sqrt_delta = if inner > 0.0 {
        delta_fn(a, b, c).max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(Parts {
        sqrt_delta,
        inner,
        step,
    })
}

// `x + y` with `x = √Δ·P` and `y = Q`; when the two nearly cancel, uses
// `(ΔP² − Q²)/(x − y)` with the numerator supplied in factored form.
#[inline]
fn cancel_free(x: f64, y: f64, reduced: f64) -> f64 {
    let sum = x + y;
    if x * y < 0.0 && sum.abs() < 0.5 * x.abs().max(y.abs()) {
        reduced / (x - y)
    } else {
        sum
    }
}

pub fn k1_kernel(region: ConeRegion, a: f64, b: f64, c: f64) -> Result<f64> {
    let p = parts(region, a, b, c)?;
    let bc = (b - c).abs();
    let reduced = a * (a - 2.0 * (b + c));
    let v = match region {
        ConeRegion::OutsideCone => cancel_free(p.sqrt_delta, -bc, reduced) / (2.0 * a),
        _ => cancel_free(p.sqrt_delta * p.inner, -bc * p.step, reduced) / a,
    };
    Ok(prefactor() * v)
}

pub fn k2_kernel(region: ConeRegion, a: f64, b: f64, c: f64) -> Result<f64> {
    let p = parts(region, a, b, c)?;
    let bc = (b - c).abs();
    let s = b + c;
    let reduced = a * (a - 2.0 * s) * (a * a - 2.0 * a * s + 2.0 * (b * b + c * c));
    let x = p.sqrt_delta * (s - a);
    let v = match region {
        ConeRegion::OutsideCone => cancel_free(x, -bc * s, reduced) / (4.0 * a),
        _ => cancel_free(x * p.inner, -bc * s * p.step, reduced) / (2.0 * a),
    };
    Ok(prefactor() * v)
}

// Factored `ΔP² − Q²` of the derivative kernels, with `u` the argument of the
// differentiated factor. Shared so that the mirror relation holds bitwise.
#[inline]
fn l_reduced(a: f64, u: f64, v: f64) -> f64 {
    a * a * (a * a - 4.0 * a * u + 2.0 * u * u - 4.0 * u * v - 2.0 * v * v)
}

/// Scalar coefficient of `i q̸` in the product with the derivative on the
/// first factor.
pub fn l1_kernel(region: ConeRegion, a: f64, b: f64, c: f64) -> Result<f64> {
    let p = parts(region, a, b, c)?;
    let a2 = a * a;
    let light = (b - c) * (b - c) - 2.0 * a * b;
    let reduced = l_reduced(a, b, c);
    let x = p.sqrt_delta * (a - b + c);
    let v = match region {
        ConeRegion::UpperCone => cancel_free(x * p.inner, light * p.step, reduced) / (2.0 * a2),
        ConeRegion::LowerCone => cancel_free(x * p.inner, -light * p.step, reduced) / (2.0 * a2),
        ConeRegion::OutsideCone => cancel_free(x, light * p.step, reduced) / (4.0 * a2),
    };
    Ok(prefactor() * v)
}

/// Scalar coefficient of `i q̸` with the derivative on the second factor.
pub fn l2_kernel(region: ConeRegion, a: f64, b: f64, c: f64) -> Result<f64> {
    let p = parts(region, a, b, c)?;
    let a2 = a * a;
    let light = (c - b) * (c - b) - 2.0 * a * c;
    let reduced = l_reduced(a, c, b);
    let x = p.sqrt_delta * (a - c + b);
    let v = match region {
        ConeRegion::UpperCone => cancel_free(x * p.inner, -light * p.step, reduced) / (2.0 * a2),
        ConeRegion::LowerCone => cancel_free(x * p.inner, light * p.step, reduced) / (2.0 * a2),
        ConeRegion::OutsideCone => cancel_free(x, -light * p.step, reduced) / (4.0 * a2),
    };
    Ok(prefactor() * v)
}

/// Regularized mixed-convolution kernel outside the mass cone.
pub fn h_eps_kernel(q0: f64, qvec_norm: f64, b: f64, c: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if b < 0.0 || c < 0.0 {
        return Err(Error::Domain("b and c must be non-negative".into()));
    }
    let a = q0 * q0 - qvec_norm * qvec_norm;
    if !(a < 0.0) {
        return Err(Error::Domain("q must lie outside the mass cone".into()));
    }
    let q = qvec_norm.abs();
    let sd = delta_fn(a, b, c).max(0.0).sqrt();
    let expo = eps * q * sd / a + eps * q0 * (c - b) / a;
    Ok(expo.exp() / (2.0 * eps * q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        assert_eq!(delta_fn(1.0, 1.0, 1.0), -3.0);
        assert_eq!(delta_fn(0.0, 2.0, 5.0), 9.0);
        assert_eq!(delta_fn(4.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn j_examples() {
        assert_eq!(j_fn(0.3, 1.5, 1.5), 0.0);
        assert_eq!(j_fn(2.0, 1.0, 2.0), 0.0);
        let expected = -(4.25f64).sqrt() * 8.5;
        assert!((j_fn(0.5, 1.0, 2.0) - expected).abs() < 1e-13);
        assert!((j_fn(0.5, 1.0, 2.0) + 17.5236).abs() < 1e-3);
        // Θ(0) = 0 at threshold.
        assert_eq!(j_fn(1.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn k_examples() {
        assert_eq!(k_fn(0.7, 1.0, 1.0), -4.0 * 0.7);
        assert_eq!(k_fn(0.0, 1.0, 3.0), 4.0 * 64.0);
        assert_eq!(k_fn(1.0, 1.0, 2.0), 9.0);
    }

    #[test]
    fn h_matches_definition_away_from_zero() {
        for &(a, x, y) in &[(0.5, 1.0, 2.0), (0.2, -1.0, 2.0), (3.0, 1.0, 4.0), (2.0, 1.0, 2.0)] {
            let naive = (j_fn(a, x, y) + k_fn(a, x, y)) / a;
            assert!((h_value(a, x, y) - naive).abs() < 1e-12 * naive.abs().max(1.0));
        }
        assert_eq!(h_fn(0.3, 1.0, 1.0).unwrap(), -4.0);
        assert!(h_fn(0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn region_mismatch_is_rejected() {
        assert!(k1_kernel(ConeRegion::OutsideCone, 1.0, 1.0, 2.0).is_err());
        assert!(l1_kernel(ConeRegion::UpperCone, -1.0, 1.0, 2.0).is_err());
        assert!(h_eps_kernel(2.0, 1.0, 1.0, 1.0, 0.1).is_err());
        assert!(h_eps_kernel(0.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn classify_regions() {
        assert_eq!(ConeRegion::classify(2.0, 1.0), Some(ConeRegion::UpperCone));
        assert_eq!(ConeRegion::classify(-2.0, 1.0), Some(ConeRegion::LowerCone));
        assert_eq!(ConeRegion::classify(0.5, 1.0), Some(ConeRegion::OutsideCone));
        assert_eq!(ConeRegion::classify(1.0, 1.0), None);
    }
}
