//! Special functions: exponential integrals and Bessel functions J₀, J₁.

use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// Switch point between the power series and the asymptotic expansion.
pub const BESSEL_SERIES_MAX: f64 = 12.0;

/// Entire exponential integral `Ein(x) = ∫₀ˣ (1 − e^{−t})/t dt`.
pub fn ein(x: f64) -> f64 {
    if x.abs() <= 8.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        e1(x) + EULER_GAMMA + x.ln()
    }
}

/// Exponential integral `E₁(x)` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0");
    if x <= 1.0 {
        -EULER_GAMMA - x.ln() + ein(x)
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = match order {
        0 => 1.0,
        _ => half,
    };
    let mut sum = term;
    let q = half * half;
    for k in 1..80 {
        term *= -q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut k = 1;
    let mut prev = f64::INFINITY;
    loop {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * z);
        if term.abs() > prev || k > 60 {
            break;
        }
        prev = term.abs();
        if k % 2 == 1 {
            q += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            p += if (k / 2) % 2 == 1 { -term } else { term };
        }
        k += 1;
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= BESSEL_SERIES_MAX {
        series(0, ax)
    } else {
        asymptotic(0, ax)
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= BESSEL_SERIES_MAX {
        series(1, ax)
    } else {
        asymptotic(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `J₁(x)/x`, finite at the origin.
pub fn bessel_j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        0.5 - x * x / 16.0
    } else {
        bessel_j1(x) / x
    }
}

/// `J₂(x)` from the recurrence `J₂ = 2J₁/x − J₀`, with the series near zero.
pub fn bessel_j2(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let q = 0.25 * x * x;
        let mut term = 0.5 * q;
        let mut sum = term;
        for k in 1..40 {
            term *= -q / (k as f64 * (k + 2) as f64);
            sum += term;
        }
        sum
    } else {
        2.0 * bessel_j1(x) / x - bessel_j0(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ein_matches_e1_relation_across_switch() {
        for &x in &[0.5, 1.0, 2.0, 7.9, 8.1, 15.0] {
            let lhs = ein(x);
            let rhs = e1(x) + EULER_GAMMA + x.ln();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs(), "x={x}");
        }
    }

    #[test]
    fn j2_recurrence_and_series_agree() {
        let x: f64 = 1.0;
        let a = 2.0 * bessel_j1(x) / x - bessel_j0(x);
        assert!((a - bessel_j2(x)).abs() < 1e-14);
    }

    // Reference values from 30-digit arbitrary-precision summation.
    const J_REF: [(f64, f64, f64); 6] = [
        (0.5, 0.242_268_457_674_873_89, 0.938_469_807_240_812_9),
        (3.0, 0.339_058_958_525_936_46, -0.260_051_954_901_933_44),
        (11.9, -0.228_983_249_661_924_06, 0.025_049_441_699_589_645),
        (12.1, -0.215_748_973_376_924_8, 0.069_666_773_606_807_31),
        (20.0, 0.066_833_124_175_850_05, 0.167_024_664_340_583_15),
        (47.3, 0.065_642_086_404_151_88, -0.094_959_345_344_983),
    ];

    #[test]
    fn bessel_matches_reference_on_both_sides_of_switch() {
        for &(x, j1, j0) in &J_REF {
            assert!((bessel_j1(x) - j1).abs() < 1e-12, "J1({x})");
            assert!((bessel_j0(x) - j0).abs() < 1e-12, "J0({x})");
            assert!((bessel_j1(-x) + j1).abs() < 1e-12);
        }
    }

    #[test]
    fn ein_small_argument() {
        // Ein(x) = x − x²/4 + x³/18 − …
        let x = 1e-3;
        assert!((ein(x) - (x - x * x / 4.0 + x.powi(3) / 18.0 - x.powi(4) / 96.0)).abs() < 1e-17);
        assert!((e1(1.0) - 0.219_383_934_395_520_27).abs() < 1e-14);
    }
}
