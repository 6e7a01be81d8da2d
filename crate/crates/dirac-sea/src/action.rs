//! Momentum-space action: pair integrals of `H`, the quartic and extended
//! actions, the free function `F` of each gauge and the ε-regularized action.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{h_value, j_fn, k_fn, kink};
use crate::model::{m3_of, m5_of, quartic_norm, CouplingParams, Gauge, SeaConfig};
use crate::quad::{integrate_segments, split_segments, QuadSettings};
use crate::special::{ein, EULER_GAMMA};

/// Kinks of `H(·,x,y)` inside `(lo, hi)`.
fn kinks_in(pairs: &[(f64, f64)], lo: f64, hi: f64) -> Vec<f64> {
    let mut k: Vec<f64> = pairs
        .iter()
        .map(|&(x, y)| kink(x, y))
        .filter(|&k| k > lo && k < hi)
        .collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

/// `∫₀^{a_max} H(a,x,y)·H(a,u,v) da`.
pub fn pair_integral(x: f64, y: f64, u: f64, v: f64, a_max: f64, quad: &QuadSettings) -> Result<f64> {
    if !(a_max > 0.0) {
        return Err(Error::validation("a_max", "must be positive"));
    }
    let k = kinks_in(&[(x, y), (u, v)], 0.0, a_max);
    let segs = split_segments(0.0, a_max, &k, &k);
    Ok(integrate_segments(|a| h_value(a, x, y) * h_value(a, u, v), &segs, quad)?.value)
}

/// Part of `∫ H·H` that lies beyond `a_max`, measured against the
/// asymptotic product `K·K/a²`. Zero unless a kink exceeds `a_max`.
pub fn pair_tail(x: f64, y: f64, u: f64, v: f64, a_max: f64, quad: &QuadSettings) -> Result<f64> {
    let top = kink(x, y).max(kink(u, v));
    if top <= a_max {
        return Ok(0.0);
    }
    let k = kinks_in(&[(x, y), (u, v)], a_max, top);
    let mut pts = k.clone();
    pts.push(top);
    let segs = split_segments(a_max, top, &k, &pts);
    let f = |a: f64| {
        let (j1, k1) = (j_fn(a, x, y), k_fn(a, x, y));
        let (j2, k2) = (j_fn(a, u, v), k_fn(a, u, v));
        (j1 * j2 + j1 * k2 + k1 * j2) / (a * a)
    };
    Ok(integrate_segments(f, &segs, quad)?.value)
}

/// [`pair_integral`] plus [`pair_tail`].
pub fn pair_integral_referenced(
    x: f64,
    y: f64,
    u: f64,
    v: f64,
    a_max: f64,
    quad: &QuadSettings,
) -> Result<f64> {
    Ok(pair_integral(x, y, u, v, a_max, quad)? + pair_tail(x, y, u, v, a_max, quad)?)
}

/// Table of `G(x,y;u,v)` over all mass pairs of one configuration, built from
/// one evaluation per symmetry orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairIntegralTable {
    pub masses: Vec<f64>,
    pub a_max: f64,
    pub quad: QuadSettings,
    values: Vec<f64>,
}

impl PairIntegralTable {
    pub fn build(masses: &[f64], a_max: f64, quad: &QuadSettings) -> Result<Self> {
        let g = masses.len();
        let pairs: Vec<(usize, usize)> = (0..g).flat_map(|i| (i..g).map(move |j| (i, j))).collect();
        let orbits: Vec<(usize, usize)> = (0..pairs.len())
            .flat_map(|p| (p..pairs.len()).map(move |q| (p, q)))
            .collect();
        let computed: Vec<f64> = orbits
            .par_iter()
            .map(|&(p, q)| {
                let (i, j) = pairs[p];
                let (k, l) = pairs[q];
                pair_integral_referenced(masses[i], masses[j], masses[k], masses[l], a_max, quad)
            })
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; g * g * g * g];
        for (&(p, q), &val) in orbits.iter().zip(&computed) {
            let (i, j) = pairs[p];
            let (k, l) = pairs[q];
            for (a, b) in [(i, j), (j, i)] {
                for (c, d) in [(k, l), (l, k)] {
                    values[((a * g + b) * g + c) * g + d] = val;
                    values[((c * g + d) * g + a) * g + b] = val;
                }
            }
        }
        Ok(PairIntegralTable {
            masses: masses.to_vec(),
            a_max,
            quad: *quad,
            values,
        })
    }

    pub fn g(&self) -> usize {
        self.masses.len()
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let g = self.g();
        self.values[((a * g + b) * g + c) * g + d]
    }

    /// `Σ ρ_α ρ_β ρ_γ ρ_δ G(α,β;γ,δ)`.
    pub fn contract(&self, weights: &[f64]) -> f64 {
        let g = self.g();
        let mut s = 0.0;
        for a in 0..g {
            for b in 0..g {
                let wab = weights[a] * weights[b];
                for c in 0..g {
                    for d in 0..g {
                        s += wab * weights[c] * weights[d] * self.get(a, b, c, d);
                    }
                }
            }
        }
        s
    }
}

fn check_a_max(cfg: &SeaConfig, a_max: f64) -> Result<()> {
    let m = cfg.max_mass();
    if !(a_max > m * m) {
        return Err(Error::validation("a_max", format!("must exceed max m² = {}", m * m)));
    }
    Ok(())
}

/// Quartic action `(1/2¹⁶π¹⁰) Σ ρρρρ G`.
pub fn action_quartic(cfg: &SeaConfig, a_max: f64, quad: &QuadSettings) -> Result<f64> {
    check_a_max(cfg, a_max)?;
    let table = PairIntegralTable::build(cfg.masses(), a_max, quad)?;
    Ok(table.contract(cfg.weights()) / quartic_norm())
}

/// `B(a) = Σ ρ_α ρ_β H(a, m_α, m_β)`.
pub fn h_sum(a: f64, masses: &[f64], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, (&x, &rx)) in masses.iter().zip(weights).enumerate() {
        s += rx * rx * h_value(a, x, x);
        for (&y, &ry) in masses[i + 1..].iter().zip(&weights[i + 1..]) {
            s += 2.0 * rx * ry * h_value(a, x, y);
        }
    }
    s
}

pub(crate) fn config_kinks(masses: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, &x) in masses.iter().enumerate() {
        for &y in &masses[i + 1..] {
            let k = kink(x, y);
            if k > 0.0 {
                out.push(k);
            }
        }
    }
    out
}

/// Quartic action from a single integral of `B(a)²`, for arbitrary (also
/// unsorted or negative) masses. Agrees with [`action_quartic`].
pub fn action_quartic_direct(
    masses: &[f64],
    weights: &[f64],
    a_max: f64,
    quad: &QuadSettings,
) -> Result<f64> {
    let k = config_kinks(masses);
    let segs = split_segments(0.0, a_max, &k, &k);
    let mut s = integrate_segments(|a| h_sum(a, masses, weights).powi(2), &segs, quad)?.value;
    let top = k.iter().copied().fold(0.0, f64::max);
    if top > a_max {
        let segs = split_segments(a_max, top, &k, &k);
        let f = |a: f64| {
            let mut bk = 0.0;
            for (&x, &rx) in masses.iter().zip(weights) {
                for (&y, &ry) in masses.iter().zip(weights) {
                    bk += rx * ry * k_fn(a, x, y);
                }
            }
            let bk = bk / a;
            let b = h_sum(a, masses, weights);
            (b - bk) * (b + bk)
        };
        s += integrate_segments(f, &segs, quad)?.value;
    }
    Ok(s / quartic_norm())
}

/// The free function `F(a_max, m₃, m₅)` of the given gauge.
pub fn gauge_f(gauge: Gauge, a_max: f64, m3: f64, m5: f64) -> f64 {
    match gauge {
        Gauge::Truncated => 0.0,
        Gauge::Natural => {
            let l = EULER_GAMMA + (0.5 * a_max).ln();
            -0.25 * a_max * m3 * m3 - 2.0 * m3 * m5 * l + 4.0 * m5 * m5 / a_max
        }
    }
}

/// `(∂F/∂m₃, ∂F/∂m₅)`.
pub fn gauge_f_gradient(gauge: Gauge, a_max: f64, m3: f64, m5: f64) -> (f64, f64) {
    match gauge {
        Gauge::Truncated => (0.0, 0.0),
        Gauge::Natural => natural_gradient(a_max, m3, m5),
    }
}

fn natural_gradient(a_max: f64, m3: f64, m5: f64) -> (f64, f64) {
    let l = EULER_GAMMA + (0.5 * a_max).ln();
    (-0.5 * a_max * m3 - 2.0 * m5 * l, -2.0 * m3 * l + 8.0 * m5 / a_max)
}

fn moment(cfg_masses: &[f64], weights: &[f64], p: i32) -> f64 {
    cfg_masses.iter().zip(weights).map(|(m, r)| r * m.powi(p)).sum()
}

/// Quartic action plus `F` plus `c₃ Σρm⁴ + c₄ Σρm⁵`.
pub fn action_extended(cfg: &SeaConfig, params: &CouplingParams, quad: &QuadSettings) -> Result<f64> {
    params.validate_for(cfg)?;
    let q = action_quartic(cfg, params.a_max, quad)?;
    Ok(q + extension_terms(cfg.masses(), cfg.weights(), params))
}

/// Extended action plus the light-cone terms `2c₁m₃ − 2c₀m₅`; its gradient
/// in a test weight is `2m³·V(m)`.
pub fn action_effective(cfg: &SeaConfig, params: &CouplingParams, quad: &QuadSettings) -> Result<f64> {
    let ext = action_extended(cfg, params, quad)?;
    Ok(ext + light_cone_terms(cfg.masses(), cfg.weights(), params))
}

/// [`action_effective`] for raw mass/weight slices.
pub fn action_effective_raw(
    masses: &[f64],
    weights: &[f64],
    params: &CouplingParams,
    quad: &QuadSettings,
) -> Result<f64> {
    let q = action_quartic_direct(masses, weights, params.a_max, quad)?;
    Ok(q + extension_terms(masses, weights, params) + light_cone_terms(masses, weights, params))
}

fn extension_terms(masses: &[f64], weights: &[f64], params: &CouplingParams) -> f64 {
    let m3 = m3_of(masses, weights);
    let m5 = m5_of(masses, weights);
    gauge_f(params.gauge, params.a_max, m3, m5)
        + params.c3 * moment(masses, weights, 4)
        + params.c4 * moment(masses, weights, 5)
}

fn light_cone_terms(masses: &[f64], weights: &[f64], params: &CouplingParams) -> f64 {
    2.0 * params.c1 * m3_of(masses, weights) - 2.0 * params.c0 * m5_of(masses, weights)
}

/// Moves the cutoff of a truncated-gauge parameter set to `new_a_max` and
/// shifts `(c₀, c₁)` so that the variation density of `cfg` is unchanged.
/// Natural-gauge parameters do not depend on the cutoff and only move it.
pub fn compensate_cutoff(cfg: &SeaConfig, params: &CouplingParams, new_a_max: f64) -> Result<CouplingParams> {
    let mut out = *params;
    out.a_max = new_a_max;
    out.validate_for(cfg)?;
    if params.gauge == Gauge::Truncated {
        let (m3, m5) = (cfg.scalars().m3, cfg.scalars().m5);
        let (p0, q0) = natural_gradient(params.a_max, m3, m5);
        let (p1, q1) = natural_gradient(new_a_max, m3, m5);
        out.c1 += 0.5 * (p1 - p0);
        out.c0 -= 0.5 * (q1 - q0);
    }
    Ok(out)
}

/// ε-regularized action with its counter terms removed; converges to the
/// natural-gauge quartic action as ε → 0.
pub fn regularized_action(cfg: &SeaConfig, eps: f64, quad: &QuadSettings) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::validation("eps", "must be positive"));
    }
    let masses = cfg.masses();
    let weights = cfg.weights();
    let m3 = m3_of(masses, weights);
    let m5 = m5_of(masses, weights);
    let a_max = crate::model::default_a_max(cfg);
    let k = config_kinks(masses);
    let segs = split_segments(0.0, a_max, &k, &k);
    let pi2 = PI * PI;
    let f = |a: f64| {
        let t = h_sum(a, masses, weights) / (64.0 * pi2 * PI) + 2.0 * pi2 * m3 * (-0.5 * eps * a).exp_m1();
        t * t
    };
    let body = integrate_segments(f, &segs, quad)?.value / (16.0 * pi2 * pi2);
    let tail = 0.25 * m3 * m3 * (-eps * a_max).exp_m1() / eps
        + 2.0 * m3 * m5 * (-EULER_GAMMA - (0.5 * a_max).ln() + ein(0.5 * eps * a_max))
        + 4.0 * m5 * m5 / a_max;
    Ok(body + tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_mass_pair_integral_is_exact() {
        let q = QuadSettings::default();
        assert!((pair_integral(1.0, 1.0, 1.0, 1.0, 2.0, &q).unwrap() - 32.0).abs() < 1e-12);
        let x: f64 = 1.7;
        let g = pair_integral(x, x, x, x, 3.5, &q).unwrap();
        assert!((g - 16.0 * x.powi(6) * 3.5).abs() < 1e-10 * g);
    }

    #[test]
    fn tail_vanishes_below_cutoff() {
        let q = QuadSettings::default();
        assert_eq!(pair_tail(1.0, 2.0, 1.0, 3.0, 5.0, &q).unwrap(), 0.0);
        assert!(pair_tail(1.0, 4.0, 1.0, 1.0, 5.0, &q).unwrap() != 0.0);
    }

    #[test]
    fn natural_f_gradient_matches_difference() {
        let (a, m3, m5) = (7.0, -3e-4, 2e-4);
        let (p, q) = gauge_f_gradient(Gauge::Natural, a, m3, m5);
        let h = 1e-8;
        let fp = (gauge_f(Gauge::Natural, a, m3 + h, m5) - gauge_f(Gauge::Natural, a, m3 - h, m5)) / (2.0 * h);
        let fq = (gauge_f(Gauge::Natural, a, m3, m5 + h) - gauge_f(Gauge::Natural, a, m3, m5 - h)) / (2.0 * h);
        assert!((p - fp).abs() < 1e-8 * p.abs());
        assert!((q - fq).abs() < 1e-8 * q.abs());
    }
}
