//! Variation density `V(m)`, its derivative, Euler–Lagrange residuals,
//! sampled curves and the state-stability classification.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{config_kinks, gauge_f_gradient, h_sum};
use crate::error::{Error, Result};
use crate::kernels::{h_value, j_fn, kink};
use crate::model::{dm3_drho, dm5_drho, m3_of, m5_of, quartic_norm, CouplingParams, SeaConfig};
use crate::quad::{integrate_segments, split_segments, QuadSettings};

/// `V(m)` split into the quartic part, the gauge part and the contributions
/// per unit of `c₀, c₁, c₃, c₄`. All pieces carry the `1/(2m³)` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VParts {
    pub quartic: f64,
    pub gauge: f64,
    pub basis: [f64; 4],
}

impl VParts {
    pub fn total(&self, params: &CouplingParams) -> f64 {
        self.base() + self.coupling(params)
    }

    /// Part that does not depend on the constants `c`.
    pub fn base(&self) -> f64 {
        self.quartic + self.gauge
    }

    pub fn coupling(&self, params: &CouplingParams) -> f64 {
        let c = [params.c0, params.c1, params.c3, params.c4];
        self.basis.iter().zip(c).map(|(b, c)| b * c).sum()
    }

    fn combine(&self, w: f64, other: &VParts, wo: f64) -> VParts {
        let mut basis = [0.0; 4];
        for (i, b) in basis.iter_mut().enumerate() {
            *b = w * self.basis[i] + wo * other.basis[i];
        }
        VParts {
            quartic: w * self.quartic + wo * other.quartic,
            gauge: w * self.gauge + wo * other.gauge,
            basis,
        }
    }
}

/// Quartic part of `2m³·V(m)` without the prefactor: `Σ_β ρ_β ∫ H(a,m,m_β) B(a) da`
/// with the tail beyond `a_max` referenced to the asymptotic kernels.
fn quartic_integral(m: f64, masses: &[f64], weights: &[f64], a_max: f64, quad: &QuadSettings) -> Result<f64> {
    let mut k = config_kinks(masses);
    for &mb in masses {
        let kk = kink(m, mb);
        if kk > 0.0 {
            k.push(kk);
        }
    }
    let test = |a: f64| -> f64 {
        masses
            .iter()
            .zip(weights)
            .map(|(&mb, &rb)| rb * h_value(a, m, mb))
            .sum()
    };
    let segs = split_segments(0.0, a_max, &k, &k);
    let mut s = integrate_segments(|a| test(a) * h_sum(a, masses, weights), &segs, quad)?.value;
    let top = k.iter().copied().fold(0.0, f64::max);
    if top > a_max {
        let j_test = |a: f64| -> f64 {
            masses
                .iter()
                .zip(weights)
                .map(|(&mb, &rb)| rb * j_fn(a, m, mb))
                .sum::<f64>()
                / a
        };
        let j_sea = |a: f64| -> f64 {
            let mut s = 0.0;
            for (&x, &rx) in masses.iter().zip(weights) {
                for (&y, &ry) in masses.iter().zip(weights) {
                    s += rx * ry * j_fn(a, x, y);
                }
            }
            s / a
        };
        // T·B − T_K·B_K = J_T·B + (T − J_T)·J_B.
        let f = |a: f64| {
            let jt = j_test(a);
            let jb = j_sea(a);
            jt * h_sum(a, masses, weights) + (test(a) - jt) * jb
        };
        let segs = split_segments(a_max, top, &k, &k);
        s += integrate_segments(f, &segs, quad)?.value;
    }
    Ok(s)
}

/// Decomposed variation density for a test mass `m ≠ 0` (any sign) against
/// raw mass/weight slices.
pub fn variation_parts(
    m: f64,
    masses: &[f64],
    weights: &[f64],
    params: &CouplingParams,
    quad: &QuadSettings,
) -> Result<VParts> {
    if m == 0.0 || !m.is_finite() {
        return Err(Error::Domain(format!("test mass must be finite and nonzero, got {m}")));
    }
    let norm = 1.0 / (2.0 * m * m * m);
    let quartic = 4.0 / quartic_norm() * quartic_integral(m, masses, weights, params.a_max, quad)? * norm;
    let d3 = dm3_drho(m, masses, weights);
    let d5 = dm5_drho(m, masses, weights);
    let (p, q) = gauge_f_gradient(params.gauge, params.a_max, m3_of(masses, weights), m5_of(masses, weights));
    Ok(VParts {
        quartic,
        gauge: (p * d3 + q * d5) * norm,
        basis: [-2.0 * d5 * norm, 2.0 * d3 * norm, 0.5 * m, 0.5 * m * m],
    })
}

/// Nearest seam `±m_β` to `m`.
fn nearest_seam(m: f64, masses: &[f64]) -> Option<f64> {
    masses
        .iter()
        .flat_map(|&mb| [mb, -mb])
        .min_by(|a, b| (m - a).abs().total_cmp(&(m - b).abs()))
}

fn on_seam(m: f64, s: f64) -> bool {
    (m - s).abs() <= 1e-12 * s.abs()
}

/// `V(m)`. Rejects test masses on a seam `±m_β`; see [`seam_limit_density`].
pub fn variation_density(m: f64, cfg: &SeaConfig, params: &CouplingParams, quad: &QuadSettings) -> Result<f64> {
    if let Some(s) = nearest_seam(m, cfg.masses()) {
        if on_seam(m, s) {
            return Err(Error::Seam { m, seam: s });
        }
    }
    Ok(variation_parts(m, cfg.masses(), cfg.weights(), params, quad)?.total(params))
}

/// `V(m)` including seam points, where `V` is continuous and the integral
/// representation is evaluated directly.
pub fn seam_limit_density(m: f64, cfg: &SeaConfig, params: &CouplingParams, quad: &QuadSettings) -> Result<f64> {
    Ok(variation_parts(m, cfg.masses(), cfg.weights(), params, quad)?.total(params))
}

fn richardson(d_h: VParts, d_h2: VParts) -> VParts {
    d_h2.combine(4.0 / 3.0, &d_h, -1.0 / 3.0)
}

fn central(
    m: f64,
    h: f64,
    masses: &[f64],
    weights: &[f64],
    params: &CouplingParams,
    quad: &QuadSettings,
) -> Result<VParts> {
    let p = variation_parts(m + h, masses, weights, params, quad)?;
    let n = variation_parts(m - h, masses, weights, params, quad)?;
    Ok(p.combine(0.5 / h, &n, -0.5 / h))
}

/// Derivative of every part of `V` at `m`. At a seam the symmetric difference
/// removes the even `(m−m_β)² log|m−m_β|` part, which leaves the two-sided
/// limit of `V′`. Off seams the step shrinks to a quarter of the seam distance.
pub fn variation_parts_prime(
    m: f64,
    masses: &[f64],
    weights: &[f64],
    params: &CouplingParams,
    quad: &QuadSettings,
) -> Result<VParts> {
    let mut h = 1e-3 * m.abs().max(1e-2);
    if let Some(s) = nearest_seam(m, masses) {
        let d = (m - s).abs();
        if on_seam(m, s) {
            return seam_derivative(m, 2.0 * h, masses, weights, params, quad);
        }
        if d < 4.0 * h {
            h = 0.25 * d;
        }
    }
    if m.abs() <= 2.0 * h {
        h = 0.25 * m.abs();
    }
    let d1 = central(m, h, masses, weights, params, quad)?;
    let d2 = central(m, 0.5 * h, masses, weights, params, quad)?;
    Ok(richardson(d1, d2))
}

/// Symmetric differences `D(h)` at a seam still carry odd terms of the form
/// `h²(A + B log h)`; three step sizes eliminate both.
fn seam_derivative(
    m: f64,
    h: f64,
    masses: &[f64],
    weights: &[f64],
    params: &CouplingParams,
    quad: &QuadSettings,
) -> Result<VParts> {
    let hs = [h, 0.5 * h, 0.25 * h];
    let ds = hs
        .iter()
        .map(|&h| central(m, h, masses, weights, params, quad))
        .collect::<Result<Vec<_>>>()?;
    let a = Matrix3::from_fn(|i, j| match j {
        0 => 1.0,
        1 => (hs[i] / h).powi(2),
        _ => (hs[i] / h).powi(2) * (hs[i] / h).ln(),
    });
    let inv = a
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("singular seam extrapolation".into()))?;
    // Row 0 of the inverse gives the weights of the h → 0 value.
    let w = [inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]];
    let first = ds[0].combine(w[0], &ds[1], w[1]);
    Ok(first.combine(1.0, &ds[2], w[2]))
}

/// `V′(m)`, with the two-sided limit at seams.
pub fn variation_density_prime(
    m: f64,
    cfg: &SeaConfig,
    params: &CouplingParams,
    quad: &QuadSettings,
) -> Result<f64> {
    let d = variation_parts_prime(m, cfg.masses(), cfg.weights(), params, quad)?;
    let v = d.total(params);
    if !v.is_finite() {
        return Err(Error::NonConvergence(format!("V′({m}) is not finite")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ELResiduals {
    /// `V(m_α) − V(m₁)` for `α = 2..g`.
    pub value_gaps: Vec<f64>,
    /// `V′(m_α)` for `α = 1..g`.
    pub derivative_residuals: Vec<f64>,
}

impl ELResiduals {
    pub fn max_abs(&self) -> f64 {
        self.value_gaps
            .iter()
            .chain(&self.derivative_residuals)
            .fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Seam values and derivatives of every part at each occupied mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SeamParts {
    pub values: Vec<VParts>,
    pub slopes: Vec<VParts>,
}

pub fn seam_parts(masses: &[f64], weights: &[f64], params: &CouplingParams, quad: &QuadSettings) -> Result<SeamParts> {
    let values = masses
        .iter()
        .map(|&m| variation_parts(m, masses, weights, params, quad))
        .collect::<Result<Vec<_>>>()?;
    let slopes = masses
        .iter()
        .map(|&m| variation_parts_prime(m, masses, weights, params, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeamParts { values, slopes })
}

impl SeamParts {
    pub fn residuals(&self, params: &CouplingParams) -> ELResiduals {
        let v0 = self.values[0].total(params);
        ELResiduals {
            value_gaps: self.values[1..].iter().map(|v| v.total(params) - v0).collect(),
            derivative_residuals: self.slopes.iter().map(|d| d.total(params)).collect(),
        }
    }

    /// Scale that does not depend on the constants `c`: the largest
    /// `|quartic| + |gauge|` among the seam values.
    pub fn scale(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.quartic.abs() + v.gauge.abs())
            .fold(0.0, f64::max)
    }
}

pub fn el_residuals(cfg: &SeaConfig, params: &CouplingParams, quad: &QuadSettings) -> Result<ELResiduals> {
    Ok(seam_parts(cfg.masses(), cfg.weights(), params, quad)?.residuals(params))
}

/// Uniform grid on `[min, max]` with `n` nodes. Nodes that fall on `0` or on
/// a seam are moved off it, and optionally a geometric cluster of nodes is
/// added on each side of every seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    #[serde(default = "default_true")]
    pub seam_refine: bool,
}

fn default_true() -> bool {
    true
}

impl GridSpec {
    pub fn new(min: f64, max: f64, n: usize) -> Self {
        GridSpec {
            min,
            max,
            n,
            seam_refine: true,
        }
    }

    /// Symmetric grid covering `[−M, M]` with `M = 2·max m_β`.
    pub fn covering(cfg: &SeaConfig, n: usize) -> Self {
        let m = 2.0 * cfg.max_mass();
        GridSpec::new(-m, m, n)
    }

    /// Parses `"min:max:n"`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::validation("grid", format!("expected \"min:max:n\", got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(max > min) || n < 2 {
            return Err(Error::validation("grid", "need max > min and n ≥ 2"));
        }
        Ok(GridSpec::new(min, max, n))
    }

    pub fn nodes(&self, masses: &[f64]) -> Vec<f64> {
        let span = self.max - self.min;
        let step = span / (self.n - 1) as f64;
        let guard = 1e-6 * step;
        let seams: Vec<f64> = masses.iter().flat_map(|&m| [m, -m]).collect();
        let mut nodes: Vec<f64> = (0..self.n).map(|i| self.min + step * i as f64).collect();
        if self.seam_refine {
            for &s in &seams {
                for k in 1..=4 {
                    let d = s.abs() * 10f64.powi(-k);
                    for x in [s - d, s + d] {
                        if x > self.min && x < self.max {
                            nodes.push(x);
                        }
                    }
                }
            }
        }
        for x in nodes.iter_mut() {
            for &s in seams.iter().chain(std::iter::once(&0.0)) {
                if (*x - s).abs() < guard {
                    *x = s + if *x >= s { guard } else { -guard };
                    if s == 0.0 && *x == 0.0 {
                        *x = guard;
                    }
                }
            }
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 0.5 * guard);
        nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub seam_points: Vec<f64>,
    /// `V` at `+m_β` and `−m_β`, in the order of `seam_points`.
    pub seam_values: Vec<f64>,
    pub seam_values_negative: Vec<f64>,
    pub local_minima: Vec<f64>,
}

impl VCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, seam_points: Vec<f64>, seam_values: Vec<f64>, seam_values_negative: Vec<f64>) -> Self {
        let mut curve = VCurve {
            grid,
            values,
            seam_points,
            seam_values,
            seam_values_negative,
            local_minima: Vec::new(),
        };
        curve.local_minima = curve.detect_minima();
        curve
    }

    /// Positive grid merged with the seam values, sorted by mass.
    pub fn positive_series(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .grid
            .iter()
            .zip(&self.values)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, v)| (*m, *v))
            .chain(self.seam_points.iter().copied().zip(self.seam_values.iter().copied()))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    fn detect_minima(&self) -> Vec<f64> {
        let pts = self.positive_series();
        pts.windows(3)
            .filter(|w| w[1].1 < w[0].1 && w[1].1 <= w[2].1)
            .map(|w| w[1].0)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,V\n");
        for (m, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{m:e},{v:e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("m,V") {
            return Err(Error::validation("csv", "missing \"m,V\" header"));
        }
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::validation(format!("csv line {}", i + 2), "expected two numbers");
            let (a, b) = line.split_once(',').ok_or_else(bad)?;
            grid.push(a.trim().parse().map_err(|_| bad())?);
            values.push(b.trim().parse().map_err(|_| bad())?);
        }
        Ok((grid, values))
    }
}

pub fn sample_vcurve(cfg: &SeaConfig, params: &CouplingParams, grid: &GridSpec, quad: &QuadSettings) -> Result<VCurve> {
    let nodes = grid.nodes(cfg.masses());
    let values = nodes
        .par_iter()
        .map(|&m| variation_density(m, cfg, params, quad))
        .collect::<Result<Vec<_>>>()?;
    let seams: Vec<f64> = cfg.masses().to_vec();
    let pos = seams
        .iter()
        .map(|&m| seam_limit_density(m, cfg, params, quad))
        .collect::<Result<Vec<_>>>()?;
    let neg = seams
        .iter()
        .map(|&m| seam_limit_density(-m, cfg, params, quad))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonConvergence(format!("V({}) is not finite", nodes[i])));
    }
    Ok(VCurve::new(nodes, values, seams, pos, neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `V(m) ≥ V(−m)` on `m > 0`.
    IiPrime,
    /// `V(m_β) ≤ inf_{m>0} V`.
    IiiPrime,
    /// `a(m²) = (V(m) − V(−m))/2 ≥ 0`, including the seams.
    ANonneg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub is_state_stable: bool,
    pub violated_conditions: Vec<Condition>,
    /// Worst signed margin per condition, in units of the curve scale.
    pub margins: Vec<(Condition, f64)>,
    pub scale: f64,
}

/// Checks the stability conditions on a sampled curve. Margins are relative
/// to the spread of `V` over `|m| ≥ m₁/2`; a condition fails when its margin
/// is below `−tol`.
pub fn classify_stability(curve: &VCurve, cfg: &SeaConfig, tol: f64) -> Result<StabilityReport> {
    let need = 2.0 * cfg.max_mass();
    let lo = curve.grid.first().copied().unwrap_or(0.0);
    let hi = curve.grid.last().copied().unwrap_or(0.0);
    if lo > -need * (1.0 - 1e-9) || hi < need * (1.0 - 1e-9) {
        return Err(Error::validation(
            "grid",
            format!("curve must cover [−{need}, {need}], got [{lo}, {hi}]"),
        ));
    }
    if curve.seam_values.len() != cfg.g() || curve.seam_values_negative.len() != cfg.g() {
        return Err(Error::validation("curve", "seam values missing"));
    }
    // Spread of V away from the 1/m³ growth at the origin.
    let floor = 0.5 * cfg.masses()[0];
    let (lo_v, hi_v) = curve
        .grid
        .iter()
        .zip(&curve.values)
        .filter(|(m, _)| m.abs() >= floor)
        .map(|(_, v)| *v)
        .chain(curve.seam_values.iter().copied())
        .chain(curve.seam_values_negative.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let scale = (hi_v - lo_v).max(f64::MIN_POSITIVE);

    // Pair each positive node with its mirror image.
    let mut ii = f64::INFINITY;
    for (m, v) in curve.grid.iter().zip(&curve.values).filter(|(m, _)| **m > 0.0) {
        if let Ok(j) = curve.grid.binary_search_by(|x| x.total_cmp(&-m)) {
            ii = ii.min(v - curve.values[j]);
        }
    }
    let mut a_nonneg = ii;
    for (p, n) in curve.seam_values.iter().zip(&curve.seam_values_negative) {
        a_nonneg = a_nonneg.min(p - n);
    }
    let inf = curve
        .positive_series()
        .iter()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    let iii = curve
        .seam_values
        .iter()
        .zip(cfg.weights())
        .filter(|(_, r)| **r > 0.0)
        .map(|(v, _)| inf - v)
        .fold(f64::INFINITY, f64::min);

    let margins = vec![
        (Condition::IiPrime, ii / scale),
        (Condition::IiiPrime, iii / scale),
        (Condition::ANonneg, 0.5 * a_nonneg / scale),
    ];
    let violated: Vec<Condition> = margins.iter().filter(|(_, m)| *m < -tol).map(|(c, _)| *c).collect();
    Ok(StabilityReport {
        is_state_stable: violated.is_empty(),
        violated_conditions: violated,
        margins,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_avoids_seams_and_zero() {
        let g = GridSpec::new(-2.0, 2.0, 5);
        let nodes = g.nodes(&[1.0]);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(nodes.iter().all(|&x| x != 0.0 && x.abs() != 1.0));
    }

    #[test]
    fn grid_parse() {
        let g = GridSpec::parse("-3:3:61").unwrap();
        assert_eq!((g.min, g.max, g.n), (-3.0, 3.0, 61));
        assert!(GridSpec::parse("1:2").is_err());
        assert!(GridSpec::parse("2:1:5").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = VCurve::new(vec![-1.5, 0.5, 1.5], vec![1.0, -2.5e-9, 3.0], vec![1.0], vec![0.0], vec![0.5]);
        let (g, v) = VCurve::from_csv(&c.to_csv()).unwrap();
        assert_eq!(g, c.grid);
        assert_eq!(v, c.values);
    }
}
