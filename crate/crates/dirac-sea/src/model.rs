//! Sea configurations, coupling constants, derived scalars and the scaling gauge.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::QuadSettings;

/// `2¹⁶π¹⁰`, the normalization of the quartic action.
pub fn quartic_norm() -> f64 {
    65536.0 * PI.powi(10)
}

/// Masses and weights of the `g` Dirac seas. Masses are positive and
/// non-decreasing; weights are non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSea", into = "RawSea")]
pub struct SeaConfig {
    masses: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSea {
    masses: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawSea> for SeaConfig {
    type Error = Error;
    fn try_from(r: RawSea) -> Result<Self> {
        SeaConfig::new(r.masses, r.weights)
    }
}

impl From<SeaConfig> for RawSea {
    fn from(c: SeaConfig) -> Self {
        RawSea {
            masses: c.masses,
            weights: c.weights,
        }
    }
}

impl SeaConfig {
    pub fn new(masses: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::validation("masses", "at least one generation is required"));
        }
        if masses.len() != weights.len() {
            return Err(Error::validation(
                "weights",
                format!("expected {} entries, found {}", masses.len(), weights.len()),
            ));
        }
        for (i, m) in masses.iter().enumerate() {
            if !m.is_finite() || *m <= 0.0 {
                return Err(Error::validation(format!("masses[{i}]"), "must be finite and positive"));
            }
            if i > 0 && *m < masses[i - 1] {
                return Err(Error::validation(format!("masses[{i}]"), "masses must be non-decreasing"));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::validation(format!("weights[{i}]"), "must be finite and non-negative"));
            }
        }
        Ok(SeaConfig { masses, weights })
    }

    pub fn g(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_mass(&self) -> f64 {
        self.masses.iter().copied().fold(0.0, f64::max)
    }

    /// Replaces one weight; the result is validated again.
    pub fn with_weight(&self, i: usize, w: f64) -> Result<Self> {
        let mut weights = self.weights.clone();
        weights[i] = w;
        SeaConfig::new(self.masses.clone(), weights)
    }

    /// Replaces one mass; the result is validated again.
    pub fn with_mass(&self, i: usize, m: f64) -> Result<Self> {
        let mut masses = self.masses.clone();
        masses[i] = m;
        SeaConfig::new(masses, self.weights.clone())
    }

    pub fn scalars(&self) -> DerivedScalars {
        DerivedScalars {
            m3: compute_m3(self),
            m5: compute_m5(self),
            t: compute_constraint_t(self),
        }
    }
}

/// How the free function `F(a_max, m₃, m₅)` of the action is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// `F ≡ 0`: the action is the quartic integral cut at `a_max`.
    #[default]
    Truncated,
    /// `F` equal to the ε → 0 limit of the regularized tail with no finite
    /// counter term; action and variation density no longer depend on `a_max`.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub c0: f64,
    pub c1: f64,
    pub c3: f64,
    pub c4: f64,
    pub a_max: f64,
    #[serde(default)]
    pub gauge: Gauge,
}

impl CouplingParams {
    pub fn new(c0: f64, c1: f64, c3: f64, c4: f64, a_max: f64) -> Self {
        CouplingParams {
            c0,
            c1,
            c3,
            c4,
            a_max,
            gauge: Gauge::Truncated,
        }
    }

    /// All constants zero, cutoff at `1.5·max m²`.
    pub fn zero_for(cfg: &SeaConfig) -> Self {
        CouplingParams::new(0.0, 0.0, 0.0, 0.0, default_a_max(cfg))
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn validate_for(&self, cfg: &SeaConfig) -> Result<()> {
        for (key, v) in [("c0", self.c0), ("c1", self.c1), ("c3", self.c3), ("c4", self.c4)] {
            if !v.is_finite() {
                return Err(Error::validation(key, "must be finite"));
            }
        }
        let m = cfg.max_mass();
        if !(self.a_max > m * m) || !self.a_max.is_finite() {
            return Err(Error::validation(
                "a_max",
                format!("must exceed max m² = {}", m * m),
            ));
        }
        Ok(())
    }

    /// Converts constants quoted in the unnormalized convention used for the
    /// published numerics (quartic part without `1/(2¹⁶π¹⁰)`, light-cone terms
    /// without the factor 2 and with the opposite sign of `c₀`). The result
    /// uses the natural gauge, which is the one those numbers refer to.
    pub fn from_published_units(c0: f64, c1: f64, c3: f64, c4: f64, a_max: f64) -> Self {
        let k = quartic_norm();
        CouplingParams {
            c0: -c0 / (2.0 * k),
            c1: c1 / (2.0 * k),
            c3: c3 / k,
            c4: c4 / k,
            a_max,
            gauge: Gauge::Natural,
        }
    }

    /// Inverse of [`CouplingParams::from_published_units`]: `(c0, c1, c3, c4)`.
    pub fn to_published_units(&self) -> [f64; 4] {
        let k = quartic_norm();
        [-2.0 * k * self.c0, 2.0 * k * self.c1, k * self.c3, k * self.c4]
    }
}

pub fn default_a_max(cfg: &SeaConfig) -> f64 {
    let m = cfg.max_mass();
    1.5 * m * m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScalars {
    pub m3: f64,
    pub m5: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

/// `m₃` for arbitrary (possibly signed) masses.
pub fn m3_of(masses: &[f64], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (ma, ra) in masses.iter().zip(weights) {
        for (mb, rb) in masses.iter().zip(weights) {
            s += ra * rb * (ma.powi(3) + mb.powi(3));
        }
    }
    -s / (64.0 * PI.powi(5))
}

/// `m₅` for arbitrary (possibly signed) masses.
pub fn m5_of(masses: &[f64], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for (ma, ra) in masses.iter().zip(weights) {
        for (mb, rb) in masses.iter().zip(weights) {
            s += ra * rb * (ma - mb).powi(2) * (ma + mb).powi(3);
        }
    }
    s / (512.0 * PI.powi(5))
}

pub fn compute_m3(cfg: &SeaConfig) -> f64 {
    m3_of(cfg.masses(), cfg.weights())
}

pub fn compute_m5(cfg: &SeaConfig) -> f64 {
    m5_of(cfg.masses(), cfg.weights())
}

pub fn compute_constraint_t(cfg: &SeaConfig) -> f64 {
    cfg.masses()
        .iter()
        .zip(cfg.weights())
        .map(|(m, r)| r * m.powi(3))
        .sum()
}

/// `∂m₃/∂ρ` of a test sea of mass `m` appended with zero weight.
pub fn dm3_drho(m: f64, masses: &[f64], weights: &[f64]) -> f64 {
    let s: f64 = masses
        .iter()
        .zip(weights)
        .map(|(ma, r)| r * (ma.powi(3) + m.powi(3)))
        .sum();
    -s / (32.0 * PI.powi(5))
}

/// `∂m₅/∂ρ` of a test sea of mass `m` appended with zero weight.
pub fn dm5_drho(m: f64, masses: &[f64], weights: &[f64]) -> f64 {
    let s: f64 = masses
        .iter()
        .zip(weights)
        .map(|(ma, r)| r * (ma - m).powi(2) * (ma + m).powi(3))
        .sum();
    s / (256.0 * PI.powi(5))
}

/// Mass scale `λ` and weight scale `μ` of the two-parameter scaling group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeScale {
    pub lambda: f64,
    pub mu: f64,
}

impl GaugeScale {
    /// Undoes [`normalize_gauge`].
    pub fn restore(&self, cfg: &SeaConfig) -> Result<SeaConfig> {
        SeaConfig::new(
            cfg.masses().iter().map(|m| m * self.lambda).collect(),
            cfg.weights().iter().map(|r| r * self.mu).collect(),
        )
    }
}

/// Rescales so that `m₁ = 1` and `ρ₁ = 1`.
pub fn normalize_gauge(cfg: &SeaConfig) -> Result<(SeaConfig, GaugeScale)> {
    let lambda = cfg.masses()[0];
    let mu = cfg.weights()[0];
    if mu <= 0.0 {
        return Err(Error::validation("weights[0]", "gauge undefined for zero first weight"));
    }
    let out = SeaConfig::new(
        cfg.masses().iter().map(|m| m / lambda).collect(),
        cfg.weights().iter().map(|r| r / mu).collect(),
    )?;
    Ok((out, GaugeScale { lambda, mu }))
}

/// Configuration document accepted by the command-line tool and bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub masses: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c3: f64,
    #[serde(default)]
    pub c4: f64,
    #[serde(default)]
    pub a_max: Option<f64>,
    #[serde(default)]
    pub gauge: Gauge,
    /// When true, `c0..c4` are read in the published (unnormalized) units.
    #[serde(default)]
    pub published_units: bool,
    #[serde(default)]
    pub quad_tol: Option<f64>,
    #[serde(default)]
    pub max_subdiv: Option<usize>,
    #[serde(default)]
    pub problem: Option<serde_json::Value>,
}

/// Validated pieces of a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub cfg: SeaConfig,
    pub params: CouplingParams,
    pub quad: QuadSettings,
    pub a_max_defaulted: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("config", e.to_string()))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let cfg = SeaConfig::new(self.masses.clone(), self.weights.clone())?;
        let a_max_defaulted = self.a_max.is_none();
        let a_max = self.a_max.unwrap_or_else(|| default_a_max(&cfg));
        let mut params = if self.published_units {
            CouplingParams::from_published_units(self.c0, self.c1, self.c3, self.c4, a_max)
        } else {
            CouplingParams::new(self.c0, self.c1, self.c3, self.c4, a_max)
        };
        if !self.published_units || self.gauge != Gauge::Truncated {
            params.gauge = self.gauge;
        }
        params.validate_for(&cfg)?;
        let mut quad = QuadSettings::default();
        if let Some(t) = self.quad_tol {
            if !(t > 0.0) {
                return Err(Error::validation("quad_tol", "must be positive"));
            }
            quad.tol = t;
        }
        if let Some(n) = self.max_subdiv {
            if n == 0 {
                return Err(Error::validation("max_subdiv", "must be positive"));
            }
            quad.max_subdiv = n;
        }
        Ok(Resolved {
            cfg,
            params,
            quad,
            a_max_defaulted,
        })
    }
}
