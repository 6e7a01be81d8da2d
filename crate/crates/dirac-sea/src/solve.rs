//! Critical points and constrained minimizers.
//!
//! Critical points use variable projection: the constants `c` enter the
//! residuals linearly and are eliminated by a least-squares solve, and a
//! damped Gauss–Newton (Levenberg–Marquardt) iteration runs over the
//! remaining masses and weights in log coordinates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::action_effective_raw;
use crate::error::{Error, Result};
use crate::model::{CouplingParams, SeaConfig};
use crate::quad::QuadSettings;
use crate::variation::{
    classify_stability, sample_vcurve, seam_parts, ELResiduals, GridSpec, SeamParts, StabilityReport, VCurve,
};

/// A solver variable. Generation indices are zero-based internally and
/// one-based in the text form (`"m2"`, `"rho3"`, `"c0"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Mass(usize),
    Weight(usize),
    C0,
    C1,
    C3,
    C4,
}

impl Var {
    fn coupling_index(self) -> Option<usize> {
        match self {
            Var::C0 => Some(0),
            Var::C1 => Some(1),
            Var::C3 => Some(2),
            Var::C4 => Some(3),
            _ => None,
        }
    }

    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            Var::Mass(_) => (1e-2, 1e2),
            Var::Weight(_) => (0.0, 1e2),
            _ => (-1e10, 1e10),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Mass(i) => write!(f, "m{}", i + 1),
            Var::Weight(i) => write!(f, "rho{}", i + 1),
            Var::C0 => f.write_str("c0"),
            Var::C1 => f.write_str("c1"),
            Var::C3 => f.write_str("c3"),
            Var::C4 => f.write_str("c4"),
        }
    }
}

impl FromStr for Var {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation("free_vars", format!("unknown variable {s:?}"));
        let index = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(bad()),
            }
        };
        match s {
            "c0" => Ok(Var::C0),
            "c1" => Ok(Var::C1),
            "c3" => Ok(Var::C3),
            "c4" => Ok(Var::C4),
            _ => {
                if let Some(t) = s.strip_prefix("rho") {
                    Ok(Var::Weight(index(t)?))
                } else if let Some(t) = s.strip_prefix('m') {
                    Ok(Var::Mass(index(t)?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for Var {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    CriticalPoint,
    Minimize,
}

/// How `Σ ρ m³ = 1` is imposed when minimizing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintHandling {
    /// `ρ₁` is solved from the constraint.
    #[default]
    Eliminate,
    /// `ρ₁` is free and `weight·(T − 1)²` is added to the objective.
    Penalty { weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub var: Var,
    pub lo: f64,
    pub hi: f64,
}

fn default_starts() -> usize {
    8
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    100
}
fn default_grid_points() -> usize {
    241
}
fn default_stability_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveProblem {
    /// Starting values of every mass and weight; fixed ones keep them.
    pub masses: Vec<f64>,
    pub weights: Vec<f64>,
    pub params: CouplingParams,
    pub free_vars: Vec<Var>,
    #[serde(default)]
    pub mode: Mode,
    /// Overrides of the default bounds. Bounds on `c` are in published units.
    #[serde(default)]
    pub bounds: Vec<Bound>,
    #[serde(default)]
    pub seed: u64,
    /// Number of multi-start runs; run 0 starts at the given values.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Tolerance on the normalized residual norm (critical points) or the
    /// projected gradient (minimization).
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub quad: QuadSettings,
    #[serde(default)]
    pub constraint: ConstraintHandling,
    /// Nodes of the curve used for the stability report; 0 skips it.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_stability_tol")]
    pub stability_tol: f64,
}

impl SolveProblem {
    pub fn new(cfg: &SeaConfig, params: CouplingParams, free_vars: Vec<Var>, mode: Mode) -> Self {
        SolveProblem {
            masses: cfg.masses().to_vec(),
            weights: cfg.weights().to_vec(),
            params,
            free_vars,
            mode,
            bounds: Vec::new(),
            seed: 0,
            starts: default_starts(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            quad: QuadSettings::default(),
            constraint: ConstraintHandling::default(),
            grid_points: default_grid_points(),
            stability_tol: default_stability_tol(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("problem", e.to_string()))
    }

    pub fn bounds_of(&self, var: Var) -> (f64, f64) {
        self.bounds
            .iter()
            .find(|b| b.var == var)
            .map(|b| (b.lo, b.hi))
            .unwrap_or_else(|| var.default_bounds())
    }

    fn validate(&self) -> Result<SeaConfig> {
        let cfg = SeaConfig::new(self.masses.clone(), self.weights.clone())?;
        self.params.validate_for(&cfg)?;
        let g = cfg.g();
        let mut seen = Vec::new();
        for &v in &self.free_vars {
            if seen.contains(&v) {
                return Err(Error::validation("free_vars", format!("{v} listed twice")));
            }
            seen.push(v);
            match v {
                Var::Mass(i) | Var::Weight(i) if i >= g => {
                    return Err(Error::validation("free_vars", format!("{v} exceeds g = {g}")))
                }
                Var::Mass(0) if self.mode == Mode::CriticalPoint => {
                    return Err(Error::validation("free_vars", "m1 is fixed by the scaling gauge"))
                }
                Var::Weight(0) => {
                    return Err(Error::validation(
                        "free_vars",
                        "rho1 is fixed by the scaling gauge or the constraint",
                    ))
                }
                Var::C0 | Var::C1 | Var::C3 | Var::C4 if self.mode == Mode::Minimize => {
                    return Err(Error::validation(
                        "free_vars",
                        "the action is linear in the constants c; they cannot be minimized over",
                    ))
                }
                _ => {}
            }
            let (lo, hi) = self.bounds_of(v);
            if !(lo < hi) {
                return Err(Error::validation(format!("bounds.{v}"), "need lo < hi"));
            }
        }
        if self.starts == 0 {
            return Err(Error::validation("starts", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("tol", "must be positive"));
        }
        Ok(cfg)
    }

    fn nonlinear(&self) -> Vec<Var> {
        self.free_vars.iter().copied().filter(|v| v.coupling_index().is_none()).collect()
    }

    fn linear(&self) -> Vec<Var> {
        self.free_vars.iter().copied().filter(|v| v.coupling_index().is_some()).collect()
    }
}

/// A critical point or minimizer with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub cfg: SeaConfig,
    pub params: CouplingParams,
    pub mode: Mode,
    pub converged: bool,
    /// Normalized residual norm (critical points) or final projected
    /// gradient norm (minimization).
    pub residual_norm: f64,
    pub residuals: ELResiduals,
    /// Residual scale used for the normalization.
    pub residual_scale: f64,
    /// `S_ext + 2c₁m₃ − 2c₀m₅`.
    pub action: f64,
    pub stability: Option<StabilityReport>,
    pub iterations: usize,
    pub start_index: usize,
    pub seed: u64,
    pub tol: f64,
    pub quad: QuadSettings,
}

impl SolutionRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("record", e.to_string()))
    }
}

// Log coordinates keep weights positive and make their scale irrelevant.
const LOG_FLOOR: f64 = 1e-14;

fn to_log(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

struct Layout<'a> {
    problem: &'a SolveProblem,
    nonlinear: Vec<Var>,
    linear: Vec<Var>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> Layout<'a> {
    fn new(problem: &'a SolveProblem) -> Self {
        let nonlinear = problem.nonlinear();
        let (lo, hi) = nonlinear
            .iter()
            .map(|&v| {
                let (lo, hi) = problem.bounds_of(v);
                (to_log(lo), to_log(hi))
            })
            .unzip();
        Layout {
            problem,
            linear: problem.linear(),
            nonlinear,
            lo,
            hi,
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    fn initial(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .nonlinear
            .iter()
            .map(|&v| match v {
                Var::Mass(i) => to_log(self.problem.masses[i]),
                Var::Weight(i) => to_log(self.problem.weights[i]),
                _ => unreachable!(),
            })
            .collect();
        self.clamp(&mut x);
        x
    }

    /// Random start: log-uniform within the bounds, narrowed to four decades
    /// around the given value for weights with an open lower end.
    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let x0 = self.initial();
        (0..self.nonlinear.len())
            .map(|i| {
                let lo = self.lo[i].max(x0[i] - 2.0 * std::f64::consts::LN_10);
                let hi = self.hi[i].min(x0[i] + 2.0 * std::f64::consts::LN_10);
                rng.gen_range(lo..=hi)
            })
            .collect()
    }

    fn apply(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut masses = self.problem.masses.clone();
        let mut weights = self.problem.weights.clone();
        for (v, &xi) in self.nonlinear.iter().zip(x) {
            match *v {
                Var::Mass(i) => masses[i] = xi.exp(),
                Var::Weight(i) => weights[i] = xi.exp(),
                _ => {}
            }
        }
        (masses, weights)
    }
}

/// Residual system at fixed masses and weights: rows `A·c_free + b`.
struct Linearized {
    a: DMatrix<f64>,
    b: DVector<f64>,
    scale: f64,
    seam: SeamParts,
}

fn linearize(layout: &Layout, masses: &[f64], weights: &[f64]) -> Result<Linearized> {
    let p = &layout.problem.params;
    let seam = seam_parts(masses, weights, p, &layout.problem.quad)?;
    let scale = seam.scale().max(f64::MIN_POSITIVE);
    let mut fixed = *p;
    for v in &layout.linear {
        match v {
            Var::C0 => fixed.c0 = 0.0,
            Var::C1 => fixed.c1 = 0.0,
            Var::C3 => fixed.c3 = 0.0,
            Var::C4 => fixed.c4 = 0.0,
            _ => {}
        }
    }
    let g = masses.len();
    let rows = 2 * g - 1;
    let mut a = DMatrix::zeros(rows, layout.linear.len());
    let mut b = DVector::zeros(rows);
    let v0 = &seam.values[0];
    for r in 0..rows {
        let (part_b, basis): (f64, Vec<f64>) = if r < g - 1 {
            let v = &seam.values[r + 1];
            (
                v.total(&fixed) - v0.total(&fixed),
                (0..4).map(|k| v.basis[k] - v0.basis[k]).collect(),
            )
        } else {
            let i = r - (g - 1);
            let d = &seam.slopes[i];
            let m = masses[i];
            (d.total(&fixed) * m, d.basis.iter().map(|x| x * m).collect())
        };
        b[r] = part_b / scale;
        for (col, v) in layout.linear.iter().enumerate() {
            a[(r, col)] = basis[v.coupling_index().unwrap()] / scale;
        }
    }
    Ok(Linearized { a, b, scale, seam })
}

/// Least-squares `c` minimizing `|A c + b|`, with column scaling.
fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let norms: Vec<f64> = (0..a.ncols())
        .map(|j| a.column(j).norm().max(f64::MIN_POSITIVE))
        .collect();
    let mut scaled = a.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = scaled.svd(true, true);
    let y = svd
        .solve(&(-b), 1e-13)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()));
    DVector::from_iterator(a.ncols(), y.iter().zip(&norms).map(|(y, n)| y / n))
}

struct Eval {
    residual: DVector<f64>,
    c: DVector<f64>,
    scale: f64,
    seam: SeamParts,
}

fn evaluate(layout: &Layout, x: &[f64]) -> Result<Eval> {
    let (masses, weights) = layout.apply(x);
    let lin = linearize(layout, &masses, &weights)?;
    let c = solve_linear(&lin.a, &lin.b);
    let residual = &lin.a * &c + &lin.b;
    Ok(Eval {
        residual,
        c,
        scale: lin.scale,
        seam: lin.seam,
    })
}

struct RunResult {
    x: Vec<f64>,
    eval: Eval,
    iterations: usize,
}

fn levenberg_marquardt(layout: &Layout, x0: Vec<f64>) -> Result<RunResult> {
    let tol = layout.problem.tol;
    let mut x = x0;
    let mut cur = evaluate(layout, &x)?;
    let n = x.len();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < layout.problem.max_iter && cur.residual.norm() > tol && n > 0 {
        iterations += 1;
        let r0 = cur.residual.clone();
        let mut jac = DMatrix::zeros(r0.len(), n);
        for k in 0..n {
            let step = 1e-6 * x[k].abs().max(1.0);
            let mut xp = x.clone();
            xp[k] += step;
            let rp = evaluate(layout, &xp)?.residual;
            jac.set_column(k, &((rp - &r0) / step));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r0;
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj.clone();
            for d in 0..n {
                m[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(delta) = m.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            layout.clamp(&mut xn);
            if let Ok(trial) = evaluate(layout, &xn) {
                if trial.residual.norm() < cur.residual.norm() {
                    let moved = xn.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    x = xn;
                    cur = trial;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = moved > 1e-14;
                    break;
                }
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(RunResult {
        x,
        eval: cur,
        iterations,
    })
}

fn params_with(layout: &Layout, c: &DVector<f64>) -> CouplingParams {
    let mut p = layout.problem.params;
    for (v, &val) in layout.linear.iter().zip(c.iter()) {
        match v {
            Var::C0 => p.c0 = val,
            Var::C1 => p.c1 = val,
            Var::C3 => p.c3 = val,
            Var::C4 => p.c4 = val,
            _ => {}
        }
    }
    p
}

/// Bounds on `c` are read in the published units of
/// [`CouplingParams::to_published_units`].
fn couplings_in_bounds(problem: &SolveProblem, params: &CouplingParams) -> bool {
    let published = params.to_published_units();
    problem.linear().iter().all(|&v| {
        let (lo, hi) = problem.bounds_of(v);
        let x = published[v.coupling_index().unwrap()];
        x >= lo && x <= hi
    })
}

fn stability_for(cfg: &SeaConfig, params: &CouplingParams, problem: &SolveProblem) -> Result<Option<StabilityReport>> {
    if problem.grid_points == 0 {
        return Ok(None);
    }
    let curve = sample_vcurve(cfg, params, &GridSpec::covering(cfg, problem.grid_points), &problem.quad)?;
    Ok(Some(classify_stability(&curve, cfg, problem.stability_tol)?))
}

/// V-curve of a record over `[−2 max m, 2 max m]`.
pub fn record_curve(record: &SolutionRecord, n: usize) -> Result<VCurve> {
    sample_vcurve(&record.cfg, &record.params, &GridSpec::covering(&record.cfg, n), &record.quad)
}

fn same_root(a: &SolutionRecord, b: &SolutionRecord) -> bool {
    let close = |x: f64, y: f64, floor: f64| (x - y).abs() <= 1e-3 * x.abs().max(y.abs()).max(floor);
    let cfg = a
        .cfg
        .masses()
        .iter()
        .zip(b.cfg.masses())
        .chain(a.cfg.weights().iter().zip(b.cfg.weights()))
        .all(|(x, y)| close(*x, *y, 1e-12));
    let pa = [a.params.c0, a.params.c1, a.params.c3, a.params.c4];
    let pb = [b.params.c0, b.params.c1, b.params.c3, b.params.c4];
    let scale = pa.iter().chain(&pb).fold(0.0f64, |m, v| m.max(v.abs()));
    cfg && pa.iter().zip(&pb).all(|(x, y)| close(*x, *y, 1e-6 * scale))
}

fn starts(layout: &Layout, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![layout.initial()];
    while out.len() < count {
        out.push(layout.random(&mut rng));
    }
    out
}

/// All distinct converged critical points, lowest action first. Fails with
/// [`Error::NonConvergence`] if no start converges.
pub fn solve_critical(problem: &SolveProblem) -> Result<Vec<SolutionRecord>> {
    if problem.mode != Mode::CriticalPoint {
        return Err(Error::validation("mode", "solve_critical needs mode critical_point"));
    }
    problem.validate()?;
    let layout = Layout::new(problem);
    let count = if layout.nonlinear.is_empty() { 1 } else { problem.starts };
    let runs: Vec<(usize, Result<RunResult>)> = starts(&layout, count, problem.seed)
        .into_par_iter()
        .enumerate()
        .map(|(i, x0)| (i, levenberg_marquardt(&layout, x0)))
        .collect();
    let mut found: Vec<SolutionRecord> = Vec::new();
    let mut best = f64::INFINITY;
    let mut last_err = None;
    for (index, run) in runs {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let norm = run.eval.residual.norm();
        best = best.min(norm);
        if norm > problem.tol {
            continue;
        }
        let (masses, weights) = layout.apply(&run.x);
        let Ok(cfg) = SeaConfig::new(masses, weights) else {
            continue;
        };
        let params = params_with(&layout, &run.eval.c);
        if !couplings_in_bounds(problem, &params) {
            continue;
        }
        let record = SolutionRecord {
            residuals: run.eval.seam.residuals(&params),
            residual_scale: run.eval.scale,
            action: action_effective_raw(cfg.masses(), cfg.weights(), &params, &problem.quad)?,
            cfg,
            params,
            mode: Mode::CriticalPoint,
            converged: true,
            residual_norm: norm,
            stability: None,
            iterations: run.iterations,
            start_index: index,
            seed: problem.seed,
            tol: problem.tol,
            quad: problem.quad,
        };
        if !found.iter().any(|r| same_root(r, &record)) {
            found.push(record);
        }
    }
    if found.is_empty() {
        return Err(match last_err {
            Some(e) if best.is_infinite() => e,
            _ => Error::NonConvergence(format!(
                "no start reached tol {:.1e}; best residual {best:.3e}",
                problem.tol
            )),
        });
    }
    found.sort_by(|a, b| a.action.total_cmp(&b.action));
    for r in found.iter_mut() {
        r.stability = stability_for(&r.cfg, &r.params, problem)?;
    }
    Ok(found)
}

struct Objective<'a> {
    layout: Layout<'a>,
    eliminate: bool,
    penalty: f64,
}

impl Objective<'_> {
    /// Masses and weights for `x`, with `ρ₁` from the constraint when eliminated.
    fn point(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (masses, mut weights) = self.layout.apply(x);
        if self.eliminate {
            let rest: f64 = masses[1..].iter().zip(&weights[1..]).map(|(m, r)| r * m.powi(3)).sum();
            let r1 = (1.0 - rest) / masses[0].powi(3);
            if !(r1 >= 0.0) {
                return None;
            }
            weights[0] = r1;
        }
        Some((masses, weights))
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let Some((masses, weights)) = self.point(x) else {
            return Ok(f64::INFINITY);
        };
        let p = &self.layout.problem;
        let s = action_effective_raw(&masses, &weights, &p.params, &p.quad)?;
        let t: f64 = masses.iter().zip(&weights).map(|(m, r)| r * m.powi(3)).sum();
        Ok(s + self.penalty * (t - 1.0).powi(2))
    }
}

fn projected_descent(obj: &Objective, x0: Vec<f64>) -> Result<(Vec<f64>, f64, f64, usize)> {
    let layout = &obj.layout;
    let n = x0.len();
    let mut x = x0;
    let mut f = obj.value(&x)?;
    let mut step = 1.0;
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < layout.problem.max_iter && n > 0 {
        iterations += 1;
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            grad[k] = (obj.value(&xp)? - obj.value(&xm)?) / (2.0 * h);
        }
        // Components pushing against an active bound do not count.
        let free: Vec<f64> = (0..n)
            .map(|k| {
                let at_lo = x[k] <= layout.lo[k] && grad[k] > 0.0;
                let at_hi = x[k] >= layout.hi[k] && grad[k] < 0.0;
                if at_lo || at_hi {
                    0.0
                } else {
                    grad[k]
                }
            })
            .collect();
        gnorm = free.iter().map(|g| g * g).sum::<f64>().sqrt();
        let fscale = f.abs().max(f64::MIN_POSITIVE);
        if gnorm <= layout.problem.tol * fscale {
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let mut xn: Vec<f64> = x.iter().zip(&free).map(|(a, g)| a - step * g / gnorm).collect();
            layout.clamp(&mut xn);
            let fnew = obj.value(&xn)?;
            let decrease: f64 = x.iter().zip(&xn).zip(&free).map(|((a, b), g)| g * (a - b)).sum();
            if fnew <= f - 1e-4 * decrease && fnew < f {
                x = xn;
                f = fnew;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((x, f, gnorm / f.abs().max(f64::MIN_POSITIVE), iterations))
}

/// Minimizes `S_ext + 2c₁m₃ − 2c₀m₅` over the free masses and weights under
/// `Σ ρ m³ = 1`; returns the best of the multi-start runs.
pub fn minimize_action(problem: &SolveProblem) -> Result<SolutionRecord> {
    if problem.mode != Mode::Minimize {
        return Err(Error::validation("mode", "minimize_action needs mode minimize"));
    }
    problem.validate()?;
    let (eliminate, penalty) = match problem.constraint {
        ConstraintHandling::Eliminate => (true, 0.0),
        ConstraintHandling::Penalty { weight } => {
            if !(weight > 0.0) {
                return Err(Error::validation("constraint.weight", "must be positive"));
            }
            (false, weight)
        }
    };
    let mut widened;
    let mut effective = problem;
    if !eliminate && !problem.free_vars.contains(&Var::Weight(0)) {
        widened = problem.clone();
        widened.free_vars.push(Var::Weight(0));
        widened.mode = Mode::Minimize;
        effective = &widened;
    }
    let obj = Objective {
        layout: Layout::new(effective),
        eliminate,
        penalty,
    };
    if obj.point(&obj.layout.initial()).is_none() && obj.layout.nonlinear.is_empty() {
        return Err(Error::validation("weights", "constraint Σρm³ = 1 is infeasible"));
    }
    let count = if obj.layout.nonlinear.is_empty() { 1 } else { problem.starts };
    let runs: Vec<(usize, Result<(Vec<f64>, f64, f64, usize)>)> = starts(&obj.layout, count, problem.seed)
        .into_par_iter()
        .enumerate()
        .map(|(i, x0)| (i, projected_descent(&obj, x0)))
        .collect();
    let mut best: Option<(usize, Vec<f64>, f64, f64, usize)> = None;
    for (i, run) in runs {
        let (x, f, g, it) = run?;
        if f.is_finite() && best.as_ref().map_or(true, |b| f < b.2) {
            best = Some((i, x, f, g, it));
        }
    }
    let (index, x, f, gnorm, iterations) =
        best.ok_or_else(|| Error::validation("weights", "constraint Σρm³ = 1 is infeasible at every start"))?;
    let (masses, weights) = obj.point(&x).expect("finite objective implies a feasible point");
    let cfg = SeaConfig::new(masses, weights)?;
    let seam = seam_parts(cfg.masses(), cfg.weights(), &problem.params, &problem.quad)?;
    Ok(SolutionRecord {
        residuals: seam.residuals(&problem.params),
        residual_scale: seam.scale(),
        stability: stability_for(&cfg, &problem.params, problem)?,
        cfg,
        params: problem.params,
        mode: Mode::Minimize,
        converged: gnorm <= problem.tol || obj.layout.nonlinear.is_empty(),
        residual_norm: gnorm,
        action: f,
        iterations,
        start_index: index,
        seed: problem.seed,
        tol: problem.tol,
        quad: problem.quad,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residuals: ELResiduals,
    /// Normalized residual norm at the record's quadrature tolerance and at
    /// a tolerance 100 times tighter.
    pub residual_norm: f64,
    pub refined_residual_norm: f64,
    pub refinement_stable: bool,
    pub stability: StabilityReport,
    pub passed: bool,
}

fn normalized_norm(res: &ELResiduals, cfg: &SeaConfig, scale: f64) -> f64 {
    let gaps = res.value_gaps.iter().map(|v| v * v).sum::<f64>();
    let slopes = res
        .derivative_residuals
        .iter()
        .zip(cfg.masses())
        .map(|(d, m)| (d * m).powi(2))
        .sum::<f64>();
    (gaps + slopes).sqrt() / scale
}

/// Recomputes the residuals at a tightened quadrature tolerance and classifies
/// stability. Critical-point records pass when the refined residual is below
/// `tol`; refinement counts as stable when the refined residual stays below
/// `tol` or within 10× of the original one.
pub fn verify_solution(record: &SolutionRecord, tol: f64) -> Result<VerificationReport> {
    let cfg = &record.cfg;
    let base = seam_parts(cfg.masses(), cfg.weights(), &record.params, &record.quad)?;
    let mut tight = record.quad;
    tight.tol = (record.quad.tol * 1e-2).max(1e-15);
    let refined = seam_parts(cfg.masses(), cfg.weights(), &record.params, &tight)?;
    let scale = refined.scale().max(f64::MIN_POSITIVE);
    let residuals = refined.residuals(&record.params);
    let n0 = normalized_norm(&base.residuals(&record.params), cfg, scale);
    let n1 = normalized_norm(&residuals, cfg, scale);
    let refinement_stable = n1 <= tol.max(10.0 * n0);
    let curve = sample_vcurve(cfg, &record.params, &GridSpec::covering(cfg, default_grid_points()), &tight)?;
    let stability = classify_stability(&curve, cfg, default_stability_tol())?;
    let passed = match record.mode {
        Mode::CriticalPoint => n1 <= tol && refinement_stable,
        Mode::Minimize => refinement_stable,
    };
    Ok(VerificationReport {
        residuals,
        residual_norm: n0,
        refined_residual_norm: n1,
        refinement_stable,
        stability,
        passed,
    })
}
