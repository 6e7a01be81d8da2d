//! Independent numerical checks of the closed-form convolution kernels, the
//! two-shell representation of `J` and the Lorentz-invariant Plancherel formula.
//!
//! Profiles are radial densities in the squared momentum (or squared position)
//! variable. The closed forms integrate over `(c, b)`, the direct forms over
//! `(ω, p) = (k⁰, |k⃗|)` in the rest frame of `q`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, delta_fn, ConeRegion};
use crate::quad::{integrate_segments, QuadSettings, Segment};
use crate::special::{bessel_j1_over_x, bessel_j2};

/// Radial profile supported on a bounded interval of `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `δ(z − at)`.
    Shell { at: f64 },
    /// Cardinal cubic B-spline on `[lo, hi]` scaled by `amp` (C², four pieces).
    Bump { lo: f64, hi: f64, amp: f64 },
}

fn cubic_bspline(t: f64) -> f64 {
    if !(t > 0.0 && t < 4.0) {
        0.0
    } else if t < 1.0 {
        t * t * t / 6.0
    } else if t < 2.0 {
        (((-3.0 * t + 12.0) * t - 12.0) * t + 4.0) / 6.0
    } else if t < 3.0 {
        (((3.0 * t - 24.0) * t + 60.0) * t - 44.0) / 6.0
    } else {
        let u = 4.0 - t;
        u * u * u / 6.0
    }
}

impl RadialProfile {
    pub fn shell(at: f64) -> Result<Self> {
        if !(at >= 0.0 && at.is_finite()) {
            return Err(Error::validation("at", "shell position must be finite and non-negative"));
        }
        Ok(RadialProfile::Shell { at })
    }

    pub fn bump(lo: f64, hi: f64) -> Result<Self> {
        Self::bump_scaled(lo, hi, 1.0)
    }

    pub fn bump_scaled(lo: f64, hi: f64, amp: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::validation("lo/hi", "need 0 <= lo < hi < inf"));
        }
        if !amp.is_finite() {
            return Err(Error::validation("amp", "must be finite"));
        }
        Ok(RadialProfile::Bump { lo, hi, amp })
    }

    pub fn is_shell(&self) -> bool {
        matches!(self, RadialProfile::Shell { .. })
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialProfile::Shell { at } => (at, at),
            RadialProfile::Bump { lo, hi, .. } => (lo, hi),
        }
    }

    /// Points where the profile is not smooth.
    pub fn knots(&self) -> Vec<f64> {
        match *self {
            RadialProfile::Shell { at } => vec![at],
            RadialProfile::Bump { lo, hi, .. } => (0..=4).map(|i| lo + 0.25 * i as f64 * (hi - lo)).collect(),
        }
    }

    /// Pointwise value of a bump; zero for a shell.
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            RadialProfile::Shell { .. } => 0.0,
            RadialProfile::Bump { lo, hi, amp } => amp * cubic_bspline(4.0 * (z - lo) / (hi - lo)),
        }
    }

    /// Profile of `z ↦ f(z/λ²)`.
    pub fn dilated(&self, lambda2: f64) -> Self {
        match *self {
            RadialProfile::Shell { at } => RadialProfile::Shell { at: at * lambda2 },
            RadialProfile::Bump { lo, hi, amp } => RadialProfile::Bump {
                lo: lo * lambda2,
                hi: hi * lambda2,
                amp,
            },
        }
    }
}

/// Matrix structure of the convolved pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// `f ∗ g`.
    Scalar,
    /// Coefficient of `q̸` in `(k̸ f) ∗ g`.
    SlashLeft,
    /// Coefficient of `q̸` in `f ∗ (k̸ g)`.
    SlashRight,
    /// `(k̸ f) ∗ (k̸ g)` contracted.
    Contracted,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Scalar, Kind::SlashLeft, Kind::SlashRight, Kind::Contracted];

    /// Closed-form weight relative to `√Δ/a`; `c` belongs to `f`, `b` to `g`.
    fn weight(self, a: f64, b: f64, c: f64) -> f64 {
        match self {
            Kind::Scalar => 1.0,
            Kind::SlashLeft => (a - b + c) / (2.0 * a),
            Kind::SlashRight => (a + b - c) / (2.0 * a),
            Kind::Contracted => (b + c - a) / 2.0,
        }
    }
}

fn kernel_prefactor() -> f64 {
    1.0 / (32.0 * PI.powi(3))
}

const ORACLE_QUAD: QuadSettings = QuadSettings {
    tol: 1e-11,
    max_subdiv: 40_000,
};

const INNER_QUAD: QuadSettings = QuadSettings {
    tol: 1e-13,
    max_subdiv: 20_000,
};

/// Splits `[lo, hi]` at `points`; segments touching a `sqrt_points` entry use
/// the matching square-root substitution.
fn build_segments(lo: f64, hi: f64, points: &[f64], sqrt_points: &[f64]) -> Vec<Segment> {
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = points.iter().copied().filter(|&p| p > lo && p < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * hi.abs().max(1.0));
    cuts.extend(inner);
    cuts.push(hi);
    let is_sqrt = |x: f64| sqrt_points.iter().any(|&s| (s - x).abs() <= 1e-14 * s.abs().max(1.0));
    let mut segs = Vec::new();
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        match (is_sqrt(l), is_sqrt(r)) {
            (true, true) => {
                let m = 0.5 * (l + r);
                segs.push(Segment::sqrt_left(l, m));
                segs.push(Segment::sqrt_right(m, r));
            }
            (true, false) => segs.push(Segment::sqrt_left(l, r)),
            (false, true) => segs.push(Segment::sqrt_right(l, r)),
            (false, false) => segs.push(Segment::regular(l, r)),
        }
    }
    segs
}

/// Integrates a fallible integrand, returning the first error it raised.
fn integrate_fallible<F: Fn(f64) -> Result<f64>>(f: F, segs: &[Segment], s: &QuadSettings) -> Result<f64> {
    if segs.is_empty() {
        return Ok(0.0);
    }
    let failure = RefCell::new(None);
    let r = integrate_segments(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        segs,
        s,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r?.value)
}

/// `∫ p(x) h(x) dx` over `(lo, hi)`; a shell contributes `h(at)` when strictly
/// inside. `extra` are additional breakpoints of `h`.
fn against_profile<H: Fn(f64) -> Result<f64>>(
    p: &RadialProfile,
    lo: f64,
    hi: f64,
    extra: &[f64],
    sqrt_hi: bool,
    s: &QuadSettings,
    h: H,
) -> Result<f64> {
    match *p {
        RadialProfile::Shell { at } => {
            if at > lo && at < hi {
                h(at)
            } else {
                Ok(0.0)
            }
        }
        RadialProfile::Bump { lo: plo, hi: phi, .. } => {
            let (l, r) = (lo.max(plo), hi.min(phi));
            if !(r > l) {
                return Ok(0.0);
            }
            let mut pts = p.knots();
            pts.extend_from_slice(extra);
            let sq = if sqrt_hi && r == hi { vec![hi] } else { vec![] };
            let segs = build_segments(l, r, &pts, &sq);
            integrate_fallible(|x| Ok(p.value(x) * h(x)?), &segs, s)
        }
    }
}

fn check_positive_a(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("need a > 0, got {a}")))
    }
}

/// Closed form of the convolution of two negative profiles at `q²=a`, `q⁰<0`.
pub fn convolve_negative_closed(kind: Kind, f: &RadialProfile, g: &RadialProfile, a: f64) -> Result<f64> {
    check_positive_a(a)?;
    let sa = a.sqrt();
    let outer_breaks: Vec<f64> = g
        .knots()
        .into_iter()
        .filter(|&k| k < a)
        .map(|k| (sa - k.sqrt()).powi(2))
        .collect();
    let v = against_profile(f, 0.0, a, &outer_breaks, false, &ORACLE_QUAD, |c| {
        let top = (sa - c.sqrt()).powi(2);
        against_profile(g, 0.0, top, &[], true, &INNER_QUAD, |b| {
            Ok(delta_fn(a, b, c).max(0.0).sqrt() / a * kind.weight(a, b, c))
        })
    })?;
    Ok(kernel_prefactor() * v)
}

/// Closed form of the convolution of a negative profile `f` with a positive
/// profile `g`. Inside the cone only the `√Δ` terms contribute; outside the
/// cone the regular parts of the scalar and contracted kernels are used.
pub fn convolve_mixed_closed(
    kind: Kind,
    f: &RadialProfile,
    g: &RadialProfile,
    region: ConeRegion,
    a: f64,
) -> Result<f64> {
    match region {
        ConeRegion::OutsideCone => {
            if !(a < 0.0) {
                return Err(Error::Domain(format!("outside the cone needs a < 0, got {a}")));
            }
            let ks = KernelSet::standard();
            match kind {
                Kind::Scalar => convolve_regular(ks.k1, f, g, region, a),
                Kind::Contracted => convolve_regular(ks.k2, f, g, region, a),
                _ => Err(Error::Domain(
                    "slash kinds have no regular closed form outside the cone".into(),
                )),
            }
        }
        ConeRegion::LowerCone => {
            check_positive_a(a)?;
            let sa = a.sqrt();
            let (_, fhi) = f.support();
            let outer_breaks: Vec<f64> = g.knots().into_iter().map(|k| (sa + k.sqrt()).powi(2)).collect();
            let v = against_profile(f, a, fhi.max(a) * (1.0 + 1e-15) + 1e-300, &outer_breaks, false, &ORACLE_QUAD, |c| {
                let top = (c.sqrt() - sa).powi(2);
                against_profile(g, 0.0, top, &[], true, &INNER_QUAD, |b| {
                    Ok(delta_fn(a, b, c).max(0.0).sqrt() / a * kind.weight(a, b, c))
                })
            })?;
            Ok(kernel_prefactor() * v)
        }
        ConeRegion::UpperCone => {
            check_positive_a(a)?;
            let sa = a.sqrt();
            let (_, ghi) = g.support();
            let outer_breaks: Vec<f64> = f.knots().into_iter().map(|k| (sa + k.sqrt()).powi(2)).collect();
            let v = against_profile(g, a, ghi.max(a) * (1.0 + 1e-15) + 1e-300, &outer_breaks, false, &ORACLE_QUAD, |b| {
                let top = (b.sqrt() - sa).powi(2);
                against_profile(f, 0.0, top, &[], true, &INNER_QUAD, |c| {
                    Ok(delta_fn(a, b, c).max(0.0).sqrt() / a * kind.weight(a, b, c))
                })
            })?;
            Ok(kernel_prefactor() * v)
        }
    }
}

fn bump_bounds(p: &RadialProfile) -> Result<(f64, f64)> {
    match *p {
        RadialProfile::Bump { lo, hi, .. } => Ok((lo, hi)),
        RadialProfile::Shell { .. } => Err(Error::Domain(
            "direct quadrature needs smooth profiles".into(),
        )),
    }
}

// Direct 2D quadrature in (ω, p) with q = (s√a, 0⃗), k = (ω, p⃗) carrying f and
// q − k carrying g. The ω range must contain the admissible set.
fn convolve_direct(
    kind: Kind,
    f: &RadialProfile,
    g: &RadialProfile,
    a: f64,
    s: f64,
    omega_lo: f64,
    omega_hi: f64,
) -> Result<f64> {
    check_positive_a(a)?;
    let (flo, fhi) = bump_bounds(f)?;
    let (glo, ghi) = bump_bounds(g)?;
    if !(omega_hi > omega_lo) {
        return Ok(0.0);
    }
    let sa = a.sqrt();
    let q0 = s * sa;
    let fk = f.knots();
    let gk = g.knots();
    let mut breaks = vec![-0.5 * sa];
    for &kf in &fk {
        breaks.push(-kf.sqrt());
        for &kg in &gk {
            breaks.push((kf - kg + a) / (2.0 * q0));
        }
    }
    for &kg in &gk {
        breaks.push(q0 - kg.sqrt());
        breaks.push(q0 + kg.sqrt());
    }
    let segs = build_segments(omega_lo, omega_hi, &breaks, &[]);
    let weight = |omega: f64, p: f64| -> f64 {
        let r = q0 - omega;
        match kind {
            Kind::Scalar => 1.0,
            Kind::SlashLeft => s * omega / sa,
            Kind::SlashRight => s * r / sa,
            Kind::Contracted => -(omega * r + p * p),
        }
    };
    let v = integrate_fallible(
        |omega| {
            let r = q0 - omega;
            let (w2, r2) = (omega * omega, r * r);
            let p2_lo = 0f64.max(w2 - fhi).max(r2 - ghi);
            let p2_hi = (w2 - flo).min(r2 - glo);
            if !(p2_hi > p2_lo) {
                return Ok(0.0);
            }
            let (plo, phi) = (p2_lo.sqrt(), p2_hi.sqrt());
            let mut pts = Vec::new();
            for &kf in &fk {
                if w2 > kf {
                    pts.push((w2 - kf).sqrt());
                }
            }
            for &kg in &gk {
                if r2 > kg {
                    pts.push((r2 - kg).sqrt());
                }
            }
            let inner = build_segments(plo, phi, &pts, &[]);
            integrate_fallible(
                |p| {
                    let p2 = p * p;
                    Ok(p2 * f.value(w2 - p2) * g.value(r2 - p2) * weight(omega, p))
                },
                &inner,
                &INNER_QUAD,
            )
        },
        &segs,
        &ORACLE_QUAD,
    )?;
    Ok(v / (4.0 * PI.powi(3)))
}

/// Convolution of two negative bumps by direct quadrature over `(ω, p)`.
pub fn convolve_negative_direct(kind: Kind, f: &RadialProfile, g: &RadialProfile, a: f64) -> Result<f64> {
    check_positive_a(a)?;
    convolve_direct(kind, f, g, a, -1.0, -a.sqrt(), 0.0)
}

/// Mixed convolution inside the cone by direct quadrature over `(ω, p)`.
pub fn convolve_mixed_direct(
    kind: Kind,
    f: &RadialProfile,
    g: &RadialProfile,
    region: ConeRegion,
    a: f64,
) -> Result<f64> {
    check_positive_a(a)?;
    let sa = a.sqrt();
    match region {
        ConeRegion::LowerCone => {
            let (_, fhi) = bump_bounds(f)?;
            convolve_direct(kind, f, g, a, -1.0, -(fhi + a) / (2.0 * sa), -sa)
        }
        ConeRegion::UpperCone => {
            let (_, ghi) = bump_bounds(g)?;
            convolve_direct(kind, f, g, a, 1.0, -(ghi - a) / (2.0 * sa), 0.0)
        }
        ConeRegion::OutsideCone => Err(Error::Domain(
            "direct quadrature is only available inside the cone".into(),
        )),
    }
}

pub type RegionKernel = fn(ConeRegion, f64, f64, f64) -> Result<f64>;
pub type RadialKernel = fn(f64, f64, f64) -> f64;

/// Kernel implementations under test; swapped out by mutation tests.
#[derive(Clone, Copy)]
pub struct KernelSet {
    pub k1: RegionKernel,
    pub k2: RegionKernel,
    pub l1: RegionKernel,
    pub l2: RegionKernel,
    pub j: RadialKernel,
    pub k: RadialKernel,
    pub h: RadialKernel,
}

impl KernelSet {
    pub fn standard() -> Self {
        KernelSet {
            k1: kernels::k1_kernel,
            k2: kernels::k2_kernel,
            l1: kernels::l1_kernel,
            l2: kernels::l2_kernel,
            j: kernels::j_fn,
            k: kernels::k_fn,
            h: kernels::h_value,
        }
    }
}

impl Default for KernelSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// `∫∫ f(c) g(b) kernel(region, a, b, c) db dc` over the full supports.
pub fn convolve_regular(
    kernel: RegionKernel,
    f: &RadialProfile,
    g: &RadialProfile,
    region: ConeRegion,
    a: f64,
) -> Result<f64> {
    let sa = a.abs().sqrt();
    let (flo, fhi) = f.support();
    let (glo, ghi) = g.support();
    let mut outer_breaks = Vec::new();
    for k in g.knots() {
        outer_breaks.push(k);
        outer_breaks.push((k.sqrt() - sa).max(0.0).powi(2));
        outer_breaks.push((k.sqrt() + sa).powi(2));
    }
    let pad = |x: f64| x.abs() * 1e-15 + 1e-300;
    let outer = QuadSettings {
        tol: 1e-10,
        max_subdiv: 20_000,
    };
    let inner_quad = QuadSettings {
        tol: 1e-11,
        max_subdiv: 20_000,
    };
    against_profile(f, flo - pad(flo), fhi + pad(fhi), &outer_breaks, false, &outer, |c| {
        let up = (sa + c.sqrt()).powi(2);
        let mut pts = vec![c, up];
        let mut sq = Vec::new();
        match region {
            ConeRegion::UpperCone => sq.push(up),
            ConeRegion::LowerCone if c > a => {
                let lo = (c.sqrt() - sa).powi(2);
                pts.push(lo);
                sq.push(lo);
            }
            _ => {}
        }
        match *g {
            RadialProfile::Shell { at } => kernel(region, a, at, c),
            RadialProfile::Bump { .. } => {
                let mut p = g.knots();
                p.extend(pts);
                let segs = build_segments(glo, ghi, &p, &sq);
                integrate_fallible(|b| Ok(g.value(b) * kernel(region, a, b, c)?), &segs, &inner_quad)
            }
        }
    })
}

/// Closed and direct values of the slash-left coefficient for a negative shell
/// at `y²` convolved with a positive shell at `x²`, combined into `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellCheck {
    pub closed: f64,
    pub direct: f64,
}

// Slash-left coefficient of the shell convolution, evaluated in a frame where
// q has spatial momentum `qn`, by quadrature over p = |k⃗|.
fn shell_alpha_direct(region: ConeRegion, c: f64, b: f64, a: f64) -> Result<f64> {
    let qn = 1.0 + a.sqrt();
    let q0 = match region {
        ConeRegion::UpperCone => (a + qn * qn).sqrt(),
        ConeRegion::LowerCone => -(a + qn * qn).sqrt(),
        ConeRegion::OutsideCone => return Err(Error::Domain("shell check needs a > 0".into())),
    };
    let d0 = b - a - c;
    let disc = delta_fn(a, b, c);
    if !(disc > 0.0) {
        return Ok(0.0);
    }
    let sd = disc.sqrt();
    let w_lo = (-d0 * q0 - qn * sd) / (2.0 * a);
    let w_hi = (-d0 * q0 + qn * sd) / (2.0 * a);
    let mid = 0.5 * (w_lo + w_hi);
    // k on the lower shell, q − k on the upper shell.
    if !(w_hi < 0.0 && q0 - mid > 0.0 && q0 - w_hi > 0.0 && q0 - w_lo > 0.0) {
        return Ok(0.0);
    }
    let p_of = |w: f64| (w * w - c).max(0.0).sqrt();
    let (p0, p1) = (p_of(w_hi), p_of(w_lo));
    let (p0, p1) = (p0.min(p1), p0.max(p1));
    let segs = [Segment::regular(p0, p1)];
    let s = QuadSettings {
        tol: 1e-12,
        max_subdiv: 2000,
    };
    let v = integrate_fallible(
        |p| {
            let w = -(p * p + c).sqrt();
            let cos0 = (b - a - c + 2.0 * q0 * w) / (2.0 * qn * p);
            if cos0.abs() > 1.0 + 1e-9 {
                return Err(Error::Domain("shell configuration left the physical range".into()));
            }
            let kq = q0 * w - qn * p * cos0;
            Ok(p / w.abs() * kq / a)
        },
        &segs,
        &s,
    )?;
    Ok(v / (32.0 * PI.powi(3) * qn))
}

fn shell_ju(x: f64, y: f64, a: f64) -> Result<f64> {
    let (b, c) = (x * x, y * y);
    let lower = shell_alpha_direct(ConeRegion::LowerCone, c, b, a)?;
    let upper = shell_alpha_direct(ConeRegion::UpperCone, c, b, a)?;
    Ok(-128.0 * PI.powi(3) * a * a * x * (lower - upper))
}

/// `J(a, x, y)` from its closed form and from the two-shell quadrature.
pub fn shell_convolution_j_check(x: f64, y: f64, a: f64) -> Result<ShellCheck> {
    check_positive_a(a)?;
    let direct = 0.5 * (shell_ju(x, y, a)? + shell_ju(y, x, a)?);
    Ok(ShellCheck {
        closed: kernels::j_fn(a, x, y),
        direct,
    })
}

/// Default largest `a` at which the Hankel integral is attempted.
pub const DEFAULT_HANKEL_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HankelSettings {
    pub a_ceiling: f64,
    /// Momentum-side truncation is `truncation_scale / w²` with `w` the
    /// narrowest bump width.
    pub truncation_scale: f64,
}

impl Default for HankelSettings {
    fn default() -> Self {
        HankelSettings {
            a_ceiling: DEFAULT_HANKEL_CEILING,
            truncation_scale: 8000.0,
        }
    }
}

fn hankel_integral<K: Fn(f64, f64) -> f64>(f: &RadialProfile, a: f64, s: &HankelSettings, kernel: K) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("need a >= 0, got {a}")));
    }
    if a > s.a_ceiling {
        return Err(Error::Domain(format!(
            "a = {a} exceeds the oscillatory-integral ceiling {}",
            s.a_ceiling
        )));
    }
    let (lo, hi) = bump_bounds(f)?;
    let segs = build_segments(lo, hi, &f.knots(), &[]);
    integrate_fallible(|z| Ok(f.value(z) * kernel(z, (a * z).sqrt())), &segs, &INNER_QUAD)
}

/// `f̂(a) = 2iπ² ∫ f(z) z J₁(√(az))/√(az) dz`.
pub fn hankel_transform(f: &RadialProfile, a: f64, s: &HankelSettings) -> Result<Complex64> {
    let v = hankel_integral(f, a, s, |z, x| z * bessel_j1_over_x(x))?;
    Ok(Complex64::new(0.0, 2.0 * PI * PI * v))
}

fn j2_over_x2(x: f64) -> f64 {
    if x < 1e-3 {
        let x2 = x * x;
        1.0 / 8.0 - x2 / 96.0
    } else {
        bessel_j2(x) / (x * x)
    }
}

/// Vector-case transform `2 d/da f̂(a) = −2iπ² ∫ f(z) z² J₂(√(az))/(az) dz`.
pub fn hankel_transform_vector(f: &RadialProfile, a: f64, s: &HankelSettings) -> Result<Complex64> {
    let v = hankel_integral(f, a, s, |z, x| z * z * j2_over_x2(x))?;
    Ok(Complex64::new(0.0, -2.0 * PI * PI * v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlancherelSides {
    pub lhs: f64,
    pub rhs: f64,
    /// Contribution of `[A/2, A]` to the momentum side.
    pub tail_estimate: f64,
    pub truncation: f64,
}

impl PlancherelSides {
    pub fn relative_error(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlancherelResult {
    pub scalar: PlancherelSides,
    pub vector: PlancherelSides,
}

fn position_side(f: &RadialProfile, g: &RadialProfile, power: i32) -> Result<f64> {
    let (flo, fhi) = bump_bounds(f)?;
    let (glo, ghi) = bump_bounds(g)?;
    let (lo, hi) = (flo.max(glo), fhi.min(ghi));
    if !(hi > lo) {
        return Ok(0.0);
    }
    let mut pts = f.knots();
    pts.extend(g.knots());
    let segs = build_segments(lo, hi, &pts, &[]);
    let s = QuadSettings {
        tol: 1e-12,
        max_subdiv: 2000,
    };
    integrate_fallible(|z| Ok(f.value(z) * g.value(z) * z.powi(power)), &segs, &s)
}

// ∫₀^A conj(f̂) ĝ a^power da, integrated in y = √a.
fn momentum_side<T>(f: &RadialProfile, g: &RadialProfile, power: i32, top: f64, s: &HankelSettings, t: T) -> Result<(f64, f64)>
where
    T: Fn(&RadialProfile, f64, &HankelSettings) -> Result<Complex64>,
{
    let (_, fhi) = bump_bounds(f)?;
    let (_, ghi) = bump_bounds(g)?;
    let zmax = fhi.max(ghi);
    let ytop = top.sqrt();
    // One segment per half oscillation of the fastest Bessel factor.
    let n = ((ytop * zmax.sqrt() / PI).ceil() as usize).max(8);
    let cuts: Vec<f64> = (1..n).map(|i| ytop * i as f64 / n as f64).collect();
    let half = (0.5f64).sqrt() * ytop;
    let mut pts = cuts;
    pts.push(half);
    let segs = build_segments(0.0, ytop, &pts, &[]);
    let quad = QuadSettings {
        tol: 1e-10,
        max_subdiv: 100_000,
    };
    let integrand = |y: f64| -> Result<f64> {
        let a = y * y;
        let fa = t(f, a, s)?;
        let ga = t(g, a, s)?;
        Ok((fa.conj() * ga).re * a.powi(power) * 2.0 * y)
    };
    let total = integrate_fallible(&integrand, &segs, &quad)?;
    let tail_segs = build_segments(half, ytop, &pts, &[]);
    let tail = integrate_fallible(&integrand, &tail_segs, &quad)?;
    let norm = (2.0 * PI).powi(4);
    Ok((total / norm, tail / norm))
}

/// Both sides of the scalar and vector Plancherel identities.
pub fn plancherel_check(f: &RadialProfile, g: &RadialProfile, s: &HankelSettings) -> Result<PlancherelResult> {
    let (flo, fhi) = bump_bounds(f)?;
    let (glo, ghi) = bump_bounds(g)?;
    let w = (fhi - flo).min(ghi - glo);
    let top = s.truncation_scale / (w * w);
    if top > s.a_ceiling {
        return Err(Error::Domain(format!(
            "truncation {top:.3e} needed for width {w} exceeds the ceiling {}",
            s.a_ceiling
        )));
    }
    let (rs, ts) = momentum_side(f, g, 1, top, s, hankel_transform)?;
    let (rv, tv) = momentum_side(f, g, 2, top, s, hankel_transform_vector)?;
    Ok(PlancherelResult {
        scalar: PlancherelSides {
            lhs: position_side(f, g, 1)?,
            rhs: rs,
            tail_estimate: ts.abs(),
            truncation: top,
        },
        vector: PlancherelSides {
            lhs: position_side(f, g, 2)?,
            rhs: rv,
            tail_estimate: tv.abs(),
            truncation: top,
        },
    })
}

/// Outcome of one randomized check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub worst_error: f64,
    pub tolerance: f64,
    /// `tolerance − worst_error`; negative on failure.
    pub margin: f64,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(name: &str, errors: &[f64], tolerance: f64, started: Instant) -> Self {
        let worst = errors.iter().copied().fold(0.0, |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
        CheckResult {
            name: name.to_string(),
            passed: worst <= tolerance,
            cases: errors.len(),
            worst_error: worst,
            tolerance,
            margin: tolerance - worst,
            seconds: started.elapsed().as_secs_f64(),
            note: None,
        }
    }

    fn failed(name: &str, err: Error, tolerance: f64, started: Instant) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: false,
            cases: 0,
            worst_error: f64::INFINITY,
            tolerance,
            margin: f64::NEG_INFINITY,
            seconds: started.elapsed().as_secs_f64(),
            note: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    fn from_checks(seed: u64, checks: Vec<CheckResult>) -> Self {
        SuiteReport {
            seed,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// JSON with non-finite numbers written as strings.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let Some(checks) = v.get_mut("checks").and_then(|c| c.as_array_mut()) {
            for (c, orig) in checks.iter_mut().zip(&self.checks) {
                for (key, x) in [("worst_error", orig.worst_error), ("margin", orig.margin)] {
                    if !x.is_finite() {
                        c[key] = serde_json::Value::String(format!("{x}"));
                    }
                }
            }
        }
        serde_json::to_string_pretty(&v).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub identity_cases: usize,
    pub convolution_pairs: usize,
    pub shell_triples: usize,
    pub plancherel_pairs: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 20_240_601,
            identity_cases: 200,
            convolution_pairs: 10,
            shell_triples: 20,
            plancherel_pairs: 5,
        }
    }
}

pub const IDENTITY_TOL: f64 = 1e-12;
pub const CONVOLUTION_TOL: f64 = 1e-6;
pub const SHELL_TOL: f64 = 1e-8;
pub const SHELL_ZERO_ABS: f64 = 1e-10;
pub const PLANCHEREL_TOL: f64 = 1e-3;

fn rel(x: f64, y: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        (x - y).abs()
    } else {
        (x - y).abs() / scale
    }
}

fn signed_mass(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.gen_range(0.1..5.0);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

fn random_a(rng: &mut ChaCha8Rng, region: ConeRegion) -> f64 {
    let a = rng.gen_range(0.05..10.0);
    match region {
        ConeRegion::OutsideCone => -a,
        _ => a,
    }
}

const REGIONS: [ConeRegion; 3] = [ConeRegion::UpperCone, ConeRegion::LowerCone, ConeRegion::OutsideCone];

/// Pointwise kernel identities, each with `n` random cases.
pub fn kernel_identity_checks(ks: &KernelSet, seed: u64, n: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let t = Instant::now();
    let errs: Vec<f64> = (0..n)
        .map(|_| {
            let (x, y) = (signed_mass(&mut rng), signed_mass(&mut rng));
            let a = rng.gen_range(0.0..1.2) * kernels::kink(x, y) + 1e-3;
            let (j1, j2) = ((ks.j)(a, x, y), (ks.j)(a, y, x));
            rel(j1, j2, j1.abs().max(j2.abs()))
        })
        .collect();
    out.push(CheckResult::new("j_symmetry", &errs, IDENTITY_TOL, t));

    let t = Instant::now();
    let errs: Vec<f64> = (0..n)
        .map(|_| {
            let (x, y) = (signed_mass(&mut rng), signed_mass(&mut rng));
            let above = kernels::kink(x, y) * rng.gen_range(1.0..3.0);
            let a = rng.gen_range(0.01..10.0);
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let scale = (4.0 * a * x.abs().powi(3)).max(f64::MIN_POSITIVE);
            (ks.j)(above, x, y)
                .abs()
                .max((ks.j)(a, x, s * x).abs())
                .max(rel((ks.k)(a, x, x), -4.0 * a * x.powi(3), scale))
        })
        .collect();
    out.push(CheckResult::new("jk_vanishing", &errs, IDENTITY_TOL, t));

    let t = Instant::now();
    let errs: Vec<f64> = (0..n)
        .map(|_| {
            let x = signed_mass(&mut rng);
            let a = rng.gen_range(0.01..50.0);
            let e = -4.0 * x.powi(3);
            rel((ks.h)(a, x, x), e, e.abs())
        })
        .collect();
    out.push(CheckResult::new("h_equal_mass", &errs, IDENTITY_TOL, t));

    let t = Instant::now();
    let errs: Vec<f64> = (0..n)
        .map(|_| {
            let (x, y) = (signed_mass(&mut rng), signed_mass(&mut rng));
            let (j, k) = ((ks.j)(0.0, x, y), (ks.k)(0.0, x, y));
            rel(j + k, 0.0, j.abs().max(k.abs()))
        })
        .collect();
    out.push(CheckResult::new("jk_sum_at_zero", &errs, IDENTITY_TOL, t));

    let t = Instant::now();
    let mut errs = Vec::with_capacity(n);
    let mut failure = None;
    for i in 0..n {
        let region = REGIONS[i % 3];
        let a = random_a(&mut rng, region);
        let (b, c) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        match ((ks.k1)(region, a, b, c), (ks.l1)(region, a, b, c), (ks.l2)(region, a, b, c)) {
            (Ok(k1), Ok(l1), Ok(l2)) => errs.push(rel(k1 - l1 - l2, 0.0, k1.abs().max(l1.abs()).max(l2.abs()))),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
                failure = Some(e);
                break;
            }
        }
    }
    out.push(match failure {
        Some(e) => CheckResult::failed("leibniz", e, IDENTITY_TOL, t),
        None => CheckResult::new("leibniz", &errs, IDENTITY_TOL, t),
    });

    let t = Instant::now();
    let mut errs = Vec::with_capacity(n);
    let mut failure = None;
    for i in 0..n {
        let region = REGIONS[i % 3];
        let a = random_a(&mut rng, region);
        let (b, c) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        match ((ks.l2)(region, a, b, c), (ks.l1)(region.mirrored(), a, c, b)) {
            (Ok(l2), Ok(l1)) => errs.push(rel(l2, l1, l2.abs().max(l1.abs()))),
            (Err(e), _) | (_, Err(e)) => {
                failure = Some(e);
                break;
            }
        }
    }
    out.push(match failure {
        Some(e) => CheckResult::failed("mirror", e, IDENTITY_TOL, t),
        None => CheckResult::new("mirror", &errs, IDENTITY_TOL, t),
    });

    out
}

fn random_bump(rng: &mut ChaCha8Rng, lo: (f64, f64), width: (f64, f64)) -> RadialProfile {
    let l = rng.gen_range(lo.0..lo.1);
    let w = rng.gen_range(width.0..width.1);
    RadialProfile::Bump { lo: l, hi: l + w, amp: 1.0 }
}

fn random_pair(rng: &mut ChaCha8Rng, region: Option<ConeRegion>) -> (RadialProfile, RadialProfile, f64) {
    match region {
        None => {
            let f = random_bump(rng, (0.05, 1.5), (0.3, 2.0));
            let g = random_bump(rng, (0.05, 1.5), (0.3, 2.0));
            let (fl, fh) = f.support();
            let (gl, gh) = g.support();
            let lo = (fl.sqrt() + gl.sqrt()).powi(2);
            let hi = (fh.sqrt() + gh.sqrt()).powi(2);
            (f, g, lo + rng.gen_range(0.1..0.9) * (hi - lo))
        }
        Some(ConeRegion::LowerCone) => {
            let f = random_bump(rng, (3.0, 5.0), (0.5, 4.0));
            let g = random_bump(rng, (0.05, 1.0), (0.3, 1.5));
            let (_, fh) = f.support();
            let (gl, _) = g.support();
            let top = (fh.sqrt() - gl.sqrt()).powi(2);
            (f, g, top * rng.gen_range(0.05..0.8))
        }
        Some(_) => {
            let (g, f, a) = random_pair(rng, Some(ConeRegion::LowerCone));
            (f, g, a)
        }
    }
}

/// Closed-form convolutions against direct quadrature, every kind and region.
pub fn convolution_checks(seed: u64, pairs: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
    let mut out = Vec::new();
    let regions = [None, Some(ConeRegion::LowerCone), Some(ConeRegion::UpperCone)];
    for region in regions {
        for kind in Kind::ALL {
            let name = format!(
                "convolution_{}_{}",
                match region {
                    None => "negative",
                    Some(ConeRegion::LowerCone) => "lower",
                    _ => "upper",
                },
                serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            );
            let t = Instant::now();
            let cases: Vec<_> = (0..pairs).map(|_| random_pair(&mut rng, region)).collect();
            let res: Result<Vec<f64>> = cases
                .iter()
                .map(|(f, g, a)| {
                    let (closed, direct) = match region {
                        None => (
                            convolve_negative_closed(kind, f, g, *a)?,
                            convolve_negative_direct(kind, f, g, *a)?,
                        ),
                        Some(r) => (
                            convolve_mixed_closed(kind, f, g, r, *a)?,
                            convolve_mixed_direct(kind, f, g, r, *a)?,
                        ),
                    };
                    Ok(rel(closed, direct, closed.abs()))
                })
                .collect();
            out.push(match res {
                Ok(errs) => CheckResult::new(&name, &errs, CONVOLUTION_TOL, t),
                Err(e) => CheckResult::failed(&name, e, CONVOLUTION_TOL, t),
            });
        }
    }
    out
}

/// Mean of the upper and lower regular parts as `a → 0⁺` against the outside
/// part as `a → 0⁻`, for disjoint supports. Both limits are extrapolated from
/// `|a| = δ, 2δ, 4δ`.
pub fn cone_limit_checks(ks: &KernelSet, seed: u64, pairs: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11_3175);
    let delta = 1e-3;
    let limit = |v: [f64; 3]| (8.0 * v[0] - 6.0 * v[1] + v[2]) / 3.0;
    let mut out = Vec::new();
    for (name, kernel) in [("cone_limit_k1", ks.k1), ("cone_limit_k2", ks.k2)] {
        let t = Instant::now();
        let res: Result<Vec<f64>> = (0..pairs)
            .map(|_| {
                let f = random_bump(&mut rng, (0.1, 1.0), (0.3, 1.0));
                let g = random_bump(&mut rng, (2.5, 4.0), (0.3, 2.0));
                let (f, g) = if rng.gen_bool(0.5) { (f, g) } else { (g, f) };
                let mut inside = [0.0; 3];
                let mut outside = [0.0; 3];
                for (i, h) in [delta, 2.0 * delta, 4.0 * delta].into_iter().enumerate() {
                    let up = convolve_regular(kernel, &f, &g, ConeRegion::UpperCone, h)?;
                    let lo = convolve_regular(kernel, &f, &g, ConeRegion::LowerCone, h)?;
                    inside[i] = 0.5 * (up + lo);
                    outside[i] = convolve_regular(kernel, &f, &g, ConeRegion::OutsideCone, -h)?;
                }
                let (l_in, l_out) = (limit(inside), limit(outside));
                Ok(rel(l_in, l_out, l_out.abs()))
            })
            .collect();
        out.push(match res {
            Ok(errs) => CheckResult::new(name, &errs, CONVOLUTION_TOL, t),
            Err(e) => CheckResult::failed(name, e, CONVOLUTION_TOL, t),
        });
    }
    out
}

/// Two-shell representation of `J` at random `(x, y, a)` plus vanishing cases.
pub fn shell_checks(seed: u64, triples: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e11);
    let t = Instant::now();
    let res: Result<Vec<f64>> = (0..triples)
        .map(|_| {
            let (x, y) = loop {
                let (x, y) = (signed_mass(&mut rng), signed_mass(&mut rng));
                if (x.abs() - y.abs()).abs() > 0.3 {
                    break (x, y);
                }
            };
            let a = kernels::kink(x, y) * rng.gen_range(0.05..0.95);
            let r = shell_convolution_j_check(x, y, a)?;
            Ok(rel(r.closed, r.direct, r.closed.abs()))
        })
        .collect();
    let mut out = vec![match res {
        Ok(errs) => CheckResult::new("shell_j", &errs, SHELL_TOL, t),
        Err(e) => CheckResult::failed("shell_j", e, SHELL_TOL, t),
    }];

    let t = Instant::now();
    let res: Result<Vec<f64>> = (0..triples)
        .map(|i| {
            let x = signed_mass(&mut rng);
            let (y, a) = if i % 2 == 0 {
                (x, rng.gen_range(0.01..10.0))
            } else {
                let y = signed_mass(&mut rng);
                (y, kernels::kink(x, y) * rng.gen_range(1.0..3.0) + 1e-6)
            };
            let r = shell_convolution_j_check(x, y, a)?;
            Ok(r.closed.abs().max(r.direct.abs()))
        })
        .collect();
    out.push(match res {
        Ok(errs) => CheckResult::new("shell_j_vanishing", &errs, SHELL_ZERO_ABS, t),
        Err(e) => CheckResult::failed("shell_j_vanishing", e, SHELL_ZERO_ABS, t),
    });
    out
}

fn random_overlapping_pair(rng: &mut ChaCha8Rng) -> (RadialProfile, RadialProfile) {
    let f = random_bump(rng, (0.2, 2.0), (1.0, 2.5));
    let (fl, fh) = f.support();
    let gl = fl + rng.gen_range(-0.4..0.4) * (fh - fl);
    let g = RadialProfile::Bump {
        lo: gl.max(0.05),
        hi: gl.max(0.05) + rng.gen_range(1.0..2.5),
        amp: rng.gen_range(0.5..2.0),
    };
    (f, g)
}

/// Scalar and vector Plancherel identities plus the dilation check.
pub fn plancherel_checks(seed: u64, pairs: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x91a7);
    let s = HankelSettings::default();
    let t = Instant::now();
    let cases: Vec<_> = (0..pairs).map(|_| random_overlapping_pair(&mut rng)).collect();
    let res: Result<Vec<PlancherelResult>> = cases.iter().map(|(f, g)| plancherel_check(f, g, &s)).collect();
    let mut out = Vec::new();
    match res {
        Ok(rs) => {
            let scalar: Vec<f64> = rs.iter().map(|r| r.scalar.relative_error()).collect();
            let vector: Vec<f64> = rs.iter().map(|r| r.vector.relative_error()).collect();
            let mut c = CheckResult::new("plancherel_scalar", &scalar, PLANCHEREL_TOL, t);
            let tail = rs.iter().map(|r| r.scalar.tail_estimate / r.scalar.lhs.abs()).fold(0.0, f64::max);
            c.note = Some(format!("largest relative tail estimate {tail:.2e}"));
            out.push(c);
            let mut c = CheckResult::new("plancherel_vector", &vector, PLANCHEREL_TOL, t);
            let tail = rs.iter().map(|r| r.vector.tail_estimate / r.vector.lhs.abs()).fold(0.0, f64::max);
            c.note = Some(format!("largest relative tail estimate {tail:.2e}"));
            out.push(c);
        }
        Err(e) => {
            out.push(CheckResult::failed("plancherel_scalar", e.clone(), PLANCHEREL_TOL, t));
            out.push(CheckResult::failed("plancherel_vector", e, PLANCHEREL_TOL, t));
        }
    }

    let t = Instant::now();
    let (f, g) = random_overlapping_pair(&mut rng);
    let lambda2: f64 = rng.gen_range(1.5..3.0);
    let res = (|| -> Result<Vec<f64>> {
        let base = plancherel_check(&f, &g, &s)?;
        let scaled = plancherel_check(&f.dilated(lambda2), &g.dilated(lambda2), &s)?;
        let l4 = lambda2 * lambda2;
        let l6 = l4 * lambda2;
        Ok(vec![
            rel(scaled.scalar.lhs, l4 * base.scalar.lhs, l4 * base.scalar.lhs.abs()),
            rel(scaled.scalar.rhs, l4 * base.scalar.rhs, l4 * base.scalar.rhs.abs()),
            rel(scaled.vector.lhs, l6 * base.vector.lhs, l6 * base.vector.lhs.abs()),
            rel(scaled.vector.rhs, l6 * base.vector.rhs, l6 * base.vector.rhs.abs()),
        ])
    })();
    out.push(match res {
        Ok(errs) => CheckResult::new("plancherel_dilation", &errs, PLANCHEREL_TOL, t),
        Err(e) => CheckResult::failed("plancherel_dilation", e, PLANCHEREL_TOL, t),
    });
    out
}

/// Runs every oracle check with the given kernels.
pub fn run_suite(ks: &KernelSet, opts: &SuiteOptions) -> SuiteReport {
    let mut checks = kernel_identity_checks(ks, opts.seed, opts.identity_cases);
    checks.extend(cone_limit_checks(ks, opts.seed, opts.convolution_pairs));
    checks.extend(convolution_checks(opts.seed, opts.convolution_pairs));
    checks.extend(shell_checks(opts.seed, opts.shell_triples));
    checks.extend(plancherel_checks(opts.seed, opts.plancherel_pairs));
    SuiteReport::from_checks(opts.seed, checks)
}
