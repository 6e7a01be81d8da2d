//! Globally adaptive 21-point Gauss–Kronrod quadrature over a list of segments.
//!
//! A segment may carry a square-root singularity at its right end (the
//! typical behaviour of `√Δ` just below a kink); such segments are mapped
//! through `a = hi − t²`, which makes the integrand smooth in `t`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_409_187,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Accuracy controls. The error target is `max(tol, tol·|I|)`, i.e. absolute
/// for integrals of order one and below, relative above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub tol: f64,
    pub max_subdiv: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            tol: 1e-10,
            max_subdiv: 4000,
        }
    }
}

impl QuadSettings {
    pub fn with_tol(tol: f64) -> Self {
        QuadSettings {
            tol,
            ..Default::default()
        }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.tol.max(self.tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Regular,
    /// Integrand behaves like `√(hi − a)` times a smooth function near `hi`.
    SqrtRight,
    /// Same at the left end, `√(a − lo)`.
    SqrtLeft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub kind: Endpoint,
}

impl Segment {
    pub fn regular(lo: f64, hi: f64) -> Self {
        Segment {
            lo,
            hi,
            kind: Endpoint::Regular,
        }
    }

    pub fn sqrt_right(lo: f64, hi: f64) -> Self {
        Segment {
            lo,
            hi,
            kind: Endpoint::SqrtRight,
        }
    }

    pub fn sqrt_left(lo: f64, hi: f64) -> Self {
        Segment {
            lo,
            hi,
            kind: Endpoint::SqrtLeft,
        }
    }

    // Integration range in the variable actually sampled.
    fn range(&self) -> (f64, f64) {
        match self.kind {
            Endpoint::Regular => (self.lo, self.hi),
            Endpoint::SqrtRight | Endpoint::SqrtLeft => (0.0, (self.hi - self.lo).sqrt()),
        }
    }

    fn eval<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match self.kind {
            Endpoint::Regular => f(t),
            Endpoint::SqrtRight => 2.0 * t * f(self.hi - t * t),
            Endpoint::SqrtLeft => 2.0 * t * f(self.lo + t * t),
        }
    }
}

/// Splits `[lo, hi]` at the given interior points. Segments that end at one
/// of the `sqrt_points` are marked [`Endpoint::SqrtRight`].
pub fn split_segments(lo: f64, hi: f64, points: &[f64], sqrt_points: &[f64]) -> Vec<Segment> {
    let mut nodes: Vec<f64> = points
        .iter()
        .copied()
        .filter(|p| *p > lo && *p < hi)
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
    let mut edges = Vec::with_capacity(nodes.len() + 2);
    edges.push(lo);
    edges.extend(nodes);
    edges.push(hi);
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let singular = sqrt_points
                .iter()
                .any(|s| (s - w[1]).abs() <= 1e-14 * s.abs().max(1e-300));
            if singular {
                Segment::sqrt_right(w[0], w[1])
            } else {
                Segment::regular(w[0], w[1])
            }
        })
        .collect()
}

struct Piece {
    seg: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// One 21-point Kronrod rule with its embedded 10-point Gauss estimate.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * h;
    let err = rescale_error((res_k - res_g) * h, res_abs * h.abs(), res_asc * h.abs());
    (value, err)
}

/// Adaptive integral over a single interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, s: &QuadSettings) -> Result<QuadResult> {
    integrate_segments(f, &[Segment::regular(lo, hi)], s)
}

/// Adaptive integral over a union of segments sharing one global error budget.
pub fn integrate_segments<F: Fn(f64) -> f64>(
    f: F,
    segments: &[Segment],
    s: &QuadSettings,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (i, seg) in segments.iter().enumerate() {
        if seg.hi <= seg.lo {
            continue;
        }
        let (a, b) = seg.range();
        let g = |t: f64| seg.eval(&f, t);
        let (value, error) = gk21(&g, a, b);
        total += value;
        total_err += error;
        heap.push(Piece {
            seg: i,
            a,
            b,
            value,
            error,
        });
    }
    if !total.is_finite() || !total_err.is_finite() {
        return Err(Error::Domain("non-finite integrand".into()));
    }
    let mut count = heap.len();
    while total_err > s.target(total) {
        if count >= s.max_subdiv {
            return Err(Error::Quadrature {
                achieved: total_err,
                target: s.target(total),
                intervals: count,
            });
        }
        let piece = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let seg = &segments[piece.seg];
        let g = |t: f64| seg.eval(&f, t);
        let mid = 0.5 * (piece.a + piece.b);
        if mid <= piece.a || mid >= piece.b {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature {
                achieved: total_err,
                target: s.target(total),
                intervals: count,
            });
        }
        let (v1, e1) = gk21(&g, piece.a, mid);
        let (v2, e2) = gk21(&g, mid, piece.b);
        total += v1 + v2 - piece.value;
        total_err += e1 + e2 - piece.error;
        heap.push(Piece {
            seg: piece.seg,
            a: piece.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            seg: piece.seg,
            a: mid,
            b: piece.b,
            value: v2,
            error: e2,
        });
        count += 1;
        if !total.is_finite() {
            return Err(Error::Domain("non-finite integrand".into()));
        }
    }
    // Re-sum to shed accumulated drift from the incremental updates.
    let mut pieces: Vec<Piece> = heap.into_vec();
    pieces.sort_by(|p, q| p.seg.cmp(&q.seg).then(p.a.total_cmp(&q.a)));
    let value: f64 = pieces.iter().map(|p| p.value).sum();
    let error: f64 = pieces.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error,
        intervals: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_degree_31() {
        let p = |x: f64| 3.0 * x.powi(31) - 2.0 * x.powi(20) + x.powi(7) + 1.0;
        let exact = |x: f64| 3.0 * x.powi(32) / 32.0 - 2.0 * x.powi(21) / 21.0 + x.powi(8) / 8.0 + x;
        let (v, _) = gk21(&p, -0.3, 1.1);
        let want = exact(1.1) - exact(-0.3);
        assert!((v - want).abs() < 1e-13 * want.abs());
    }

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_endpoint_segment() {
        // ∫₀¹ √(1−a) da = 2/3
        let segs = [Segment::sqrt_right(0.0, 1.0)];
        let r = integrate_segments(|a: f64| (1.0 - a).max(0.0).sqrt(), &segs, &QuadSettings::with_tol(1e-14)).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn subdivision_limit_reported() {
        let s = QuadSettings {
            tol: 1e-15,
            max_subdiv: 3,
        };
        let r = integrate(|x: f64| (1.0 / x.abs().max(1e-300)).sqrt().sin(), 0.0, 1.0, &s);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn split_marks_sqrt_segments() {
        let segs = split_segments(0.0, 4.0, &[1.0, 3.0, 5.0], &[1.0]);
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].kind, Endpoint::SqrtRight);
        assert_eq!(segs[1].kind, Endpoint::Regular);
    }
}
