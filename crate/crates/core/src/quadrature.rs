//! One-dimensional quadrature: global adaptive Gauss–Kronrod (7/15) with
//! certified truncation of Gaussian-damped radial tails, a double-exponential
//! rule for semi-infinite intervals, and Gauss–Legendre nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerances for every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Fixed upper radial cut `R`. When absent the cut is chosen per integral
    /// so that the certified tail bound is below a tenth of `abs_tol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_cut: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            max_subdivisions: 4000,
            tail_cut: None,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), QuadError> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.rel_tol.is_finite()
            && self.abs_tol.is_finite()
            && self.max_subdivisions > 0
            && self.tail_cut.map_or(true, |r| r.is_finite() && r > 0.0);
        if ok {
            Ok(())
        } else {
            Err(QuadError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge after {subdivisions} subdivisions (error estimate {error:e}, value {value:e})")]
    NotConverged {
        value: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("tail bound {bound:e} at cut {cut} exceeds tolerance {tol:e}")]
    TailNotCertified { cut: f64, bound: f64, tol: f64 },
    #[error("non-finite integrand value at r = {0}")]
    NonFinite(f64),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
}

/// A quadrature value together with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl Quad {
    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error: self.error * factor.abs(),
        }
    }

    pub fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// Kronrod 15-point abscissae on [-1, 1] (non-negative half); odd indices are
// the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Nodes and weights of the 15-point Kronrod rule mapped to `[a, b]`.
pub fn kronrod15_nodes(a: f64, b: f64) -> [(f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 15];
    for i in 0..7 {
        out[2 * i] = (c - h * XGK[i], h * WGK[i]);
        out[2 * i + 1] = (c + h * XGK[i], h * WGK[i]);
    }
    out[14] = (c, h * WGK[7]);
    out
}

/// Weights of the embedded 7-point Gauss rule, aligned with
/// [`kronrod15_nodes`] ordering (zero where the node is Kronrod-only).
pub fn gauss7_weights_aligned(a: f64, b: f64) -> [f64; 15] {
    let h = 0.5 * (b - a);
    let mut out = [0.0; 15];
    for j in 0..3 {
        let i = 2 * j + 1;
        out[2 * i] = h * WG[j];
        out[2 * i + 1] = h * WG[j];
    }
    out[14] = h * WG[3];
    out
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(c));
    }
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x1 = c - h * XGK[i];
        let x2 = c + h * XGK[i];
        let f1 = f(x1);
        let f2 = f(x2);
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(x1));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(x2));
        }
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    Ok(Panel {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
    })
}

/// Global adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The error estimate is the plain Kronrod–Gauss difference, which bounds the
/// error of the lower-order rule and therefore overestimates the error of the
/// returned Kronrod value.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Quad, QuadError> {
    integrate_with_budget(&f, a, b, cfg, cfg.abs_tol)
}

fn integrate_with_budget<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
    abs_tol: f64,
) -> Result<Quad, QuadError> {
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
        });
    }
    let first = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    let mut total = first.value;
    let mut total_err = first.error;
    heap.push(first);
    let mut subdivisions = 0;
    while total_err > abs_tol.max(cfg.rel_tol * total.abs()) {
        if subdivisions >= cfg.max_subdivisions {
            return Err(QuadError::NotConverged {
                value: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(f, worst.a, mid)?;
        let right = gk15(f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
    let mut sum = CompensatedSum::default();
    let mut err = 0.0;
    for p in heap.into_iter() {
        sum.add(p.value);
        err += p.error;
    }
    Ok(Quad {
        value: sum.value(),
        error: err,
    })
}

/// Majorant `amplitude · r^power · exp(-gauss·r² - linear·r)` of a radial
/// integrand on `[R, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Majorant {
    pub amplitude: f64,
    pub power: i32,
    pub gauss: f64,
    pub linear: f64,
}

impl Majorant {
    /// Upper bound on `∫_R^∞ majorant(r) dr`, or `None` when this form
    /// admits no bound (no damping at all, or a power too large).
    pub fn tail_bound(&self, cut: f64) -> Option<f64> {
        assert!(cut > 0.0);
        let p = self.power;
        let a = self.gauss;
        let b = self.linear;
        let damp = (-a * cut * cut - b * cut).exp();
        let base = if a > 0.0 {
            match p {
                // r^p <= R^{p-1} r for r >= R, then integrate r e^{-a r^2}; e^{-b r} <= e^{-b R}
                p if p <= 1 => cut.powi(p - 1) * damp / (2.0 * a),
                // integration by parts of r^2 e^{-a r^2}
                2 => damp * (cut / (2.0 * a) + 1.0 / (4.0 * a * a * cut)),
                _ => return None,
            }
        } else if b > 0.0 {
            match p {
                p if p <= 0 => cut.powi(p) * damp / b,
                1 => damp * (cut / b + 1.0 / (b * b)),
                _ => return None,
            }
        } else {
            return None;
        };
        Some(self.amplitude.abs() * base)
    }

    /// Smallest cut on a geometric ladder above `lower` whose tail bound is
    /// below `target`.
    pub fn cut_for(&self, lower: f64, target: f64) -> Option<f64> {
        let mut r = lower.max(1e-3) + 1.0;
        for _ in 0..400 {
            if let Some(bound) = self.tail_bound(r) {
                if bound < target {
                    return Some(r);
                }
            }
            r *= 1.05;
        }
        None
    }
}

/// Options for [`integrate_radial`].
#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    /// Frequency `x` of an oscillatory factor `sin(r x)`; zero when absent.
    pub frequency: f64,
}

/// Integrates a radial integrand over `[lower, ∞)`: adaptive quadrature on
/// `[lower, R]` plus a certified tail bound for `[R, ∞)` that is added to the
/// error estimate. For `frequency · R > 50` the finite interval is split at
/// the zeros of `sin(r · frequency)` and the half-period contributions are
/// accumulated with compensation.
pub fn integrate_radial<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    majorant: Majorant,
    opts: RadialOptions,
    cfg: &QuadratureConfig,
) -> Result<Quad, QuadError> {
    let tail_target = 0.1 * cfg.abs_tol;
    let cut = match cfg.tail_cut {
        Some(r) => r.max(lower),
        None => majorant
            .cut_for(lower, tail_target)
            .ok_or(QuadError::TailNotCertified {
                cut: f64::INFINITY,
                bound: f64::INFINITY,
                tol: tail_target,
            })?,
    };
    let tail = majorant.tail_bound(cut).unwrap_or(f64::INFINITY);
    if !(tail < cfg.abs_tol) {
        return Err(QuadError::TailNotCertified {
            cut,
            bound: tail,
            tol: cfg.abs_tol,
        });
    }
    let x = opts.frequency.abs();
    let body = if x * cut > 50.0 {
        let period = PI / x;
        let mut sum = CompensatedSum::default();
        let mut err = 0.0;
        let mut a = lower;
        let mut n = (lower / period).floor() + 1.0;
        let pieces = ((cut - lower) / period).ceil().max(1.0);
        // spread the absolute budget over the half periods
        let budget = cfg.abs_tol / pieces;
        while a < cut {
            let b = (n * period).min(cut);
            if b > a {
                let q = integrate_with_budget(&f, a, b, cfg, budget)?;
                sum.add(q.value);
                err += q.error;
            }
            a = b;
            n += 1.0;
        }
        Quad {
            value: sum.value(),
            error: err,
        }
    } else {
        integrate(&f, lower, cut, cfg)?
    };
    Ok(Quad {
        value: body.value,
        error: body.error + tail,
    })
}

/// Double-exponential (exp-sinh) rule for `∫_lower^∞ f(r) dr` with `f`
/// decaying at infinity. Halves the step until successive levels agree to
/// `tol` (relative).
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, lower: f64, tol: f64) -> Result<Quad, QuadError> {
    let term = |t: f64| -> f64 {
        let s = 0.5 * PI * t.sinh();
        let e = s.exp();
        let r = lower + e;
        if !r.is_finite() {
            return 0.0;
        }
        let v = f(r) * 0.5 * PI * t.cosh() * e;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let t_max = 4.5;
    let mut h = 0.5;
    let mut sum = {
        let mut s = CompensatedSum::default();
        let n = (t_max / h) as i64;
        for k in -n..=n {
            s.add(term(k as f64 * h));
        }
        s
    };
    let mut prev = sum.value() * h;
    for _ in 0..12 {
        h *= 0.5;
        let n = (t_max / h) as i64;
        let mut k = -n + 1;
        if k % 2 == 0 {
            k += 1;
        }
        while k <= n {
            sum.add(term(k as f64 * h));
            k += 2;
        }
        let cur = sum.value() * h;
        let diff = (cur - prev).abs();
        if diff <= tol * cur.abs() {
            return Ok(Quad {
                value: cur,
                error: diff,
            });
        }
        prev = cur;
    }
    Err(QuadError::NotConverged {
        value: prev,
        error: f64::NAN,
        subdivisions: 12,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = vec![(0.0, 0.0); n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out[i] = (-z, w);
        out[n - 1 - i] = (z, w);
    }
    out
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (c + h * x, h * w))
        .collect()
}
