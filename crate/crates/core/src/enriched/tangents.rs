//! Arc distances, tangent lines from points and common tangents of convex
//! curves.

use crate::error::{Error, Result};
use crate::geometry::{convex_distance, SupportCurve};
use std::f64::consts::{PI, TAU};

/// Closed interval of admissible derivative values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// Length of the shorter boundary arc between `e` and `s` and its
/// subdifferential in each argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcDistance {
    pub value: f64,
    pub d_e: Interval,
    pub d_s: Interval,
}

/// `D(e, s) = min(|e − s|, ℓ − |e − s|)` on a boundary of length `ℓ`.
pub fn arc_distance(perimeter: f64, e: f64, s: f64) -> ArcDistance {
    let d = (s - e).rem_euclid(perimeter);
    let half = 0.5 * perimeter;
    let kink = Interval { lo: -1.0, hi: 1.0 };
    if d == 0.0 || d == half {
        return ArcDistance { value: d.min(perimeter - d), d_e: kink, d_s: kink };
    }
    if d < half {
        ArcDistance { value: d, d_e: Interval::point(-1.0), d_s: Interval::point(1.0) }
    } else {
        ArcDistance { value: perimeter - d, d_e: Interval::point(1.0), d_s: Interval::point(-1.0) }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Root of `f` on `[a, b]` with `f(a) ≤ 0 ≤ f(b)` (or reversed), by
/// safeguarded secant steps.
pub(crate) fn bracketed_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let mut x = b - fb * (b - a) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        let w = hi - lo;
        if !(x > lo + 0.01 * w && x < hi - 0.01 * w) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// Angles of the two tangent points seen from an external point `p`:
/// `(minus, plus)` where a ray from `p` arriving at `plus` moves along the
/// positive tangent and one arriving at `minus` along the negative tangent.
/// Between them (counterclockwise from `minus`) lies the arc visible from
/// `p`. `None` when `p` is not outside the curve.
pub fn tangent_angles(curve: &SupportCurve, p: [f64; 2]) -> Option<(f64, f64)> {
    let phi = |th: f64| curve.h(th) - dot(p, [th.cos(), th.sin()]);
    let c = curve.center();
    let mut th0 = (p[1] - c[1]).atan2(p[0] - c[0]);
    if phi(th0) >= 0.0 {
        let n = 720;
        let (best, val) = (0..n)
            .map(|k| {
                let th = TAU * k as f64 / n as f64;
                (th, phi(th))
            })
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if val >= 0.0 {
            return None;
        }
        th0 = best;
    }
    let plus = bracketed_root(phi, th0, th0 + PI);
    let minus = bracketed_root(phi, th0 - PI, th0);
    Some((minus, plus))
}

/// Kind of a common tangent line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentKind {
    /// Both curves on the same side of the line.
    Outer,
    /// The curves on opposite sides.
    Inner,
}

/// Segment tangent to two disjoint convex curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bitangent {
    pub kind: TangentKind,
    pub theta_a: f64,
    pub theta_b: f64,
    pub point_a: [f64; 2],
    pub point_b: [f64; 2],
    pub length: f64,
}

fn roots(f: impl Fn(f64) -> f64 + Copy) -> Vec<f64> {
    let n = 1440;
    // Grid offset so symmetric configurations do not put roots on nodes.
    let shift = 0.123_456_789;
    let mut out = Vec::new();
    let mut prev = f(shift);
    for k in 1..=n {
        let th = shift + TAU * k as f64 / n as f64;
        let cur = f(th);
        if (prev < 0.0) != (cur < 0.0) {
            out.push(bracketed_root(f, th - TAU / n as f64, th).rem_euclid(TAU));
        }
        prev = cur;
    }
    out
}

/// The four common tangents of two disjoint strictly convex curves.
///
/// Outer tangents share the normal angle `θ` with `h_a(θ) = h_b(θ)`; inner
/// tangents satisfy `h_a(θ) + h_b(θ + π) = 0`.
pub fn common_tangents(a: &SupportCurve, b: &SupportCurve) -> Result<Vec<Bitangent>> {
    if convex_distance(a, b, [0.0, 0.0]) <= 0.0 {
        return Err(Error::Geometry("curves intersect; common tangents need disjoint curves".into()));
    }
    let mut out = Vec::new();
    for th in roots(|t| a.h(t) - b.h(t)) {
        out.push(make(a, b, TangentKind::Outer, th, th));
    }
    for th in roots(|t| a.h(t) + b.h(t + PI)) {
        out.push(make(a, b, TangentKind::Inner, th, th + PI));
    }
    Ok(out)
}

fn make(a: &SupportCurve, b: &SupportCurve, kind: TangentKind, ta: f64, tb: f64) -> Bitangent {
    let pa = a.point(ta);
    let pb = b.point(tb);
    Bitangent {
        kind,
        theta_a: ta.rem_euclid(TAU),
        theta_b: tb.rem_euclid(TAU),
        point_a: pa,
        point_b: pb,
        length: (pb[0] - pa[0]).hypot(pb[1] - pa[1]),
    }
}
