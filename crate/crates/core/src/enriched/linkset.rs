//! Link sets: boundary points of one lifted scatterer that see another one
//! through the interior of the table.

use super::tangents::tangent_angles;
use crate::geometry::{ray_entry, LiftedLabel, SupportCurve, Table};
use std::f64::consts::{PI, TAU};

/// Union of arcs on the target scatterer, in arc length. Each arc is
/// `(start, end)` with `start ∈ [0, ℓ)` and `start < end < start + ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub source: LiftedLabel,
    pub target: LiftedLabel,
    pub perimeter: f64,
    pub arcs: Vec<(f64, f64)>,
}

impl LinkSet {
    /// Whether arc length `s` lies in the set, widened by `tol` at each end.
    pub fn contains(&self, s: f64, tol: f64) -> bool {
        let l = self.perimeter;
        self.arcs.iter().any(|&(a, b)| {
            let x = (s - a).rem_euclid(l);
            x <= b - a + tol || x >= l - tol
        })
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(a, b)| b - a).sum()
    }
}

fn angle_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

/// Reduces `a` to `(-π, π]`.
fn principal(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Directions from `y` that meet `curve`, as an angular interval relative to
/// `reference`; `None` if `y` is not outside the curve.
fn window(curve: &SupportCurve, y: [f64; 2], reference: f64) -> Option<(f64, f64)> {
    let (m, p) = tangent_angles(curve, y)?;
    let a = curve.point(m);
    let b = curve.point(p);
    let x = principal(angle_of([a[0] - y[0], a[1] - y[1]]) - reference);
    let z = principal(angle_of([b[0] - y[0], b[1] - y[1]]) - reference);
    Some((x.min(z), x.max(z)))
}

/// Visibility problem for a fixed ordered pair of lifted scatterers.
pub(crate) struct Visibility {
    source: SupportCurve,
    target: SupportCurve,
    blockers: Vec<SupportCurve>,
}

impl Visibility {
    pub(crate) fn new(table: &Table, source: LiftedLabel, target: LiftedLabel) -> Self {
        let src = table.lift_scatterer(source);
        let tgt = table.lift_scatterer(target);
        let (cs, ct) = (src.center(), tgt.center());
        let hull = src.radius_bound().max(tgt.radius_bound());
        let v = [ct[0] - cs[0], ct[1] - cs[1]];
        let len2 = (v[0] * v[0] + v[1] * v[1]).max(1e-300);
        let lo = [cs[0].min(ct[0]) - hull - 1.0, cs[1].min(ct[1]) - hull - 1.0];
        let hi = [cs[0].max(ct[0]) + hull + 1.0, cs[1].max(ct[1]) + hull + 1.0];
        let mut blockers = Vec::new();
        for i in lo[0].floor() as i64..=hi[0].ceil() as i64 {
            for j in lo[1].floor() as i64..=hi[1].ceil() as i64 {
                for l in 0..table.len() {
                    let label = LiftedLabel::new([i, j], l);
                    if label == source || label == target {
                        continue;
                    }
                    let sc = table.scatterer(l);
                    let c = sc.center();
                    let c = [c[0] + i as f64, c[1] + j as f64];
                    let rel = [c[0] - cs[0], c[1] - cs[1]];
                    let t = ((rel[0] * v[0] + rel[1] * v[1]) / len2).clamp(0.0, 1.0);
                    let d = (rel[0] - t * v[0]).hypot(rel[1] - t * v[1]);
                    if d <= hull + sc.radius_bound() {
                        blockers.push(table.lift_scatterer(label));
                    }
                }
            }
        }
        Self { source: src, target: tgt, blockers }
    }

    /// Width of the largest free angular window from the target point at
    /// normal angle `theta` towards the source; non-positive when blocked.
    pub(crate) fn slack(&self, theta: f64) -> f64 {
        let y = self.target.point(theta);
        let reference = angle_of([self.source.center()[0] - y[0], self.source.center()[1] - y[1]]);
        let Some((mut lo, mut hi)) = window(&self.source, y, reference) else {
            return -1.0;
        };
        // Directions leaving the target must point into the table.
        let hn = principal(theta - reference);
        lo = lo.max(hn - 0.5 * PI);
        hi = hi.min(hn + 0.5 * PI);
        if hi <= lo {
            return hi - lo;
        }
        let mut free = vec![(lo, hi)];
        for b in &self.blockers {
            let Some((blo, bhi)) = window(b, y, reference) else {
                return -1.0;
            };
            if bhi <= lo || blo >= hi {
                continue;
            }
            // Rays meeting both bodies meet them in a fixed order.
            let mid = 0.5 * (blo.max(lo) + bhi.min(hi)) + reference;
            let d = [mid.cos(), mid.sin()];
            let tb = ray_entry(b, y, d).map(|x| x.0).filter(|t| *t > 0.0);
            let ts = ray_entry(&self.source, y, d).map(|x| x.0).filter(|t| *t > 0.0);
            let blocks = match (tb, ts) {
                (Some(tb), Some(ts)) => tb < ts,
                (Some(_), None) => true,
                _ => false,
            };
            if !blocks {
                continue;
            }
            free = free
                .into_iter()
                .flat_map(|(a, c)| {
                    let mut out = Vec::new();
                    if blo > a {
                        out.push((a, c.min(blo)));
                    }
                    if bhi < c {
                        out.push((a.max(bhi), c));
                    }
                    out
                })
                .filter(|(a, c)| c > a)
                .collect();
            if free.is_empty() {
                return 0.0;
            }
        }
        free.iter().map(|(a, c)| c - a).fold(0.0, f64::max)
    }
}

/// Samples per link set before the boundaries are refined.
pub const LINK_SAMPLES: usize = 512;

/// Link set of `source` on `target`: points `y` of the target joined to some
/// point of the source by an open segment inside the table.
///
/// Without blockers its boundary lies at the tangency points of the outer
/// common tangents (`h_source = h_target`); blocking obstacles cut further
/// arcs out, found by bisection on the free angular window.
pub fn link_set(table: &Table, source: LiftedLabel, target: LiftedLabel) -> LinkSet {
    let vis = Visibility::new(table, source, target);
    let sc = table.scatterer(target.scatterer);
    let n = LINK_SAMPLES;
    let theta = |k: usize| TAU * k as f64 / n as f64;
    let vals: Vec<bool> = (0..n).map(|k| vis.slack(theta(k)) > 0.0).collect();
    let edge = |a: f64, b: f64, inside_a: bool| {
        let (mut a, mut b) = (a, b);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if (vis.slack(m) > 0.0) == inside_a {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    if vals.iter().all(|&v| v) {
        return LinkSet { source, target, perimeter: sc.perimeter(), arcs: vec![(0.0, sc.perimeter())] };
    }
    let mut starts = Vec::new();
    let mut ends = Vec::new();
    for k in 0..n {
        let a = vals[k];
        let b = vals[(k + 1) % n];
        let (t0, t1) = (theta(k), theta(k) + TAU / n as f64);
        if !a && b {
            starts.push(edge(t0, t1, false));
        } else if a && !b {
            ends.push(edge(t0, t1, true));
        }
    }
    let l = sc.perimeter();
    let mut arcs: Vec<(f64, f64)> = starts
        .iter()
        .map(|&st| {
            let en = ends
                .iter()
                .copied()
                .min_by(|x, y| (x - st).rem_euclid(TAU).total_cmp(&(y - st).rem_euclid(TAU)))
                .unwrap_or(st);
            let a = sc.angle_to_arclength(st);
            let len = (sc.angle_to_arclength(en) - a).rem_euclid(l);
            (a, a + len)
        })
        .collect();
    arcs.sort_by(|x, y| x.0.total_cmp(&y.0));
    LinkSet { source, target, perimeter: l, arcs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(curves: Vec<SupportCurve>) -> Table {
        Table::new(curves).unwrap()
    }

    #[test]
    fn two_disks_bounded_by_outer_tangents() {
        let r = 0.1;
        let t = table(vec![SupportCurve::circle([0.3, 0.5], r).unwrap(), SupportCurve::circle([0.7, 0.5], r).unwrap()]);
        let ls = link_set(&t, LiftedLabel::new([0, 0], 0), LiftedLabel::new([0, 0], 1));
        assert_eq!(ls.arcs.len(), 1);
        // Equal radii: outer tangents touch at normal angles ±π/2, so the
        // visible half faces the source.
        let (a, b) = ls.arcs[0];
        assert!((a - 0.5 * PI * r).abs() < 1e-10, "{a}");
        assert!((b - 1.5 * PI * r).abs() < 1e-10, "{b}");
        assert!(ls.contains(PI * r, 0.0));
        assert!(!ls.contains(0.0, 0.0));
    }

    #[test]
    fn third_disk_splits_the_link_set() {
        let t = table(vec![
            SupportCurve::circle([0.2, 0.5], 0.12).unwrap(),
            SupportCurve::circle([0.8, 0.5], 0.12).unwrap(),
            SupportCurve::circle([0.5, 0.5], 0.06).unwrap(),
        ]);
        let ls = link_set(&t, LiftedLabel::new([0, 0], 0), LiftedLabel::new([0, 0], 1));
        assert_eq!(ls.arcs.len(), 2, "{:?}", ls.arcs);
        // The point facing the source straight on is hidden behind the
        // small disk.
        let facing = t.scatterer(1).angle_to_arclength(PI);
        assert!(!ls.contains(facing, 0.0));
        assert!(ls.contains(facing + 0.05, 0.0) && ls.contains(facing - 0.05, 0.0));
    }
}
