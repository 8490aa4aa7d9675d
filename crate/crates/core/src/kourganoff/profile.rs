//! Height profile of the surface, chart geometry and metric coefficients.

use crate::error::{Error, Result};
use crate::geometry::{LiftedLabel, SupportCurve, Table};
use std::f64::consts::TAU;

/// Collars are flat beyond this fraction of the clearance.
const FLAT_FRACTION: f64 = 0.35;
/// Chart switching distance as a fraction of the clearance.
const SWITCH_FRACTION: f64 = 0.4;
/// Collar charts are valid up to half the clearance.
const COLLAR_FRACTION: f64 = 0.5;
/// The plane chart is refused closer than this fraction of the clearance
/// to the seam, where its coefficients blow up.
const PLANE_MARGIN_FRACTION: f64 = 0.05;
/// Coarse samples of the signed-distance search.
const FOOT_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sheet {
    Up,
    Down,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Up => 1.0,
            Sheet::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sheet::Up => Sheet::Down,
            Sheet::Down => Sheet::Up,
        }
    }

    /// Sheet of the collar coordinate `u`; the seam counts as up.
    pub fn of(u: f64) -> Self {
        if u < 0.0 {
            Sheet::Down
        } else {
            Sheet::Up
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sheet::Up => "up",
            Sheet::Down => "down",
        }
    }
}

/// A point of the surface in one of its charts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartPoint {
    /// Lifted table point on one sheet.
    Plane { point: [f64; 2], sheet: Sheet },
    /// Normal angle `θ` on a lifted scatterer and the signed sheet
    /// coordinate `u`; the table point is `γ(θ) + u² n(θ)`.
    Collar { label: LiftedLabel, theta: f64, u: f64 },
}

/// First fundamental form `E, F, G` of `g_ε` in a chart, its first
/// derivatives and the Christoffel symbols `Γ[k][i][j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPatch {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub de: [f64; 2],
    pub df: [f64; 2],
    pub dg: [f64; 2],
    pub christoffel: [[[f64; 2]; 2]; 2],
}

impl MetricPatch {
    pub fn det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }

    pub fn is_positive_definite(&self) -> bool {
        self.e > 0.0 && self.det() > 0.0
    }

    /// Squared length of a chart vector.
    pub fn norm2(&self, v: [f64; 2]) -> f64 {
        self.e * v[0] * v[0] + 2.0 * self.f * v[0] * v[1] + self.g * v[1] * v[1]
    }
}

/// Christoffel symbols `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel(e: f64, f: f64, g: f64, de: [f64; 2], df: [f64; 2], dg: [f64; 2]) -> [[[f64; 2]; 2]; 2] {
    let metric_d = |i: usize, j: usize, l: usize| match (i, j) {
        (0, 0) => de[l],
        (1, 1) => dg[l],
        _ => df[l],
    };
    let det = e * g - f * f;
    let inv = [[g / det, -f / det], [-f / det, e / det]];
    let mut out = [[[0.0; 2]; 2]; 2];
    for (k, row) in out.iter_mut().enumerate() {
        for (i, col) in row.iter_mut().enumerate() {
            for (j, c) in col.iter_mut().enumerate() {
                *c = (0..2)
                    .map(|l| 0.5 * inv[k][l] * (metric_d(j, l, i) + metric_d(i, l, j) - metric_d(i, j, l)))
                    .sum();
            }
        }
    }
    out
}

/// Signed distance from a table point to its nearest lifted scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot {
    pub label: LiftedLabel,
    /// Normal angle of the nearest boundary point.
    pub theta: f64,
    /// Negative inside the obstacle.
    pub distance: f64,
}

/// Numerical checks of the seam conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamConditions {
    /// Largest height found on seam samples (zero by construction).
    pub max_seam_height: f64,
    /// Smallest height found on interior samples.
    pub min_interior_height: f64,
    /// Smallest curvature of the normal slice through a seam sample.
    pub min_slice_curvature: f64,
    /// Smallest vertical component of the unit normal at interior samples.
    pub min_vertical_normal: f64,
}

/// Height profile `h = √φ` with `φ = ψ(d)` a function of the distance to
/// the nearest obstacle: `ψ(d) = d` at the seam and constant beyond `δ₀`.
#[derive(Debug, Clone)]
pub struct HeightProfile {
    table: Table,
    flat: f64,
    switch: f64,
    collar: f64,
    plane_margin: f64,
    offsets: Vec<SupportCurve>,
}

/// `S(x) = 35x⁴ − 84x⁵ + 70x⁶ − 20x⁷` and its derivative.
fn smoothstep(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let s = x3 * x * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)));
    let one = 1.0 - x;
    (s, 140.0 * x3 * one * one * one)
}

impl HeightProfile {
    pub fn new(table: &Table) -> Result<Self> {
        let clearance = table.tau_min();
        if !(clearance > 0.0 && clearance.is_finite()) {
            return Err(Error::InvalidTable("scatterers must be disjoint to build the surface".into()));
        }
        let switch = SWITCH_FRACTION * clearance;
        let offsets = table
            .scatterers()
            .iter()
            .map(|sc| {
                let mut c = sc.curve().coeffs().to_vec();
                c[0] += switch;
                SupportCurve::new(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            table: table.clone(),
            flat: FLAT_FRACTION * clearance,
            switch,
            collar: COLLAR_FRACTION * clearance,
            plane_margin: PLANE_MARGIN_FRACTION * clearance,
            offsets,
        })
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    /// Distance `δ₀` beyond which the surface is flat.
    pub fn flat_distance(&self) -> f64 {
        self.flat
    }

    /// Distance at which geodesics change between collar and flat charts.
    pub fn switch_distance(&self) -> f64 {
        self.switch
    }

    /// Collar charts cover distances below this value.
    pub fn collar_distance(&self) -> f64 {
        self.collar
    }

    /// `ψ(d)` and `ψ'(d)`.
    pub fn defining_function(&self, d: f64) -> (f64, f64) {
        if d <= 0.0 {
            return (d, 1.0);
        }
        let x = d / self.flat;
        if x >= 1.0 {
            return (0.5 * self.flat, 0.0);
        }
        (d * self.ratio(x).0, 1.0 - smoothstep(x).0)
    }

    /// `g = ψ(d)/d` and `dg/dd` at `x = d/δ₀ < 1`.
    fn ratio(&self, x: f64) -> (f64, f64) {
        let x3 = x * x * x;
        let g = 1.0 - x3 * x * (7.0 + x * (-14.0 + x * (10.0 - 2.5 * x)));
        let dg = -x3 * (28.0 + x * (-70.0 + x * (60.0 - 17.5 * x))) / self.flat;
        (g, dg)
    }

    /// Height `√ψ(d)` of the unflattened surface over a point at distance
    /// `d`, with its first two derivatives in `d`.
    pub fn height_of_distance(&self, d: f64) -> [f64; 3] {
        if d <= 0.0 {
            return [0.0, f64::INFINITY, f64::NEG_INFINITY];
        }
        let x = d / self.flat;
        if x >= 1.0 {
            return [(0.5 * self.flat).sqrt(), 0.0, 0.0];
        }
        let (psi, beta) = self.defining_function(d);
        let dbeta = -smoothstep(x).1 / self.flat;
        let z = psi.sqrt();
        [z, beta / (2.0 * z), dbeta / (2.0 * z) - beta * beta / (4.0 * psi * z)]
    }

    /// Signed sheet height `Z(u)` with `Z'` and `Z''`.
    pub fn sheet_height(&self, u: f64) -> [f64; 3] {
        let d = u * u;
        let x = d / self.flat;
        if x >= 1.0 {
            return [u.signum() * (0.5 * self.flat).sqrt(), 0.0, 0.0];
        }
        let (g, dg) = self.ratio(x);
        let beta = 1.0 - smoothstep(x).0;
        let dbeta = -smoothstep(x).1 / self.flat;
        let rg = g.sqrt();
        [u * rg, beta / rg, 2.0 * u * (dbeta / rg - 0.5 * beta * dg / (g * rg))]
    }

    /// Signed distance to the lifted scatterer `label`: the maximum over
    /// `θ` of `⟨X, n(θ)⟩ − h(θ)`, attained at the foot angle.
    pub fn foot_on(&self, label: LiftedLabel, p: [f64; 2]) -> Foot {
        let curve = self.table.scatterer(label.scatterer).curve();
        let off = label.offset();
        let x = [p[0] - off[0], p[1] - off[1]];
        let f = |th: f64| {
            let (s, c) = th.sin_cos();
            x[0] * c + x[1] * s - curve.h(th)
        };
        let mut theta = 0.0;
        let mut best = f64::NEG_INFINITY;
        for j in 0..FOOT_SAMPLES {
            let th = TAU * j as f64 / FOOT_SAMPLES as f64;
            let v = f(th);
            if v > best {
                best = v;
                theta = th;
            }
        }
        let step = TAU / FOOT_SAMPLES as f64;
        let (lo, hi) = (theta - step, theta + step);
        for _ in 0..60 {
            let d = curve.derivs(theta);
            let (s, c) = theta.sin_cos();
            let g = -x[0] * s + x[1] * c - d[1];
            let dg = -(x[0] * c + x[1] * s) - d[2];
            let next = if dg < 0.0 { theta - g / dg } else { f64::NAN };
            let next = if next > lo && next < hi { next } else { 0.5 * (theta + if g > 0.0 { hi } else { lo }) };
            let done = (next - theta).abs() < 1e-15;
            theta = next;
            if done {
                break;
            }
        }
        Foot { label, theta: theta.rem_euclid(TAU), distance: f(theta) }
    }

    /// Nearest lifted scatterer of a table point.
    pub fn foot(&self, p: [f64; 2]) -> Foot {
        let base = [p[0].floor() as i64, p[1].floor() as i64];
        let mut best: Option<Foot> = None;
        for i in base[0] - 2..=base[0] + 2 {
            for j in base[1] - 2..=base[1] + 2 {
                for (l, sc) in self.table.scatterers().iter().enumerate() {
                    let c = sc.center();
                    let r = [c[0] + i as f64 - p[0], c[1] + j as f64 - p[1]];
                    let lower = (r[0] * r[0] + r[1] * r[1]).sqrt() - sc.radius_bound();
                    if best.as_ref().is_some_and(|b| lower > b.distance) {
                        continue;
                    }
                    let ft = self.foot_on(LiftedLabel::new([i, j], l), p);
                    if best.as_ref().map_or(true, |b| ft.distance < b.distance) {
                        best = Some(ft);
                    }
                }
            }
        }
        best.expect("table has scatterers")
    }

    /// Height of the unflattened surface over a table point.
    pub fn height(&self, p: [f64; 2]) -> Result<f64> {
        let ft = self.foot(p);
        if ft.distance < 0.0 {
            return Err(Error::Domain(format!("point {p:?} lies inside scatterer {}", ft.label.scatterer)));
        }
        Ok(self.height_of_distance(ft.distance)[0])
    }

    /// Table point of collar coordinates.
    pub fn collar_point(&self, label: LiftedLabel, theta: f64, u: f64) -> [f64; 2] {
        let f = self.table.scatterer(label.scatterer).frame_at_angle(theta);
        let off = label.offset();
        let d = u * u;
        [f.point[0] + d * f.normal[0] + off[0], f.point[1] + d * f.normal[1] + off[1]]
    }

    /// First entry of the ray `p + t v`, `0 < t ≤ t_max`, into the switching
    /// neighbourhood of a lifted scatterer other than `exclude`:
    /// `(t, label, θ)` with `θ` the normal angle of the entry point.
    pub fn next_collar(&self, p: [f64; 2], v: [f64; 2], exclude: Option<LiftedLabel>, t_max: f64) -> Option<(f64, LiftedLabel, f64)> {
        let base = [p[0].floor() as i64, p[1].floor() as i64];
        let radius = (t_max.min(self.table.tau_max() + 1.0).ceil() as i64 + 1).min(self.table.search_radius() + 1);
        let nd = [-v[1], v[0]];
        let mut best: Option<(f64, LiftedLabel, f64)> = None;
        for i in base[0] - radius..=base[0] + radius {
            for j in base[1] - radius..=base[1] + radius {
                for (l, curve) in self.offsets.iter().enumerate() {
                    let label = LiftedLabel::new([i, j], l);
                    if Some(label) == exclude {
                        continue;
                    }
                    let c = curve.center();
                    let rel = [c[0] + i as f64 - p[0], c[1] + j as f64 - p[1]];
                    let r = curve.radius_bound();
                    let along = rel[0] * v[0] + rel[1] * v[1];
                    let across = rel[0] * nd[0] + rel[1] * nd[1];
                    if across.abs() > r || along < -r || along - r > t_max {
                        continue;
                    }
                    if best.as_ref().is_some_and(|b| along - r > b.0) {
                        continue;
                    }
                    let local = [p[0] - i as f64, p[1] - j as f64];
                    if let Some((t, theta, _)) = crate::geometry::ray_entry(curve, local, v) {
                        if t > 0.0 && t <= t_max && best.as_ref().map_or(true, |b| t < b.0) {
                            best = Some((t, label, theta));
                        }
                    }
                }
            }
        }
        best
    }

    /// Checks `h = 0` on the seam, `h > 0` inside, a nonvanishing normal
    /// slice curvature at the seam and a non-vertical tangent plane inside.
    pub fn check_conditions(&self, samples: usize) -> SeamConditions {
        let mut out = SeamConditions {
            max_seam_height: 0.0,
            min_interior_height: f64::INFINITY,
            min_slice_curvature: f64::INFINITY,
            min_vertical_normal: f64::INFINITY,
        };
        for sc in self.table.scatterers() {
            for j in 0..samples {
                let theta = TAU * (j as f64 + 0.5) / samples as f64;
                let f = sc.frame_at_angle(theta);
                let d = self.foot(f.point).distance;
                out.max_seam_height = out.max_seam_height.max(self.height_of_distance(d.max(0.0))[0]);
                // Normal slice `u ↦ (u², Z(u))` through the seam point.
                let z = self.sheet_height(0.0);
                let k = 2.0 * z[1].abs() / z[1].abs().powi(3);
                out.min_slice_curvature = out.min_slice_curvature.min(k);
                for frac in [0.1, 0.5, 0.9, 1.2] {
                    let d = frac * self.switch;
                    let h = self.height_of_distance(d);
                    out.min_interior_height = out.min_interior_height.min(h[0]);
                    // The unit normal of a graph is `(−∇h, 1)/√(1 + |∇h|²)`.
                    let vertical = 1.0 / (1.0 + h[1] * h[1]).sqrt();
                    out.min_vertical_normal = out.min_vertical_normal.min(vertical);
                }
            }
        }
        out
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("flattening parameter {eps} outside (0, 1]")))
    }
}

pub(super) fn require_eps(eps: f64) -> Result<()> {
    check_eps(eps)
}

/// Coefficients of `g_ε = dx² + dy² + ε² dz²` restricted to the surface,
/// so `E_ε = E + (ε² − 1) z_x²` and likewise for `F` and `G`.
pub fn metric_coeffs(profile: &HeightProfile, eps: f64, point: &ChartPoint) -> Result<MetricPatch> {
    check_eps(eps)?;
    let e2 = eps * eps;
    match *point {
        ChartPoint::Plane { point, sheet } => {
            let ft = profile.foot(point);
            if ft.distance <= 0.0 {
                return Err(Error::Domain(format!("point {point:?} is outside the table")));
            }
            if ft.distance < profile.plane_margin {
                return Err(Error::Domain(format!("point {point:?} is within the seam margin; use a collar chart")));
            }
            let sc = profile.table.scatterer(ft.label.scatterer);
            let fr = sc.frame_at_angle(ft.theta);
            let [_, zd, zdd] = profile.height_of_distance(ft.distance);
            let sg = sheet.sign();
            let (n, t) = (fr.normal, fr.tangent);
            let bend = zd / (1.0 / fr.curvature + ft.distance);
            let grad = [sg * zd * n[0], sg * zd * n[1]];
            let hess = |i: usize, j: usize| sg * (zdd * n[i] * n[j] + bend * t[i] * t[j]);
            let e = 1.0 + e2 * grad[0] * grad[0];
            let f = e2 * grad[0] * grad[1];
            let g = 1.0 + e2 * grad[1] * grad[1];
            let de = [2.0 * e2 * grad[0] * hess(0, 0), 2.0 * e2 * grad[0] * hess(0, 1)];
            let df = [
                e2 * (hess(0, 0) * grad[1] + grad[0] * hess(0, 1)),
                e2 * (hess(0, 1) * grad[1] + grad[0] * hess(1, 1)),
            ];
            let dg = [2.0 * e2 * grad[1] * hess(0, 1), 2.0 * e2 * grad[1] * hess(1, 1)];
            Ok(MetricPatch { e, f, g, de, df, dg, christoffel: christoffel(e, f, g, de, df, dg) })
        }
        ChartPoint::Collar { label, theta, u } => {
            if label.scatterer >= profile.table.len() {
                return Err(Error::Domain(format!("scatterer {} out of range", label.scatterer)));
            }
            if u * u >= profile.collar {
                return Err(Error::Domain(format!("collar coordinate {u} beyond the chart")));
            }
            let d = profile.table.scatterer(label.scatterer).curve().derivs(theta);
            let (rho, drho) = (d[0] + d[2], d[1] + d[3]);
            let z = profile.sheet_height(u);
            let w = rho + u * u;
            let e = w * w;
            let g = 4.0 * u * u + e2 * z[1] * z[1];
            let de = [2.0 * w * drho, 4.0 * u * w];
            let dg = [0.0, 8.0 * u + 2.0 * e2 * z[1] * z[2]];
            Ok(MetricPatch { e, f: 0.0, g, de, df: [0.0; 2], dg, christoffel: christoffel(e, 0.0, g, de, [0.0; 2], dg) })
        }
    }
}
