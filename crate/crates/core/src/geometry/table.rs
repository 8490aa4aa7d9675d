//! Tables on the unit torus, their ℤ²-periodic lift, obstacle clearance,
//! ray casting and the finite-horizon certificate.

use super::scatterer::Scatterer;
use super::support::SupportCurve;
use crate::error::{Error, Result};
use std::f64::consts::{PI, TAU};

/// Minimum distance allowed between two distinct lifted scatterers.
pub const CLEARANCE_MIN: f64 = 1e-6;
/// Shadow overlaps thinner than this count as corridors.
pub const CORRIDOR_GAP: f64 = 1e-9;
/// Default bound on the primitive lattice directions examined.
pub const DEFAULT_LATTICE_BOUND: i64 = 6;

/// Scatterer `l` translated by the lattice vector `cell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LiftedLabel {
    pub cell: [i64; 2],
    pub scatterer: usize,
}

impl LiftedLabel {
    pub fn new(cell: [i64; 2], scatterer: usize) -> Self {
        Self { cell, scatterer }
    }

    pub fn translated(self, v: [i64; 2]) -> Self {
        Self { cell: [self.cell[0] + v[0], self.cell[1] + v[1]], scatterer: self.scatterer }
    }

    pub fn offset(&self) -> [f64; 2] {
        [self.cell[0] as f64, self.cell[1] as f64]
    }
}

/// Outcome of the finite-horizon check.
#[derive(Debug, Clone, PartialEq)]
pub enum HorizonStatus {
    Finite,
    CorridorFound,
}

/// Open corridor: lines with direction `(p, q)` whose offset along the unit
/// normal `(−q, p)/|(p, q)|` lies in `gap` avoid every lifted scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorWitness {
    pub direction: [i64; 2],
    pub gap: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonCertificate {
    pub status: HorizonStatus,
    /// Upper bound on free-flight times; infinite when a corridor exists.
    pub tau_max_bound: f64,
    pub witness: Option<CorridorWitness>,
    pub lattice_bound: i64,
}

impl HorizonCertificate {
    pub fn is_finite(&self) -> bool {
        self.status == HorizonStatus::Finite
    }
}

/// Construction options for [`Table`].
#[derive(Debug, Clone, Copy)]
pub struct TableOptions {
    pub lattice_bound: i64,
    /// Boundary samples per scatterer used to bound the free-flight time.
    pub flight_samples_s: usize,
    /// Angle samples per boundary point used to bound the free-flight time.
    pub flight_samples_phi: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { lattice_bound: DEFAULT_LATTICE_BOUND, flight_samples_s: 256, flight_samples_phi: 256 }
    }
}

/// First intersection of a ray with the lifted table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub label: LiftedLabel,
    pub theta: f64,
    pub t: f64,
    /// `|cos|` of the angle between the ray and the normal at the hit.
    pub cos_incidence: f64,
}

/// A Sinai table: `k` disjoint strictly convex scatterers on the unit torus.
#[derive(Debug, Clone)]
pub struct Table {
    scatterers: Vec<Scatterer>,
    tau_min: f64,
    tau_max: f64,
    k_min: f64,
    k_max: f64,
    diameter: f64,
    horizon: HorizonCertificate,
    options: TableOptions,
}

impl Table {
    pub fn new(curves: Vec<SupportCurve>) -> Result<Self> {
        Self::with_options(curves, TableOptions::default())
    }

    /// Validates clearance, certifies the horizon and bounds flight times.
    pub fn with_options(curves: Vec<SupportCurve>, options: TableOptions) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidTable("table has no scatterers".into()));
        }
        if options.lattice_bound < 1 {
            return Err(Error::InvalidTable("lattice bound must be at least 1".into()));
        }
        let scatterers = curves.into_iter().map(Scatterer::new).collect::<Result<Vec<_>>>()?;
        let mut table = Self {
            scatterers,
            tau_min: 0.0,
            tau_max: f64::INFINITY,
            k_min: 0.0,
            k_max: 0.0,
            diameter: 0.0,
            horizon: HorizonCertificate {
                status: HorizonStatus::CorridorFound,
                tau_max_bound: f64::INFINITY,
                witness: None,
                lattice_bound: options.lattice_bound,
            },
            options,
        };
        let (clearance, pair) = table.min_clearance();
        if clearance < CLEARANCE_MIN {
            let (a, b) = pair;
            return Err(Error::InvalidTable(format!(
                "scatterers {} and {} (cell {:?}) are closer than {CLEARANCE_MIN:e}: distance {clearance:e}",
                a.scatterer, b.scatterer, b.cell
            )));
        }
        table.tau_min = clearance;
        table.k_min = table.scatterers.iter().map(|s| s.curvature_bounds().0).fold(f64::INFINITY, f64::min);
        table.k_max = table.scatterers.iter().map(|s| s.curvature_bounds().1).fold(0.0, f64::max);
        table.diameter = table.scatterers.iter().map(|s| 2.0 * s.radius_bound()).fold(0.0, f64::max);
        table.horizon = check_finite_horizon(&table, options.lattice_bound)?;
        if table.horizon.is_finite() {
            let tau = table.estimate_tau_max();
            table.tau_max = tau;
            table.horizon.tau_max_bound = tau;
        }
        Ok(table)
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn scatterer(&self, l: usize) -> &Scatterer {
        &self.scatterers[l]
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn options(&self) -> TableOptions {
        self.options
    }

    pub fn curves(&self) -> Vec<SupportCurve> {
        self.scatterers.iter().map(|s| s.curve().clone()).collect()
    }

    /// Lower bound on free-flight times: the minimum lifted clearance.
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    /// Upper bound on free-flight times (infinite with a corridor).
    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    /// Largest scatterer diameter bound.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn horizon(&self) -> &HorizonCertificate {
        &self.horizon
    }

    /// Errors unless the finite-horizon certificate holds.
    pub fn require_finite_horizon(&self) -> Result<()> {
        if self.horizon.is_finite() {
            Ok(())
        } else {
            Err(Error::HorizonViolation("table has an open corridor".into()))
        }
    }

    /// Maximum cell displacement per bounce, `⌈τ_max⌉ + 1` per axis.
    pub fn k_cell(&self) -> i64 {
        if self.tau_max.is_finite() {
            self.tau_max.ceil() as i64 + 1
        } else {
            self.options.lattice_bound + 1
        }
    }

    /// Largest centre-to-boundary bound over the scatterers.
    pub fn max_radius_bound(&self) -> f64 {
        self.scatterers.iter().map(|s| s.radius_bound()).fold(0.0, f64::max)
    }

    /// Lattice box radius used when searching for the next obstacle.
    pub fn search_radius(&self) -> i64 {
        self.k_cell()
    }

    /// Geometry of a lifted scatterer.
    pub fn lift_scatterer(&self, label: LiftedLabel) -> SupportCurve {
        self.scatterers[label.scatterer].curve().translated(label.offset())
    }

    /// Boundary point of a lifted scatterer at arc length `s`.
    pub fn lifted_point(&self, label: LiftedLabel, s: f64) -> [f64; 2] {
        let p = self.scatterers[label.scatterer].frame(s).point;
        [p[0] + label.cell[0] as f64, p[1] + label.cell[1] as f64]
    }

    /// Minimum distance between distinct lifted scatterers and the pair
    /// attaining it.
    pub fn min_clearance(&self) -> (f64, (LiftedLabel, LiftedLabel)) {
        let mut best = (f64::INFINITY, (LiftedLabel::new([0, 0], 0), LiftedLabel::new([0, 0], 0)));
        let k = self.scatterers.len();
        for a in 0..k {
            for b in 0..k {
                let ra = self.scatterers[a].radius_bound();
                let rb = self.scatterers[b].radius_bound();
                let reach = ((ra + rb).ceil() as i64) + 1;
                for i in -reach..=reach {
                    for j in -reach..=reach {
                        if a == b && i == 0 && j == 0 {
                            continue;
                        }
                        if b < a && i == 0 && j == 0 {
                            continue;
                        }
                        let ca = self.scatterers[a].center();
                        let cb = self.scatterers[b].center();
                        let dc = ((cb[0] + i as f64 - ca[0]).powi(2) + (cb[1] + j as f64 - ca[1]).powi(2)).sqrt();
                        if dc - ra - rb > best.0 {
                            continue;
                        }
                        let d = convex_distance(
                            self.scatterers[a].curve(),
                            self.scatterers[b].curve(),
                            [i as f64, j as f64],
                        );
                        if d < best.0 {
                            best = (d, (LiftedLabel::new([0, 0], a), LiftedLabel::new([i, j], b)));
                        }
                    }
                }
            }
        }
        best
    }

    /// First lifted scatterer hit by the ray `origin + t·dir`, `t > 0`.
    ///
    /// `exclude` removes one lifted obstacle (the departure scatterer); by
    /// convexity a ray leaving a scatterer never re-enters it.
    pub fn first_hit(
        &self,
        origin: [f64; 2],
        dir: [f64; 2],
        exclude: Option<LiftedLabel>,
        radius: i64,
    ) -> Option<RayHit> {
        let base = [origin[0].floor() as i64, origin[1].floor() as i64];
        let nd = [-dir[1], dir[0]];
        let mut best: Option<RayHit> = None;
        for i in base[0] - radius..=base[0] + radius {
            for j in base[1] - radius..=base[1] + radius {
                for (l, sc) in self.scatterers.iter().enumerate() {
                    let label = LiftedLabel::new([i, j], l);
                    if Some(label) == exclude {
                        continue;
                    }
                    let c = sc.center();
                    let rel = [c[0] + i as f64 - origin[0], c[1] + j as f64 - origin[1]];
                    let r = sc.radius_bound();
                    let along = rel[0] * dir[0] + rel[1] * dir[1];
                    let across = rel[0] * nd[0] + rel[1] * nd[1];
                    if across.abs() > r || along < -r {
                        continue;
                    }
                    if let Some(b) = &best {
                        if along - r > b.t {
                            continue;
                        }
                    }
                    let local = [origin[0] - i as f64, origin[1] - j as f64];
                    if let Some((t, theta, cos_inc)) = ray_entry(sc.curve(), local, dir) {
                        if t > 0.0 && best.as_ref().map_or(true, |b| t < b.t) {
                            best = Some(RayHit { label, theta, t, cos_incidence: cos_inc });
                        }
                    }
                }
            }
        }
        best
    }

    /// Bounds the longest free flight by sampling phase space on a grid and
    /// refining the largest samples locally; a 2% margin is added.
    fn estimate_tau_max(&self) -> f64 {
        let radius = self.options.lattice_bound + 1;
        let ns = self.options.flight_samples_s.max(8);
        let nphi = self.options.flight_samples_phi.max(8);
        let mut samples: Vec<(f64, usize, f64, f64)> = Vec::new();
        for (l, sc) in self.scatterers.iter().enumerate() {
            for a in 0..ns {
                let s = sc.perimeter() * (a as f64 + 0.5) / ns as f64;
                for b in 0..nphi {
                    let phi = -0.5 * PI + PI * (b as f64 + 0.5) / nphi as f64;
                    let t = self.flight_time(l, s, phi, radius);
                    samples.push((t, l, s, phi));
                }
            }
        }
        samples.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best = samples.first().map_or(0.0, |x| x.0);
        for &(t0, l, s0, phi0) in samples.iter().take(24) {
            let sc = &self.scatterers[l];
            let (mut s, mut phi, mut t) = (s0, phi0, t0);
            let mut hs = sc.perimeter() / ns as f64;
            let mut hp = PI / nphi as f64;
            for _ in 0..40 {
                let mut improved = false;
                for (ds, dp) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                    let cand_phi = (phi + dp * hp).clamp(-0.5 * PI + 1e-9, 0.5 * PI - 1e-9);
                    let cand_s = s + ds * hs;
                    let ct = self.flight_time(l, cand_s, cand_phi, radius);
                    if ct > t {
                        t = ct;
                        s = cand_s;
                        phi = cand_phi;
                        improved = true;
                    }
                }
                if !improved {
                    hs *= 0.5;
                    hp *= 0.5;
                }
            }
            best = best.max(t);
        }
        best * 1.02
    }

    /// Free-flight time from `(s, φ)` on scatterer `l` in cell `(0, 0)`,
    /// searching a small lattice box first and widening it to `radius`.
    pub fn flight_time(&self, l: usize, s: f64, phi: f64, radius: i64) -> f64 {
        let f = self.scatterers[l].frame(s);
        let dir = outgoing_direction(f.normal, phi);
        let exclude = Some(LiftedLabel::new([0, 0], l));
        let near = radius.min(2);
        if let Some(h) = self.first_hit(f.point, dir, exclude, near) {
            if h.t <= near as f64 - self.max_radius_bound() {
                return h.t;
            }
        }
        match self.first_hit(f.point, dir, exclude, radius) {
            Some(h) => h.t,
            None => f64::INFINITY,
        }
    }
}

/// Unit velocity at oriented angle `φ` from the outward normal `n`.
pub fn outgoing_direction(n: [f64; 2], phi: f64) -> [f64; 2] {
    let (s, c) = phi.sin_cos();
    [c * n[0] - s * n[1], s * n[0] + c * n[1]]
}

/// Entry point of the ray `p + t·d` into the convex set bounded by `curve`.
///
/// On the front half of the curve (normals opposing `d`) the signed offset
/// of `γ(θ)` from the ray line is strictly monotone, so the root is
/// bracketed and polished by safeguarded Newton. Returns `(t, θ, |cos|)`.
pub fn ray_entry(curve: &SupportCurve, p: [f64; 2], d: [f64; 2]) -> Option<(f64, f64, f64)> {
    let nd = [-d[1], d[0]];
    let offset = p[0] * nd[0] + p[1] * nd[1];
    let theta_d = d[1].atan2(d[0]);
    let mut lo = theta_d + 0.5 * PI;
    let mut hi = theta_d + 1.5 * PI;
    let glo = curve.h(lo) - offset;
    let ghi = -curve.h(hi) - offset;
    if glo < 0.0 || ghi > 0.0 {
        return None;
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let dv = curve.derivs(theta);
        let (s, c) = theta.sin_cos();
        let q = [dv[0] * c - dv[1] * s, dv[0] * s + dv[1] * c];
        let val = q[0] * nd[0] + q[1] * nd[1] - offset;
        if val == 0.0 {
            break;
        }
        if val > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let slope = (dv[0] + dv[2]) * (c * d[0] + s * d[1]);
        let mut next = if slope != 0.0 { theta - val / slope } else { f64::NAN };
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - theta).abs();
        theta = next;
        if step < 1e-15 || hi - lo < 1e-15 {
            break;
        }
    }
    let q = curve.point(theta);
    let t = (q[0] - p[0]) * d[0] + (q[1] - p[1]) * d[1];
    let (s, c) = theta.sin_cos();
    let cos_inc = -(c * d[0] + s * d[1]);
    Some((t, theta.rem_euclid(TAU), cos_inc.max(0.0)))
}

/// Euclidean distance between `a` and `b + v` (negative when they overlap),
/// from the separating-direction formula `max_u −h_a(u) − h_{b+v}(−u)`.
pub fn convex_distance(a: &SupportCurve, b: &SupportCurve, v: [f64; 2]) -> f64 {
    let gap = |th: f64| {
        let (s, c) = th.sin_cos();
        -a.h(th) - (b.h(th + PI) - (v[0] * c + v[1] * s))
    };
    let n = 720;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for j in 0..n {
        let th = TAU * j as f64 / n as f64;
        let g = gap(th);
        if g > best.0 {
            best = (g, th);
        }
    }
    // Golden-section refinement around the best grid angle.
    let h = TAU / n as f64;
    let (mut lo, mut hi) = (best.1 - h, best.1 + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = gap(x1);
    let mut f2 = gap(x2);
    for _ in 0..80 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = gap(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = gap(x2);
        }
    }
    best.0.max(f1).max(f2)
}

/// Checks that every primitive lattice direction `(p, q)` with
/// `|p|, |q| ≤ N` is blocked: the shadows of all scatterers on the normal
/// line, taken modulo the line period, must overlap by more than
/// [`CORRIDOR_GAP`].
pub fn check_finite_horizon(table: &Table, lattice_bound: i64) -> Result<HorizonCertificate> {
    if table.is_empty() {
        return Err(Error::InvalidTable("table has no scatterers".into()));
    }
    if lattice_bound < 1 {
        return Err(Error::InvalidTable("lattice bound must be at least 1 (no directions examined)".into()));
    }
    for (p, q) in primitive_directions(lattice_bound) {
        let norm = ((p * p + q * q) as f64).sqrt();
        let n = [-(q as f64) / norm, p as f64 / norm];
        let period = 1.0 / norm;
        let theta_n = n[1].atan2(n[0]);
        let mut intervals = Vec::new();
        for sc in table.scatterers() {
            let hi = sc.curve().h(theta_n);
            let lo = -sc.curve().h(theta_n + PI);
            let a = lo + 0.5 * CORRIDOR_GAP;
            let b = hi - 0.5 * CORRIDOR_GAP;
            if b - a >= period {
                intervals.clear();
                intervals.push((0.0, period));
                break;
            }
            let a0 = a.rem_euclid(period);
            let b0 = a0 + (b - a);
            if b0 <= period {
                intervals.push((a0, b0));
            } else {
                intervals.push((a0, period));
                intervals.push((0.0, b0 - period));
            }
        }
        if let Some(gap) = first_gap(&mut intervals, period) {
            return Ok(HorizonCertificate {
                status: HorizonStatus::CorridorFound,
                tau_max_bound: f64::INFINITY,
                witness: Some(CorridorWitness { direction: [p, q], gap }),
                lattice_bound,
            });
        }
    }
    Ok(HorizonCertificate {
        status: HorizonStatus::Finite,
        tau_max_bound: table.tau_max(),
        witness: None,
        lattice_bound,
    })
}

/// Primitive directions up to sign with `|p|, |q| ≤ n`.
pub fn primitive_directions(n: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for p in 1..=n {
        for q in -n..=n {
            if gcd(p, q.abs()) == 1 {
                out.push((p, q));
            }
        }
    }
    out.push((0, 1));
    out.sort_by_key(|&(p, q)| p * p + q * q);
    out
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// First uncovered open interval of `[0, period)` (cyclically), if any.
fn first_gap(intervals: &mut [(f64, f64)], period: f64) -> Option<(f64, f64)> {
    if intervals.is_empty() {
        return Some((0.0, period));
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = intervals[0].1;
    for iv in intervals.iter().skip(1) {
        if iv.0 > reach {
            return Some((reach, iv.0));
        }
        reach = reach.max(iv.1);
    }
    let wrap = intervals[0].0 + period;
    if reach < wrap {
        return Some((reach, wrap));
    }
    None
}
