//! Closed geodesics of `g_ε` in the free homotopy class of a billiard cycle.
//!
//! The geodesic is found by shooting: a start on a transversal to one chord
//! of the cycle, on the upper sheet, is corrected by Newton's method until
//! the geodesic returns to the translated transversal with the same offset
//! and direction. The seams it crosses on the way must be those named by
//! the word, which pins down the class.

use super::geodesic::{integrate_geodesic, lift, GeodesicPath, PathSample, SurfaceState};
use super::profile::{require_eps, HeightProfile, Sheet};
use crate::enriched::{minimize_EL, CycleKind};
use crate::error::{Error, Result};
use crate::geometry::LiftedLabel;
use crate::linalg::norm;
use crate::spectrum::OrbitWord;
use std::f64::consts::{PI, TAU};

/// Closure residual accepted as converged.
const CLOSURE_TOL: f64 = 1e-9;
/// Residual still accepted when Newton stalls at the integration noise.
const CLOSURE_FLOOR: f64 = 1e-7;
const MAX_NEWTON: usize = 25;
const FD_STEP: f64 = 1e-7;
const BOUNDARY_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedGeodesic {
    pub word: OrbitWord,
    pub eps: f64,
    /// `g_ε`-length of the closed geodesic.
    pub length: f64,
    /// Enriched length of the class (twice the cycle value for odd words,
    /// which close up only after two turns).
    pub el: f64,
    pub turns: usize,
    /// Mismatch of offset and direction after one return.
    pub closure: f64,
    pub iterations: usize,
    pub path: GeodesicPath,
}

struct Section {
    origin: [f64; 2],
    along: [f64; 2],
    across: [f64; 2],
    shift: [f64; 2],
}

struct Return {
    offset: f64,
    angle: f64,
    length: f64,
    path: GeodesicPath,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

/// Closed geodesic of `g_ε` in the class of `word`. Boundary words give the
/// seam itself; other words must have a billiard cycle without boundary arcs.
pub fn closed_geodesic_in_class(profile: &HeightProfile, eps: f64, word: &OrbitWord) -> Result<ClosedGeodesic> {
    require_eps(eps)?;
    let table = profile.table();
    if word.is_boundary() {
        return boundary_geodesic(profile, eps, word);
    }
    word.validate(table)?;
    let cycle = minimize_EL(table, word)?;
    if cycle.kind != CycleKind::Orbit {
        return Err(Error::Domain(format!("class of {word} contains boundary arcs; only orbit and boundary classes are supported")));
    }
    let turns = if cycle.doubled { 2 } else { 1 };
    let el = cycle.el * turns as f64;
    let (from, to) = word.segment_labels(1);
    let p0 = table.lifted_point(from, cycle.s[0]);
    let p1 = table.lifted_point(to, cycle.e[1]);
    let tau = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
    let along = [(p1[0] - p0[0]) / tau, (p1[1] - p0[1]) / tau];
    let origin = [0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8]
        .iter()
        .map(|f| [p0[0] + f * tau * along[0], p0[1] + f * tau * along[1]])
        .find(|m| profile.foot(*m).distance > 1.05 * profile.switch_distance())
        .ok_or_else(|| Error::Domain(format!("no chord of {word} leaves the collars")))?;
    let tr = word.translation();
    let section = Section {
        origin,
        along,
        across: [-along[1], along[0]],
        shift: [(turns as i64 * tr[0]) as f64, (turns as i64 * tr[1]) as f64],
    };
    let expected = expected_crossings(word, turns);
    let horizon = 1.5 * el + tau;
    let run = |x: [f64; 2]| shoot(profile, eps, &section, &expected, horizon, x);
    let mut x = [0.0, 0.0];
    let mut best: Option<(f64, [f64; 2], Return)> = None;
    let mut iterations = 0;
    for it in 0..MAX_NEWTON {
        iterations = it + 1;
        let r = run(x)?;
        let f = [r.offset - x[0], wrap_angle(r.angle - x[1])];
        let res = norm(&f);
        if best.as_ref().map_or(true, |b| res < b.0) {
            best = Some((res, x, r));
        }
        if res <= CLOSURE_TOL {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for i in 0..2 {
            let mut xp = x;
            xp[i] += FD_STEP;
            let rp = run(xp)?;
            let fp = [rp.offset - xp[0], wrap_angle(rp.angle - xp[1])];
            jac[0][i] = (fp[0] - f[0]) / FD_STEP;
            jac[1][i] = (fp[1] - f[1]) / FD_STEP;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut dx = [(jac[1][1] * f[0] - jac[0][1] * f[1]) / det, (jac[0][0] * f[1] - jac[1][0] * f[0]) / det];
        let size = norm(&dx);
        let cap = 0.1 * tau;
        if size > cap {
            dx = [dx[0] * cap / size, dx[1] * cap / size];
        }
        x = [x[0] - dx[0], x[1] - dx[1]];
        if size < 1e-14 {
            break;
        }
    }
    let (closure, _, r) = best.expect("at least one shot");
    if closure > CLOSURE_FLOOR {
        return Err(Error::SolverFailure { message: format!("closed geodesic of {word} did not close at eps = {eps}"), best_residual: closure });
    }
    Ok(ClosedGeodesic { word: word.clone(), eps, length: r.length, el, turns, closure, iterations, path: r.path })
}

/// Lifted scatterers whose seams the closed geodesic crosses, in order,
/// starting after bounce 0.
fn expected_crossings(word: &OrbitWord, turns: usize) -> Vec<LiftedLabel> {
    let q = word.q();
    let cells = word.cells();
    let tr = word.translation();
    (1..=q * turns)
        .map(|j| {
            let k = j % q;
            let lap = (j / q) as i64;
            LiftedLabel::new([cells[k][0] + lap * tr[0], cells[k][1] + lap * tr[1]], word.scatterer(k))
        })
        .collect()
}

/// Integrates from offset `x[0]` and angle `x[1]` on the section and reads
/// off the first return to the translated section.
fn shoot(profile: &HeightProfile, eps: f64, sec: &Section, expected: &[LiftedLabel], horizon: f64, x: [f64; 2]) -> Result<Return> {
    let start = [sec.origin[0] + x[0] * sec.across[0], sec.origin[1] + x[0] * sec.across[1]];
    let (s, c) = x[1].sin_cos();
    let dir = [c * sec.along[0] + s * sec.across[0], c * sec.along[1] + s * sec.across[1]];
    let init = lift(profile, eps, start, dir, Sheet::Up)?;
    let mut path = integrate_geodesic(profile, eps, init, horizon)?;
    let n = expected.len();
    if path.crossings.len() < n {
        return Err(Error::ClassEscape(format!("geodesic crossed {} seams before time {horizon}, expected {n}", path.crossings.len())));
    }
    for (k, (got, want)) in path.crossings.iter().zip(expected).enumerate() {
        if got.label != *want {
            return Err(Error::ClassEscape(format!("seam crossing {k} on {:?}, expected {:?}", got.label, want)));
        }
    }
    let after = path.crossings[n - 1].t;
    let target = [sec.origin[0] + sec.shift[0], sec.origin[1] + sec.shift[1]];
    let side = |p: [f64; 2]| dot([p[0] - target[0], p[1] - target[1]], sec.along);
    let j = path
        .samples
        .windows(2)
        .position(|w| w[0].straight && w[0].t >= after && side(w[0].point) < 0.0 && side(w[1].point) >= 0.0)
        .ok_or_else(|| Error::ClassEscape("geodesic did not return to the section".into()))?;
    if path.crossings.len() > n && path.crossings[n].t < path.samples[j + 1].t {
        return Err(Error::ClassEscape("extra seam crossing before the return".into()));
    }
    let (a, b) = (path.samples[j], path.samples[j + 1]);
    let w = -side(a.point) / (side(b.point) - side(a.point));
    let p = [a.point[0] + w * (b.point[0] - a.point[0]), a.point[1] + w * (b.point[1] - a.point[1])];
    let v = [b.point[0] - a.point[0], b.point[1] - a.point[1]];
    let t = a.t + w * (b.t - a.t);
    let offset = dot([p[0] - target[0], p[1] - target[1]], sec.across);
    let angle = wrap_angle(dot(v, sec.across).atan2(dot(v, sec.along)));
    path.samples.truncate(j + 1);
    path.samples.push(PathSample { t, point: p, height: a.height, straight: false });
    path.crossings.truncate(n);
    path.length = t;
    let nv = v[0].hypot(v[1]);
    path.end = SurfaceState::Flat { point: p, velocity: [v[0] / nv, v[1] / nv], sheet: Sheet::Up };
    Ok(Return { offset, angle, length: t, path })
}

/// The seam `u = 0` is a geodesic of every `g_ε` with length the perimeter.
fn boundary_geodesic(profile: &HeightProfile, eps: f64, word: &OrbitWord) -> Result<ClosedGeodesic> {
    let l = word.scatterer(0);
    if l >= profile.table().len() {
        return Err(Error::InvalidWord(format!("scatterer {l} out of range")));
    }
    let sc = profile.table().scatterer(l);
    let label = LiftedLabel::new([0, 0], l);
    let samples = (0..=BOUNDARY_SAMPLES)
        .map(|j| {
            let s = sc.perimeter() * j as f64 / BOUNDARY_SAMPLES as f64;
            PathSample { t: s, point: profile.collar_point(label, sc.arclength_to_angle(s), 0.0), height: 0.0, straight: false }
        })
        .collect();
    let rho0 = 1.0 / sc.frame_at_angle(0.0).curvature;
    let path = GeodesicPath {
        eps,
        samples,
        crossings: Vec::new(),
        length: sc.perimeter(),
        end: SurfaceState::Collar { label, theta: 0.0, u: 0.0, dtheta: 1.0 / rho0, du: 0.0 },
        steps: 0,
        rejected: 0,
        max_speed_drift: 0.0,
    };
    Ok(ClosedGeodesic { word: word.clone(), eps, length: sc.perimeter(), el: sc.perimeter(), turns: 1, closure: 0.0, iterations: 0, path })
}
