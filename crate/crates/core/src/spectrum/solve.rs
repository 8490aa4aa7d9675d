//! Trust-region Newton search for critical points of the length functional
//! and classification of the resulting orbits.

use super::functional::{length_functional, tau_pair, LengthEval};
use super::word::OrbitWord;
use crate::dynamics::{NEAR_GRAZE, TOL_GRAZE};
use crate::error::{Error, Result};
use crate::geometry::{ray_entry, LiftedLabel, Table};
use crate::linalg::{min_eigenvalue, norm};
use std::f64::consts::PI;

/// Default gradient tolerance for an accepted critical point.
pub const TOL_CRIT: f64 = 1e-10;
/// Default number of deterministic starts.
pub const DEFAULT_STARTS: usize = 8;
/// Angular amplitude of the start offsets around the seed.
pub const START_AMPLITUDE: f64 = 0.3;
/// Obstacles farther than this from a chord do not enter the margin.
pub const CLEARANCE_WINDOW: f64 = 0.1;
/// Converged starts must agree to this distance (after wrapping).
pub const START_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol_crit: f64,
    /// Converged starts wanted.
    pub starts: usize,
    /// Candidate starts tried at most.
    pub max_starts: usize,
    /// Candidates tried before giving up when none has converged.
    pub give_up: usize,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_crit: TOL_CRIT, starts: DEFAULT_STARTS, max_starts: 64, give_up: 16, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrbitClass {
    Regular,
    Grazing,
    Ghost,
}

impl OrbitClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitClass::Regular => "regular",
            OrbitClass::Grazing => "grazing",
            OrbitClass::Ghost => "ghost",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "regular" => Some(OrbitClass::Regular),
            "grazing" => Some(OrbitClass::Grazing),
            "ghost" => Some(OrbitClass::Ghost),
            _ => None,
        }
    }

    pub fn is_physical(&self) -> bool {
        !matches!(self, OrbitClass::Ghost)
    }
}

/// Result of the clearance and angle tests on a critical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: OrbitClass,
    /// Smallest of the bounce cosines and chord clearances (negative for a
    /// chord crossing an obstacle).
    pub margin: f64,
    pub near_grazing: bool,
    /// Chord and lifted obstacle realising the smallest clearance, if any.
    pub closest: Option<(usize, LiftedLabel)>,
}

/// Critical point of the length functional for one word.
#[derive(Debug, Clone)]
pub struct GeneralizedOrbit {
    pub word: OrbitWord,
    /// Arc-length parameters, wrapped to `[0, ℓ)`.
    pub params: Vec<f64>,
    pub length: f64,
    pub grad_norm: f64,
    pub hess_min_eig: f64,
    /// Outgoing angle at each bounce.
    pub phi: Vec<f64>,
    pub cos_phi: Vec<f64>,
    pub classification: Classification,
    pub starts_converged: usize,
    /// Candidate starts tried.
    pub starts_total: usize,
    /// Largest wrapped distance between converged starts.
    pub start_spread: f64,
}

impl GeneralizedOrbit {
    pub fn class(&self) -> OrbitClass {
        self.classification.class
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Bounce angles facing the bisector of the directions to the neighbouring
/// centres, then (for `sweeps > 0`) the reflection law iterated on the
/// resulting polygon.
fn seed_angles(table: &Table, word: &OrbitWord, sweeps: usize) -> Vec<f64> {
    let q = word.q();
    let cells = word.cells();
    let translation = word.translation();
    let tr = [translation[0] as f64, translation[1] as f64];
    let mut pts: Vec<[f64; 2]> = (0..q)
        .map(|k| {
            let c = table.scatterer(word.scatterer(k)).center();
            [c[0] + cells[k][0] as f64, c[1] + cells[k][1] as f64]
        })
        .collect();
    let mut theta = vec![0.0; q];
    for _ in 0..=sweeps {
        for k in 0..q {
            let prev = if k == 0 { [pts[q - 1][0] - tr[0], pts[q - 1][1] - tr[1]] } else { pts[k - 1] };
            let next = if k + 1 == q { [pts[0][0] + tr[0], pts[0][1] + tr[1]] } else { pts[k + 1] };
            let here = pts[k];
            let unit = |p: [f64; 2]| {
                let v = [p[0] - here[0], p[1] - here[1]];
                let r = v[0].hypot(v[1]).max(1e-300);
                [v[0] / r, v[1] / r]
            };
            let (a, b) = (unit(prev), unit(next));
            let mut m = [a[0] + b[0], a[1] + b[1]];
            if m[0].hypot(m[1]) < 1e-12 {
                m = [-a[1], a[0]];
            }
            theta[k] = m[1].atan2(m[0]);
            let c = table.scatterer(word.scatterer(k)).curve().point(theta[k]);
            pts[k] = [c[0] + cells[k][0] as f64, c[1] + cells[k][1] as f64];
        }
    }
    theta
}

/// Bounce angles chosen on a grid by coordinate ascent of the smallest
/// endpoint cosine of the two adjacent chords, starting from `seed`.
fn repair_angles(table: &Table, word: &OrbitWord, seed: &[f64]) -> Vec<f64> {
    const GRID: usize = 96;
    let q = word.q();
    let steps = word.steps();
    let mut theta = seed.to_vec();
    let arc = |k: usize, th: f64| table.scatterer(word.scatterer(k)).angle_to_arclength(th);
    let worst = |theta: &[f64], k: usize, th: f64| {
        let prev = (k + q - 1) % q;
        let next = (k + 1) % q;
        let into = tau_pair(table, steps[k].disp, word.scatterer(prev), word.scatterer(k), arc(prev, theta[prev]), arc(k, th));
        let out = tau_pair(table, steps[next].disp, word.scatterer(k), word.scatterer(next), arc(k, th), arc(next, theta[next]));
        match (into, out) {
            (Ok(a), Ok(b)) => a.cos1.min(a.cos2).min(b.cos1).min(b.cos2),
            _ => f64::NEG_INFINITY,
        }
    };
    for _ in 0..8 {
        let mut moved = false;
        for k in 0..q {
            let mut best = (worst(&theta, k, theta[k]), theta[k]);
            for j in 0..GRID {
                let th = seed[k] + std::f64::consts::TAU * j as f64 / GRID as f64;
                let v = worst(&theta, k, th);
                if v > best.0 + 1e-12 {
                    best = (v, th);
                }
            }
            if best.1 != theta[k] {
                theta[k] = best.1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    theta
}

/// Start `j` with angular offsets of amplitude `scale` around the seed;
/// start 0 is the seed itself.
fn start_point(table: &Table, word: &OrbitWord, seed: &[f64], j: usize, scale: f64) -> Vec<f64> {
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    (0..word.q())
        .map(|k| {
            let off = if j == 0 { 0.0 } else { ((j as f64) * golden + (k as f64) * 2f64.sqrt()).fract() - 0.5 };
            table.scatterer(word.scatterer(k)).angle_to_arclength(seed[k] + 2.0 * scale * off)
        })
        .collect()
}

struct Converged {
    s: Vec<f64>,
    eval: LengthEval,
    grad_norm: f64,
}

/// One-coordinate Newton sweeps on `∂L/∂s_k`, each step halved until the
/// chords stay admissible; a cheap way into the basin of the critical point.
fn gauss_seidel(table: &Table, word: &OrbitWord, s: &mut [f64], sweeps: usize) {
    let q = word.q();
    for _ in 0..sweeps {
        for k in 0..q {
            let prev = (k + q - 1) % q;
            let next = (k + 1) % q;
            let steps = word.steps();
            let local = |x: f64| {
                let into = tau_pair(table, steps[k].disp, word.scatterer(prev), word.scatterer(k), s[prev], x).ok()?;
                let out = tau_pair(table, steps[next].disp, word.scatterer(k), word.scatterer(next), x, s[next]).ok()?;
                (into.admissible() && out.admissible()).then_some((into.d2 + out.d1, into.d22 + out.d11))
            };
            let Some((g, h)) = local(s[k]) else { return };
            if h <= 0.0 {
                continue;
            }
            let mut step = -g / h;
            for _ in 0..30 {
                if local(s[k] + step).is_some() {
                    s[k] += step;
                    break;
                }
                step *= 0.5;
            }
        }
    }
}

/// Dogleg trust-region Newton restricted to admissible chords.
fn newton(table: &Table, word: &OrbitWord, start: Vec<f64>, opts: &SolverOptions) -> std::result::Result<Converged, f64> {
    let evaluate = |s: &[f64]| length_functional(table, word, s).ok().filter(|e| e.admissible());
    let mut s = start;
    gauss_seidel(table, word, &mut s, 20);
    let mut e = match evaluate(&s) {
        Some(e) => e,
        None => return Err(f64::INFINITY),
    };
    let mut radius = 0.05;
    let mut best = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let g = &e.gradient;
        let gn = norm(g);
        best = best.min(gn);
        if gn < opts.tol_crit {
            return Ok(Converged { s, eval: e, grad_norm: gn });
        }
        let hg = e.hessian.mul(g);
        let ghg = dot2(g, &hg);
        let cauchy: Vec<f64> = if ghg > 0.0 {
            let a = (gn * gn / ghg).min(radius / gn);
            g.iter().map(|x| -a * x).collect()
        } else {
            g.iter().map(|x| -radius * x / gn).collect()
        };
        let newton_step = e
            .hessian
            .solve(g)
            .map(|v| v.into_iter().map(|x| -x).collect::<Vec<_>>())
            .filter(|p| dot2(p, g) < 0.0);
        let step = match newton_step {
            Some(p) if norm(&p) <= radius => p,
            Some(p) => {
                // Dogleg: walk from the Cauchy point towards the Newton point.
                let cn = norm(&cauchy);
                if cn >= radius {
                    cauchy.iter().map(|x| x * radius / cn).collect()
                } else {
                    let d: Vec<f64> = p.iter().zip(&cauchy).map(|(a, b)| a - b).collect();
                    let (a2, b2, c2) = (dot2(&d, &d), 2.0 * dot2(&cauchy, &d), cn * cn - radius * radius);
                    let t = (-b2 + (b2 * b2 - 4.0 * a2 * c2).max(0.0).sqrt()) / (2.0 * a2);
                    cauchy.iter().zip(&d).map(|(c, dd)| c + t * dd).collect()
                }
            }
            None => cauchy,
        };
        let pn = norm(&step);
        let trial: Vec<f64> = s.iter().zip(&step).map(|(a, b)| a + b).collect();
        let hp = e.hessian.mul(&step);
        let pred = -(dot2(g, &step) + 0.5 * dot2(&step, &hp));
        let accepted = match evaluate(&trial) {
            Some(et) => {
                let ared = e.value - et.value;
                let ratio = if pred > 0.0 { ared / pred } else { -1.0 };
                // Near the solution length differences drown in rounding;
                // the gradient norm then decides.
                let noisy = pred < 1e-13 * e.value.abs().max(1.0);
                let ok = ratio > 0.1 || (noisy && norm(&et.gradient) < gn);
                if ratio < 0.25 && !noisy {
                    radius = 0.25 * pn;
                } else if ratio > 0.75 && pn > 0.99 * radius {
                    radius = (2.0 * radius).min(0.5);
                }
                if ok {
                    Some(et)
                } else {
                    None
                }
            }
            None => {
                radius = 0.25 * pn;
                None
            }
        };
        if let Some(et) = accepted {
            s = trial;
            e = et;
        }
        if radius < 1e-15 {
            break;
        }
    }
    let gn = norm(&e.gradient);
    if gn < opts.tol_crit {
        return Ok(Converged { s, eval: e, grad_norm: gn });
    }
    Err(best.min(gn))
}

fn dot2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Critical point of `L` for a valid word from several deterministic starts.
pub fn find_generalized_orbit(table: &Table, word: &OrbitWord) -> Result<GeneralizedOrbit> {
    find_generalized_orbit_with(table, word, &SolverOptions::default())
}

pub fn find_generalized_orbit_with(table: &Table, word: &OrbitWord, opts: &SolverOptions) -> Result<GeneralizedOrbit> {
    word.validate(table)?;
    let mut best_residual = f64::INFINITY;
    let mut converged: Vec<Converged> = Vec::new();
    let admissible = |s: &[f64]| length_functional(table, word, s).map_or(false, |e| e.admissible());
    let mut seeds: Vec<Vec<f64>> = [seed_angles(table, word, 0), seed_angles(table, word, 12)]
        .into_iter()
        .filter(|seed| admissible(&start_point(table, word, seed, 0, 0.0)))
        .collect();
    if seeds.is_empty() {
        let repaired = repair_angles(table, word, &seed_angles(table, word, 0));
        if admissible(&start_point(table, word, &repaired, 0, 0.0)) {
            seeds.push(repaired);
        }
    }
    let wanted = opts.starts.max(1);
    let mut tried = 0;
    // Candidates alternate between the admissible seeds; each offset is
    // halved until the start is admissible.
    for k in 0..opts.max_starts.max(wanted) {
        if converged.len() >= wanted || seeds.is_empty() || (converged.is_empty() && k >= opts.give_up) {
            break;
        }
        let seed = &seeds[k % seeds.len()];
        let j = k / seeds.len();
        let mut scale = START_AMPLITUDE;
        let mut start = start_point(table, word, seed, j, scale);
        for _ in 0..16 {
            if admissible(&start) {
                break;
            }
            scale *= 0.5;
            start = start_point(table, word, seed, j, scale);
        }
        tried += 1;
        match newton(table, word, start, opts) {
            Ok(c) => converged.push(c),
            Err(r) => best_residual = best_residual.min(r),
        }
    }
    let first = match converged.first() {
        Some(c) => c,
        None => {
            return Err(Error::SolverFailure {
                message: format!("no start converged for word {word}"),
                best_residual,
            })
        }
    };
    let wrap_dist = |a: &[f64], b: &[f64]| {
        (0..word.q())
            .map(|k| table.scatterer(word.scatterer(k)).arc_distance(a[k], b[k]))
            .fold(0.0, f64::max)
    };
    let mut spread: f64 = 0.0;
    for c in &converged {
        spread = spread.max(wrap_dist(&first.s, &c.s));
    }
    let best = converged.iter().min_by(|a, b| a.grad_norm.total_cmp(&b.grad_norm)).unwrap_or(first);
    let hess_min_eig = min_eigenvalue(&best.eval.hessian.to_dense());
    let params: Vec<f64> = (0..word.q()).map(|k| table.scatterer(word.scatterer(k)).wrap(best.s[k])).collect();
    let q = word.q();
    let mut phi = Vec::with_capacity(q);
    let mut cos_phi = Vec::with_capacity(q);
    for k in 0..q {
        let out = &best.eval.segments[(k + 1) % q];
        phi.push(out.sin1.atan2(out.cos1));
        cos_phi.push(out.cos1.min(best.eval.segments[k].cos2));
    }
    let mut orbit = GeneralizedOrbit {
        word: word.clone(),
        params,
        length: best.eval.value,
        grad_norm: best.grad_norm,
        hess_min_eig,
        phi,
        cos_phi,
        classification: Classification { class: OrbitClass::Regular, margin: f64::INFINITY, near_grazing: false, closest: None },
        starts_converged: converged.len(),
        starts_total: tried,
        start_spread: spread,
    };
    orbit.classification = classify_orbit(table, &orbit);
    Ok(orbit)
}

/// Signed clearance between the chord `p → p + τu` and a lifted obstacle:
/// positive gap when the chord misses it, minus the penetration depth of the
/// chord line when the chord crosses it, `None` when the obstacle is not
/// alongside the chord.
pub fn chord_clearance(table: &Table, p: [f64; 2], u: [f64; 2], tau: f64, label: LiftedLabel) -> Option<f64> {
    let curve = table.lift_scatterer(label);
    let nd = [-u[1], u[0]];
    let offset = dot(p, nd);
    let th = nd[1].atan2(nd[0]);
    let top = curve.h(th);
    let bottom = -curve.h(th + PI);
    let along = |x: [f64; 2]| dot([x[0] - p[0], x[1] - p[1]], u);
    if offset >= top {
        let t = along(curve.point(th));
        (t > 0.0 && t < tau).then_some(offset - top)
    } else if offset <= bottom {
        let t = along(curve.point(th + PI));
        (t > 0.0 && t < tau).then_some(bottom - offset)
    } else {
        let (t, _, _) = ray_entry(&curve, p, u)?;
        (t > 0.0 && t < tau).then_some(-(top - offset).min(offset - bottom))
    }
}

/// Smallest signed clearance between the chord `p → end` joining lifted
/// scatterers `from` and `to` and any other lifted scatterer nearby.
pub fn chord_margin(table: &Table, from: LiftedLabel, to: LiftedLabel, p: [f64; 2], end: [f64; 2]) -> (f64, Option<LiftedLabel>) {
    let reach = table.max_radius_bound();
    let v = [end[0] - p[0], end[1] - p[1]];
    let tau = v[0].hypot(v[1]);
    let u = [v[0] / tau, v[1] / tau];
    let lo = [p[0].min(end[0]) - reach - 1.0, p[1].min(end[1]) - reach - 1.0];
    let hi = [p[0].max(end[0]) + reach + 1.0, p[1].max(end[1]) + reach + 1.0];
    let mut best = (f64::INFINITY, None);
    for i in lo[0].floor() as i64..=hi[0].ceil() as i64 {
        for j in lo[1].floor() as i64..=hi[1].ceil() as i64 {
            for l in 0..table.len() {
                let label = LiftedLabel::new([i, j], l);
                if label == from || label == to {
                    continue;
                }
                let sc = table.scatterer(l);
                let c = sc.center();
                let rel = [c[0] + i as f64 - p[0], c[1] + j as f64 - p[1]];
                let t = dot(rel, u).clamp(0.0, tau);
                let d = (rel[0] - t * u[0]).hypot(rel[1] - t * u[1]);
                if d > sc.radius_bound() + CLEARANCE_WINDOW {
                    continue;
                }
                if let Some(cl) = chord_clearance(table, p, u, tau, label) {
                    if cl < best.0 {
                        best = (cl, Some(label));
                    }
                }
            }
        }
    }
    best
}

/// Ghost when a chord crosses an obstacle, grazing when a bounce or a chord
/// is tangential within `TOL_GRAZE`, regular otherwise.
pub fn classify_orbit(table: &Table, o: &GeneralizedOrbit) -> Classification {
    let word = &o.word;
    let q = word.q();
    let mut margin = f64::INFINITY;
    let mut closest = None;
    for k in 0..q {
        let prev = (k + q - 1) % q;
        let (from, to) = word.segment_labels(k);
        let p = table.lifted_point(from, o.params[prev]);
        let end = table.lifted_point(to, o.params[k]);
        let (m, label) = chord_margin(table, from, to, p, end);
        if m < margin {
            margin = m;
            closest = label.map(|l| (k, l));
        }
    }
    let min_cos = o.cos_phi.iter().copied().fold(f64::INFINITY, f64::min);
    let class = if margin < -TOL_GRAZE {
        OrbitClass::Ghost
    } else if margin < TOL_GRAZE || min_cos < TOL_GRAZE {
        OrbitClass::Grazing
    } else {
        OrbitClass::Regular
    };
    let margin = margin.min(min_cos);
    Classification { class, margin, near_grazing: class == OrbitClass::Regular && margin < NEAR_GRAZE, closest }
}

/// Newton refinement of a start already near a critical point of `L`;
/// returns the wrapped parameters and the length.
pub(crate) fn polish_critical_point(table: &Table, word: &OrbitWord, start: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let c = newton(table, word, start, &SolverOptions::default()).ok()?;
    let s = (0..word.q()).map(|k| table.scatterer(word.scatterer(k)).wrap(c.s[k])).collect();
    Some((s, c.eval.value))
}
