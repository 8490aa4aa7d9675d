//! The enriched length functional and its minimisers, billiard cycles.

use super::linkset::{link_set, LinkSet};
use super::tangents::{arc_distance, tangent_angles, ArcDistance};
use crate::error::{Error, Result};
use crate::geometry::{LiftedLabel, SupportCurve, Table};
use crate::spectrum::{chord_margin, polish_critical_point, tau_pair, OrbitWord, TauPair};
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex};

/// Tolerance on the distance from zero to the subdifferential.
pub const TOL_CERT: f64 = 1e-8;
/// Arc lengths below this count as `e = s`.
pub const TOL_SAME: f64 = 1e-9;
/// Slack on chord cosines and link-set ends in feasibility tests.
pub const TOL_FEAS: f64 = 1e-9;
/// Cap on block-coordinate sweeps.
pub const MAX_SWEEPS: usize = 4000;

/// How a cycle passes a scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// Specular bounce, `e = s`.
    Specular,
    /// Tangential arrival, a boundary arc, tangential departure; `+1` runs
    /// counterclockwise.
    Wrap(i8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CycleKind {
    /// Every transition is a bounce: a periodic billiard orbit.
    Orbit,
    /// At least one transition follows a boundary arc.
    Mixed,
    /// The boundary of one scatterer.
    Boundary,
}

impl CycleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CycleKind::Orbit => "orbit",
            CycleKind::Mixed => "mixed",
            CycleKind::Boundary => "boundary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "orbit" => Some(CycleKind::Orbit),
            "mixed" => Some(CycleKind::Mixed),
            "boundary" => Some(CycleKind::Boundary),
            _ => None,
        }
    }
}

/// Value of the enriched length at a feasible point, its chords and arcs,
/// and the distance from zero to its subdifferential.
#[derive(Debug, Clone)]
pub struct ElEval {
    pub value: f64,
    pub chords: Vec<TauPair>,
    pub arcs: Vec<ArcDistance>,
    pub residual: f64,
}

/// A minimiser of the enriched length for one word.
#[derive(Debug, Clone)]
pub struct BilliardCycle {
    pub word: OrbitWord,
    pub kind: CycleKind,
    pub el: f64,
    /// Arrival parameters `e_k` (arc length).
    pub e: Vec<f64>,
    /// Departure parameters `s_k` (arc length).
    pub s: Vec<f64>,
    pub transitions: Vec<Transition>,
    pub residual: f64,
    /// Smallest clearance between a chord and a scatterer it does not join.
    pub margin: f64,
    /// Largest mismatch of the reflection law over specular bounces.
    pub reflection_residual: f64,
    /// Odd words close up only after two turns on the doubled surface.
    pub doubled: bool,
    pub sweeps: usize,
}

type LinkKey = (usize, usize, [i64; 2]);

/// Shared cache of link sets keyed by scatterer pair and relative cell.
#[derive(Debug, Default, Clone)]
pub struct LinkCache {
    inner: Arc<Mutex<HashMap<LinkKey, Arc<LinkSet>>>>,
}

impl LinkCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, table: &Table, source: LiftedLabel, target: LiftedLabel) -> LinkSet {
        let rel = [source.cell[0] - target.cell[0], source.cell[1] - target.cell[1]];
        let key = (source.scatterer, target.scatterer, rel);
        if let Some(ls) = self.inner.lock().expect("link cache poisoned").get(&key) {
            return LinkSet { source, target, ..(**ls).clone() };
        }
        let ls = Arc::new(link_set(table, LiftedLabel::new(rel, source.scatterer), LiftedLabel::new([0, 0], target.scatterer)));
        self.inner.lock().expect("link cache poisoned").insert(key, ls.clone());
        LinkSet { source, target, ..(*ls).clone() }
    }
}

/// The enriched length problem of one word: its lifted scatterers and the
/// link sets bounding each arrival and departure parameter.
pub struct ElProblem<'a> {
    table: &'a Table,
    word: OrbitWord,
    /// Link set of the previous scatterer on bounce `k` (bounds `e_k`).
    pub into_links: Vec<LinkSet>,
    /// Link set of the next scatterer on bounce `k` (bounds `s_k`).
    pub out_links: Vec<LinkSet>,
}

impl<'a> ElProblem<'a> {
    pub fn new(table: &'a Table, word: &OrbitWord) -> Result<Self> {
        Self::with_cache(table, word, &LinkCache::new())
    }

    pub fn with_cache(table: &'a Table, word: &OrbitWord, cache: &LinkCache) -> Result<Self> {
        word.validate(table).map_err(|e| Error::InfeasibleWord(e.to_string()))?;
        let q = word.q();
        let mut into_links = Vec::with_capacity(q);
        let mut out_links = Vec::with_capacity(q);
        for k in 0..q {
            let (from, to) = word.segment_labels(k);
            into_links.push(cache.get(table, from, to));
            let (from_next, to_next) = word.segment_labels((k + 1) % q);
            let shift = [from_next.cell[0] - to.cell[0], from_next.cell[1] - to.cell[1]];
            out_links.push(cache.get(table, to_next.translated([-shift[0], -shift[1]]), to));
        }
        if let Some(k) = (0..q).find(|&k| into_links[k].is_empty() || out_links[k].is_empty()) {
            return Err(Error::InfeasibleWord(format!("empty link set at bounce {k} of {word}")));
        }
        Ok(Self { table, word: word.clone(), into_links, out_links })
    }

    pub fn word(&self) -> &OrbitWord {
        &self.word
    }

    /// Whether `(e, s)` lies in the link-set box and every chord leaves and
    /// enters the table.
    pub fn is_feasible(&self, e: &[f64], s: &[f64]) -> bool {
        self.eval(e, s).is_ok()
    }

    /// `EL(e, s) = Σ τ(s_{k−1}, e_k) + D(e_k, s_k)`.
    pub fn eval(&self, e: &[f64], s: &[f64]) -> Result<ElEval> {
        let q = self.word.q();
        if e.len() != q || s.len() != q {
            return Err(Error::InfeasiblePoint(format!("expected {q} arrival and departure parameters")));
        }
        let mut chords = Vec::with_capacity(q);
        let mut arcs = Vec::with_capacity(q);
        let mut value = 0.0;
        for k in 0..q {
            if !self.into_links[k].contains(e[k], TOL_FEAS) || !self.out_links[k].contains(s[k], TOL_FEAS) {
                return Err(Error::InfeasiblePoint(format!("bounce {k} outside its link set")));
            }
            let prev = (k + q - 1) % q;
            let c = tau_pair(self.table, self.word.steps()[k].disp, self.word.scatterer(prev), self.word.scatterer(k), s[prev], e[k])
                .map_err(|_| Error::InfeasiblePoint(format!("degenerate chord into bounce {k}")))?;
            if c.cos1 < -TOL_FEAS || c.cos2 < -TOL_FEAS {
                return Err(Error::InfeasiblePoint(format!("chord into bounce {k} crosses its own scatterer")));
            }
            let a = arc_distance(self.table.scatterer(self.word.scatterer(k)).perimeter(), e[k], s[k]);
            value += c.tau + a.value;
            chords.push(c);
            arcs.push(a);
        }
        let mut residual: f64 = 0.0;
        for k in 0..q {
            let ge = chords[k].d2;
            let gs = chords[(k + 1) % q].d1;
            // ∂D = {(a, −a) : a ∈ d_e}.
            let i = arcs[k].d_e;
            let a = (0.5 * (gs - ge)).clamp(i.lo, i.hi);
            residual = residual.max((ge + a).abs().max((gs - a).abs()));
        }
        Ok(ElEval { value, chords, arcs, residual })
    }

    /// Minimises the enriched length by exact block-coordinate descent.
    ///
    /// Each block is one scatterer's pair `(e_k, s_k)` with its neighbours'
    /// endpoints fixed; its minimiser is the shortest path between those
    /// endpoints touching the scatterer, either a specular bounce or a taut
    /// wrap along tangents and a boundary arc. All-bounce limits are then
    /// polished by Newton on the length functional.
    pub fn minimize(&self) -> Result<BilliardCycle> {
        let table = self.table;
        let word = &self.word;
        let q = word.q();
        let cells = word.cells();
        let tr = word.translation();
        let lift = |k: usize, shift: [i64; 2]| {
            table.lift_scatterer(LiftedLabel::new([cells[k][0] + shift[0], cells[k][1] + shift[1]], word.scatterer(k)))
        };
        let curves: Vec<SupportCurve> = (0..q).map(|k| lift(k, [0, 0])).collect();
        let before = lift(q - 1, [-tr[0], -tr[1]]);
        let after = lift(0, tr);
        let mut eth: Vec<f64> = vec![0.0; q];
        for k in 0..q {
            let c = curves[k].center();
            let pc = if k == 0 { before.center() } else { curves[k - 1].center() };
            let nc = if k + 1 == q { after.center() } else { curves[k + 1].center() };
            let unit = |p: [f64; 2]| {
                let v = [p[0] - c[0], p[1] - c[1]];
                let r = v[0].hypot(v[1]).max(1e-300);
                [v[0] / r, v[1] / r]
            };
            let (a, b) = (unit(pc), unit(nc));
            let mut m = [a[0] + b[0], a[1] + b[1]];
            if m[0].hypot(m[1]) < 1e-12 {
                m = [-a[1], a[0]];
            }
            eth[k] = m[1].atan2(m[0]);
        }
        let mut sth = eth.clone();
        let mut trans = vec![Transition::Specular; q];
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut change: f64 = 0.0;
            for k in 0..q {
                let p = if k == 0 { before.point(sth[q - 1]) } else { curves[k - 1].point(sth[k - 1]) };
                let qp = if k + 1 == q { after.point(eth[0]) } else { curves[k + 1].point(eth[k + 1]) };
                let sc = table.scatterer(word.scatterer(k));
                let Some(b) = touch(&curves[k], sc.perimeter(), |t| sc.angle_to_arclength(t), p, qp) else {
                    return Err(Error::InfeasibleWord(format!("bounce {k} of {word} cannot be reached")));
                };
                change = change.max(angle_gap(b.e, eth[k])).max(angle_gap(b.s, sth[k]));
                eth[k] = b.e;
                sth[k] = b.s;
                trans[k] = b.transition;
            }
            if change < 1e-14 {
                break;
            }
        }
        let arclen = |k: usize, t: f64| table.scatterer(word.scatterer(k)).angle_to_arclength(t);
        let mut e: Vec<f64> = (0..q).map(|k| arclen(k, eth[k])).collect();
        let mut s: Vec<f64> = (0..q).map(|k| arclen(k, sth[k])).collect();
        if trans.iter().all(|t| *t == Transition::Specular) {
            if let Some((x, _)) = polish_critical_point(table, word, s.clone()) {
                let close = (0..q).all(|k| table.scatterer(word.scatterer(k)).arc_distance(x[k], s[k]) < 1e-6);
                if close {
                    e = x.clone();
                    s = x;
                }
            }
        }
        let ev = self.eval(&e, &s).map_err(|err| Error::InfeasibleWord(format!("minimiser for {word} leaves the table: {err}")))?;
        if ev.residual > TOL_CERT {
            return Err(Error::SolverFailure {
                message: format!("no certified enriched minimiser for {word} after {sweeps} sweeps"),
                best_residual: ev.residual,
            });
        }
        let mut margin = f64::INFINITY;
        for k in 0..q {
            let prev = (k + q - 1) % q;
            let (from, to) = word.segment_labels(k);
            let a = table.lifted_point(from, s[prev]);
            let b = table.lifted_point(to, e[k]);
            margin = margin.min(chord_margin(table, from, to, a, b).0);
        }
        if margin < -TOL_FEAS {
            return Err(Error::InfeasibleWord(format!("minimiser for {word} crosses a scatterer (clearance {margin:e})")));
        }
        let mut reflection_residual: f64 = 0.0;
        let mut transitions = Vec::with_capacity(q);
        for k in 0..q {
            if ev.arcs[k].value < TOL_SAME {
                transitions.push(Transition::Specular);
                reflection_residual = reflection_residual.max((ev.chords[k].d2 + ev.chords[(k + 1) % q].d1).abs());
            } else {
                transitions.push(trans[k]);
            }
        }
        let kind = if transitions.iter().all(|t| *t == Transition::Specular) { CycleKind::Orbit } else { CycleKind::Mixed };
        Ok(BilliardCycle {
            word: word.clone(),
            kind,
            el: ev.value,
            e,
            s,
            transitions,
            residual: ev.residual,
            margin,
            reflection_residual,
            doubled: q % 2 == 1,
            sweeps,
        })
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Best way for a path from `p` to `q` to touch one scatterer.
struct Touch {
    e: f64,
    s: f64,
    transition: Transition,
}

fn touch(curve: &SupportCurve, perimeter: f64, arclen: impl Fn(f64) -> f64, p: [f64; 2], q: [f64; 2]) -> Option<Touch> {
    let (mp, pp) = tangent_angles(curve, p)?;
    let (mq, pq) = tangent_angles(curve, q)?;
    let mut best: Option<(f64, Touch)> = None;
    let mut offer = |len: f64, t: Touch| {
        if best.as_ref().map_or(true, |b| len < b.0) {
            best = Some((len, t));
        }
    };
    // Specular point in the arc seen from both ends.
    let pp_u = mp + (pp - mp).rem_euclid(TAU);
    let mq_u = mp + ((mq - mp + PI).rem_euclid(TAU) - PI);
    let pq_u = mq_u + (pq - mq).rem_euclid(TAU);
    let (lo, hi) = (mp.max(mq_u), pp_u.min(pq_u));
    if hi > lo {
        let g = |th: f64| {
            let x = curve.point(th);
            let t = [-th.sin(), th.cos()];
            let (a, b) = (dist(x, p), dist(x, q));
            (t[0] * (x[0] - p[0]) + t[1] * (x[1] - p[1])) / a + (t[0] * (x[0] - q[0]) + t[1] * (x[1] - q[1])) / b
        };
        let th = super::tangents::bracketed_root(g, lo, hi);
        let x = curve.point(th);
        offer(dist(p, x) + dist(x, q), Touch { e: th, s: th, transition: Transition::Specular });
    }
    // Wraps: arrive and leave along tangents, following the boundary.
    for (e, s, sign) in [(pp, mq, 1i8), (mp, pq, -1i8)] {
        let arc = if sign > 0 { (arclen(s) - arclen(e)).rem_euclid(perimeter) } else { (arclen(e) - arclen(s)).rem_euclid(perimeter) };
        if arc > 0.5 * perimeter {
            continue;
        }
        let len = dist(p, curve.point(e)) + arc + dist(curve.point(s), q);
        offer(len, Touch { e, s, transition: Transition::Wrap(sign) });
    }
    best.map(|b| b.1)
}

/// `EL` at a point of the link-set box.
pub fn enriched_length(table: &Table, word: &OrbitWord, e: &[f64], s: &[f64]) -> Result<ElEval> {
    ElProblem::new(table, word)?.eval(e, s)
}

/// Minimiser of the enriched length for a word; the boundary class of a
/// single scatterer has the perimeter as its length.
#[allow(non_snake_case)]
pub fn minimize_EL(table: &Table, word: &OrbitWord) -> Result<BilliardCycle> {
    minimize_el_cached(table, word, &LinkCache::new())
}

pub fn minimize_el_cached(table: &Table, word: &OrbitWord, cache: &LinkCache) -> Result<BilliardCycle> {
    if word.is_boundary() {
        let l = word.scatterer(0);
        if l >= table.len() {
            return Err(Error::InfeasibleWord(format!("scatterer {l} out of range")));
        }
        return Ok(BilliardCycle {
            word: word.clone(),
            kind: CycleKind::Boundary,
            el: table.scatterer(l).perimeter(),
            e: vec![0.0],
            s: vec![0.0],
            transitions: vec![Transition::Wrap(1)],
            residual: 0.0,
            margin: f64::INFINITY,
            reflection_residual: 0.0,
            doubled: false,
            sweeps: 0,
        });
    }
    ElProblem::with_cache(table, word, cache)?.minimize()
}
