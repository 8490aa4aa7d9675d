//! Period-bounded enumeration of orbit words and the spectrum table.

use super::solve::{find_generalized_orbit_with, GeneralizedOrbit, OrbitClass, SolverOptions};
use super::word::{OrbitWord, Step};
use crate::dynamics::{billiard_map, next_collision, CollisionCoord};
use crate::error::{Error, Result};
use crate::geometry::{convex_distance, LiftedLabel, Table};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationOptions {
    pub q_max: usize,
    pub t_max: f64,
    /// Largest number of candidate words solved before giving up.
    pub max_words: usize,
    /// Phase-space grid size per scatterer used to find visible neighbours.
    pub visibility_samples: usize,
    /// Require consecutive step pairs to be observed transitions; otherwise
    /// only single steps must be.
    pub transition_pruning: bool,
    pub solver: SolverOptions,
}

impl EnumerationOptions {
    pub fn new(q_max: usize, t_max: f64) -> Self {
        Self { q_max, t_max, max_words: 200_000, visibility_samples: 256, transition_pruning: true, solver: SolverOptions::default() }
    }
}

/// One equivalence class of periodic orbits.
#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    /// Canonical word (minimal rotation).
    pub word: OrbitWord,
    /// Canonical word of the time-reversed orbit.
    pub reversal: OrbitWord,
    pub length: f64,
    pub class: OrbitClass,
    pub near_grazing: bool,
    pub margin: f64,
    pub params: Vec<f64>,
    pub phi: Vec<f64>,
    pub hess_min_eig: f64,
    pub grad_norm: f64,
    pub starts_converged: usize,
    pub start_spread: f64,
}

impl SpectrumEntry {
    pub fn from_orbit(o: &GeneralizedOrbit) -> Self {
        let (word, r) = o.word.canonical_with_rotation();
        let q = o.word.q();
        let rot = |v: &[f64]| (0..q).map(|j| v[(j + r) % q]).collect::<Vec<_>>();
        Self {
            reversal: word.reversed().canonical(),
            word,
            length: o.length,
            class: o.class(),
            near_grazing: o.classification.near_grazing,
            margin: o.classification.margin,
            params: rot(&o.params),
            phi: rot(&o.phi),
            hess_min_eig: o.hess_min_eig,
            grad_norm: o.grad_norm,
            starts_converged: o.starts_converged,
            start_spread: o.start_spread,
        }
    }

    pub fn q(&self) -> usize {
        self.word.q()
    }
}

/// Periodic orbits up to a period and length bound, keyed by canonical word.
#[derive(Debug, Clone, Default)]
pub struct SpectrumTable {
    /// Physical orbits (regular and grazing).
    pub entries: BTreeMap<OrbitWord, SpectrumEntry>,
    /// Critical points whose chords cross an obstacle.
    pub ghosts: BTreeMap<OrbitWord, SpectrumEntry>,
    /// Words with no critical point found, with the solver message.
    pub failures: Vec<(OrbitWord, String)>,
    pub q_max: usize,
    pub t_max: f64,
    pub words_examined: usize,
    pub truncated: bool,
}

impl SpectrumTable {
    /// Entries in report order: by period, then length, then word.
    pub fn sorted(&self) -> Vec<&SpectrumEntry> {
        let mut v: Vec<&SpectrumEntry> = self.entries.values().collect();
        v.sort_by(|a, b| a.q().cmp(&b.q()).then(a.length.total_cmp(&b.length)).then(a.word.cmp(&b.word)));
        v
    }

    pub fn regular(&self) -> impl Iterator<Item = &SpectrumEntry> {
        self.entries.values().filter(|e| e.class == OrbitClass::Regular)
    }

    /// `BudgetExceeded` when the enumeration stopped early.
    pub fn check_budget(&self) -> Result<()> {
        if self.truncated {
            return Err(Error::BudgetExceeded(format!(
                "word budget reached after {} words; table is partial",
                self.words_examined
            )));
        }
        Ok(())
    }
}

/// Free-flight transitions out of one scatterer sampled on a phase-space
/// grid: the lifted scatterers hit first (with obstacle distances) and the
/// pairs of consecutive steps observed along two collisions.
#[derive(Debug, Clone, Default)]
pub struct Transitions {
    pub neighbours: Vec<(Step, f64)>,
    pub pairs: BTreeSet<(Step, Step)>,
}

pub fn sample_transitions(table: &Table, l: usize, samples: usize) -> Transitions {
    let sc = table.scatterer(l);
    let n = samples.max(8);
    let found: Vec<(Step, Option<Step>)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let s = sc.perimeter() * (a as f64 + 0.5) / n as f64;
            (0..n).filter_map(move |b| {
                let phi = -0.5 * PI + PI * (b as f64 + 0.5) / n as f64;
                let c = CollisionCoord::new(LiftedLabel::new([0, 0], l), s, phi);
                let (c1, _, _) = next_collision(table, &c).ok()?;
                let first = Step { scatterer: c1.label.scatterer, disp: c1.label.cell };
                let second = next_collision(table, &c1).ok().map(|(c2, _, _)| Step {
                    scatterer: c2.label.scatterer,
                    disp: [c2.label.cell[0] - c1.label.cell[0], c2.label.cell[1] - c1.label.cell[1]],
                });
                Some((first, second))
            })
        })
        .collect();
    let firsts: BTreeSet<Step> = found.iter().map(|x| x.0).collect();
    let pairs = found.iter().filter_map(|&(a, b)| b.map(|b| (a, b))).collect();
    let neighbours = firsts
        .into_iter()
        .map(|st| {
            let d = convex_distance(sc.curve(), table.scatterer(st.scatterer).curve(), [st.disp[0] as f64, st.disp[1] as f64]);
            (st, d)
        })
        .collect();
    Transitions { neighbours, pairs }
}

/// Canonical primitive words of `2..=q_max` bounces in which every pair of
/// consecutive steps was observed as a free-flight transition and whose
/// straight-line lower bound on length is at most `t_max`. Stops after
/// `max_words`; the flag reports it.
pub fn candidate_words(table: &Table, opts: &EnumerationOptions) -> (Vec<OrbitWord>, bool) {
    let trans: Vec<Transitions> = (0..table.len()).map(|l| sample_transitions(table, l, opts.visibility_samples)).collect();
    let mut ctx = Dfs { trans: &trans, opts, tau_min: table.tau_min(), out: Vec::new(), truncated: false };
    for rho0 in 0..table.len() {
        let mut path: Vec<Step> = vec![Step { scatterer: rho0, disp: [0, 0] }];
        ctx.run(rho0, &mut path, 0.0);
        if ctx.truncated {
            break;
        }
    }
    (ctx.out, ctx.truncated)
}

struct Dfs<'a> {
    trans: &'a [Transitions],
    opts: &'a EnumerationOptions,
    tau_min: f64,
    out: Vec<OrbitWord>,
    truncated: bool,
}

impl Dfs<'_> {
    fn allowed(&self, from: usize, a: Step, b: Step) -> bool {
        !self.opts.transition_pruning || self.trans[from].pairs.contains(&(a, b))
    }

    fn run(&mut self, rho0: usize, path: &mut Vec<Step>, partial: f64) {
        let depth = path.len();
        let cur = path[depth - 1].scatterer;
        if depth >= 2 {
            let before = path[depth - 2].scatterer;
            for &(st, d) in &self.trans[cur].neighbours {
                if st.scatterer != rho0 || partial + d > self.opts.t_max {
                    continue;
                }
                if !self.allowed(before, path[depth - 1], st) || !self.allowed(cur, st, path[1]) {
                    continue;
                }
                let mut steps = path.clone();
                steps[0].disp = st.disp;
                let w = OrbitWord::new(steps);
                if w.is_canonical() && w.is_primitive() {
                    if self.out.len() >= self.opts.max_words {
                        self.truncated = true;
                        return;
                    }
                    self.out.push(w);
                }
            }
        }
        if depth >= self.opts.q_max {
            return;
        }
        for &(st, d) in &self.trans[cur].neighbours {
            // Canonical words start at their smallest scatterer index; the
            // closing step adds at least one more flight.
            if st.scatterer < rho0 || partial + d + self.tau_min > self.opts.t_max {
                continue;
            }
            if depth >= 2 && !self.allowed(path[depth - 2].scatterer, path[depth - 1], st) {
                continue;
            }
            path.push(st);
            self.run(rho0, path, partial + d);
            path.pop();
            if self.truncated {
                return;
            }
        }
    }
}

/// Solves every candidate word in parallel; results merge by canonical word.
pub fn enumerate_spectrum(table: &Table, q_max: usize, t_max: f64) -> Result<SpectrumTable> {
    enumerate_spectrum_with(table, &EnumerationOptions::new(q_max, t_max))
}

/// Like [`enumerate_spectrum`]; a reached word budget is reported through
/// `truncated` so the partial table stays available.
pub fn enumerate_spectrum_with(table: &Table, opts: &EnumerationOptions) -> Result<SpectrumTable> {
    table.require_finite_horizon()?;
    if opts.q_max < 2 {
        return Err(Error::InvalidWord("q_max must be at least 2".into()));
    }
    let (words, truncated) = candidate_words(table, opts);
    let results: Vec<(OrbitWord, Result<GeneralizedOrbit>)> = words
        .par_iter()
        .map(|w| (w.clone(), find_generalized_orbit_with(table, w, &opts.solver)))
        .collect();
    let mut spec = SpectrumTable { q_max: opts.q_max, t_max: opts.t_max, words_examined: words.len(), truncated, ..Default::default() };
    for (w, r) in results {
        match r {
            Ok(o) => {
                if o.length > opts.t_max {
                    continue;
                }
                let e = SpectrumEntry::from_orbit(&o);
                if o.class().is_physical() {
                    spec.entries.insert(e.word.clone(), e);
                } else {
                    spec.ghosts.insert(e.word.clone(), e);
                }
            }
            Err(err) => spec.failures.push((w, err.to_string())),
        }
    }
    Ok(spec)
}

/// Pairs of distinct physical entries whose lengths differ by less than
/// `tol` (or are equal when `tol = 0`); an orbit and its time reversal are
/// one geometric orbit and are not reported.
pub fn check_simple_spectrum(spec: &SpectrumTable, tol: f64) -> Vec<(OrbitWord, OrbitWord, f64)> {
    let mut v: Vec<&SpectrumEntry> = spec.entries.values().collect();
    v.sort_by(|a, b| a.length.total_cmp(&b.length).then(a.word.cmp(&b.word)));
    let mut out = Vec::new();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let diff = v[j].length - v[i].length;
            if diff > tol {
                break;
            }
            if (diff < tol || diff == 0.0) && v[j].word != v[i].reversal {
                out.push((v[i].word.clone(), v[j].word.clone(), diff));
            }
        }
    }
    out
}

/// Replays an entry with the billiard map from its first bounce and returns
/// the largest deviation in arc length and angle after `q` steps, or an
/// error when the bounce sequence differs from the word.
pub fn replay_entry(table: &Table, e: &SpectrumEntry) -> Result<f64> {
    let w = &e.word;
    let q = w.q();
    let start = CollisionCoord::new(LiftedLabel::new([0, 0], w.scatterer(0)), e.params[0], e.phi[0]);
    let orbit = billiard_map(table, start, q as i64)?;
    if orbit.points.len() != q + 1 {
        return Err(Error::Geometry(format!("orbit of {w} truncated at a grazing collision")));
    }
    let cells = w.cells();
    let mut dev: f64 = 0.0;
    for k in 1..=q {
        let p = orbit.points[k];
        let (_, expect) = w.segment_labels(k % q);
        let expect = if k == q { expect } else { LiftedLabel::new(cells[k], w.scatterer(k)) };
        if p.label != expect {
            return Err(Error::Geometry(format!("bounce {k} of {w} hit {:?} instead of {:?}", p.label, expect)));
        }
        let sc = table.scatterer(p.label.scatterer);
        dev = dev.max(sc.arc_distance(p.s, e.params[k % q])).max((p.phi - e.phi[k % q]).abs());
    }
    Ok(dev)
}
