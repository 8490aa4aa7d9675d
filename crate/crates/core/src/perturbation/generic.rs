//! De-grazing by retractions and length separation by tilts.

use super::bump::{BumpField, BumpMode};
use super::refit::apply_perturbations;
use super::response::first_order_response_with;
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::spectrum::{
    chord_margin, check_simple_spectrum, enumerate_spectrum, OrbitClass, OrbitWord, SpectrumEntry, SpectrumTable,
};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericityOptions {
    pub q_max: usize,
    pub t_max: f64,
    /// Bump half-width, capped at a fifth of the scatterer's perimeter.
    pub half_width: f64,
    /// Largest perturbation size ever applied.
    pub eps_max: f64,
    /// Minimum gap between distinct lengths sought by separation.
    pub gap: f64,
    pub max_rounds: usize,
    /// Halvings of `ε` tried per site.
    pub max_retries: usize,
}

impl GenericityOptions {
    pub fn new(q_max: usize, t_max: f64) -> Self {
        Self { q_max, t_max, half_width: 0.3, eps_max: 2e-3, gap: 1e-9, max_rounds: 12, max_retries: 20 }
    }
}

/// One applied perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub mode: BumpMode,
    pub scatterer: usize,
    /// Centre in the arc length of the table the entry was applied to.
    pub center: f64,
    pub half_width: f64,
    pub eps: f64,
    pub reason: String,
    /// Words whose lengths changed by more than `1e-12`.
    pub affected: Vec<OrbitWord>,
    /// Index of the step; entries sharing a step were applied together.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenericityReport {
    pub log: Vec<LogEntry>,
    /// Grazing words (de-grazing) or colliding words (separation) left over.
    pub remaining: Vec<OrbitWord>,
    pub complete: bool,
    pub steps: usize,
}

fn spectrum(table: &Table, opts: &GenericityOptions) -> Result<SpectrumTable> {
    let spec = enumerate_spectrum(table, opts.q_max, opts.t_max)?;
    spec.check_budget()?;
    Ok(spec)
}

fn grazing_words(spec: &SpectrumTable) -> BTreeSet<OrbitWord> {
    spec.entries.values().filter(|e| e.class == OrbitClass::Grazing).map(|e| e.word.clone()).collect()
}

fn changed_words(before: &SpectrumTable, after: &SpectrumTable) -> Vec<OrbitWord> {
    let mut out = Vec::new();
    let lengths = |s: &SpectrumTable| -> BTreeMap<OrbitWord, f64> {
        s.entries.iter().chain(&s.ghosts).map(|(w, e)| (w.clone(), e.length)).collect()
    };
    let (a, b) = (lengths(before), lengths(after));
    let words: BTreeSet<&OrbitWord> = a.keys().chain(b.keys()).collect();
    for w in words {
        match (a.get(w), b.get(w)) {
            (Some(x), Some(y)) if (x - y).abs() <= 1e-12 => {}
            _ => out.push(w.clone()),
        }
    }
    out
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::PerturbationTooLarge(_) | Error::HorizonViolation(_))
}

/// Where to retract for a grazing orbit: the obstacle point touched by a
/// tangent chord, or the bounce point of a tangential bounce.
fn grazing_site(table: &Table, e: &SpectrumEntry) -> (usize, f64, String) {
    let w = &e.word;
    let q = w.q();
    let mut best: (f64, Option<(usize, crate::geometry::LiftedLabel)>) = (f64::INFINITY, None);
    for k in 0..q {
        let prev = (k + q - 1) % q;
        let (from, to) = w.segment_labels(k);
        let p = table.lifted_point(from, e.params[prev]);
        let end = table.lifted_point(to, e.params[k]);
        let (m, label) = chord_margin(table, from, to, p, end);
        if m < best.0 {
            best = (m, label.map(|l| (k, l)));
        }
    }
    let (kmin, cmin) = e.phi.iter().enumerate().map(|(k, p)| (k, p.cos())).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    match best {
        (m, Some((k, label))) if m <= cmin => {
            let prev = (k + q - 1) % q;
            let (from, to) = w.segment_labels(k);
            let p = table.lifted_point(from, e.params[prev]);
            let end = table.lifted_point(to, e.params[k]);
            let v = [end[0] - p[0], end[1] - p[1]];
            let nd = [-v[1], v[0]];
            let th = nd[1].atan2(nd[0]);
            let curve = table.lift_scatterer(label);
            let r = nd[0].hypot(nd[1]);
            let offset = (p[0] * nd[0] + p[1] * nd[1]) / r;
            let top = curve.h(th);
            let bottom = -curve.h(th + PI);
            let theta = if (offset - top).abs() <= (offset - bottom).abs() { th } else { th + PI };
            let s0 = table.scatterer(label.scatterer).angle_to_arclength(theta);
            (label.scatterer, s0, format!("chord {k} of {w} tangent to scatterer {}", label.scatterer))
        }
        _ => (w.scatterer(kmin), e.params[kmin], format!("tangential bounce {kmin} of {w}")),
    }
}

/// [`degraze_with`] with default options.
pub fn degraze(table: &Table, q_max: usize, t_max: f64) -> Result<(Table, GenericityReport)> {
    degraze_with(table, &GenericityOptions::new(q_max, t_max))
}

/// Retracts scatterers at the grazing points of grazing orbits, one site
/// per step, until no orbit of period `≤ q_max` and length `≤ t_max`
/// grazes. A step starts at `ε = 10⁻³ w` and halves `ε` when convexity is
/// lost or a new grazing orbit appears.
pub fn degraze_with(table: &Table, opts: &GenericityOptions) -> Result<(Table, GenericityReport)> {
    let mut current = table.clone();
    let mut spec = spectrum(&current, opts)?;
    let mut report = GenericityReport::default();
    for step in 0..opts.max_rounds {
        let grazing = grazing_words(&spec);
        let Some(target) = grazing.iter().next().cloned() else {
            report.complete = true;
            return Ok((current, report));
        };
        let (l, s0, reason) = grazing_site(&current, &spec.entries[&target]);
        let w = opts.half_width.min(current.scatterer(l).perimeter() / 5.0);
        let field = BumpField::new(&current, l, s0, w, BumpMode::Retract)?;
        let mut eps = (1e-3 * w).min(opts.eps_max);
        let mut accepted = None;
        for _ in 0..opts.max_retries {
            match apply_perturbations(&current, &[(field, eps)]) {
                Ok(next) => {
                    let next_spec = spectrum(&next, opts)?;
                    let after = grazing_words(&next_spec);
                    if !after.contains(&target) && after.is_subset(&grazing) {
                        accepted = Some((next, next_spec));
                        break;
                    }
                }
                Err(e) if retryable(&e) => {}
                Err(e) => return Err(e),
            }
            eps *= 0.5;
        }
        let Some((next, next_spec)) = accepted else {
            report.remaining = grazing.into_iter().collect();
            return Ok((current, report));
        };
        report.log.push(LogEntry {
            mode: BumpMode::Retract,
            scatterer: l,
            center: field.center,
            half_width: w,
            eps,
            reason,
            affected: changed_words(&spec, &next_spec),
            step,
        });
        report.steps = step + 1;
        current = next;
        spec = next_spec;
    }
    report.remaining = grazing_words(&spec).into_iter().collect();
    report.complete = report.remaining.is_empty();
    Ok((current, report))
}

/// [`separate_lengths_with`] with default options and the given gap.
pub fn separate_lengths(table: &Table, q_max: usize, t_max: f64, gap: f64) -> Result<(Table, GenericityReport)> {
    separate_lengths_with(table, &GenericityOptions { gap, ..GenericityOptions::new(q_max, t_max) })
}

/// Bounce of `x` whose bump support avoids every bounce of `y` and every
/// site already chosen in this step.
fn exclusive_site(table: &Table, x: &SpectrumEntry, y: &SpectrumEntry, w: f64, used: &[(usize, f64, f64)]) -> Option<(usize, f64, f64)> {
    for k in 0..x.q() {
        let l = x.word.scatterer(k);
        let sc = table.scatterer(l);
        let wl = w.min(sc.perimeter() / 5.0);
        let s = x.params[k];
        let clear_of_y = (0..y.q()).all(|j| y.word.scatterer(j) != l || sc.arc_distance(y.params[j], s) > 1.05 * wl);
        let clear_of_sites = used.iter().all(|&(ul, us, uw)| ul != l || sc.arc_distance(us, s) > 1.05 * (wl + uw));
        if clear_of_y && clear_of_sites {
            return Some((l, s, wl));
        }
    }
    None
}

/// Tilts the boundary at bounce points exclusive to one orbit of each
/// colliding pair until all lengths (period `≤ q_max`, length `≤ t_max`)
/// differ by at least `gap`. Sites for different pairs are applied together
/// when their supports are disjoint.
pub fn separate_lengths_with(table: &Table, opts: &GenericityOptions) -> Result<(Table, GenericityReport)> {
    let mut current = table.clone();
    let mut spec = spectrum(&current, opts)?;
    let mut report = GenericityReport::default();
    for step in 0..opts.max_rounds {
        let collisions = check_simple_spectrum(&spec, opts.gap);
        if collisions.is_empty() {
            report.complete = true;
            return Ok((current, report));
        }
        let mut used: Vec<(usize, f64, f64)> = Vec::new();
        let mut touched: BTreeSet<OrbitWord> = BTreeSet::new();
        let mut sites: Vec<(BumpField, f64, String)> = Vec::new();
        for (a, b, _) in &collisions {
            if touched.contains(a) || touched.contains(b) {
                continue;
            }
            let (ea, eb) = (&spec.entries[a], &spec.entries[b]);
            let chosen = exclusive_site(&current, ea, eb, opts.half_width, &used)
                .map(|s| (s, ea, BumpMode::Tilt, 0.0))
                .or_else(|| exclusive_site(&current, eb, ea, opts.half_width, &used).map(|s| (s, eb, BumpMode::Tilt, 0.0)));
            let ((l, s, wl), owner, mode, shift) = match chosen {
                Some(c) => c,
                None => {
                    // Shared bounce points: tilt off-centre so both orbits
                    // move at first order with different angles.
                    let l = ea.word.scatterer(0);
                    let wl = opts.half_width.min(current.scatterer(l).perimeter() / 5.0);
                    if used.iter().any(|&(ul, us, uw)| ul == l && current.scatterer(l).arc_distance(us, ea.params[0]) <= 1.05 * (wl + uw)) {
                        continue;
                    }
                    ((l, ea.params[0], wl), ea, BumpMode::Tilt, 0.5 * wl)
                }
            };
            let field = BumpField::new(&current, l, s + shift, wl, mode)?;
            let eps = match first_order_response_with(&current, &owner.word, &owner.params, &field, &[]) {
                Ok(r) if shift == 0.0 && r.delta.abs() < 1e-12 && r.delta2.abs() > 0.0 => {
                    (100.0 * opts.gap / r.delta2.abs()).sqrt().min(opts.eps_max)
                }
                _ => opts.eps_max,
            };
            used.push((l, s, wl));
            touched.insert(a.clone());
            touched.insert(b.clone());
            sites.push((field, eps, format!("lengths of {a} and {b} within {:e}", opts.gap)));
        }
        if sites.is_empty() {
            break;
        }
        let mut scale = 1.0;
        let mut next = None;
        for _ in 0..opts.max_retries {
            let fields: Vec<(BumpField, f64)> = sites.iter().map(|(f, e, _)| (*f, e * scale)).collect();
            match apply_perturbations(&current, &fields) {
                Ok(t) => {
                    next = Some(t);
                    break;
                }
                Err(e) if retryable(&e) => scale *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some(next) = next else { break };
        let next_spec = spectrum(&next, opts)?;
        let affected = changed_words(&spec, &next_spec);
        for (f, e, reason) in sites {
            report.log.push(LogEntry {
                mode: f.mode,
                scatterer: f.scatterer,
                center: f.center,
                half_width: f.half_width,
                eps: e * scale,
                reason,
                affected: affected.clone(),
                step,
            });
        }
        report.steps = step + 1;
        current = next;
        spec = next_spec;
    }
    let left = check_simple_spectrum(&spec, opts.gap);
    report.complete = left.is_empty();
    let words: BTreeSet<OrbitWord> = left.into_iter().flat_map(|(a, b, _)| [a, b]).collect();
    report.remaining = words.into_iter().collect();
    Ok((current, report))
}

/// Re-applies a log to the table it started from; entries sharing a step
/// are applied together.
pub fn replay_log(table: &Table, log: &[LogEntry]) -> Result<Table> {
    let mut current = table.clone();
    let mut i = 0;
    while i < log.len() {
        let step = log[i].step;
        let mut fields = Vec::new();
        while i < log.len() && log[i].step == step {
            let e = &log[i];
            fields.push((BumpField::new(&current, e.scatterer, e.center, e.half_width, e.mode)?, e.eps));
            i += 1;
        }
        current = apply_perturbations(&current, &fields)?;
    }
    Ok(current)
}
