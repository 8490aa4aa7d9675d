//! Period-bounded enumeration of billiard cycles.

use super::cycle::{minimize_el_cached, BilliardCycle, CycleKind, LinkCache};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::spectrum::{candidate_words, EnumerationOptions, OrbitWord};
use rayon::prelude::*;

/// One class of the enriched spectrum.
#[derive(Debug, Clone)]
pub struct EnrichedEntry {
    pub word: OrbitWord,
    pub kind: CycleKind,
    pub el: f64,
    pub e: Vec<f64>,
    pub s: Vec<f64>,
    /// Total length of the boundary arcs followed by the cycle.
    pub arc_length: f64,
    pub residual: f64,
    pub doubled: bool,
}

impl EnrichedEntry {
    pub fn from_cycle(c: &BilliardCycle, table: &Table) -> Self {
        let arc_length = match c.kind {
            CycleKind::Boundary => c.el,
            _ => (0..c.word.q()).map(|k| table.scatterer(c.word.scatterer(k)).arc_distance(c.e[k], c.s[k])).sum(),
        };
        Self {
            word: c.word.clone(),
            kind: c.kind,
            el: c.el,
            e: c.e.clone(),
            s: c.s.clone(),
            arc_length,
            residual: c.residual,
            doubled: c.doubled,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EnrichedSpectrum {
    /// Sorted by period, length and word.
    pub entries: Vec<EnrichedEntry>,
    /// Words whose minimiser could not be certified.
    pub failures: Vec<(OrbitWord, String)>,
    pub q_max: usize,
    pub t_max: f64,
    pub words_examined: usize,
    pub truncated: bool,
}

impl EnrichedSpectrum {
    pub fn get(&self, w: &OrbitWord) -> Option<&EnrichedEntry> {
        self.entries.iter().find(|e| &e.word == w)
    }
}

/// Enriched spectrum with default options.
pub fn enriched_spectrum(table: &Table, q_max: usize, t_max: f64) -> Result<EnrichedSpectrum> {
    let mut opts = EnumerationOptions::new(q_max, t_max);
    opts.transition_pruning = false;
    enriched_spectrum_with(table, &opts)
}

/// Minimises the enriched length of every candidate word in parallel.
///
/// Candidates are words of visible neighbours (cycles may follow boundary
/// arcs, so no free-flight transition pruning applies) plus the boundary
/// class of each scatterer. Words with no billiard cycle are dropped.
pub fn enriched_spectrum_with(table: &Table, opts: &EnumerationOptions) -> Result<EnrichedSpectrum> {
    table.require_finite_horizon()?;
    if opts.q_max < 2 {
        return Err(Error::InvalidWord("q_max must be at least 2".into()));
    }
    let (mut words, truncated) = candidate_words(table, opts);
    words.extend((0..table.len()).map(OrbitWord::boundary));
    let cache = LinkCache::new();
    let results: Vec<(OrbitWord, Result<BilliardCycle>)> =
        words.par_iter().map(|w| (w.clone(), minimize_el_cached(table, w, &cache))).collect();
    let mut out = EnrichedSpectrum { q_max: opts.q_max, t_max: opts.t_max, words_examined: words.len(), truncated, ..Default::default() };
    for (w, r) in results {
        match r {
            Ok(c) if c.el <= opts.t_max => out.entries.push(EnrichedEntry::from_cycle(&c, table)),
            Ok(_) | Err(Error::InfeasibleWord(_)) => {}
            Err(e) => out.failures.push((w, e.to_string())),
        }
    }
    out.entries.sort_by(|a, b| a.word.q().cmp(&b.word.q()).then(a.el.total_cmp(&b.el)).then(a.word.cmp(&b.word)));
    Ok(out)
}
