//! Deterministic text reports, log round trips and spectrum comparison.
//!
//! Every report starts with `#` header lines (tool version, configuration
//! hash, seed) followed by one tab-separated row per item. Floats are
//! written with 17 significant digits.

use crate::enriched::{enriched_spectrum, CycleKind, EnrichedSpectrum};
use crate::error::{Error, Result};
use crate::geometry::tablefile::fmt17;
use crate::geometry::Table;
use crate::kourganoff::{ClosedGeodesic, ConvergenceReport};
use crate::perturbation::{BumpMode, GenericityReport, LogEntry, ResponseReport};
use crate::spectrum::{OrbitWord, SpectrumTable};
use std::collections::BTreeMap;
use std::fmt::Write;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Words within this distance of the length cutoff may appear on one side
/// of a comparison only.
pub const CUTOFF_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportHeader {
    pub config_hash: String,
    pub seed: u64,
}

impl ReportHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self { config_hash: config_hash.into(), seed }
    }

    /// Appends the header lines of a report of the given kind.
    pub fn render(&self, kind: &str, out: &mut String) {
        let _ = writeln!(out, "# sinai {TOOL_VERSION}");
        let _ = writeln!(out, "# config_hash {}", self.config_hash);
        let _ = writeln!(out, "# seed {}", self.seed);
        let _ = writeln!(out, "# report {kind}");
    }
}

/// Physical orbits and ghosts sorted by period, length and word.
pub fn spectrum_report(header: &ReportHeader, spec: &SpectrumTable) -> String {
    let mut out = String::new();
    header.render("spectrum", &mut out);
    let _ = writeln!(out, "# q_max {} t_max {} words {} truncated {}", spec.q_max, fmt17(spec.t_max), spec.words_examined, spec.truncated);
    out.push_str("word\tq\tlength\tclass\tlambda_min\tgrad_norm\tmargin\tnear_grazing\n");
    let mut rows: Vec<_> = spec.entries.values().chain(spec.ghosts.values()).collect();
    rows.sort_by(|a, b| a.q().cmp(&b.q()).then(a.length.total_cmp(&b.length)).then(a.word.cmp(&b.word)));
    for e in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.word,
            e.q(),
            fmt17(e.length),
            e.class.as_str(),
            fmt17(e.hess_min_eig),
            fmt17(e.grad_norm),
            fmt17(e.margin),
            e.near_grazing
        );
    }
    for (w, msg) in &spec.failures {
        let _ = writeln!(out, "# failed {w}: {msg}");
    }
    out
}

/// Enriched classes with per-bounce transition flags (`S` specular, `W`
/// boundary arc).
pub fn enriched_report(header: &ReportHeader, spec: &EnrichedSpectrum, table: &Table) -> String {
    let mut out = String::new();
    header.render("enriched", &mut out);
    let _ = writeln!(out, "# q_max {} t_max {} words {} truncated {}", spec.q_max, fmt17(spec.t_max), spec.words_examined, spec.truncated);
    out.push_str("word\tq\tEL\tkind\tarc_length\ttransitions\tdoubled\n");
    for e in &spec.entries {
        let flags: String = match e.kind {
            CycleKind::Boundary => "B".into(),
            _ => (0..e.word.q())
                .map(|k| if table.scatterer(e.word.scatterer(k)).arc_distance(e.e[k], e.s[k]) > 1e-12 { 'W' } else { 'S' })
                .collect(),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.word,
            e.word.q(),
            fmt17(e.el),
            e.kind.as_str(),
            fmt17(e.arc_length),
            flags,
            e.doubled
        );
    }
    for (w, msg) in &spec.failures {
        let _ = writeln!(out, "# failed {w}: {msg}");
    }
    out
}

/// Reads `(word, EL)` rows and the length cutoff back from an enriched report.
pub fn parse_enriched_report(text: &str) -> Result<(Vec<(OrbitWord, f64)>, f64)> {
    let mut rows = Vec::new();
    let mut t_max = f64::INFINITY;
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(rest) = line.strip_prefix("# q_max ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if let Some(pos) = parts.iter().position(|p| *p == "t_max") {
                t_max = parse_f64(parts.get(pos + 1).copied().unwrap_or(""), line_no)?;
            }
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_columns {
            if !line.starts_with("word\tq\tEL") {
                return Err(Error::Parse { line: line_no, message: "expected the enriched report column header".into() });
            }
            seen_columns = true;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(Error::Parse { line: line_no, message: format!("expected at least 3 columns, found {}", cols.len()) });
        }
        let word = OrbitWord::parse(cols[0]).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        rows.push((word, parse_f64(cols[2], line_no)?));
    }
    if !seen_columns {
        return Err(Error::Parse { line: text.lines().count().max(1), message: "no enriched report rows".into() });
    }
    Ok((rows, t_max))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse { line, message: format!("bad number {s:?}: {e}") })
}

/// Length difference of one class present in both spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDeviation {
    pub word: OrbitWord,
    pub el_a: f64,
    pub el_b: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    /// Sorted by decreasing deviation, then word.
    pub matched: Vec<WordDeviation>,
    pub max_deviation: f64,
    pub only_a: Vec<OrbitWord>,
    pub only_b: Vec<OrbitWord>,
}

impl ComparisonReport {
    /// Same words on both sides and every deviation below `tol`.
    pub fn is_match(&self, tol: f64) -> bool {
        self.only_a.is_empty() && self.only_b.is_empty() && self.max_deviation < tol
    }

    /// Report with the inputs exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            matched: self.matched.iter().map(|d| WordDeviation { el_a: d.el_b, el_b: d.el_a, ..d.clone() }).collect(),
            max_deviation: self.max_deviation,
            only_a: self.only_b.clone(),
            only_b: self.only_a.clone(),
        }
    }

    pub fn render(&self, header: &ReportHeader) -> String {
        let mut out = String::new();
        header.render("compare", &mut out);
        let _ = writeln!(out, "# matched {} only_a {} only_b {} max_deviation {}", self.matched.len(), self.only_a.len(), self.only_b.len(), fmt17(self.max_deviation));
        out.push_str("word\tEL_a\tEL_b\tdeviation\n");
        for d in &self.matched {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", d.word, fmt17(d.el_a), fmt17(d.el_b), fmt17(d.deviation));
        }
        for w in &self.only_a {
            let _ = writeln!(out, "# only_a {w}");
        }
        for w in &self.only_b {
            let _ = writeln!(out, "# only_b {w}");
        }
        out
    }
}

/// Matches classes by canonical word. Words missing on one side are
/// ignored when their length is within [`CUTOFF_SLACK`] of `t_max`.
pub fn compare_spectra(a: &[(OrbitWord, f64)], b: &[(OrbitWord, f64)], t_max: f64) -> ComparisonReport {
    let index = |v: &[(OrbitWord, f64)]| v.iter().map(|(w, l)| (w.canonical(), *l)).collect::<BTreeMap<_, _>>();
    let (ma, mb) = (index(a), index(b));
    let near_cutoff = |l: f64| l >= t_max - CUTOFF_SLACK;
    let mut matched: Vec<WordDeviation> = ma
        .iter()
        .filter_map(|(w, la)| mb.get(w).map(|lb| WordDeviation { word: w.clone(), el_a: *la, el_b: *lb, deviation: (la - lb).abs() }))
        .collect();
    matched.sort_by(|x, y| y.deviation.total_cmp(&x.deviation).then(x.word.cmp(&y.word)));
    let missing = |from: &BTreeMap<OrbitWord, f64>, other: &BTreeMap<OrbitWord, f64>| {
        from.iter().filter(|(w, l)| !other.contains_key(*w) && !near_cutoff(**l)).map(|(w, _)| w.clone()).collect::<Vec<_>>()
    };
    ComparisonReport {
        max_deviation: matched.first().map_or(0.0, |d| d.deviation),
        only_a: missing(&ma, &mb),
        only_b: missing(&mb, &ma),
        matched,
    }
}

pub fn compare_enriched(a: &EnrichedSpectrum, b: &EnrichedSpectrum) -> ComparisonReport {
    let rows = |s: &EnrichedSpectrum| s.entries.iter().map(|e| (e.word.clone(), e.el)).collect::<Vec<_>>();
    compare_spectra(&rows(a), &rows(b), a.t_max.min(b.t_max))
}

/// Enriched spectra of two tables with the same number of scatterers,
/// compared word by word.
pub fn compare_tables(a: &Table, b: &Table, q_max: usize, t_max: f64) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::IncomparableTables(format!("tables have {} and {} scatterers", a.len(), b.len())));
    }
    let sa = enriched_spectrum(a, q_max, t_max)?;
    let sb = enriched_spectrum(b, q_max, t_max)?;
    Ok(compare_enriched(&sa, &sb))
}

/// Perturbation log; one row per applied field.
pub fn genericity_report(header: &ReportHeader, kind: &str, report: &GenericityReport) -> String {
    let mut out = String::new();
    header.render(kind, &mut out);
    let _ = writeln!(out, "# steps {} complete {} remaining {}", report.steps, report.complete, report.remaining.len());
    out.push_str("step\tmode\tscatterer\tcenter\thalf_width\teps\treason\taffected\n");
    for e in &report.log {
        let affected: Vec<String> = e.affected.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.step,
            e.mode,
            e.scatterer,
            fmt17(e.center),
            fmt17(e.half_width),
            fmt17(e.eps),
            e.reason.replace(['\t', '\n'], " "),
            affected.join(" ")
        );
    }
    for w in &report.remaining {
        let _ = writeln!(out, "# remaining {w}");
    }
    out
}

/// Reads the log rows of a perturbation report back for replay.
pub fn parse_log(text: &str) -> Result<Vec<LogEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with('#') || line.trim().is_empty() || line.starts_with("step\t") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 7 {
            return Err(Error::Parse { line: line_no, message: format!("expected at least 7 columns, found {}", cols.len()) });
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse { line: line_no, message: format!("bad integer {s:?}: {e}") });
        let mode = BumpMode::parse(cols[1]).ok_or_else(|| Error::Parse { line: line_no, message: format!("unknown mode {:?}", cols[1]) })?;
        let affected = match cols.get(7) {
            Some(s) if !s.trim().is_empty() => s
                .split_whitespace()
                .map(|w| OrbitWord::parse(w).map_err(|e| Error::Parse { line: line_no, message: e.to_string() }))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        out.push(LogEntry {
            step: int(cols[0])?,
            mode,
            scatterer: int(cols[2])?,
            center: parse_f64(cols[3], line_no)?,
            half_width: parse_f64(cols[4], line_no)?,
            eps: parse_f64(cols[5], line_no)?,
            reason: cols[6].to_string(),
            affected,
        });
    }
    Ok(out)
}

/// Response of one orbit with its validation samples.
pub fn response_report(header: &ReportHeader, r: &ResponseReport) -> String {
    let mut out = String::new();
    header.render("response", &mut out);
    let join = |v: &[f64]| v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "# word {}", r.word);
    let _ = writeln!(out, "# length {}", fmt17(r.length));
    let _ = writeln!(out, "# p_lambda {}", fmt17(r.p_value));
    let _ = writeln!(out, "# delta {}", fmt17(r.delta));
    let _ = writeln!(out, "# delta2 {}", fmt17(r.delta2));
    let _ = writeln!(out, "# residual {}", fmt17(r.residual));
    let _ = writeln!(out, "# psi {}", join(&r.psi));
    out.push_str("eps\tlength_change\tshift_error\tlength_error\tshift\n");
    for s in &r.samples {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", fmt17(s.eps), fmt17(s.length_change), fmt17(s.shift_error), fmt17(s.length_error), join(&s.shift));
    }
    let (rs, rl) = r.error_ratios();
    let _ = writeln!(out, "# shift_error_ratios {}", join(&rs));
    let _ = writeln!(out, "# length_error_ratios {}", join(&rl));
    out
}

/// Sup-distances per flattening parameter, one row per `(ε, start)`.
pub fn convergence_report(header: &ReportHeader, reports: &[ConvergenceReport]) -> String {
    let mut out = String::new();
    header.render("kourganoff-converge", &mut out);
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(
            out,
            "# start {i} point {} {} direction {} {} t_end {} collisions {} min_cos {}",
            fmt17(r.point[0]),
            fmt17(r.point[1]),
            fmt17(r.direction[0]),
            fmt17(r.direction[1]),
            fmt17(r.t_end),
            r.collisions,
            fmt17(r.min_cos)
        );
    }
    out.push_str("eps\tstart\tsup_distance\tseam_crossings\tsteps\trejected\tmax_speed_drift\n");
    let mut rows: Vec<(f64, usize, &crate::kourganoff::ConvergenceRow)> =
        reports.iter().enumerate().flat_map(|(i, r)| r.rows.iter().map(move |row| (row.eps, i, row))).collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (eps, i, row) in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt17(eps),
            i,
            fmt17(row.sup_distance),
            row.crossings,
            row.steps,
            row.rejected,
            fmt17(row.max_speed_drift)
        );
    }
    out
}

/// Closed-geodesic lengths against the enriched value of their class.
pub fn closed_geodesic_report(header: &ReportHeader, rows: &[ClosedGeodesic]) -> String {
    let mut out = String::new();
    header.render("kourganoff-closed-geodesic", &mut out);
    out.push_str("eps\tword\tlength\tEL\texcess\tturns\tclosure\titerations\n");
    for c in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt17(c.eps),
            c.word,
            fmt17(c.length),
            fmt17(c.el),
            fmt17(c.length - c.el),
            c.turns,
            fmt17(c.closure),
            c.iterations
        );
    }
    out
}
