//! Symbolic coding of billiard orbits over the alphabet `ℤ² × {scatterers}`,
//! the two-sided ultrametric on codes and the Hölder-inverse check.

use crate::dynamics::{billiard_map, CollisionCoord};
use crate::error::{Error, Result};
use crate::geometry::{LiftedLabel, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

/// A finite piece of a symbolic code: `symbols[k]` is the symbol with index
/// `offset + k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    pub symbols: Vec<LiftedLabel>,
    pub offset: i64,
    /// Consecutive symbols are distinct and within the cell-displacement bound.
    pub admissible: bool,
    /// False when a grazing collision truncated the encoding.
    pub complete: bool,
}

impl Word {
    pub fn new(symbols: Vec<LiftedLabel>, offset: i64, k_cell: i64) -> Self {
        let admissible = symbols.windows(2).all(|w| {
            let d = [w[1].cell[0] - w[0].cell[0], w[1].cell[1] - w[0].cell[1]];
            w[0] != w[1] && d[0].abs() <= k_cell && d[1].abs() <= k_cell
        });
        Self { symbols, offset, admissible, complete: true }
    }

    /// Symbol at index `i`, if stored.
    pub fn get(&self, i: i64) -> Option<LiftedLabel> {
        let k = i - self.offset;
        if k < 0 {
            return None;
        }
        self.symbols.get(k as usize).copied()
    }

    /// Index range `[first, last]`.
    pub fn range(&self) -> (i64, i64) {
        (self.offset, self.offset + self.symbols.len() as i64 - 1)
    }

    /// Translates every symbol by `v`.
    pub fn translated(&self, v: [i64; 2]) -> Self {
        Self { symbols: self.symbols.iter().map(|s| s.translated(v)).collect(), ..self.clone() }
    }

    /// Representative of the ℤ²-orbit: the cell of symbol 0 (or of the
    /// first symbol when index 0 is absent) moved to `(0, 0)`.
    pub fn quotient(&self) -> QuotientWord {
        let anchor = self.get(0).unwrap_or(self.symbols[0]);
        QuotientWord(self.translated([-anchor.cell[0], -anchor.cell[1]]))
    }

    /// Drops the first symbol and shifts indices so the old index 1 becomes 0.
    pub fn shifted(&self) -> Self {
        Self { offset: self.offset, symbols: self.symbols[1..].to_vec(), ..self.clone() }
    }

    /// Serialises as a header line and comma-separated `(i,j;l)` tokens.
    pub fn to_text(&self, canonical: bool) -> String {
        let mut out = format!("word offset={} canonical={}\n", self.offset, canonical);
        let toks: Vec<String> = self.symbols.iter().map(format_symbol).collect();
        out.push_str(&toks.join(","));
        out.push('\n');
        out
    }

    /// Parses [`Word::to_text`] output; returns the word and the canonical flag.
    pub fn from_text(text: &str, k_cell: i64) -> Result<(Self, bool)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, message: "empty word".into() })?;
        let mut offset = None;
        let mut canonical = None;
        for part in header.split_whitespace().skip(1) {
            if let Some(v) = part.strip_prefix("offset=") {
                offset = v.parse::<i64>().ok();
            } else if let Some(v) = part.strip_prefix("canonical=") {
                canonical = v.parse::<bool>().ok();
            }
        }
        if !header.starts_with("word") {
            return Err(Error::Parse { line: 1, message: "missing word header".into() });
        }
        let offset = offset.ok_or(Error::Parse { line: 1, message: "missing offset".into() })?;
        let canonical = canonical.ok_or(Error::Parse { line: 1, message: "missing canonical flag".into() })?;
        let body = lines.next().unwrap_or("");
        let symbols = parse_symbols(body).map_err(|message| Error::Parse { line: 2, message })?;
        Ok((Word::new(symbols, offset, k_cell), canonical))
    }
}

/// Word normalised modulo the ℤ² action.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuotientWord(pub Word);

pub fn format_symbol(s: &LiftedLabel) -> String {
    format!("({},{};{})", s.cell[0], s.cell[1], s.scatterer)
}

/// Parses a comma-separated list of `(i,j;l)` tokens.
pub fn parse_symbols(body: &str) -> std::result::Result<Vec<LiftedLabel>, String> {
    let mut out = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        let open = rest.find('(').ok_or("expected '('")?;
        let close = rest.find(')').ok_or("expected ')'")?;
        let inner = &rest[open + 1..close];
        let (cells, l) = inner.split_once(';').ok_or("expected ';' in symbol")?;
        let (i, j) = cells.split_once(',').ok_or("expected ',' in cell")?;
        let parse = |x: &str| x.trim().parse::<i64>().map_err(|e| format!("bad integer {x:?}: {e}"));
        let l = l.trim().parse::<usize>().map_err(|e| format!("bad scatterer {l:?}: {e}"))?;
        out.push(LiftedLabel::new([parse(i)?, parse(j)?], l));
        rest = rest[close + 1..].trim_start_matches([',', ' ']);
    }
    Ok(out)
}

/// Code of the orbit of `c` (placed in its own cell) for indices `−n..=n`.
pub fn encode_orbit(table: &Table, c: CollisionCoord, n: usize) -> Result<Word> {
    let fwd = billiard_map(table, c, n as i64)?;
    let bwd = billiard_map(table, c, -(n as i64))?;
    let mut symbols: Vec<LiftedLabel> = bwd.points.iter().skip(1).rev().map(|p| p.label).collect();
    let offset = -(symbols.len() as i64);
    symbols.extend(fwd.points.iter().map(|p| p.label));
    let mut w = Word::new(symbols, offset, table.k_cell());
    w.complete = fwd.failure.is_none() && bwd.failure.is_none() && fwd.points.len() == n + 1 && bwd.points.len() == n + 1;
    Ok(w)
}

/// Two-sided metric `2^{−m}`, `m` the largest depth with agreement on
/// `|i| ≤ m`; the distance is 1 when the symbols at index 0 differ and 0
/// when the words agree on their whole common symmetric range and are equal.
pub fn rho_distance(w1: &Word, w2: &Word) -> f64 {
    if w1.get(0) != w2.get(0) || w1.get(0).is_none() {
        return 1.0;
    }
    let (a1, b1) = w1.range();
    let (a2, b2) = w2.range();
    let limit = (-a1).min(b1).min(-a2).min(b2);
    let mut m = 0;
    while m < limit {
        let k = m + 1;
        if w1.get(k) != w2.get(k) || w1.get(-k) != w2.get(-k) {
            break;
        }
        m = k;
    }
    2f64.powi(-(m as i32))
}

/// Expansion rate of dispersing wave fronts, `(τ_max + 1/(2 K_min))⁻¹`.
pub fn b_min(tau_max: f64, k_min: f64) -> Result<f64> {
    if k_min <= 0.0 || !k_min.is_finite() {
        return Err(Error::InvalidTable(format!("minimum curvature must be positive, got {k_min}")));
    }
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(Error::InvalidTable(format!("τ_max must be finite and positive, got {tau_max}")));
    }
    Ok(1.0 / (tau_max + 0.5 / k_min))
}

pub fn expansion_constant(table: &Table) -> Result<f64> {
    b_min(table.tau_max(), table.k_min())
}

/// Empirical Hölder constant at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderSample {
    pub depth: usize,
    /// `max ‖x − y‖ · e^{B_min n}` over same-cylinder pairs.
    pub constant: f64,
    pub pairs: usize,
}

/// Phase-space distance between two points on the same scatterer.
pub fn phase_distance(table: &Table, x: &CollisionCoord, y: &CollisionCoord) -> f64 {
    let ds = table.scatterer(x.label.scatterer).arc_distance(x.s, y.s);
    (ds * ds + (x.phi - y.phi).powi(2)).sqrt()
}

/// Samples pairs `(x, y)` with `y` a log-uniformly scaled perturbation of a
/// random regular `x`; pairs sharing the depth-`n` cylinder contribute
/// `‖x − y‖ e^{B_min n}` and the maximum is returned.
pub fn holder_inverse_check(table: &Table, samples: usize, depth: usize, seed: u64) -> Result<HolderSample> {
    let b = expansion_constant(table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (depth as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut best = 0.0f64;
    let mut pairs = 0;
    let k = table.len();
    for _ in 0..samples {
        let l = rng.gen_range(0..k);
        let sc = table.scatterer(l);
        let x = CollisionCoord::new(LiftedLabel::new([0, 0], l), rng.gen::<f64>() * sc.perimeter(), (rng.gen::<f64>() - 0.5) * 3.1);
        let scale = 10f64.powf(-rng.gen::<f64>() * 9.0);
        let ang = rng.gen::<f64>() * std::f64::consts::TAU;
        let y = CollisionCoord::new(x.label, sc.wrap(x.s + scale * ang.cos()), (x.phi + scale * ang.sin()).clamp(-1.5707, 1.5707));
        let wx = encode_orbit(table, x, depth)?;
        if !wx.complete {
            continue;
        }
        let wy = encode_orbit(table, y, depth)?;
        if !wy.complete || wx.symbols != wy.symbols {
            continue;
        }
        pairs += 1;
        best = best.max(phase_distance(table, &x, &y) * (b * depth as f64).exp());
    }
    if pairs == 0 {
        return Err(Error::InsufficientSamples(format!("no same-cylinder pair found at depth {depth}")));
    }
    Ok(HolderSample { depth, constant: best, pairs })
}

/// Renders a word list as text, one word per line.
pub fn words_to_text(words: &[Word]) -> String {
    let mut out = String::new();
    for w in words {
        let _ = write!(out, "{}", w.to_text(false));
    }
    out
}
