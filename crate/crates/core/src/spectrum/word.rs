//! Cyclic orbit words: scatterer indices with cell displacements.

use crate::error::{Error, Result};
use crate::geometry::{LiftedLabel, Table};
use std::fmt;

/// One bounce of a cyclic word: the scatterer hit and the cell displacement
/// from the previous bounce (cyclically) to this one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub scatterer: usize,
    pub disp: [i64; 2],
}

/// Cyclic sequence `(ρ_k, I_k)`; `steps[0].disp` closes the cycle.
///
/// With `C_0 = (0, 0)` and `C_k = C_{k−1} + I_k`, bounce `k` lies on the
/// lifted scatterer `(C_k; ρ_k)`; the segment into bounce 0 starts at
/// bounce `q − 1` and ends on `(C_{q−1} + I_0; ρ_0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrbitWord {
    steps: Vec<Step>,
}

impl OrbitWord {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    /// Builds a word from scatterer indices and displacements `I_1..I_q`
    /// (the last one closes the cycle).
    pub fn from_rho_i(rho: &[usize], disps: &[[i64; 2]]) -> Self {
        let q = rho.len();
        let steps = (0..q).map(|k| Step { scatterer: rho[k], disp: disps[(k + q - 1) % q] }).collect();
        Self { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn q(&self) -> usize {
        self.steps.len()
    }

    pub fn scatterer(&self, k: usize) -> usize {
        self.steps[k % self.q()].scatterer
    }

    /// Cells `C_0..C_{q−1}` of the bounces.
    pub fn cells(&self) -> Vec<[i64; 2]> {
        let mut c = [0i64, 0i64];
        let mut out = vec![c];
        for st in self.steps.iter().skip(1) {
            c = [c[0] + st.disp[0], c[1] + st.disp[1]];
            out.push(c);
        }
        out
    }

    /// Total translation `Σ I_k` after one period.
    pub fn translation(&self) -> [i64; 2] {
        self.steps.iter().fold([0, 0], |a, s| [a[0] + s.disp[0], a[1] + s.disp[1]])
    }

    /// Lifted labels of the segment into bounce `k`: `(from, to)`.
    pub fn segment_labels(&self, k: usize) -> (LiftedLabel, LiftedLabel) {
        let q = self.q();
        let cells = self.cells();
        let prev = (k + q - 1) % q;
        let from = LiftedLabel::new(cells[prev], self.steps[prev].scatterer);
        let to_cell = [cells[prev][0] + self.steps[k].disp[0], cells[prev][1] + self.steps[k].disp[1]];
        (from, LiftedLabel::new(to_cell, self.steps[k].scatterer))
    }

    /// Checks length, scatterer range, displacement bound and that
    /// consecutive lifted scatterers differ.
    pub fn validate(&self, table: &Table) -> Result<()> {
        if self.q() < 2 {
            return Err(Error::InvalidWord("a cyclic word needs at least two bounces".into()));
        }
        let kc = table.k_cell();
        for (k, st) in self.steps.iter().enumerate() {
            if st.scatterer >= table.len() {
                return Err(Error::InvalidWord(format!("bounce {k}: scatterer {} out of range", st.scatterer)));
            }
            if st.disp[0].abs() > kc || st.disp[1].abs() > kc {
                return Err(Error::InvalidWord(format!("bounce {k}: displacement {:?} exceeds K_cell = {kc}", st.disp)));
            }
            let prev = self.steps[(k + self.q() - 1) % self.q()].scatterer;
            if st.disp == [0, 0] && st.scatterer == prev {
                return Err(Error::InvalidWord(format!(
                    "bounces {} and {k} are on the same lifted scatterer",
                    (k + self.q() - 1) % self.q()
                )));
            }
        }
        Ok(())
    }

    /// Word read from bounce `r` onwards.
    pub fn rotated(&self, r: usize) -> Self {
        let q = self.q();
        Self { steps: (0..q).map(|j| self.steps[(j + r) % q]).collect() }
    }

    /// Lexicographically smallest rotation and the rotation index used.
    pub fn canonical_with_rotation(&self) -> (Self, usize) {
        let mut best = (self.clone(), 0);
        for r in 1..self.q() {
            let w = self.rotated(r);
            if w < best.0 {
                best = (w, r);
            }
        }
        best
    }

    pub fn canonical(&self) -> Self {
        self.canonical_with_rotation().0
    }

    pub fn is_canonical(&self) -> bool {
        (1..self.q()).all(|r| self.rotated(r) >= *self)
    }

    /// True when the word is not a repetition of a shorter word.
    pub fn is_primitive(&self) -> bool {
        let q = self.q();
        (1..q).filter(|d| q % d == 0).all(|d| (0..q).any(|k| self.steps[k] != self.steps[(k + d) % q]))
    }

    /// Word of the time-reversed orbit.
    pub fn reversed(&self) -> Self {
        let q = self.q();
        let steps = (0..q)
            .map(|j| {
                let d = self.steps[(q - j) % q].disp;
                Step { scatterer: self.steps[q - 1 - j].scatterer, disp: [-d[0], -d[1]] }
            })
            .collect();
        Self { steps }
    }

    /// Boundary class of scatterer `l`: a single step winding once around it.
    pub fn boundary(l: usize) -> Self {
        Self { steps: vec![Step { scatterer: l, disp: [0, 0] }] }
    }

    pub fn is_boundary(&self) -> bool {
        self.q() == 1 && self.steps[0].disp == [0, 0]
    }

    /// Parses the display form `(i,j;l),(i,j;l),…` of lifted bounces.
    pub fn parse(text: &str) -> Result<Self> {
        let syms = crate::coding::parse_symbols(text).map_err(|message| Error::Parse { line: 1, message })?;
        if syms.is_empty() {
            return Err(Error::Parse { line: 1, message: "empty word".into() });
        }
        if syms.len() == 1 {
            return Ok(Self::boundary(syms[0].scatterer));
        }
        let q = syms.len() - 1;
        if syms[q].scatterer != syms[0].scatterer {
            return Err(Error::Parse { line: 1, message: "last symbol must repeat the first scatterer (closing bounce)".into() });
        }
        let steps = (0..q)
            .map(|k| {
                let prev = if k == 0 { q - 1 } else { k - 1 };
                let (a, b) = if k == 0 { (syms[prev], syms[q]) } else { (syms[prev], syms[k]) };
                Step { scatterer: syms[k].scatterer, disp: [b.cell[0] - a.cell[0], b.cell[1] - a.cell[1]] }
            })
            .collect();
        Ok(Self { steps })
    }
}

impl fmt::Display for OrbitWord {
    /// Lifted bounces `C_0..C_{q−1}` followed by the closing bounce
    /// `C_{q−1} + I_0` on `ρ_0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = self.cells();
        let q = self.q();
        for k in 0..q {
            write!(f, "({},{};{}),", cells[k][0], cells[k][1], self.steps[k].scatterer)?;
        }
        let last = cells[q - 1];
        let d = self.steps[0].disp;
        write!(f, "({},{};{})", last[0] + d[0], last[1] + d[1], self.steps[0].scatterer)
    }
}
