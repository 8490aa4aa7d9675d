//! Compactly supported bump profiles on a scatterer.

use crate::error::{Error, Result};
use crate::geometry::Table;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BumpMode {
    /// `λ(s₀) = 1`, `λ ≥ 0`.
    Move,
    /// `λ(s₀) = 0`, `λ′(s₀) = 1/w`.
    Tilt,
    /// `λ(s₀) = −1`, `λ ≤ 0`.
    Retract,
}

impl BumpMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BumpMode::Move => "move",
            BumpMode::Tilt => "tilt",
            BumpMode::Retract => "retract",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "move" => Some(BumpMode::Move),
            "tilt" => Some(BumpMode::Tilt),
            "retract" => Some(BumpMode::Retract),
            _ => None,
        }
    }
}

impl fmt::Display for BumpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Profile `λ` supported in `(s₀ − w, s₀ + w)` on scatterer `l`, built from
/// `b(t) = exp(1 − 1/(1 − t²))` with `t = (s − s₀)/w` taken periodically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpField {
    pub scatterer: usize,
    pub center: f64,
    pub half_width: f64,
    pub mode: BumpMode,
    perimeter: f64,
}

impl BumpField {
    pub fn new(table: &Table, scatterer: usize, center: f64, half_width: f64, mode: BumpMode) -> Result<Self> {
        if scatterer >= table.len() {
            return Err(Error::Domain(format!("scatterer {scatterer} out of range")));
        }
        let perimeter = table.scatterer(scatterer).perimeter();
        if !(half_width > 0.0 && half_width < 0.5 * perimeter) {
            return Err(Error::Domain(format!("half-width {half_width} outside (0, {})", 0.5 * perimeter)));
        }
        if !center.is_finite() {
            return Err(Error::Domain("non-finite bump centre".into()));
        }
        Ok(Self { scatterer, center: center.rem_euclid(perimeter), half_width, mode, perimeter })
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Signed periodic offset `(s − s₀)` reduced to `[−ℓ/2, ℓ/2)`.
    fn offset(&self, s: f64) -> f64 {
        let l = self.perimeter;
        (s - self.center + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    /// Whether `s` lies in the open support.
    pub fn contains(&self, s: f64) -> bool {
        self.offset(s).abs() < self.half_width
    }

    /// `(λ(s), λ′(s))`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let t = self.offset(s) / self.half_width;
        if t.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let g = 1.0 - t * t;
        let b = (1.0 - 1.0 / g).exp();
        let db = -2.0 * t / (g * g) * b;
        let w = self.half_width;
        match self.mode {
            BumpMode::Move => (b, db / w),
            BumpMode::Retract => (-b, -db / w),
            BumpMode::Tilt => (t * b, (b + t * db) / w),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }
}
