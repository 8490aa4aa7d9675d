//! Table file format.
//!
//! ```text
//! version = 1
//! torus = "unit-square"
//!
//! [[scatterers]]
//! fourier_coeffs = [4.0000000000000002e-1, 0.0000000000000000e0, 0.0000000000000000e0]
//! ```
//!
//! Coefficients are written with 17 significant digits so that a
//! write/read cycle reproduces every `f64` bit for bit.

use super::support::SupportCurve;
use super::table::{Table, TableOptions};
use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::Path;

pub const FORMAT_VERSION: i64 = 1;
pub const TORUS: &str = "unit-square";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    version: i64,
    torus: String,
    scatterers: Vec<ScattererEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScattererEntry {
    fourier_coeffs: Vec<f64>,
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialises support coefficients to the table format.
pub fn write_table_string(curves: &[SupportCurve]) -> String {
    let mut out = format!("version = {FORMAT_VERSION}\ntorus = \"{TORUS}\"\n");
    for c in curves {
        let coeffs: Vec<String> = c.coeffs().iter().map(|&x| fmt17(x)).collect();
        out.push_str("\n[[scatterers]]\nfourier_coeffs = [");
        out.push_str(&coeffs.join(", "));
        out.push_str("]\n");
    }
    out
}

/// Parses support curves, reporting the offending line on error.
pub fn read_table_string(text: &str) -> Result<Vec<SupportCurve>> {
    let file: TableFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |sp| text[..sp.start.min(text.len())].lines().count().max(1));
        Error::Parse { line, message: e.message().to_string() }
    })?;
    if file.version != FORMAT_VERSION {
        return Err(Error::Parse { line: line_of(text, "version"), message: format!("unsupported version {}", file.version) });
    }
    if file.torus != TORUS {
        return Err(Error::Parse { line: line_of(text, "torus"), message: format!("unsupported torus {:?}", file.torus) });
    }
    let mut curves = Vec::new();
    for (idx, entry) in file.scatterers.into_iter().enumerate() {
        let curve = SupportCurve::new(entry.fourier_coeffs).map_err(|e| Error::Parse {
            line: nth_line_of(text, "fourier_coeffs", idx),
            message: format!("scatterer {idx}: {e}"),
        })?;
        curves.push(curve);
    }
    if curves.is_empty() {
        return Err(Error::Parse { line: 1, message: "no scatterers".into() });
    }
    Ok(curves)
}

pub fn read_table_file(path: &Path) -> Result<Vec<SupportCurve>> {
    let text = std::fs::read_to_string(path)?;
    read_table_string(&text)
}

pub fn load_table(path: &Path, options: TableOptions) -> Result<Table> {
    Table::with_options(read_table_file(path)?, options)
}

pub fn write_table_file(path: &Path, curves: &[SupportCurve]) -> Result<()> {
    std::fs::write(path, write_table_string(curves))?;
    Ok(())
}

fn line_of(text: &str, key: &str) -> usize {
    nth_line_of(text, key, 0)
}

fn nth_line_of(text: &str, key: &str, n: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with(key))
        .nth(n)
        .map_or(0, |(i, _)| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let curves = vec![
            SupportCurve::new(vec![0.38, 0.0, 0.0, 0.015, 0.0, 0.0, 0.006]).unwrap(),
            SupportCurve::new(vec![0.2, 0.5, 0.5, -0.01, 0.008]).unwrap(),
        ];
        let text = write_table_string(&curves);
        let back = read_table_string(&text).unwrap();
        assert_eq!(back, curves);
        assert_eq!(write_table_string(&back), text);
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "version = 1\ntorus = \"unit-square\"\n\n[[scatterers]]\nfourier_coeffs = [0.3, 0.5, oops]\n";
        match read_table_string(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn convexity_failure_reports_scatterer_line() {
        let text = "version = 1\ntorus = \"unit-square\"\n\n[[scatterers]]\nfourier_coeffs = [1.0, 0.0, 0.0, 0.6, 0.0]\n";
        match read_table_string(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn arbitrary_coefficients_round_trip(a0 in 0.1f64..0.4, rest in proptest::collection::vec(-1e-3f64..1e-3, 4)) {
            let mut coeffs = vec![a0, 0.3, 0.7];
            coeffs.extend(rest);
            let curve = SupportCurve::new(coeffs).unwrap();
            let text = write_table_string(std::slice::from_ref(&curve));
            let back = read_table_string(&text).unwrap();
            prop_assert_eq!(back[0].coeffs(), curve.coeffs());
        }
    }
}
