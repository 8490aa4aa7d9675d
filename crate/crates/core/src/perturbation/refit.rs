//! Normal displacement of a scatterer and its refit to a support function.

use super::bump::BumpField;
use crate::enriched::tangents::bracketed_root;
use crate::error::{Error, Result};
use crate::geometry::{Scatterer, SupportCurve, Table};
use std::f64::consts::TAU;

/// Largest pointwise support-function error accepted from a refit.
pub const REFIT_TOL: f64 = 1e-10;
const MIN_SAMPLES: usize = 1024;
/// Arc-length samples of the convexity pre-check.
const TURN_SAMPLES: usize = 8192;
const MAX_SAMPLES: usize = 1 << 15;

/// Refit displaced curve with its measured error.
#[derive(Debug, Clone)]
pub struct Refit {
    pub curve: SupportCurve,
    /// Largest support-function error at the half-grid angles.
    pub max_error: f64,
    pub samples: usize,
}

struct Displaced<'a> {
    sc: &'a Scatterer,
    fields: &'a [(BumpField, f64)],
}

impl Displaced<'_> {
    fn mu(&self, s: f64) -> (f64, f64) {
        let mut m = 0.0;
        let mut dm = 0.0;
        for (f, eps) in self.fields {
            let (v, d) = f.eval(s);
            m += eps * v;
            dm += eps * d;
        }
        (m, dm)
    }

    /// The displaced normal angle must increase along the curve.
    fn check_turning(&self) -> Result<()> {
        let m = TURN_SAMPLES;
        let angle = |j: usize| {
            let s = self.sc.perimeter() * j as f64 / m as f64;
            let f = self.sc.frame(s);
            let (mu, dmu) = self.mu(s);
            if 1.0 + mu * f.curvature <= 0.0 {
                return None;
            }
            let th = if j == m { TAU } else { f.theta };
            Some(th + (-dmu).atan2(1.0 + mu * f.curvature))
        };
        let mut prev = angle(0).ok_or_else(|| Error::PerturbationTooLarge("displacement exceeds the radius of curvature".into()))?;
        for j in 1..=m {
            let next = angle(j).ok_or_else(|| Error::PerturbationTooLarge("displacement exceeds the radius of curvature".into()))?;
            if next <= prev {
                let s = self.sc.perimeter() * j as f64 / m as f64;
                return Err(Error::PerturbationTooLarge(format!("displaced curve is not convex near s = {s}")));
            }
            prev = next;
        }
        Ok(())
    }

    /// Exact support value of the displaced curve at normal angle `φ`.
    fn support(&self, phi: f64) -> Result<f64> {
        let curve = self.sc.curve();
        let s_of = |th: f64| self.sc.wrap(curve.arclength(th));
        // Normal angle of the displaced point with original angle θ.
        let turn = |th: f64| {
            let (m, dm) = self.mu(s_of(th));
            if m == 0.0 && dm == 0.0 {
                return 0.0;
            }
            let k = 1.0 / curve.radius_of_curvature(th);
            (-dm).atan2(1.0 + m * k)
        };
        let f = |th: f64| th + turn(th) - phi;
        let theta = if f(phi) == 0.0 {
            phi
        } else {
            let (lo, hi) = (phi - 0.5, phi + 0.5);
            if !(f(lo) < 0.0 && f(hi) > 0.0) {
                return Err(Error::PerturbationTooLarge(format!("displaced normal turns too far near angle {phi}")));
            }
            bracketed_root(f, lo, hi)
        };
        let (m, _) = self.mu(s_of(theta));
        let k = 1.0 / curve.radius_of_curvature(theta);
        if 1.0 + m * k <= 0.0 {
            return Err(Error::PerturbationTooLarge(format!("displacement exceeds the radius of curvature near angle {phi}")));
        }
        let p = curve.point(theta);
        let n = [theta.cos(), theta.sin()];
        let q = [p[0] + m * n[0], p[1] + m * n[1]];
        Ok(q[0] * phi.cos() + q[1] * phi.sin())
    }
}

/// Support function of `γ + Σ ε λ n` refit by a discrete Fourier transform
/// of the change in support values; the grid doubles until the error at the
/// half-grid angles is below [`REFIT_TOL`].
pub fn displaced_curve(sc: &Scatterer, fields: &[(BumpField, f64)]) -> Result<Refit> {
    if fields.iter().all(|(_, e)| *e == 0.0) {
        return Ok(Refit { curve: sc.curve().clone(), max_error: 0.0, samples: 0 });
    }
    let disp = Displaced { sc, fields };
    disp.check_turning()?;
    let base = sc.curve();
    let mut n = MIN_SAMPLES;
    loop {
        let d: Vec<f64> = (0..n)
            .map(|j| {
                let phi = TAU * j as f64 / n as f64;
                Ok(disp.support(phi)? - base.h(phi))
            })
            .collect::<Result<_>>()?;
        let cos_table: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).cos()).collect();
        let sin_table: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).sin()).collect();
        let half = n / 2 - 1;
        let mut delta = vec![d.iter().sum::<f64>() / n as f64];
        for m in 1..=half {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, dj) in d.iter().enumerate() {
                if *dj == 0.0 {
                    continue;
                }
                let idx = (m * j) % n;
                a += dj * cos_table[idx];
                b += dj * sin_table[idx];
            }
            delta.push(2.0 * a / n as f64);
            delta.push(2.0 * b / n as f64);
        }
        // Smallest degree whose dropped tail is bounded by a quarter of the
        // tolerance.
        let mut tail = 0.0;
        let mut degree = half;
        while degree > base.degree() {
            let m = degree;
            let next = tail + delta[2 * m - 1].abs() + delta[2 * m].abs();
            if next > 0.25 * REFIT_TOL {
                break;
            }
            tail = next;
            degree -= 1;
        }
        delta.truncate(2 * degree + 1);
        let mut coeffs = base.coeffs().to_vec();
        coeffs.resize(2 * degree + 1, 0.0);
        for (c, dc) in coeffs.iter_mut().zip(&delta) {
            *c += dc;
        }
        let fit = SupportCurve::from_coeffs_unchecked(coeffs.clone());
        let mut max_error: f64 = 0.0;
        for j in 0..n {
            let phi = TAU * (j as f64 + 0.5) / n as f64;
            max_error = max_error.max((fit.h(phi) - disp.support(phi)?).abs());
        }
        if max_error <= REFIT_TOL && degree < half {
            let curve = SupportCurve::new(coeffs).map_err(|e| match e {
                Error::Convexity { theta, radius } => {
                    Error::PerturbationTooLarge(format!("convexity lost at angle {theta}: radius of curvature {radius}"))
                }
                other => other,
            })?;
            return Ok(Refit { curve, max_error, samples: n });
        }
        if n >= MAX_SAMPLES {
            return Err(Error::PerturbationTooLarge(format!(
                "refit error {max_error:e} above {REFIT_TOL:e} with {n} samples"
            )));
        }
        n *= 2;
    }
}

/// Table with scatterer `λ.scatterer` displaced by `ε λ` along its normal.
pub fn apply_perturbation(table: &Table, field: &BumpField, eps: f64) -> Result<Table> {
    apply_perturbations(table, &[(*field, eps)])
}

/// Applies several fields at once (fields on one scatterer add up); the
/// horizon is re-certified.
pub fn apply_perturbations(table: &Table, fields: &[(BumpField, f64)]) -> Result<Table> {
    for (f, eps) in fields {
        if f.scatterer >= table.len() || (f.perimeter() - table.scatterer(f.scatterer).perimeter()).abs() > 1e-12 {
            return Err(Error::Domain(format!("bump field on scatterer {} was built for another table", f.scatterer)));
        }
        if !eps.is_finite() {
            return Err(Error::Domain("non-finite perturbation size".into()));
        }
    }
    if fields.iter().all(|(_, e)| *e == 0.0) {
        return Ok(table.clone());
    }
    let mut curves = Vec::with_capacity(table.len());
    for (l, sc) in table.scatterers().iter().enumerate() {
        let mine: Vec<(BumpField, f64)> = fields.iter().filter(|(f, _)| f.scatterer == l).copied().collect();
        curves.push(displaced_curve(sc, &mine)?.curve);
    }
    let out = Table::with_options(curves, table.options()).map_err(|e| match e {
        Error::InvalidTable(m) => Error::PerturbationTooLarge(m),
        other => other,
    })?;
    if table.horizon().is_finite() && !out.horizon().is_finite() {
        return Err(Error::HorizonViolation("perturbed table has an infinite corridor".into()));
    }
    Ok(out)
}

/// Arc-length parameter on `original` whose normal line passes through the
/// point at `s_new` on the normally displaced `perturbed` scatterer.
pub fn original_parameter(original: &Scatterer, perturbed: &Scatterer, s_new: f64) -> f64 {
    let x = perturbed.frame(s_new).point;
    let mut s = s_new * original.perimeter() / perturbed.perimeter();
    for _ in 0..50 {
        let f = original.frame(s);
        let r = [x[0] - f.point[0], x[1] - f.point[1]];
        let g = r[0] * f.tangent[0] + r[1] * f.tangent[1];
        let dg = -1.0 - f.curvature * (r[0] * f.normal[0] + r[1] * f.normal[1]);
        let step = g / dg;
        s -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    original.wrap(s)
}
