//! Closed strictly convex curves described by a truncated Fourier series of
//! their support function.
//!
//! With `n(θ) = (cos θ, sin θ)` and `t(θ) = (−sin θ, cos θ)` the boundary
//! point with outward normal `n(θ)` is `γ(θ) = h(θ) n(θ) + h'(θ) t(θ)`, its
//! speed is the radius of curvature `h + h''` and the curvature is the
//! reciprocal of that radius.

use crate::error::{Error, Result};
use std::f64::consts::TAU;

/// Minimum radius of curvature accepted by the convexity scan.
pub const MIN_RADIUS_OF_CURVATURE: f64 = 1e-12;
/// Degree from which evaluation switches to interleaved recurrences.
const LANE_DEGREE: usize = 16;

/// Support function `h(θ) = a₀ + Σₙ aₙ cos nθ + bₙ sin nθ`.
///
/// Coefficients are stored as `[a₀, a₁, b₁, a₂, b₂, …]`; the degree-one pair
/// is the centre of the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCurve {
    coeffs: Vec<f64>,
}

/// Point, unit tangent, outward unit normal and curvature at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub theta: f64,
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
}

impl SupportCurve {
    /// Builds a curve and checks strict convexity on a dense angle grid.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() % 2 == 0 {
            return Err(Error::InvalidTable(format!(
                "support coefficients need odd length [a0, a1, b1, ...], got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidTable("non-finite support coefficient".into()));
        }
        let curve = Self { coeffs };
        curve.check_convexity()?;
        Ok(curve)
    }

    /// Circle of radius `r` centred at `center`.
    pub fn circle(center: [f64; 2], r: f64) -> Result<Self> {
        Self::new(vec![r, center[0], center[1]])
    }

    /// Builds a curve without the convexity scan; callers must scan before use.
    pub(crate) fn from_coeffs_unchecked(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Highest harmonic present in the series.
    pub fn degree(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn center(&self) -> [f64; 2] {
        if self.coeffs.len() >= 3 {
            [self.coeffs[1], self.coeffs[2]]
        } else {
            [0.0, 0.0]
        }
    }

    /// Mean radius `a₀`; the perimeter is `2π a₀`.
    pub fn mean_radius(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn perimeter(&self) -> f64 {
        TAU * self.coeffs[0]
    }

    /// Upper bound on the distance from the centre to any boundary point.
    pub fn radius_bound(&self) -> f64 {
        let mut r = self.coeffs[0].abs();
        for c in self.coeffs.iter().skip(3) {
            r += c.abs();
        }
        r
    }

    /// Returns `[h, h', h'', h''']` at `θ`.
    pub fn derivs(&self, theta: f64) -> [f64; 4] {
        if self.degree() >= LANE_DEGREE {
            return self.derivs_lanes(theta);
        }
        let mut h = self.coeffs[0];
        let mut h1 = 0.0;
        let mut h2 = 0.0;
        let mut h3 = 0.0;
        let (s1, c1) = theta.sin_cos();
        let (mut sn, mut cn) = (s1, c1);
        for n in 1..=self.degree() {
            let a = self.coeffs[2 * n - 1];
            let b = self.coeffs[2 * n];
            let nf = n as f64;
            let even = a * cn + b * sn;
            let odd = b * cn - a * sn;
            h += even;
            h1 += nf * odd;
            h2 -= nf * nf * even;
            h3 -= nf * nf * nf * odd;
            let next_c = cn * c1 - sn * s1;
            sn = sn * c1 + cn * s1;
            cn = next_c;
        }
        [h, h1, h2, h3]
    }

    /// High-degree evaluation with four interleaved harmonic recurrences,
    /// each stepping by `4θ`.
    fn derivs_lanes(&self, theta: f64) -> [f64; 4] {
        let deg = self.degree();
        let mut cs = [0.0; 4];
        let mut ss = [0.0; 4];
        for j in 0..4 {
            let (sj, cj) = ((j + 1) as f64 * theta).sin_cos();
            cs[j] = cj;
            ss[j] = sj;
        }
        let (s4, c4) = (4.0 * theta).sin_cos();
        let mut acc = [[0.0; 4]; 4];
        let mut n = 1;
        while n + 3 <= deg {
            for j in 0..4 {
                let m = n + j;
                let a = self.coeffs[2 * m - 1];
                let b = self.coeffs[2 * m];
                let nf = m as f64;
                let even = a * cs[j] + b * ss[j];
                let odd = b * cs[j] - a * ss[j];
                acc[j][0] += even;
                acc[j][1] += nf * odd;
                acc[j][2] -= nf * nf * even;
                acc[j][3] -= nf * nf * nf * odd;
                let next_c = cs[j] * c4 - ss[j] * s4;
                ss[j] = ss[j] * c4 + cs[j] * s4;
                cs[j] = next_c;
            }
            n += 4;
        }
        for j in 0..(deg + 1 - n) {
            let m = n + j;
            let a = self.coeffs[2 * m - 1];
            let b = self.coeffs[2 * m];
            let nf = m as f64;
            let even = a * cs[j] + b * ss[j];
            let odd = b * cs[j] - a * ss[j];
            acc[j][0] += even;
            acc[j][1] += nf * odd;
            acc[j][2] -= nf * nf * even;
            acc[j][3] -= nf * nf * nf * odd;
        }
        let mut out = [self.coeffs[0], 0.0, 0.0, 0.0];
        for lane in &acc {
            for (o, v) in out.iter_mut().zip(lane) {
                *o += v;
            }
        }
        out
    }

    /// Support value `h(θ)`.
    pub fn h(&self, theta: f64) -> f64 {
        self.derivs(theta)[0]
    }

    /// Radius of curvature `h + h''`.
    pub fn radius_of_curvature(&self, theta: f64) -> f64 {
        let d = self.derivs(theta);
        d[0] + d[2]
    }

    /// Boundary point with outward normal `n(θ)`.
    pub fn point(&self, theta: f64) -> [f64; 2] {
        let d = self.derivs(theta);
        let (s, c) = theta.sin_cos();
        [d[0] * c - d[1] * s, d[0] * s + d[1] * c]
    }

    /// Point, frame and curvature at `θ`.
    pub fn eval(&self, theta: f64) -> Result<CurvePoint> {
        let d = self.derivs(theta);
        let radius = d[0] + d[2];
        if radius <= MIN_RADIUS_OF_CURVATURE {
            return Err(Error::Convexity { theta, radius });
        }
        let (s, c) = theta.sin_cos();
        Ok(CurvePoint {
            theta,
            point: [d[0] * c - d[1] * s, d[0] * s + d[1] * c],
            tangent: [-s, c],
            normal: [c, s],
            curvature: 1.0 / radius,
        })
    }

    /// Arc length from `θ = 0` to `θ` measured anticlockwise (closed form).
    pub fn arclength(&self, theta: f64) -> f64 {
        let mut s = self.coeffs[0] * theta;
        let (s1, c1) = theta.sin_cos();
        let (mut sn, mut cn) = (s1, c1);
        for n in 1..=self.degree() {
            if n >= 2 {
                let a = self.coeffs[2 * n - 1];
                let b = self.coeffs[2 * n];
                let nf = n as f64;
                s += (1.0 - nf * nf) / nf * (a * sn + b * (1.0 - cn));
            }
            let next_c = cn * c1 - sn * s1;
            sn = sn * c1 + cn * s1;
            cn = next_c;
        }
        s
    }

    /// Arc length `s(θ)` and its derivative, the radius of curvature, in one
    /// pass over the harmonics.
    pub fn arclength_and_radius(&self, theta: f64) -> (f64, f64) {
        let deg = self.degree();
        let lanes = if deg >= LANE_DEGREE { 4 } else { 1 };
        let mut cs = [0.0; 4];
        let mut ss = [0.0; 4];
        for j in 0..lanes {
            let (sj, cj) = ((j + 1) as f64 * theta).sin_cos();
            cs[j] = cj;
            ss[j] = sj;
        }
        let (sl, cl) = (lanes as f64 * theta).sin_cos();
        let mut arc = [0.0; 4];
        let mut rho = [0.0; 4];
        let mut n = 1;
        while n <= deg {
            for j in 0..lanes.min(deg + 1 - n) {
                let m = n + j;
                let a = self.coeffs[2 * m - 1];
                let b = self.coeffs[2 * m];
                let nf = m as f64;
                let w = 1.0 - nf * nf;
                arc[j] += w / nf * (a * ss[j] + b * (1.0 - cs[j]));
                rho[j] += w * (a * cs[j] + b * ss[j]);
                let next_c = cs[j] * cl - ss[j] * sl;
                ss[j] = ss[j] * cl + cs[j] * sl;
                cs[j] = next_c;
            }
            n += lanes;
        }
        let a0 = self.coeffs[0];
        (a0 * theta + arc.iter().sum::<f64>(), a0 + rho.iter().sum::<f64>())
    }

    /// Minimum radius of curvature over `samples` equispaced angles.
    pub fn min_radius_of_curvature(&self, samples: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..samples {
            let theta = TAU * j as f64 / samples as f64;
            let r = self.radius_of_curvature(theta);
            if r < best.0 {
                best = (r, theta);
            }
        }
        best
    }

    /// Number of angles used by the convexity scan.
    pub fn scan_resolution(&self) -> usize {
        (32 * self.degree()).max(2048)
    }

    fn check_convexity(&self) -> Result<()> {
        let (radius, theta) = self.min_radius_of_curvature(self.scan_resolution());
        if radius <= MIN_RADIUS_OF_CURVATURE {
            return Err(Error::Convexity { theta, radius });
        }
        Ok(())
    }

    /// Same curve translated by `v`.
    pub fn translated(&self, v: [f64; 2]) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < 3 {
            coeffs.resize(3, 0.0);
        }
        coeffs[1] += v[0];
        coeffs[2] += v[1];
        Self { coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_point_and_curvature() {
        let c = SupportCurve::circle([0.0, 0.0], 0.3).unwrap();
        for j in 0..16 {
            let th = j as f64 * 0.4;
            let p = c.eval(th).unwrap();
            assert_relative_eq!(p.point[0], 0.3 * th.cos(), epsilon = 1e-15);
            assert_relative_eq!(p.point[1], 0.3 * th.sin(), epsilon = 1e-15);
            assert_relative_eq!(p.curvature, 1.0 / 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn cos2_curvature_at_zero() {
        // h + h'' = 1 + 0.1 − 0.4 = 0.7 at θ = 0.
        let c = SupportCurve::new(vec![1.0, 0.0, 0.0, 0.1, 0.0]).unwrap();
        assert_relative_eq!(c.eval(0.0).unwrap().curvature, 1.0 / 0.7, epsilon = 1e-12);
    }

    #[test]
    fn convexity_error_detected() {
        let err = SupportCurve::new(vec![1.0, 0.0, 0.0, 0.6, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Convexity { .. }));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = SupportCurve::new(vec![0.5, 0.1, -0.2, 0.02, 0.01, -0.004, 0.003]).unwrap();
        let h = 1e-5;
        for j in 0..20 {
            let th = 0.31 * j as f64;
            let d = c.derivs(th);
            let p = c.derivs(th + h);
            let m = c.derivs(th - h);
            for k in 0..3 {
                let fd = (p[k] - m[k]) / (2.0 * h);
                assert_relative_eq!(fd, d[k + 1], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn tangent_is_derivative_direction() {
        let c = SupportCurve::new(vec![0.5, 0.1, -0.2, 0.02, 0.01, -0.004, 0.003]).unwrap();
        let h = 1e-6;
        for j in 0..20 {
            let th = 0.29 * j as f64;
            let e = c.eval(th).unwrap();
            let p = c.point(th + h);
            let m = c.point(th - h);
            let v = [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)];
            let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert_relative_eq!(speed, c.radius_of_curvature(th), epsilon = 1e-7);
            assert_relative_eq!(v[0] / speed, e.tangent[0], epsilon = 1e-7);
            assert_relative_eq!(v[1] / speed, e.tangent[1], epsilon = 1e-7);
            assert!((e.tangent[0] * e.normal[0] + e.tangent[1] * e.normal[1]).abs() < 1e-15);
        }
    }
    #[test]
    fn interleaved_evaluation_matches_direct_sum() {
        let mut coeffs = vec![0.5, 0.1, -0.2];
        for n in 2..=41 {
            let nf = n as f64;
            coeffs.push(1e-3 / (nf * nf * nf) * (0.7 * nf).cos());
            coeffs.push(1e-3 / (nf * nf * nf) * (1.3 * nf).sin());
        }
        let c = SupportCurve::new(coeffs.clone()).unwrap();
        for j in 0..50 {
            let th = 0.137 * j as f64 - 1.0;
            let mut direct = [coeffs[0], 0.0, 0.0, 0.0];
            for n in 1..=41 {
                let nf = n as f64;
                let (a, b) = (coeffs[2 * n - 1], coeffs[2 * n]);
                let (s, co) = (nf * th).sin_cos();
                direct[0] += a * co + b * s;
                direct[1] += nf * (b * co - a * s);
                direct[2] -= nf * nf * (a * co + b * s);
                direct[3] -= nf * nf * nf * (b * co - a * s);
            }
            let d = c.derivs(th);
            for k in 0..4 {
                assert_relative_eq!(d[k], direct[k], epsilon = 1e-12);
            }
            let (arc, rho) = c.arclength_and_radius(th);
            assert_relative_eq!(rho, direct[0] + direct[2], epsilon = 1e-12);
            assert_relative_eq!(arc, c.arclength(th), epsilon = 1e-12);
        }
    }
}
