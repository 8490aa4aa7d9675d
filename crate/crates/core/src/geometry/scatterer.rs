//! A scatterer is a support curve together with its arc-length
//! parameterisation and curvature bounds.

use super::support::{CurvePoint, SupportCurve};
use crate::error::Result;
use std::f64::consts::TAU;

/// Default number of arc-length table nodes.
pub const ARCLEN_NODES: usize = 2048;

/// Strictly convex obstacle boundary parameterised anticlockwise by arc
/// length `s ∈ [0, ℓ)`, with `s = 0` at the point of outward normal `(1, 0)`.
#[derive(Debug, Clone)]
pub struct Scatterer {
    curve: SupportCurve,
    perimeter: f64,
    /// `θ(s_j)` at `s_j = j ℓ / M`, `j = 0..=M`.
    theta_nodes: Vec<f64>,
    /// Radius of curvature at each node (the derivative `ds/dθ`).
    rho_nodes: Vec<f64>,
    k_min: f64,
    k_max: f64,
    radius_bound: f64,
}

impl Scatterer {
    pub fn new(curve: SupportCurve) -> Result<Self> {
        Self::with_nodes(curve, ARCLEN_NODES)
    }

    pub fn with_nodes(curve: SupportCurve, nodes: usize) -> Result<Self> {
        let perimeter = curve.perimeter();
        let m = nodes.max(16);
        let mut theta_nodes = Vec::with_capacity(m + 1);
        let mut rho_nodes = Vec::with_capacity(m + 1);
        let mut theta = 0.0;
        for j in 0..=m {
            let target = perimeter * j as f64 / m as f64;
            theta = newton_theta(&curve, target, theta);
            theta_nodes.push(theta);
            rho_nodes.push(curve.radius_of_curvature(theta));
        }
        theta_nodes[m] = TAU;
        let (rmin, _) = curve.min_radius_of_curvature(curve.scan_resolution());
        let mut rmax: f64 = 0.0;
        let scan = curve.scan_resolution();
        for j in 0..scan {
            rmax = rmax.max(curve.radius_of_curvature(TAU * j as f64 / scan as f64));
        }
        let radius_bound = curve.radius_bound();
        Ok(Self {
            curve,
            perimeter,
            theta_nodes,
            rho_nodes,
            k_min: 1.0 / rmax,
            k_max: 1.0 / rmin,
            radius_bound,
        })
    }

    pub fn curve(&self) -> &SupportCurve {
        &self.curve
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn center(&self) -> [f64; 2] {
        self.curve.center()
    }

    /// Curvature bounds `(K_min, K_max)` from the dense scan.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        (self.k_min, self.k_max)
    }

    /// Upper bound on the distance from the centre to the boundary.
    pub fn radius_bound(&self) -> f64 {
        self.radius_bound
    }

    /// Reduces `s` to `[0, ℓ)`.
    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.perimeter);
        if w >= self.perimeter {
            0.0
        } else {
            w
        }
    }

    /// Angle `θ` of the boundary point at arc length `s` (taken mod `ℓ`);
    /// the result lies in `[0, 2π)`.
    pub fn arclength_to_angle(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        let m = self.theta_nodes.len() - 1;
        let ds = self.perimeter / m as f64;
        let j = ((s / ds) as usize).min(m - 1);
        let u = (s - j as f64 * ds) / ds;
        let (t0, t1) = (self.theta_nodes[j], self.theta_nodes[j + 1]);
        let (d0, d1) = (ds / self.rho_nodes[j], ds / self.rho_nodes[j + 1]);
        // Cubic Hermite interpolation with slopes dθ/ds = 1/ρ.
        let u2 = u * u;
        let u3 = u2 * u;
        let guess = (2.0 * u3 - 3.0 * u2 + 1.0) * t0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * t1
            + (u3 - u2) * d1;
        let theta = newton_theta(&self.curve, s, guess);
        theta.clamp(0.0, TAU).rem_euclid(TAU)
    }

    /// Arc length of the boundary point with outward normal angle `θ`, in `[0, ℓ)`.
    pub fn angle_to_arclength(&self, theta: f64) -> f64 {
        let turns = (theta / TAU).floor();
        let local = theta - turns * TAU;
        self.wrap(self.curve.arclength(local))
    }

    /// Frame at arc length `s`.
    pub fn frame(&self, s: f64) -> CurvePoint {
        let theta = self.arclength_to_angle(s);
        self.frame_at_angle(theta)
    }

    /// Frame at angle `θ`; convexity was verified at construction.
    pub fn frame_at_angle(&self, theta: f64) -> CurvePoint {
        let d = self.curve.derivs(theta);
        let (sn, cs) = theta.sin_cos();
        CurvePoint {
            theta,
            point: [d[0] * cs - d[1] * sn, d[0] * sn + d[1] * cs],
            tangent: [-sn, cs],
            normal: [cs, sn],
            curvature: 1.0 / (d[0] + d[2]),
        }
    }

    /// Derivative of the curvature with respect to arc length at angle `θ`.
    pub fn curvature_slope(&self, theta: f64) -> f64 {
        let d = self.curve.derivs(theta);
        let rho = d[0] + d[2];
        let rho1 = d[1] + d[3];
        -rho1 / (rho * rho * rho)
    }

    /// Shortest arc distance between two parameters.
    pub fn arc_distance(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(self.perimeter);
        d.min(self.perimeter - d)
    }
}

/// Solves `s(θ) = target` for `θ ∈ [0, 2π]` by safeguarded Newton.
fn newton_theta(curve: &SupportCurve, target: f64, guess: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, TAU);
    let mut theta = guess.clamp(lo, hi);
    for _ in 0..60 {
        let (arc, rho) = curve.arclength_and_radius(theta);
        let f = arc - target;
        if f.abs() < 1e-16 {
            break;
        }
        if f > 0.0 {
            hi = theta;
        } else {
            lo = theta;
        }
        let mut next = theta - f / rho;
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - theta).abs();
        theta = next;
        if step < 1e-15 {
            break;
        }
    }
    theta
}
