//! Billiard map and flow on the lifted table, Jacobi coordinates,
//! singularity flags and the flat Crofton check.

use crate::error::{Error, Result};
use crate::geometry::{outgoing_direction, LiftedLabel, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Grazing threshold on `|cos φ'|`.
pub const TOL_GRAZE: f64 = 1e-8;
/// Near-grazing threshold on `|cos φ'|`.
pub const NEAR_GRAZE: f64 = 1e-4;

/// Point of the billiard phase space on a lifted scatterer.
///
/// `φ ∈ [−π/2, π/2]` is the oriented angle from the normal pointing into the
/// table to the outgoing velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionCoord {
    pub label: LiftedLabel,
    pub s: f64,
    pub phi: f64,
}

impl CollisionCoord {
    pub fn new(label: LiftedLabel, s: f64, phi: f64) -> Self {
        Self { label, s, phi }
    }

    /// Time reversal `R(s, φ) = (s, −φ)`.
    pub fn reversed(self) -> Self {
        Self { phi: -self.phi, ..self }
    }

    /// Same point moved to cell `(0, 0)`.
    pub fn on_torus(self) -> Self {
        Self { label: LiftedLabel::new([0, 0], self.label.scatterer), ..self }
    }
}

/// Straight segment between two consecutive bounces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSegment {
    pub start: [f64; 2],
    pub direction: [f64; 2],
    pub tau: f64,
    /// Cell displacement between the departure and arrival scatterers.
    pub displacement: [i64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingularityFlag {
    Regular,
    Grazing,
    /// `|cos φ'|` below [`NEAR_GRAZE`]; the margin is that cosine.
    NearGrazing(f64),
}

impl SingularityFlag {
    pub fn from_cos(c: f64) -> Self {
        let c = c.abs();
        if c < TOL_GRAZE {
            SingularityFlag::Grazing
        } else if c < NEAR_GRAZE {
            SingularityFlag::NearGrazing(c)
        } else {
            SingularityFlag::Regular
        }
    }

    pub fn is_grazing(&self) -> bool {
        matches!(self, SingularityFlag::Grazing)
    }

    pub fn code(&self) -> &'static str {
        match self {
            SingularityFlag::Regular => "regular",
            SingularityFlag::Grazing => "grazing",
            SingularityFlag::NearGrazing(_) => "near_grazing",
        }
    }
}

/// Position of a collision point in the plane.
pub fn position(table: &Table, c: &CollisionCoord) -> [f64; 2] {
    table.lifted_point(c.label, c.s)
}

/// Outgoing unit velocity at a collision point.
pub fn velocity(table: &Table, c: &CollisionCoord) -> [f64; 2] {
    let f = table.scatterer(c.label.scatterer).frame(c.s);
    outgoing_direction(f.normal, c.phi)
}

/// Next collision of the outgoing ray with the lifted table.
///
/// A departure with `|cos φ| < TOL_GRAZE` leaves tangentially; the
/// departure scatterer is excluded from the search, which convexity makes
/// exact. The returned flag is grazing when either end is tangential.
pub fn next_collision(table: &Table, c: &CollisionCoord) -> Result<(CollisionCoord, FlightSegment, SingularityFlag)> {
    let sc = table.scatterer(c.label.scatterer);
    let f = sc.frame(c.s);
    let dir = outgoing_direction(f.normal, c.phi);
    let start = [f.point[0] + c.label.cell[0] as f64, f.point[1] + c.label.cell[1] as f64];
    let hit = table
        .first_hit(start, dir, Some(c.label), table.search_radius())
        .ok_or_else(|| Error::HorizonViolation(format!("no obstacle ahead of {c:?} within the search box")))?;
    let target = table.scatterer(hit.label.scatterer);
    let s_next = target.angle_to_arclength(hit.theta);
    let (sn, cs) = hit.theta.sin_cos();
    let dn = dir[0] * cs + dir[1] * sn;
    let out = [dir[0] - 2.0 * dn * cs, dir[1] - 2.0 * dn * sn];
    let phi_next = (cs * out[1] - sn * out[0]).atan2(cs * out[0] + sn * out[1]);
    let cos_arrive = -dn;
    let flag = if c.phi.cos().abs() < TOL_GRAZE {
        SingularityFlag::Grazing
    } else {
        SingularityFlag::from_cos(cos_arrive)
    };
    let seg = FlightSegment {
        start,
        direction: dir,
        tau: hit.t,
        displacement: [hit.label.cell[0] - c.label.cell[0], hit.label.cell[1] - c.label.cell[1]],
    };
    Ok((CollisionCoord::new(hit.label, s_next, phi_next.clamp(-0.5 * PI, 0.5 * PI)), seg, flag))
}

/// Iterates of the billiard map.
#[derive(Debug, Clone)]
pub struct MapOrbit {
    /// The start followed by `|n|` iterates (fewer when truncated).
    pub points: Vec<CollisionCoord>,
    pub segments: Vec<FlightSegment>,
    pub flags: Vec<SingularityFlag>,
    /// Index of the first grazing iterate when the orbit was truncated.
    pub failure: Option<usize>,
}

/// `n` forward iterates, or `|n|` backward iterates via `f⁻¹ = R∘f∘R`.
pub fn billiard_map(table: &Table, c: CollisionCoord, n: i64) -> Result<MapOrbit> {
    let backward = n < 0;
    let mut cur = if backward { c.reversed() } else { c };
    let mut orbit = MapOrbit { points: vec![c], segments: Vec::new(), flags: Vec::new(), failure: None };
    for k in 0..n.unsigned_abs() {
        let (next, seg, flag) = next_collision(table, &cur)?;
        orbit.points.push(if backward { next.reversed() } else { next });
        orbit.segments.push(seg);
        orbit.flags.push(flag);
        if flag.is_grazing() {
            orbit.failure = Some(k as usize + 1);
            break;
        }
        cur = next;
    }
    Ok(orbit)
}

/// Jacobian determinant of `(s, φ) ↦ (s', φ')` by central differences.
/// Returns `None` when a perturbed point changes its target scatterer.
pub fn map_jacobian_det(table: &Table, c: &CollisionCoord, h: f64) -> Result<Option<f64>> {
    let (base, _, _) = next_collision(table, c)?;
    let sc = table.scatterer(base.label.scatterer);
    let eval = |ds: f64, dphi: f64| -> Result<Option<(f64, f64)>> {
        let p = CollisionCoord::new(c.label, c.s + ds, c.phi + dphi);
        let (n, _, _) = next_collision(table, &p)?;
        if n.label != base.label {
            return Ok(None);
        }
        let mut ds_out = n.s - base.s;
        let l = sc.perimeter();
        if ds_out > 0.5 * l {
            ds_out -= l;
        } else if ds_out < -0.5 * l {
            ds_out += l;
        }
        Ok(Some((ds_out, n.phi - base.phi)))
    };
    let (Some(sp), Some(sm), Some(pp), Some(pm)) = (eval(h, 0.0)?, eval(-h, 0.0)?, eval(0.0, h)?, eval(0.0, -h)?) else {
        return Ok(None);
    };
    let a = (sp.0 - sm.0) / (2.0 * h);
    let b = (pp.0 - pm.0) / (2.0 * h);
    let c2 = (sp.1 - sm.1) / (2.0 * h);
    let d = (pp.1 - pm.1) / (2.0 * h);
    Ok(Some(a * d - b * c2))
}

/// Jacobi coordinates of a line element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiPoint {
    pub eta: f64,
    pub xi: f64,
    pub omega: f64,
}

/// `η = x cos ω + y sin ω`, `ξ = x sin ω − y cos ω`.
pub fn to_jacobi(x: f64, y: f64, omega: f64) -> JacobiPoint {
    let (s, c) = omega.sin_cos();
    JacobiPoint { eta: x * c + y * s, xi: x * s - y * c, omega }
}

/// Inverse of [`to_jacobi`].
pub fn from_jacobi(p: JacobiPoint) -> (f64, f64, f64) {
    let (s, c) = p.omega.sin_cos();
    (p.eta * c + p.xi * s, p.eta * s - p.xi * c, p.omega)
}

/// Free flight for time `t`: a translation of `η`.
pub fn jacobi_flight(p: JacobiPoint, t: f64) -> JacobiPoint {
    JacobiPoint { eta: p.eta + t, ..p }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Monte Carlo estimate of `∫₀^L ∫₀^π ½ sin θ dθ dt`, the Liouville
/// measure of the lines crossing a segment of length `L`; the exact value is
/// `L`.
pub fn crofton_check(length: f64, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if length < 0.0 || !length.is_finite() {
        return Err(Error::Domain(format!("segment length must be non-negative, got {length}")));
    }
    if n_samples < 10_000 {
        return Err(Error::InsufficientSamples(format!("need at least 10^4 samples, got {n_samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = length * PI;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..n_samples {
        let _t: f64 = rng.gen::<f64>() * length;
        let theta: f64 = rng.gen::<f64>() * PI;
        let v = area * 0.5 * theta.sin();
        sum += v;
        sum2 += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    Ok(McEstimate { value: mean, std_error: (var / n).sqrt(), samples: n_samples, seed })
}

/// One line of a trajectory dump: `cell_i cell_j scatterer s φ τ flag`.
pub fn format_dump_line(c: &CollisionCoord, tau: f64, flag: SingularityFlag) -> String {
    format!(
        "{:>6} {:>6} {:>4} {:>24.16e} {:>24.16e} {:>24.16e} {}",
        c.label.cell[0],
        c.label.cell[1],
        c.label.scatterer,
        c.s,
        c.phi,
        tau,
        flag.code()
    )
}

/// Trajectory dump of `n` forward iterates; the first line has `τ = 0`.
pub fn trajectory_dump(table: &Table, c: CollisionCoord, n: i64) -> Result<String> {
    let orbit = billiard_map(table, c, n)?;
    let mut out = format_dump_line(&orbit.points[0], 0.0, SingularityFlag::Regular);
    out.push('\n');
    for (k, p) in orbit.points.iter().enumerate().skip(1) {
        out.push_str(&format_dump_line(p, orbit.segments[k - 1].tau, orbit.flags[k - 1]));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SupportCurve;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn disks() -> Table {
        Table::new(vec![
            SupportCurve::circle([0.0, 0.0], 0.4).unwrap(),
            SupportCurve::circle([0.5, 0.5], 0.2).unwrap(),
        ])
        .unwrap()
    }

    fn noncircular() -> &'static Table {
        static TABLE: std::sync::OnceLock<Table> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| {
            Table::new(vec![
                SupportCurve::new(vec![0.38, 0.0, 0.0, 0.015, 0.0, 0.0, 0.006]).unwrap(),
                SupportCurve::new(vec![0.2, 0.5, 0.5, -0.01, 0.008]).unwrap(),
            ])
            .unwrap()
        })
    }

    #[test]
    fn head_on_bounce_between_disks() {
        let t = disks();
        let a = t.scatterer(0);
        // The nearest point of disk 0 to disk 1 has outward normal at 45°.
        let s0 = a.angle_to_arclength(PI / 4.0);
        let c = CollisionCoord::new(LiftedLabel::new([0, 0], 0), s0, 0.0);
        let (n, seg, flag) = next_collision(&t, &c).unwrap();
        assert_eq!(n.label, LiftedLabel::new([0, 0], 1));
        assert_relative_eq!(seg.tau, 0.5f64.hypot(0.5) - 0.6, epsilon = 1e-12);
        assert!(n.phi.abs() < 1e-12);
        assert_eq!(flag, SingularityFlag::Regular);
        let two = billiard_map(&t, c, 2).unwrap();
        assert!(t.scatterer(0).arc_distance(two.points[2].s, s0) < 1e-10);
        assert!(two.points[2].phi.abs() < 1e-10);
    }

    #[test]
    fn tangential_departure_is_flagged() {
        let t = disks();
        let c = CollisionCoord::new(LiftedLabel::new([0, 0], 0), 0.3, 0.5 * PI);
        let (_, _, flag) = next_collision(&t, &c).unwrap();
        assert!(flag.is_grazing());
    }

    #[test]
    fn specular_law_residual() {
        let t = noncircular();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let l = rng.gen_range(0..2);
            let c = CollisionCoord::new(
                LiftedLabel::new([0, 0], l),
                rng.gen::<f64>() * t.scatterer(l).perimeter(),
                (rng.gen::<f64>() - 0.5) * 3.0,
            );
            let (n, seg, _) = next_collision(t, &c).unwrap();
            let f = t.scatterer(n.label.scatterer).frame(n.s);
            let out = velocity(t, &n);
            let cin = -(seg.direction[0] * f.normal[0] + seg.direction[1] * f.normal[1]);
            let cout = out[0] * f.normal[0] + out[1] * f.normal[1];
            assert!((cin - cout).abs() < 1e-10);
            let tin = seg.direction[0] * f.tangent[0] + seg.direction[1] * f.tangent[1];
            let tout = out[0] * f.tangent[0] + out[1] * f.tangent[1];
            assert!((tin - tout).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_at_zero_angle() {
        let p = to_jacobi(0.3, 0.7, 0.0);
        assert_eq!(p.eta, 0.3);
        assert_eq!(p.xi, -0.7);
    }

    #[test]
    fn jacobi_flight_translates_eta() {
        let (x, y, w) = (0.2, -0.4, 1.1);
        let p = to_jacobi(x, y, w);
        let t = 0.37;
        let moved = to_jacobi(x + t * w.cos(), y + t * w.sin(), w);
        let q = jacobi_flight(p, t);
        assert_relative_eq!(moved.eta, q.eta, epsilon = 1e-14);
        assert_relative_eq!(moved.xi, q.xi, epsilon = 1e-14);
    }

    #[test]
    fn crofton_inner_integral_and_empty_segment() {
        // ∫₀^π ½ sin θ dθ = 1 by the midpoint rule.
        let n = 100_000;
        let h = PI / n as f64;
        let s: f64 = (0..n).map(|k| 0.5 * ((k as f64 + 0.5) * h).sin() * h).sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-9);
        assert_eq!(crofton_check(0.0, 10_000, 1).unwrap().value, 0.0);
        assert!(crofton_check(1.0, 100, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn jacobi_round_trip(x in -5.0f64..5.0, y in -5.0f64..5.0, w in -7.0f64..7.0) {
            let (a, b, c) = from_jacobi(to_jacobi(x, y, w));
            prop_assert!((a - x).abs() < 1e-12 && (b - y).abs() < 1e-12 && c == w);
        }

        #[test]
        fn inverse_and_reversal(l in 0usize..2, u in 0.0f64..1.0, phi in -1.4f64..1.4) {
            let t = noncircular();
            let c = CollisionCoord::new(LiftedLabel::new([0, 0], l), u * t.scatterer(l).perimeter(), phi);
            let fwd = billiard_map(t, c, 1).unwrap();
            prop_assume!(fwd.failure.is_none());
            prop_assume!(fwd.points[1].phi.cos() > 1e-3);
            let back = billiard_map(t, fwd.points[1], -1).unwrap();
            let r = back.points[1];
            prop_assert_eq!(r.label, c.label);
            prop_assert!(t.scatterer(l).arc_distance(r.s, c.s) < 1e-9);
            prop_assert!((r.phi - c.phi).abs() < 1e-9);
            // R∘f∘R = f⁻¹: from (s', −φ') the next collision is (s, −φ).
            let (rev, _, _) = next_collision(t, &fwd.points[1].reversed()).unwrap();
            prop_assert!(t.scatterer(l).arc_distance(rev.s, c.s) < 1e-9);
            prop_assert!((rev.phi + c.phi).abs() < 1e-9);
        }
    }
}
