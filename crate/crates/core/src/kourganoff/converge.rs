//! Distance between projected geodesics and billiard trajectories.

use super::geodesic::{integrate_geodesic, lift};
use super::profile::{HeightProfile, Sheet};
use crate::dynamics::{next_collision, CollisionCoord, TOL_GRAZE};
use crate::error::{Error, Result};
use crate::geometry::Table;

/// Flattening parameters used when none are given.
pub const DEFAULT_EPS_LIST: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
/// Starts closer than this to an obstacle count as boundary points.
const INTERIOR_MARGIN: f64 = 1e-12;

/// Billiard trajectory from a table point: segment start times, points and
/// unit directions in the lifted plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BilliardPath {
    pub times: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub directions: Vec<[f64; 2]>,
    /// Smallest `cos φ` over the collisions before `t_end`.
    pub min_cos: f64,
}

impl BilliardPath {
    pub fn collisions(&self) -> usize {
        self.times.len() - 1
    }

    pub fn position(&self, t: f64) -> [f64; 2] {
        let k = self.times.partition_point(|x| *x <= t).max(1) - 1;
        let dt = t - self.times[k];
        [self.points[k][0] + dt * self.directions[k][0], self.points[k][1] + dt * self.directions[k][1]]
    }
}

/// Follows the billiard flow from `p` along `v` for time `t_end`.
pub fn billiard_path(table: &Table, p: [f64; 2], v: [f64; 2], t_end: f64) -> Result<BilliardPath> {
    let n = v[0].hypot(v[1]);
    let v = [v[0] / n, v[1] / n];
    let hit = table
        .first_hit(p, v, None, table.search_radius())
        .ok_or_else(|| Error::HorizonViolation(format!("no obstacle ahead of {p:?}")))?;
    let mut out = BilliardPath { times: vec![0.0], points: vec![p], directions: vec![v], min_cos: f64::INFINITY };
    if hit.t >= t_end {
        return Ok(out);
    }
    let sc = table.scatterer(hit.label.scatterer);
    let (sn, cs) = hit.theta.sin_cos();
    let dn = v[0] * cs + v[1] * sn;
    let w = [v[0] - 2.0 * dn * cs, v[1] - 2.0 * dn * sn];
    let phi = (cs * w[1] - sn * w[0]).atan2(cs * w[0] + sn * w[1]);
    let mut c = CollisionCoord::new(hit.label, sc.angle_to_arclength(hit.theta), phi);
    let mut t = hit.t;
    out.min_cos = hit.cos_incidence;
    loop {
        let (next, seg, _) = next_collision(table, &c)?;
        out.times.push(t);
        out.points.push(seg.start);
        out.directions.push(seg.direction);
        t += seg.tau;
        if t >= t_end {
            return Ok(out);
        }
        out.min_cos = out.min_cos.min(next.phi.cos());
        c = next;
    }
}

/// Sup-distance between one projected geodesic and the billiard trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub sup_distance: f64,
    pub crossings: usize,
    pub steps: usize,
    pub rejected: usize,
    pub max_speed_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub point: [f64; 2],
    pub direction: [f64; 2],
    pub t_end: f64,
    pub collisions: usize,
    pub min_cos: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Each distance is at most `1 + slack` times the previous one.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_distance <= (1.0 + slack) * w[0].sup_distance)
    }
}

/// Compares the geodesic of each `g_ε` started on the upper sheet over `p`
/// with the billiard trajectory over `[0, t_end]`. The billiard segment must
/// start inside the table and avoid grazing collisions.
pub fn convergence_test(profile: &HeightProfile, p: [f64; 2], v: [f64; 2], t_end: f64, eps_list: &[f64]) -> Result<ConvergenceReport> {
    let table = profile.table();
    let ft = profile.foot(p);
    if ft.distance <= INTERIOR_MARGIN {
        return Err(Error::NotInA0(format!("start {p:?} is not in the interior of the table")));
    }
    if !(v[0].hypot(v[1]) > 0.0) {
        return Err(Error::NotInA0("zero initial velocity".into()));
    }
    let billiard = billiard_path(table, p, v, t_end)?;
    if billiard.min_cos < TOL_GRAZE {
        return Err(Error::NotInA0(format!("grazing collision on [0, {t_end}] (cos φ = {:e})", billiard.min_cos)));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let init = lift(profile, eps, p, v, Sheet::Up)?;
        let path = integrate_geodesic(profile, eps, init, t_end)?;
        let mut sup: f64 = 0.0;
        let mut dist = |t: f64, g: [f64; 2]| {
            let b = billiard.position(t);
            sup = sup.max((g[0] - b[0]).hypot(g[1] - b[1]));
        };
        for s in &path.samples {
            dist(s.t, s.point);
        }
        for &t in &billiard.times {
            dist(t, path.position(t));
        }
        rows.push(ConvergenceRow {
            eps,
            sup_distance: sup,
            crossings: path.crossings.len(),
            steps: path.steps,
            rejected: path.rejected,
            max_speed_drift: path.max_speed_drift,
        });
    }
    Ok(ConvergenceReport { point: p, direction: v, t_end, collisions: billiard.collisions(), min_cos: billiard.min_cos, rows })
}
