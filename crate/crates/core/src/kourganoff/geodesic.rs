//! Geodesics of `g_ε`: straight lines on the flat sheets and an adaptive
//! Dormand–Prince integration in the collar charts.

use super::profile::{require_eps, HeightProfile, Sheet};
use crate::error::{Error, Result};
use crate::geometry::LiftedLabel;

/// Local error tolerance of the collar integration.
pub const INTEGRATION_TOL: f64 = 1e-10;
/// Largest time step inside a collar.
pub const MAX_COLLAR_STEP: f64 = 1e-3;
const MIN_STEP: f64 = 1e-13;
const MAX_REJECTIONS: usize = 60;

/// Unit tangent vector of the surface in one chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceState {
    /// Lifted table point and unit velocity on a flat part of a sheet.
    Flat { point: [f64; 2], velocity: [f64; 2], sheet: Sheet },
    /// Collar coordinates and their time derivatives.
    Collar { label: LiftedLabel, theta: f64, u: f64, dtheta: f64, du: f64 },
}

impl SurfaceState {
    /// Same point with the velocity reversed.
    pub fn reversed(self) -> Self {
        match self {
            SurfaceState::Flat { point, velocity, sheet } => SurfaceState::Flat { point, velocity: [-velocity[0], -velocity[1]], sheet },
            SurfaceState::Collar { label, theta, u, dtheta, du } => SurfaceState::Collar { label, theta, u, dtheta: -dtheta, du: -du },
        }
    }

    pub fn sheet(&self) -> Sheet {
        match self {
            SurfaceState::Flat { sheet, .. } => *sheet,
            SurfaceState::Collar { u, .. } => Sheet::of(*u),
        }
    }
}

/// One recorded point of a geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    /// Projection to the lifted table.
    pub point: [f64; 2],
    /// Signed height `Z` before flattening (the surface height is `ε Z`).
    pub height: f64,
    /// The path is a straight segment from this sample to the next.
    pub straight: bool,
}

/// Passage through the seam of a lifted scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamCrossing {
    pub t: f64,
    pub label: LiftedLabel,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub eps: f64,
    pub samples: Vec<PathSample>,
    pub crossings: Vec<SeamCrossing>,
    /// `g_ε`-length, equal to the elapsed time at unit speed.
    pub length: f64,
    pub end: SurfaceState,
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|‖γ̇‖_{g_ε} − 1|` over accepted collar steps.
    pub max_speed_drift: f64,
}

impl GeodesicPath {
    /// Projected position at time `t`, interpolated linearly between samples.
    pub fn position(&self, t: f64) -> [f64; 2] {
        let s = &self.samples;
        let k = s.partition_point(|x| x.t <= t);
        if k == 0 {
            return s[0].point;
        }
        if k == s.len() {
            return s[k - 1].point;
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
        [a.point[0] + w * (b.point[0] - a.point[0]), a.point[1] + w * (b.point[1] - a.point[1])]
    }
}

/// Lift `π_K⁻¹`: the unit vector over the table point `p` on `sheet` whose
/// projection points along `direction`.
pub fn lift(profile: &HeightProfile, eps: f64, p: [f64; 2], direction: [f64; 2], sheet: Sheet) -> Result<SurfaceState> {
    require_eps(eps)?;
    let norm = direction[0].hypot(direction[1]);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Domain("direction must be a nonzero vector".into()));
    }
    let v = [direction[0] / norm, direction[1] / norm];
    let ft = profile.foot(p);
    if ft.distance <= 0.0 {
        return Err(Error::Domain(format!("point {p:?} is not in the interior of the table")));
    }
    if ft.distance >= profile.switch_distance() {
        return Ok(SurfaceState::Flat { point: p, velocity: v, sheet });
    }
    Ok(enter_collar(profile, eps, ft.label, ft.theta, ft.distance, v, sheet))
}

/// Projection `π_K`: table point and unit table velocity.
pub fn project(profile: &HeightProfile, state: &SurfaceState) -> ([f64; 2], [f64; 2]) {
    match *state {
        SurfaceState::Flat { point, velocity, .. } => (point, velocity),
        SurfaceState::Collar { label, theta, u, dtheta, du } => {
            let (p, v) = collar_to_table(profile, label, theta, u, dtheta, du);
            let n = v[0].hypot(v[1]);
            (p, [v[0] / n, v[1] / n])
        }
    }
}

fn collar_to_table(profile: &HeightProfile, label: LiftedLabel, theta: f64, u: f64, dtheta: f64, du: f64) -> ([f64; 2], [f64; 2]) {
    let sc = profile.table().scatterer(label.scatterer);
    let f = sc.frame_at_angle(theta);
    let w = 1.0 / f.curvature + u * u;
    let p = profile.collar_point(label, theta, u);
    let a = w * dtheta;
    let b = 2.0 * u * du;
    (p, [a * f.tangent[0] + b * f.normal[0], a * f.tangent[1] + b * f.normal[1]])
}

/// Collar state at distance `d` over normal angle `θ` moving along the
/// table direction `v`, scaled to unit `g_ε`-speed.
fn enter_collar(profile: &HeightProfile, eps: f64, label: LiftedLabel, theta: f64, d: f64, v: [f64; 2], sheet: Sheet) -> SurfaceState {
    let f = profile.table().scatterer(label.scatterer).frame_at_angle(theta);
    let u = sheet.sign() * d.sqrt();
    let w = 1.0 / f.curvature + d;
    let dtheta = (v[0] * f.tangent[0] + v[1] * f.tangent[1]) / w;
    let du = (v[0] * f.normal[0] + v[1] * f.normal[1]) / (2.0 * u);
    let speed = speed2(profile, eps, label, theta, u, dtheta, du).sqrt();
    SurfaceState::Collar { label, theta, u, dtheta: dtheta / speed, du: du / speed }
}

fn speed2(profile: &HeightProfile, eps: f64, label: LiftedLabel, theta: f64, u: f64, dtheta: f64, du: f64) -> f64 {
    let d = profile.table().scatterer(label.scatterer).curve().derivs(theta);
    let w = d[0] + d[2] + u * u;
    let z1 = profile.sheet_height(u)[1];
    w * w * dtheta * dtheta + (4.0 * u * u + eps * eps * z1 * z1) * du * du
}

/// Geodesic equations in a collar chart, `y = (θ, u, θ̇, u̇)`.
fn collar_rhs(profile: &HeightProfile, eps: f64, label: LiftedLabel, y: &[f64; 4]) -> [f64; 4] {
    let [theta, u, dt, du] = *y;
    let d = profile.table().scatterer(label.scatterer).curve().derivs(theta);
    let (rho, drho) = (d[0] + d[2], d[1] + d[3]);
    let z = profile.sheet_height(u);
    let w = rho + u * u;
    let a = w * w;
    let a_t = 2.0 * w * drho;
    let a_u = 4.0 * u * w;
    let b = 4.0 * u * u + eps * eps * z[1] * z[1];
    let b_u = 8.0 * u + 2.0 * eps * eps * z[1] * z[2];
    [dt, du, -(a_t * dt * dt + 2.0 * a_u * dt * du) / (2.0 * a), (a_u * dt * dt - b_u * du * du) / (2.0 * b)]
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince 5(4) step of an autonomous system: the fifth-order
/// solution and the error estimate.
fn dopri_step(f: &impl Fn(&[f64; 4]) -> [f64; 4], y: &[f64; 4], h: f64) -> ([f64; 4], [f64; 4]) {
    let mut k = [[0.0; 4]; 7];
    k[0] = f(y);
    for s in 1..7 {
        let mut ys = *y;
        for (i, yi) in ys.iter_mut().enumerate() {
            *yi += h * (0..s).map(|j| A[s - 1][j] * k[j][i]).sum::<f64>();
        }
        k[s] = f(&ys);
    }
    let mut out = *y;
    let mut err = [0.0; 4];
    for i in 0..4 {
        out[i] += h * (0..6).map(|j| A[5][j] * k[j][i]).sum::<f64>();
        err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
    }
    (out, err)
}

/// Integrates the unit-speed geodesic from `init` for time `t_end`.
pub fn integrate_geodesic(profile: &HeightProfile, eps: f64, init: SurfaceState, t_end: f64) -> Result<GeodesicPath> {
    require_eps(eps)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("integration time {t_end} must be finite and non-negative")));
    }
    let mut state = init;
    let mut t = 0.0;
    let mut samples = vec![sample(profile, &state, 0.0)];
    let mut crossings = Vec::new();
    let mut exclude: Option<LiftedLabel> = None;
    let (mut steps, mut rejected) = (0usize, 0usize);
    let mut drift: f64 = 0.0;
    let mut h = 0.1 * MAX_COLLAR_STEP;
    while t < t_end {
        match state {
            SurfaceState::Flat { point, velocity, sheet } => {
                let remaining = t_end - t;
                let hit = profile.next_collar(point, velocity, exclude, remaining);
                let dt = hit.map_or(remaining, |x| x.0);
                let p = [point[0] + dt * velocity[0], point[1] + dt * velocity[1]];
                t = if hit.is_some() { t + dt } else { t_end };
                samples.last_mut().expect("path has a start").straight = true;
                state = match hit {
                    Some((_, label, theta)) => enter_collar(profile, eps, label, theta, profile.switch_distance(), velocity, sheet),
                    None => SurfaceState::Flat { point: p, velocity, sheet },
                };
                samples.push(PathSample { t, point: p, ..sample(profile, &SurfaceState::Flat { point: p, velocity, sheet }, t) });
            }
            SurfaceState::Collar { label, theta, u, dtheta, du } => {
                let rhs = |y: &[f64; 4]| collar_rhs(profile, eps, label, y);
                let y = [theta, u, dtheta, du];
                let mut tries = 0;
                let (next, step) = loop {
                    let hs = h.min(t_end - t).min(MAX_COLLAR_STEP);
                    let (yn, err) = dopri_step(&rhs, &y, hs);
                    let norm = (0..4).map(|i| err[i].abs() / (1.0 + y[i].abs().max(yn[i].abs()))).fold(0.0, f64::max) / INTEGRATION_TOL;
                    let factor = if norm > 0.0 { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
                    if norm <= 1.0 && yn.iter().all(|x| x.is_finite()) {
                        h = (hs * factor).max(MIN_STEP);
                        break (yn, hs);
                    }
                    rejected += 1;
                    tries += 1;
                    h = hs * factor.min(0.5);
                    if h < MIN_STEP || tries > MAX_REJECTIONS {
                        return Err(Error::IntegrationFailure { reach: t, message: format!("step size collapsed near scatterer {}", label.scatterer) });
                    }
                };
                steps += 1;
                t += step;
                if u != 0.0 && next[1] * u <= 0.0 {
                    let w = u / (u - next[1]);
                    let th = theta + w * (next[0] - theta);
                    crossings.push(SeamCrossing { t: t - step + w * step, label, theta: th.rem_euclid(std::f64::consts::TAU) });
                }
                let sp = speed2(profile, eps, label, next[0], next[1], next[2], next[3]).sqrt();
                drift = drift.max((sp - 1.0).abs());
                state = SurfaceState::Collar { label, theta: next[0], u: next[1], dtheta: next[2], du: next[3] };
                if next[1] * next[1] >= profile.switch_distance() && next[1] * next[3] > 0.0 {
                    let (p, v) = collar_to_table(profile, label, next[0], next[1], next[2], next[3]);
                    let n = v[0].hypot(v[1]);
                    state = SurfaceState::Flat { point: p, velocity: [v[0] / n, v[1] / n], sheet: Sheet::of(next[1]) };
                    exclude = Some(label);
                }
                samples.push(sample(profile, &state, t));
            }
        }
    }
    Ok(GeodesicPath { eps, samples, crossings, length: t, end: state, steps, rejected, max_speed_drift: drift })
}

fn sample(profile: &HeightProfile, state: &SurfaceState, t: f64) -> PathSample {
    let (point, _) = project(profile, state);
    let height = match *state {
        SurfaceState::Flat { sheet, .. } => sheet.sign() * profile.height_of_distance(profile.flat_distance())[0],
        SurfaceState::Collar { u, .. } => profile.sheet_height(u)[0],
    };
    PathSample { t, point, height, straight: false }
}
