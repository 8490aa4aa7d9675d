//! Shortest paths in the lifted table among convex obstacles.

use super::tangents::{common_tangents, tangent_angles};
use crate::error::{Error, Result};
use crate::geometry::{LiftedLabel, SupportCurve, Table};
use crate::spectrum::chord_clearance;
use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::visit::EdgeRef;
use std::f64::consts::TAU;

/// Piece of a shortest path.
#[derive(Debug, Clone, PartialEq)]
pub enum PathPiece {
    Segment { from: [f64; 2], to: [f64; 2] },
    /// Boundary arc of a lifted scatterer between two normal angles.
    Arc { label: LiftedLabel, from: f64, to: f64, length: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlPath {
    pub length: f64,
    pub pieces: Vec<PathPiece>,
}

/// Slack allowed when a segment touches an obstacle tangentially.
const TOUCH: f64 = 1e-11;

struct Obstacle {
    label: LiftedLabel,
    curve: SupportCurve,
}

#[derive(Clone, Copy)]
struct Node {
    p: [f64; 2],
    on: Option<(usize, f64)>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Obstacle `i` the point lies on (with its normal angle), or an error when
/// it lies inside one.
fn locate(obs: &[Obstacle], x: [f64; 2]) -> Result<Option<(usize, f64)>> {
    for (i, o) in obs.iter().enumerate() {
        let c = o.curve.center();
        if dist(c, x) > o.curve.radius_bound() + 1e-9 {
            continue;
        }
        if tangent_angles(&o.curve, x).is_some() {
            continue;
        }
        // Not strictly outside: on the boundary or inside.
        let th = (x[1] - c[1]).atan2(x[0] - c[0]);
        let th = refine_foot(&o.curve, x, th);
        let gap = o.curve.h(th) - (x[0] * th.cos() + x[1] * th.sin());
        if gap.abs() < 1e-9 && dist(o.curve.point(th), x) < 1e-7 {
            return Ok(Some((i, th)));
        }
        return Err(Error::Domain(format!("point {x:?} lies inside scatterer {:?}", o.label)));
    }
    Ok(None)
}

/// Normal angle of the boundary point closest to `x` (Newton on the
/// tangential component of `γ(θ) − x`).
fn refine_foot(curve: &SupportCurve, x: [f64; 2], mut th: f64) -> f64 {
    for _ in 0..60 {
        let p = curve.point(th);
        let t = [-th.sin(), th.cos()];
        let f = (p[0] - x[0]) * t[0] + (p[1] - x[1]) * t[1];
        let rho = curve.radius_of_curvature(th);
        let n = [th.cos(), th.sin()];
        let df = rho - ((p[0] - x[0]) * n[0] + (p[1] - x[1]) * n[1]);
        if df.abs() < 1e-300 {
            break;
        }
        let step = f / df;
        th -= step.clamp(-0.5, 0.5);
        if step.abs() < 1e-15 {
            break;
        }
    }
    th.rem_euclid(TAU)
}

/// Shortest path from `x` to `y` in the closed lifted table.
///
/// Built on the tangent-visibility graph: the endpoints, the tangency points
/// of the tangents from each endpoint and of the common tangents of every
/// pair of obstacles; edges are free segments and boundary arcs between
/// consecutive nodes on one obstacle. The obstacle set grows until the path
/// fits in the ellipse of obstacles considered, so the result is exact.
pub fn dl_geodesic(table: &Table, x: [f64; 2], y: [f64; 2]) -> Result<DlPath> {
    if dist(x, y) == 0.0 {
        return Ok(DlPath { length: 0.0, pieces: Vec::new() });
    }
    let rmax = table.max_radius_bound();
    let mut budget = 1.25 * dist(x, y) + 4.0 * rmax;
    for _ in 0..8 {
        let obs = obstacles_in_ellipse(table, x, y, budget);
        if let Some(path) = shortest(table, &obs, x, y)? {
            if path.length <= budget {
                return Ok(path);
            }
            budget = path.length * 1.01;
        } else {
            budget *= 2.0;
        }
    }
    Err(Error::Geometry(format!("no path found between {x:?} and {y:?}")))
}

fn obstacles_in_ellipse(table: &Table, x: [f64; 2], y: [f64; 2], budget: f64) -> Vec<Obstacle> {
    let m = 0.5 * budget + table.max_radius_bound() + 1.0;
    let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
    let mut out = Vec::new();
    for i in (mid[0] - m).floor() as i64..=(mid[0] + m).ceil() as i64 {
        for j in (mid[1] - m).floor() as i64..=(mid[1] + m).ceil() as i64 {
            for l in 0..table.len() {
                let label = LiftedLabel::new([i, j], l);
                let curve = table.lift_scatterer(label);
                let c = curve.center();
                if dist(c, x) + dist(c, y) <= budget + 2.0 * curve.radius_bound() {
                    out.push(Obstacle { label, curve });
                }
            }
        }
    }
    out
}

fn shortest(table: &Table, obs: &[Obstacle], x: [f64; 2], y: [f64; 2]) -> Result<Option<DlPath>> {
    let mut nodes: Vec<Node> = vec![Node { p: x, on: locate(obs, x)? }, Node { p: y, on: locate(obs, y)? }];
    let mut segs: Vec<(usize, usize)> = vec![(0, 1)];
    for end in 0..2 {
        let p = nodes[end].p;
        for (i, o) in obs.iter().enumerate() {
            if nodes[end].on.map(|v| v.0) == Some(i) {
                continue;
            }
            if let Some((m, pl)) = tangent_angles(&o.curve, p) {
                for th in [m, pl] {
                    nodes.push(Node { p: o.curve.point(th), on: Some((i, th.rem_euclid(TAU))) });
                    segs.push((end, nodes.len() - 1));
                }
            }
        }
    }
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            let Ok(ts) = common_tangents(&obs[i].curve, &obs[j].curve) else { continue };
            for t in ts {
                nodes.push(Node { p: t.point_a, on: Some((i, t.theta_a)) });
                nodes.push(Node { p: t.point_b, on: Some((j, t.theta_b)) });
                segs.push((nodes.len() - 2, nodes.len() - 1));
            }
        }
    }
    let mut g: UnGraph<(), f64> = UnGraph::with_capacity(nodes.len(), segs.len() * 2);
    let idx: Vec<NodeIndex> = nodes.iter().map(|_| g.add_node(())).collect();
    let mut arc_of = std::collections::HashMap::new();
    for &(a, b) in &segs {
        if free(table, obs, nodes[a], nodes[b]) {
            g.add_edge(idx[a], idx[b], dist(nodes[a].p, nodes[b].p));
        }
    }
    for (i, o) in obs.iter().enumerate() {
        let mut on: Vec<(f64, usize)> = nodes.iter().enumerate().filter_map(|(k, n)| n.on.filter(|v| v.0 == i).map(|v| (v.1, k))).collect();
        if on.len() < 2 {
            continue;
        }
        on.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sc = table.scatterer(o.label.scatterer);
        let l = sc.perimeter();
        for w in 0..on.len() {
            let (ta, a) = on[w];
            let (tb, b) = on[(w + 1) % on.len()];
            let len = (sc.angle_to_arclength(tb) - sc.angle_to_arclength(ta)).rem_euclid(l);
            let e = g.add_edge(idx[a], idx[b], len);
            arc_of.insert(e, (i, ta, tb, len));
        }
    }
    let Some((length, path)) = astar(&g, idx[0], |n| n == idx[1], |e| *e.weight(), |_| 0.0) else {
        return Ok(None);
    };
    let mut pieces = Vec::new();
    for w in path.windows(2) {
        let (a, b) = (w[0].index(), w[1].index());
        let e = g
            .edges_connecting(w[0], w[1])
            .min_by(|p, q| p.weight().total_cmp(q.weight()))
            .expect("path edge exists");
        match arc_of.get(&e.id()) {
            Some(&(i, ta, tb, len)) => {
                let (from, to) = if nodes[a].on.map(|v| v.1) == Some(ta) { (ta, tb) } else { (tb, ta) };
                pieces.push(PathPiece::Arc { label: obs[i].label, from, to, length: len });
            }
            None => pieces.push(PathPiece::Segment { from: nodes[a].p, to: nodes[b].p }),
        }
    }
    Ok(Some(DlPath { length, pieces }))
}

/// Whether the open segment between two nodes stays in the table.
fn free(table: &Table, obs: &[Obstacle], a: Node, b: Node) -> bool {
    let tau = dist(a.p, b.p);
    if tau == 0.0 {
        return true;
    }
    let u = [(b.p[0] - a.p[0]) / tau, (b.p[1] - a.p[1]) / tau];
    for (node, sign) in [(a, 1.0), (b, -1.0)] {
        if let Some((_, th)) = node.on {
            if sign * (u[0] * th.cos() + u[1] * th.sin()) < -TOUCH {
                return false;
            }
        }
    }
    for (i, o) in obs.iter().enumerate() {
        if a.on.map(|v| v.0) == Some(i) || b.on.map(|v| v.0) == Some(i) {
            continue;
        }
        let c = o.curve.center();
        let rel = [c[0] - a.p[0], c[1] - a.p[1]];
        let t = (rel[0] * u[0] + rel[1] * u[1]).clamp(0.0, tau);
        if (rel[0] - t * u[0]).hypot(rel[1] - t * u[1]) > o.curve.radius_bound() {
            continue;
        }
        if let Some(cl) = chord_clearance(table, a.p, u, tau, o.label) {
            if cl < -TOUCH {
                return false;
            }
        }
    }
    true
}
