use super::*;
use crate::error::Error;
use crate::geometry::{LiftedLabel, SupportCurve, Table};
use crate::spectrum::OrbitWord;
use proptest::prelude::*;
use std::f64::consts::TAU;
use std::sync::OnceLock;

fn profile() -> &'static HeightProfile {
    static P: OnceLock<HeightProfile> = OnceLock::new();
    P.get_or_init(|| {
        let t = Table::new(vec![
            SupportCurve::new(vec![0.38, 0.0, 0.0, 0.015, 0.0, 0.0, 0.006]).unwrap(),
            SupportCurve::new(vec![0.2, 0.5, 0.5, -0.01, 0.008]).unwrap(),
        ])
        .unwrap();
        HeightProfile::new(&t).unwrap()
    })
}

/// Table point at distance `d` from scatterer `l` over normal angle `θ`.
fn point_at(l: usize, theta: f64, d: f64) -> [f64; 2] {
    profile().collar_point(LiftedLabel::new([0, 0], l), theta, d.sqrt())
}

fn plane(p: [f64; 2]) -> ChartPoint {
    ChartPoint::Plane { point: p, sheet: Sheet::Up }
}

#[test]
fn metric_at_eps_one_is_the_embedded_metric() {
    let pr = profile();
    let h = 1e-6;
    for (l, theta, frac) in [(0, 0.3, 0.3), (1, 2.0, 0.6), (0, 4.0, 0.9), (1, 5.5, 0.2)] {
        let p = point_at(l, theta, frac * pr.flat_distance());
        let m = metric_coeffs(pr, 1.0, &plane(p)).unwrap();
        let zx = (pr.height([p[0] + h, p[1]]).unwrap() - pr.height([p[0] - h, p[1]]).unwrap()) / (2.0 * h);
        let zy = (pr.height([p[0], p[1] + h]).unwrap() - pr.height([p[0], p[1] - h]).unwrap()) / (2.0 * h);
        assert!((m.e - (1.0 + zx * zx)).abs() < 1e-6, "{} vs {}", m.e, 1.0 + zx * zx);
        assert!((m.f - zx * zy).abs() < 1e-6);
        assert!((m.g - (1.0 + zy * zy)).abs() < 1e-6);
    }
}

#[test]
fn flat_region_is_euclidean() {
    let pr = profile();
    let p = point_at(1, 1.0, 1.2 * pr.flat_distance());
    for eps in [1.0, 0.1, 0.01] {
        let m = metric_coeffs(pr, eps, &plane(p)).unwrap();
        assert_eq!((m.e, m.f, m.g), (1.0, 0.0, 1.0));
        assert!(m.christoffel.iter().flatten().flatten().all(|c| *c == 0.0));
    }
}

#[test]
fn plane_chart_refuses_the_seam_and_the_obstacles() {
    let pr = profile();
    let near = point_at(0, 1.0, 1e-4);
    assert!(matches!(metric_coeffs(pr, 0.1, &plane(near)), Err(Error::Domain(_))));
    assert!(matches!(metric_coeffs(pr, 0.1, &plane([0.5, 0.5])), Err(Error::Domain(_))));
    assert!(matches!(metric_coeffs(pr, 0.0, &plane(point_at(0, 1.0, 0.03))), Err(Error::Domain(_))));
    let far = ChartPoint::Collar { label: LiftedLabel::new([0, 0], 0), theta: 0.0, u: 1.0 };
    assert!(matches!(metric_coeffs(pr, 0.1, &far), Err(Error::Domain(_))));
}

#[test]
fn metric_deviation_is_quadratic_in_eps() {
    let pr = profile();
    let pairs = [(0.2, 0.1), (0.5, 0.05), (1.0, 0.3), (0.1, 0.025)];
    let grid: Vec<[f64; 2]> = (0..24)
        .flat_map(|j| {
            let theta = TAU * j as f64 / 24.0;
            [0.15, 0.3, 0.5, 0.7, 0.9].map(|f| point_at(j % 2, theta, f * pr.flat_distance()))
        })
        .collect();
    let dev = |p: [f64; 2], a: f64, b: f64| {
        let (ma, mb) = (metric_coeffs(pr, a, &plane(p)).unwrap(), metric_coeffs(pr, b, &plane(p)).unwrap());
        [(ma.e - mb.e).abs(), (ma.f - mb.f).abs(), (ma.g - mb.g).abs()].into_iter().fold(0.0, f64::max) / (a * a - b * b).abs()
    };
    let c = grid.iter().flat_map(|p| pairs.map(|(a, b)| dev(*p, a, b))).fold(0.0, f64::max);
    assert!(c > 0.0 && c.is_finite());
    for k in 0..40 {
        let theta = 0.37 + 0.61 * k as f64;
        let frac = 0.15 + 0.7 * ((k * 7) % 40) as f64 / 40.0;
        let p = point_at(k % 2, theta, frac * pr.flat_distance());
        assert!(dev(p, 0.7, 0.15) <= 1.05 * c);
    }
}

#[test]
fn christoffel_symbols_match_the_graph_formula_and_differences() {
    let pr = profile();
    let h = 1e-6;
    for (l, theta, frac, eps) in [(0, 0.4, 0.4, 0.3), (1, 3.0, 0.7, 1.0), (0, 5.0, 0.2, 0.05)] {
        let p = point_at(l, theta, frac * pr.flat_distance());
        let m = metric_coeffs(pr, eps, &plane(p)).unwrap();
        // Surface `z(x, y)`: `Γ^k_ij = ε² z_k z_ij / (1 + ε²|∇z|²)`.
        let z = |q: [f64; 2]| pr.height(q).unwrap();
        let dz = |q: [f64; 2], i: usize| {
            let (mut a, mut b) = (q, q);
            a[i] += h;
            b[i] -= h;
            (z(a) - z(b)) / (2.0 * h)
        };
        let grad = [dz(p, 0), dz(p, 1)];
        let hess = |i: usize, j: usize| {
            let (mut a, mut b) = (p, p);
            a[j] += 1e-4;
            b[j] -= 1e-4;
            (dz(a, i) - dz(b, i)) / 2e-4
        };
        let denom = 1.0 + eps * eps * (grad[0] * grad[0] + grad[1] * grad[1]);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let want = eps * eps * grad[k] * hess(i, j) / denom;
                    assert!((m.christoffel[k][i][j] - want).abs() < 1e-4 * (1.0 + want.abs()), "Γ[{k}][{i}][{j}] {} vs {want}", m.christoffel[k][i][j]);
                }
            }
        }
    }
    let label = LiftedLabel::new([0, 0], 1);
    for (theta, u, eps) in [(0.5, 0.0, 0.1), (2.0, 0.05, 0.05), (4.0, -0.15, 0.2)] {
        let at = |t: f64, v: f64| metric_coeffs(pr, eps, &ChartPoint::Collar { label, theta: t, u: v }).unwrap();
        let m = at(theta, u);
        let de = [(at(theta + h, u).e - at(theta - h, u).e) / (2.0 * h), (at(theta, u + h).e - at(theta, u - h).e) / (2.0 * h)];
        let dg = [(at(theta + h, u).g - at(theta - h, u).g) / (2.0 * h), (at(theta, u + h).g - at(theta, u - h).g) / (2.0 * h)];
        let fd = christoffel(m.e, m.f, m.g, de, [0.0; 2], dg);
        for (a, b) in m.christoffel.iter().flatten().flatten().zip(fd.iter().flatten().flatten()) {
            assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn metric_is_positive_definite_on_a_grid() {
    let pr = profile();
    let umax = pr.collar_distance().sqrt() * 0.999;
    for eps in [1.0, 0.2, 0.1, 0.05, 0.025, 1e-3] {
        for l in 0..2 {
            for a in 0..48 {
                let theta = TAU * a as f64 / 48.0;
                for b in 0..=40 {
                    let u = -umax + 2.0 * umax * b as f64 / 40.0;
                    let m = metric_coeffs(pr, eps, &ChartPoint::Collar { label: LiftedLabel::new([0, 0], l), theta, u }).unwrap();
                    assert!(m.is_positive_definite(), "eps {eps} θ {theta} u {u}");
                }
                let p = point_at(l, theta, 0.5 * pr.switch_distance());
                assert!(metric_coeffs(pr, eps, &plane(p)).unwrap().is_positive_definite());
            }
        }
    }
}

#[test]
fn seam_conditions_hold() {
    let c = profile().check_conditions(64);
    assert!(c.max_seam_height < 1e-7, "{c:?}");
    assert!(c.min_interior_height > 0.0);
    assert!(c.min_slice_curvature > 1.0);
    assert!(c.min_vertical_normal > 0.0);
}

#[test]
fn flat_geodesic_is_a_straight_line() {
    let pr = profile();
    let p = [0.5, 0.05];
    let v = [0.6, 0.8];
    let (t_hit, _, _) = pr.next_collar(p, v, None, 10.0).unwrap();
    let init = lift(pr, 0.1, p, v, Sheet::Up).unwrap();
    let path = integrate_geodesic(pr, 0.1, init, 0.9 * t_hit).unwrap();
    let end = project(pr, &path.end).0;
    assert!((end[0] - (p[0] + 0.9 * t_hit * v[0])).abs() < 1e-15);
    assert!((end[1] - (p[1] + 0.9 * t_hit * v[1])).abs() < 1e-15);
    assert_eq!(path.steps, 0);
}

#[test]
fn speed_is_conserved_through_seam_crossings() {
    let pr = profile();
    for eps in [0.2, 0.05, 0.025] {
        let init = lift(pr, eps, [0.1, 0.5], [1.0, 0.2], Sheet::Up).unwrap();
        let path = integrate_geodesic(pr, eps, init, 0.8).unwrap();
        assert!(path.crossings.len() >= 2);
        assert!(path.max_speed_drift < 1e-8, "eps {eps}: drift {:e}", path.max_speed_drift);
        assert_eq!(path.end.sheet(), if path.crossings.len() % 2 == 0 { Sheet::Up } else { Sheet::Down });
    }
}

#[test]
fn reversed_geodesic_retraces_the_path() {
    let pr = profile();
    let (p, v) = ([0.3, 0.75], [1.0, -0.7]);
    let eps = 0.1;
    let fwd = integrate_geodesic(pr, eps, lift(pr, eps, p, v, Sheet::Up).unwrap(), 0.5).unwrap();
    assert!(!fwd.crossings.is_empty());
    let back = integrate_geodesic(pr, eps, fwd.end.reversed(), 0.5).unwrap();
    let (q, w) = project(pr, &back.end);
    let n = v[0].hypot(v[1]);
    assert!((q[0] - p[0]).hypot(q[1] - p[1]) < 1e-6);
    assert!((w[0] + v[0] / n).hypot(w[1] + v[1] / n) < 1e-6);
    assert_eq!(back.end.sheet(), Sheet::Up);
}

#[test]
fn projected_geodesics_approach_the_billiard_flow() {
    let r = convergence_test(profile(), [0.1, 0.5], [1.0, 0.2], 0.6, &DEFAULT_EPS_LIST).unwrap();
    assert!(r.collisions >= 2);
    assert!(r.is_monotone(0.1), "{:?}", r.rows);
    assert!(r.rows[3].sup_distance < 0.1 * r.rows[0].sup_distance);
}

#[test]
fn collision_free_segment_matches_the_straight_line() {
    let pr = profile();
    let (p, v) = ([0.5, 0.05], [0.6, 0.8]);
    let (t_hit, _, _) = pr.next_collar(p, v, None, 10.0).unwrap();
    let r = convergence_test(pr, p, v, 0.9 * t_hit, &DEFAULT_EPS_LIST).unwrap();
    assert_eq!(r.collisions, 0);
    assert!(r.rows.iter().all(|row| row.sup_distance < 1e-12));
}

#[test]
fn starts_outside_the_table_are_rejected() {
    let pr = profile();
    assert!(matches!(convergence_test(pr, [0.5, 0.5], [1.0, 0.0], 1.0, &[0.1]), Err(Error::NotInA0(_))));
    let on_boundary = point_at(0, 0.7, 0.0);
    assert!(matches!(convergence_test(pr, on_boundary, [1.0, 0.0], 1.0, &[0.1]), Err(Error::NotInA0(_))));
}

#[test]
fn boundary_class_is_the_seam() {
    let pr = profile();
    for eps in [0.5, 0.05] {
        let c = closed_geodesic_in_class(pr, eps, &OrbitWord::boundary(1)).unwrap();
        assert_eq!(c.length, pr.table().scatterer(1).perimeter());
        assert_eq!(c.el, c.length);
    }
}

#[test]
fn closed_geodesic_excess_scales_like_eps_squared_log() {
    let pr = profile();
    let word = OrbitWord::from_rho_i(&[0, 1], &[[0, 0], [0, 0]]);
    let mut scaled = Vec::new();
    for eps in DEFAULT_EPS_LIST {
        let c = closed_geodesic_in_class(pr, eps, &word).unwrap();
        assert!(c.length >= c.el - 1e-6);
        assert!(c.closure < 1e-7);
        scaled.push((c.length - c.el) / (eps * eps * (1.0 / eps).ln()));
    }
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
    assert!(hi / lo < 1.25, "{scaled:?}");
}

#[test]
fn length_variation_is_lipschitz_in_eps() {
    let pr = profile();
    let label = LiftedLabel::new([0, 0], 0);
    // Straight segments in collar coordinates, some through the seam.
    let curves = [(0.2, 0.12, 1.0, -0.25), (1.5, -0.2, 0.4, 0.3), (3.0, 0.1, -0.8, -0.05), (4.5, 0.0, 0.6, 0.0)];
    let length = |c: (f64, f64, f64, f64), eps: f64| {
        let n = 4000;
        let speed = |t: f64| {
            let (th, u) = (c.0 + c.2 * t, c.1 + c.3 * t);
            let m = metric_coeffs(pr, eps, &ChartPoint::Collar { label, theta: th, u }).unwrap();
            m.norm2([c.2, c.3]).sqrt()
        };
        (0..n).map(|j| speed((j as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
    };
    let fit = [1.0, 0.5, 0.2, 0.1, 0.05];
    let mut c_fit: f64 = 0.0;
    for c in curves {
        for w in fit.windows(2) {
            c_fit = c_fit.max((length(c, w[0]) - length(c, w[1])).abs() / (w[0] - w[1]));
        }
    }
    for c in curves {
        for (a, b) in [(0.8, 0.3), (0.15, 0.02), (0.4, 0.07)] {
            assert!((length(c, a) - length(c, b)).abs() <= c_fit * (a - b) * 1.05);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn collar_metric_is_positive_definite(theta in 0.0..TAU, frac in -0.999f64..0.999, eps in 1e-4f64..1.0, l in 0usize..2) {
        let pr = profile();
        let u = frac * pr.collar_distance().sqrt();
        let m = metric_coeffs(pr, eps, &ChartPoint::Collar { label: LiftedLabel::new([0, 0], l), theta, u }).unwrap();
        prop_assert!(m.is_positive_definite());
    }

    #[test]
    fn lift_and_project_are_inverse(theta in 0.0..TAU, frac in 0.05f64..0.95, angle in 0.0..TAU, eps in 0.01f64..1.0) {
        let pr = profile();
        let p = point_at(1, theta, frac * pr.switch_distance());
        let v = [angle.cos(), angle.sin()];
        let s = lift(pr, eps, p, v, Sheet::Down).unwrap();
        prop_assert_eq!(s.sheet(), Sheet::Down);
        let (q, w) = project(pr, &s);
        prop_assert!((q[0] - p[0]).hypot(q[1] - p[1]) < 1e-12);
        prop_assert!((w[0] - v[0]).hypot(w[1] - v[1]) < 1e-12);
    }
}
