use super::*;
use crate::error::Error;
use crate::geometry::{LiftedLabel, SupportCurve, Table};
use crate::spectrum::{enumerate_spectrum, tau_pair, OrbitWord, Step};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn reference() -> Table {
    Table::new(vec![
        SupportCurve::new(vec![0.38, 0.0, 0.0, 0.015, 0.0, 0.0, 0.006]).unwrap(),
        SupportCurve::new(vec![0.2, 0.5, 0.5, -0.01, 0.008]).unwrap(),
    ])
    .unwrap()
}

fn single_disk(r: f64) -> Table {
    Table::new(vec![SupportCurve::circle([0.5, 0.5], r).unwrap()]).unwrap()
}

/// Disk `B` sits across the segment from `A` to `C`; `D` lies below.
fn blocked_chain() -> Table {
    Table::new(vec![
        SupportCurve::circle([0.2, 0.3], 0.08).unwrap(),
        SupportCurve::circle([0.5, 0.31], 0.1).unwrap(),
        SupportCurve::circle([0.8, 0.3], 0.08).unwrap(),
        SupportCurve::circle([0.5, 0.02], 0.1).unwrap(),
    ])
    .unwrap()
}

fn word(rho: &[usize]) -> OrbitWord {
    OrbitWord::new(rho.iter().map(|&l| Step { scatterer: l, disp: [0, 0] }).collect())
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[test]
fn geodesic_between_visible_points_is_the_segment() {
    let t = single_disk(0.2);
    let x = [0.1, 0.1];
    let y = [0.9, 0.15];
    let p = dl_geodesic(&t, x, y).unwrap();
    assert!((p.length - dist(x, y)).abs() < 1e-15);
    assert_eq!(p.pieces.len(), 1);
    assert_eq!(dl_geodesic(&t, x, x).unwrap().length, 0.0);
}

#[test]
fn geodesic_wraps_a_disk() {
    let r = 0.2;
    let t = single_disk(r);
    for a in [0.25, 0.3, 0.45] {
        let x = [0.5 - a, 0.5];
        let y = [0.5 + a, 0.5];
        let p = dl_geodesic(&t, x, y).unwrap();
        let tangent = (a * a - r * r).sqrt();
        let wrap = r * (PI - 2.0 * (r / a).acos());
        assert!((p.length - (2.0 * tangent + wrap)).abs() < 1e-12, "a {a}: {} vs {}", p.length, 2.0 * tangent + wrap);
        assert!(p.pieces.iter().any(|q| matches!(q, PathPiece::Arc { .. })));
    }
}

#[test]
fn geodesic_point_inside_a_scatterer_is_rejected() {
    let t = single_disk(0.2);
    assert!(matches!(dl_geodesic(&t, [0.5, 0.5], [0.1, 0.1]), Err(Error::Domain(_))));
}

/// Visibility graph on a dense boundary sample: every path in it is a path
/// in the table, so it bounds the true distance from above.
fn dense_relaxation(t: &Table, x: [f64; 2], y: [f64; 2], n: usize) -> f64 {
    let lo = [x[0].min(y[0]) - 0.3, x[1].min(y[1]) - 0.3];
    let hi = [x[0].max(y[0]) + 0.3, x[1].max(y[1]) + 0.3];
    let mut obstacles = Vec::new();
    for i in -2..=2 {
        for j in -2..=2 {
            for l in 0..t.len() {
                let label = LiftedLabel::new([i, j], l);
                let c = t.lift_scatterer(label);
                let (cc, r) = (c.center(), c.radius_bound());
                if cc[0] + r > lo[0] && cc[0] - r < hi[0] && cc[1] + r > lo[1] && cc[1] - r < hi[1] {
                    obstacles.push((label, c));
                }
            }
        }
    }
    let mut pts: Vec<([f64; 2], Option<(usize, usize)>)> = vec![(x, None), (y, None)];
    let mut normals = vec![[0.0; 2]; 2];
    for (o, (label, _)) in obstacles.iter().enumerate() {
        let sc = t.scatterer(label.scatterer);
        for k in 0..n {
            let s = sc.perimeter() * k as f64 / n as f64;
            pts.push((t.lifted_point(*label, s), Some((o, k))));
            normals.push(sc.frame(s).normal);
        }
    }
    // A segment leaving a boundary point must point out of its scatterer.
    let outward = |a: usize, b: usize| {
        let v = [pts[b].0[0] - pts[a].0[0], pts[b].0[1] - pts[a].0[1]];
        pts[a].1.is_none() || v[0] * normals[a][0] + v[1] * normals[a][1] >= 0.0
    };
    let m = pts.len();
    let mut d = vec![f64::INFINITY; m];
    d[0] = 0.0;
    let mut done = vec![false; m];
    for _ in 0..m {
        let Some(u) = (0..m).filter(|&i| !done[i]).min_by(|&a, &b| d[a].total_cmp(&d[b])) else { break };
        if !d[u].is_finite() {
            break;
        }
        done[u] = true;
        for v in 0..m {
            if done[v] {
                continue;
            }
            let w = match (pts[u].1, pts[v].1) {
                (Some((oa, ka)), Some((ob, kb))) if oa == ob => {
                    let gap = (ka as i64 - kb as i64).rem_euclid(n as i64);
                    if gap != 1 && gap != n as i64 - 1 {
                        continue;
                    }
                    t.scatterer(obstacles[oa].0.scatterer).perimeter() / n as f64
                }
                _ => {
                    if !outward(u, v) || !outward(v, u) {
                        continue;
                    }
                    let skip = [pts[u].1.map(|p| p.0), pts[v].1.map(|p| p.0)];
                    let blocked = obstacles
                        .iter()
                        .enumerate()
                        .any(|(o, (_, c))| !skip.contains(&Some(o)) && !separated(c, pts[u].0, pts[v].0));
                    if blocked {
                        continue;
                    }
                    dist(pts[u].0, pts[v].0)
                }
            };
            d[v] = d[v].min(d[u] + w);
        }
    }
    d[1]
}

/// Separating-axis test between a segment and a convex curve over sampled
/// directions; inconclusive cases count as blocked.
fn separated(c: &SupportCurve, a: [f64; 2], b: [f64; 2]) -> bool {
    (0..256).any(|m| {
        let th = 2.0 * PI * m as f64 / 256.0;
        let (cs, sn) = (th.cos(), th.sin());
        (a[0] * cs + a[1] * sn).min(b[0] * cs + b[1] * sn) > c.h(th) - 1e-12
    })
}

fn segment_free(t: &Table, a: [f64; 2], b: [f64; 2]) -> bool {
    (-2..=2).all(|i| (-2..=2).all(|j| (0..t.len()).all(|l| separated(&t.lift_scatterer(LiftedLabel::new([i, j], l)), a, b))))
}

#[test]
fn geodesic_agrees_with_dense_relaxation() {
    let t = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let x = free_point(&t, &mut rng);
        let y = free_point(&t, &mut rng);
        let exact = dl_geodesic(&t, x, y).unwrap().length;
        let dense = dense_relaxation(&t, x, y, 96);
        assert!(dense >= exact - 1e-9, "relaxation {dense} below exact {exact}");
        assert!(dense - exact < 1e-2, "relaxation {dense} far above exact {exact}");
    }
}

fn free_point(t: &Table, rng: &mut ChaCha8Rng) -> [f64; 2] {
    loop {
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let inside = (-1..=1).any(|i| {
            (-1..=1).any(|j| {
                (0..t.len()).any(|l| {
                    let c = t.lift_scatterer(LiftedLabel::new([i, j], l));
                    (0..256).all(|m| {
                        let th = 2.0 * PI * m as f64 / 256.0;
                        p[0] * th.cos() + p[1] * th.sin() < c.h(th) + 1e-6
                    })
                })
            })
        });
        if !inside {
            return p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn geodesic_distance_is_a_metric(seed in 0u64..1_000_000) {
        let t = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = free_point(&t, &mut rng);
        let y = free_point(&t, &mut rng);
        let z = free_point(&t, &mut rng);
        let dxy = dl_geodesic(&t, x, y).unwrap().length;
        let dyz = dl_geodesic(&t, y, z).unwrap().length;
        let dxz = dl_geodesic(&t, x, z).unwrap().length;
        prop_assert!(dxz <= dxy + dyz + 1e-12);
        prop_assert!(dxy >= dist(x, y) - 1e-15);
        prop_assert!((dl_geodesic(&t, y, x).unwrap().length - dxy).abs() < 1e-12);
        if segment_free(&t, x, y) {
            prop_assert!((dxy - dist(x, y)).abs() < 1e-12);
        }
    }
}

#[test]
fn enriched_length_matches_orbit_length_and_rejects_outside_points() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 2, 1.0).unwrap();
    let e = spec.regular().next().unwrap();
    let ev = enriched_length(&t, &e.word, &e.params, &e.params).unwrap();
    assert!((ev.value - e.length).abs() < 1e-12);
    assert!(ev.residual < 1e-9);
    let p = ElProblem::new(&t, &e.word).unwrap();
    let bad = p.into_links[0].arcs[0].0 - 0.05;
    let mut x = e.params.clone();
    x[0] = t.scatterer(e.word.scatterer(0)).wrap(bad);
    assert!(matches!(p.eval(&x, &e.params), Err(Error::InfeasiblePoint(_))));
}

#[test]
fn enriched_gradient_matches_finite_differences() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 3, 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for entry in spec.regular() {
        let p = ElProblem::new(&t, &entry.word).unwrap();
        let q = entry.word.q();
        for _ in 0..20 {
            let e: Vec<f64> = entry.params.iter().map(|x| x + rng.gen_range(-0.03..0.03)).collect();
            let s: Vec<f64> = entry.params.iter().map(|x| x + rng.gen_range(-0.03..0.03)).collect();
            let Ok(ev) = p.eval(&e, &s) else { continue };
            if ev.arcs.iter().any(|a| a.value < 1e-4) {
                continue;
            }
            let h = 1e-6;
            for k in 0..q {
                let mut ep = e.clone();
                let mut em = e.clone();
                ep[k] += h;
                em[k] -= h;
                let (Ok(a), Ok(b)) = (p.eval(&ep, &s), p.eval(&em, &s)) else { continue };
                let fd = (a.value - b.value) / (2.0 * h);
                let an = ev.chords[k].d2 + ev.arcs[k].d_e.lo;
                assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp[k] += h;
                sm[k] -= h;
                let (Ok(a), Ok(b)) = (p.eval(&e, &sp), p.eval(&e, &sm)) else { continue };
                let fd = (a.value - b.value) / (2.0 * h);
                let an = ev.chords[(k + 1) % q].d1 + ev.arcs[k].d_s.lo;
                assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "only {checked} checks");
}

#[test]
fn regular_orbits_are_enriched_minimisers() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 4, 1.4).unwrap();
    let mut n = 0;
    for e in spec.regular() {
        let c = minimize_EL(&t, &e.word).unwrap();
        assert_eq!(c.kind, CycleKind::Orbit, "{}", e.word);
        assert!((c.el - e.length).abs() < 1e-9);
        for k in 0..e.word.q() {
            assert!(t.scatterer(e.word.scatterer(k)).arc_distance(c.e[k], c.s[k]) < 1e-9);
        }
        assert!(c.residual < TOL_CERT && c.reflection_residual < 1e-9);
        n += 1;
    }
    assert!(n > 20);
}

#[test]
fn blocked_chain_wraps_the_obstacle() {
    let t = blocked_chain();
    let w = word(&[0, 1, 2, 3]);
    let c = minimize_EL(&t, &w).unwrap();
    assert_eq!(c.kind, CycleKind::Mixed);
    assert!(matches!(c.transitions[1], Transition::Wrap(_)));
    assert_eq!(c.transitions[0], Transition::Specular);
    let arc = t.scatterer(1).arc_distance(c.e[1], c.s[1]);
    assert!(arc > 0.01);
    // Tangential arrival and departure at the wrapped disk.
    let p = ElProblem::new(&t, &w).unwrap();
    let ev = p.eval(&c.e, &c.s).unwrap();
    assert!(ev.chords[1].cos2 < 1e-8 && ev.chords[2].cos1 < 1e-8);
    // From the departure point on A to the arrival point on C the cycle is
    // a shortest path in the table.
    let here = |l: usize, s: f64| t.lifted_point(LiftedLabel::new([0, 0], l), s);
    let x = here(0, c.s[0]);
    let y = here(2, c.e[2]);
    let piece = ev.chords[1].tau + arc + ev.chords[2].tau;
    let oracle = dl_geodesic(&t, x, y).unwrap().length;
    assert!((piece - oracle).abs() < 1e-9, "{piece} vs {oracle}");
}

#[test]
fn minimiser_beats_random_feasible_points() {
    let t = blocked_chain();
    let w = word(&[0, 1, 2, 3]);
    let c = minimize_EL(&t, &w).unwrap();
    let p = ElProblem::new(&t, &w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut feasible = 0;
    for _ in 0..100_000 {
        let e: Vec<f64> = (0..4).map(|k| c.e[k] + rng.gen_range(-0.1..0.1)).collect();
        let s: Vec<f64> = (0..4).map(|k| c.s[k] + rng.gen_range(-0.1..0.1)).collect();
        if let Ok(ev) = p.eval(&e, &s) {
            feasible += 1;
            assert!(ev.value >= c.el - 1e-12, "{} < {}", ev.value, c.el);
        }
    }
    assert!(feasible > 1000);
}

#[test]
fn invalid_words_are_infeasible() {
    let t = reference();
    assert!(matches!(minimize_EL(&t, &word(&[0, 0])), Err(Error::InfeasibleWord(_))));
}

#[test]
fn enriched_length_is_convex_on_feasible_segments() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 3, 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let entries: Vec<_> = spec.regular().collect();
    let problems: Vec<ElProblem> = entries.iter().map(|e| ElProblem::new(&t, &e.word).unwrap()).collect();
    let mut tested = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    while tested < 2000 {
        let i = rng.gen_range(0..entries.len());
        let (entry, p) = (entries[i], &problems[i]);
        let jitter = |rng: &mut ChaCha8Rng| -> Vec<f64> { entry.params.iter().map(|x| x + rng.gen_range(-0.05..0.05)).collect() };
        let (e1, s1, e2, s2) = (jitter(&mut rng), jitter(&mut rng), jitter(&mut rng), jitter(&mut rng));
        let mix = |a: &[f64], b: &[f64], u: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| u * x + (1.0 - u) * y).collect() };
        let on_segment = (0..=8).all(|i| {
            let u = i as f64 / 8.0;
            p.eval(&mix(&e1, &e2, u), &mix(&s1, &s2, u)).is_ok()
        });
        if !on_segment {
            continue;
        }
        let u: f64 = rng.gen_range(0.0..1.0);
        let a = p.eval(&e1, &s1).unwrap().value;
        let b = p.eval(&e2, &s2).unwrap().value;
        let m = p.eval(&mix(&e1, &e2, u), &mix(&s1, &s2, u)).unwrap().value;
        worst = worst.max(m - (u * a + (1.0 - u) * b));
        tested += 1;
    }
    assert!(worst < 1e-9, "convexity violated by {worst}");
}

#[test]
fn enriched_spectrum_contains_orbits_and_boundaries() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 3, 1.3).unwrap();
    let en = enriched_spectrum(&t, 3, 2.5).unwrap();
    for e in spec.regular() {
        let got = en.get(&e.word).unwrap_or_else(|| panic!("missing {}", e.word));
        assert_eq!(got.kind, CycleKind::Orbit);
        assert!((got.el - e.length).abs() < 1e-9);
    }
    for l in 0..t.len() {
        let b = en.get(&OrbitWord::boundary(l)).unwrap();
        assert_eq!(b.kind, CycleKind::Boundary);
        assert_eq!(b.el, t.scatterer(l).perimeter());
    }
    assert!(en.entries.iter().any(|e| e.kind == CycleKind::Mixed));
    assert!(en.failures.is_empty(), "{:?}", en.failures);
    let again = enriched_spectrum(&t, 3, 2.5).unwrap();
    assert_eq!(en.entries.len(), again.entries.len());
    for (a, b) in en.entries.iter().zip(&again.entries) {
        assert_eq!(a.word, b.word);
        assert_eq!(a.el.to_bits(), b.el.to_bits());
    }
}

#[test]
fn enriched_chords_have_admissible_angles() {
    let t = blocked_chain();
    let w = word(&[0, 1, 2, 3]);
    let c = minimize_EL(&t, &w).unwrap();
    for k in 0..4 {
        let prev = (k + 3) % 4;
        let tp = tau_pair(&t, [0, 0], w.scatterer(prev), w.scatterer(k), c.s[prev], c.e[k]).unwrap();
        assert!(tp.cos1 > -1e-9 && tp.cos2 > -1e-9);
    }
}
