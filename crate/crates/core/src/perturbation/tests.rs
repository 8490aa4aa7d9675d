use super::*;
use crate::geometry::{LiftedLabel, SupportCurve, Table};
use crate::spectrum::{enumerate_spectrum, find_generalized_orbit, OrbitClass, OrbitWord};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_4, TAU};

fn reference() -> Table {
    Table::new(vec![
        SupportCurve::new(vec![0.38, 0.0, 0.0, 0.015, 0.0, 0.0, 0.006]).unwrap(),
        SupportCurve::new(vec![0.2, 0.5, 0.5, -0.01, 0.008]).unwrap(),
    ])
    .unwrap()
}

/// Disks at `(0, 0)` and `(½, ½)`: mirror symmetric about the diagonal.
fn two_disks() -> Table {
    Table::new(vec![SupportCurve::circle([0.0, 0.0], 0.38).unwrap(), SupportCurve::circle([0.5, 0.5], 0.2).unwrap()]).unwrap()
}

fn diagonal_word() -> OrbitWord {
    OrbitWord::from_rho_i(&[0, 1], &[[0, 0], [0, 0]])
}

/// Support of a point cloud, `max_i ⟨X_i, n(φ)⟩`.
fn cloud_support(points: &[[f64; 2]], phi: f64) -> f64 {
    let n = [phi.cos(), phi.sin()];
    points.iter().map(|p| p[0] * n[0] + p[1] * n[1]).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn bump_modes_meet_their_constraints() {
    let t = reference();
    let w = 0.3;
    let s0 = 0.7;
    let mv = BumpField::new(&t, 0, s0, w, BumpMode::Move).unwrap();
    let tilt = BumpField::new(&t, 0, s0, w, BumpMode::Tilt).unwrap();
    let ret = BumpField::new(&t, 0, s0, w, BumpMode::Retract).unwrap();
    assert_eq!(mv.eval(s0).0, 1.0);
    assert_eq!(ret.eval(s0).0, -1.0);
    assert_eq!(tilt.eval(s0).0, 0.0);
    assert!((tilt.eval(s0).1 - 1.0 / w).abs() < 1e-15);
    for j in 0..2000 {
        let s = t.scatterer(0).perimeter() * j as f64 / 2000.0;
        assert!(ret.value(s) <= 0.0);
        assert!(mv.value(s) >= 0.0);
    }
}

#[test]
fn bump_field_rejects_bad_widths() {
    let t = reference();
    assert!(matches!(BumpField::new(&t, 0, 0.0, 0.0, BumpMode::Move), Err(crate::Error::Domain(_))));
    assert!(BumpField::new(&t, 0, 0.0, 2.0, BumpMode::Move).is_err());
    assert!(BumpField::new(&t, 5, 0.0, 0.1, BumpMode::Move).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bump_support_and_derivative(s0 in 0.0f64..2.3, w in 0.05f64..0.9, s in -3.0f64..6.0, mode in 0usize..3) {
        let t = reference();
        let mode = [BumpMode::Move, BumpMode::Tilt, BumpMode::Retract][mode];
        let f = BumpField::new(&t, 0, s0, w, mode).unwrap();
        let l = f.perimeter();
        let off = (s - s0 + 0.5 * l).rem_euclid(l) - 0.5 * l;
        let (v, d) = f.eval(s);
        if off.abs() >= w {
            prop_assert_eq!(v, 0.0);
            prop_assert_eq!(d, 0.0);
        }
        let h = 1e-6;
        let fd = (f.value(s + h) - f.value(s - h)) / (2.0 * h);
        prop_assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()) / w);
    }
}

#[test]
fn zero_perturbation_is_bitwise_identity() {
    let t = reference();
    let f = BumpField::new(&t, 0, 0.4, 0.3, BumpMode::Move).unwrap();
    let same = apply_perturbation(&t, &f, 0.0).unwrap();
    for (a, b) in t.scatterers().iter().zip(same.scatterers()) {
        assert_eq!(a.curve().coeffs(), b.curve().coeffs());
    }
}

#[test]
fn retraction_moves_inside_and_keeps_the_rest() {
    let t = reference();
    let sc = t.scatterer(0);
    let s0 = 0.9;
    let w = 0.4;
    let eps = 1e-3;
    let f = BumpField::new(&t, 0, s0, w, BumpMode::Retract).unwrap();
    let p = apply_perturbation(&t, &f, eps).unwrap();
    let new = p.scatterer(0).curve();
    let th0 = sc.arclength_to_angle(s0);
    assert!((new.h(th0) - (sc.curve().h(th0) - eps)).abs() < 1e-9);
    for j in 0..720 {
        let th = TAU * j as f64 / 720.0;
        let s = sc.angle_to_arclength(th);
        let dh = new.h(th) - sc.curve().h(th);
        assert!(dh <= REFIT_TOL);
        if sc.arc_distance(s, s0) > 1.05 * w {
            assert!(dh.abs() <= REFIT_TOL);
        }
    }
    assert_eq!(p.scatterer(1).curve().coeffs(), t.scatterer(1).curve().coeffs());
}

#[test]
fn refit_matches_support_of_displaced_point_cloud() {
    let t = reference();
    let sc = t.scatterer(0);
    let f = BumpField::new(&t, 0, 1.7, 0.5, BumpMode::Tilt).unwrap();
    let eps = 2e-3;
    let refit = displaced_curve(sc, &[(f, eps)]).unwrap();
    assert!(refit.max_error <= REFIT_TOL);
    let m = 40_000;
    let cloud: Vec<[f64; 2]> = (0..m)
        .map(|j| {
            let s = sc.perimeter() * j as f64 / m as f64;
            let fr = sc.frame(s);
            let lam = eps * f.value(s);
            [fr.point[0] + lam * fr.normal[0], fr.point[1] + lam * fr.normal[1]]
        })
        .collect();
    for j in 0..500 {
        let phi = TAU * (j as f64 + 0.25) / 500.0;
        let h = refit.curve.h(phi);
        let c = cloud_support(&cloud, phi);
        assert!(c <= h + 2.0 * REFIT_TOL, "cloud outside refit at {phi}: {c} > {h}");
        assert!(h - c < 1e-8, "refit gap {} at {phi}", h - c);
    }
}

#[test]
fn displacement_round_trip() {
    let t = reference();
    let eps = 1e-6;
    let f = BumpField::new(&t, 0, 0.5, 0.5, BumpMode::Move).unwrap();
    let once = apply_perturbation(&t, &f, -eps).unwrap();
    let g = BumpField::new(&once, 0, 0.5, 0.5, BumpMode::Move).unwrap();
    let back = apply_perturbation(&once, &g, eps).unwrap();
    let (a, b) = (t.scatterer(0).curve(), back.scatterer(0).curve());
    for j in 0..1000 {
        let th = TAU * j as f64 / 1000.0;
        assert!((a.h(th) - b.h(th)).abs() < 1e-9);
    }
}

#[test]
fn large_perturbation_is_rejected() {
    let t = reference();
    let f = BumpField::new(&t, 1, 0.3, 0.05, BumpMode::Move).unwrap();
    let err = apply_perturbation(&t, &f, 0.05).unwrap_err();
    assert!(matches!(err, crate::Error::PerturbationTooLarge(_)), "{err}");
}

#[test]
fn normal_bounce_gives_p_equal_two() {
    let t = two_disks();
    let o = find_generalized_orbit(&t, &diagonal_word()).unwrap();
    assert!((t.scatterer(0).arclength_to_angle(o.params[0]) - FRAC_PI_4).abs() < 1e-9);
    let f = BumpField::new(&t, 0, o.params[0], 0.2, BumpMode::Move).unwrap();
    let p = p_lambda(&t, &o.word, &o.params, &f).unwrap();
    assert!((p.value - 2.0).abs() < 1e-12, "{}", p.value);
    let away = BumpField::new(&t, 0, o.params[0] + 1.0, 0.2, BumpMode::Move).unwrap();
    let p = p_lambda(&t, &o.word, &o.params, &away).unwrap();
    assert_eq!(p.value, 0.0);
    assert!(p.gradient.iter().all(|g| *g == 0.0));
}

#[test]
fn p_lambda_gradient_matches_finite_differences() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 3, 1.3).unwrap();
    let mut checked = 0;
    for e in spec.entries.values() {
        for (k, mode) in [BumpMode::Move, BumpMode::Tilt, BumpMode::Retract].into_iter().enumerate() {
            let Some(j) = (0..e.q()).find(|&j| e.word.scatterer(j) == k % 2) else { continue };
            let f = BumpField::new(&t, k % 2, e.params[j] + 0.05, 0.25, mode).unwrap();
            let s: Vec<f64> = e.params.iter().enumerate().map(|(i, x)| x + 0.01 * (i as f64 - 1.0)).collect();
            let p = p_lambda(&t, &e.word, &s, &f).unwrap();
            for i in 0..e.q() {
                let h = 1e-6;
                let mut up = s.clone();
                up[i] += h;
                let mut dn = s.clone();
                dn[i] -= h;
                let fd = (p_lambda(&t, &e.word, &up, &f).unwrap().value - p_lambda(&t, &e.word, &dn, &f).unwrap().value) / (2.0 * h);
                assert!((fd - p.gradient[i]).abs() < 1e-6, "{} {mode}: {fd} vs {}", e.word, p.gradient[i]);
            }
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn symmetric_bump_leaves_symmetric_orbit_in_place() {
    let t = two_disks();
    let o = find_generalized_orbit(&t, &diagonal_word()).unwrap();
    let f = BumpField::new(&t, 0, o.params[0], 0.3, BumpMode::Move).unwrap();
    let r = first_order_response_with(&t, &o.word, &o.params, &f, &[]).unwrap();
    assert!(r.psi.iter().all(|x| x.abs() < 1e-12), "{:?}", r.psi);
    assert!((r.delta + 2.0).abs() < 1e-12);
}

#[test]
fn response_prediction_error_halves_with_eps() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 3, 1.2).unwrap();
    let e = spec.entries.values().find(|e| e.q() == 3 && e.class == OrbitClass::Regular).unwrap();
    let j = (0..3).find(|&j| e.word.scatterer(j) == 0).unwrap();
    let f = BumpField::new(&t, 0, e.params[j] + 0.07, 0.5, BumpMode::Move).unwrap();
    let r = first_order_response_with(&t, &e.word, &e.params, &f, &VALIDATION_EPS).unwrap();
    assert!(r.residual < 1e-10);
    assert!(r.psi.iter().any(|x| x.abs() > 1e-3));
    let (shift, length) = r.error_ratios();
    for x in shift {
        assert!((1.7..=2.3).contains(&x), "shift ratio {x}");
    }
    for x in length {
        assert!((1.7..=2.3).contains(&x), "length ratio {x}");
    }
    // The residual error is the ε² term.
    let last = r.samples.last().unwrap();
    assert!((last.length_change - last.eps * r.delta - last.eps * last.eps * r.delta2).abs() < 5e-3 * last.eps * last.eps);
}

#[test]
fn tilt_at_a_bounce_is_second_order() {
    let t = two_disks();
    let o = find_generalized_orbit(&t, &diagonal_word()).unwrap();
    let f = BumpField::new(&t, 0, o.params[0], 0.3, BumpMode::Tilt).unwrap();
    let r = first_order_response_with(&t, &o.word, &o.params, &f, &[2e-3, 1e-3]).unwrap();
    assert_eq!(r.p_value, 0.0);
    assert!(r.psi[0].abs() > 1e-2);
    let hpsi: f64 = {
        let e = crate::spectrum::length_functional(&t, &o.word, &o.params).unwrap();
        r.psi.iter().zip(e.hessian.mul(&r.psi)).map(|(a, b)| a * b).sum()
    };
    assert!((r.delta2 + 0.5 * hpsi).abs() < 1e-12);
    assert!(r.delta2 < 0.0);
    for s in &r.samples {
        let measured = s.length_change / (s.eps * s.eps);
        assert!((measured - r.delta2).abs() < 0.05 * r.delta2.abs(), "{measured} vs {}", r.delta2);
    }
}

#[test]
fn perturbation_is_local_in_the_spectrum() {
    let t = reference();
    let spec = enumerate_spectrum(&t, 3, 1.3).unwrap();
    let s0 = 2.0;
    let w = 0.3;
    let f = BumpField::new(&t, 0, s0, w, BumpMode::Move).unwrap();
    let refit = displaced_curve(t.scatterer(0), &[(f, 1e-3)]).unwrap();
    let p = apply_perturbation(&t, &f, 1e-3).unwrap();
    let after = enumerate_spectrum(&p, 3, 1.3).unwrap();
    let (mut same, mut moved) = (0, 0);
    for (w_, e) in &spec.entries {
        let clear = (0..e.q()).all(|k| e.word.scatterer(k) != 0 || t.scatterer(0).arc_distance(e.params[k], s0) > w);
        let Some(a) = after.entries.get(w_) else { continue };
        // Refit ringing outside the support moves each bounce by at most
        // the refit error along its normal.
        let budget = 1e-12 + 2.0 * e.q() as f64 * refit.max_error;
        if clear {
            assert!((a.length - e.length).abs() <= budget, "{w_}: {:e}", a.length - e.length);
            same += 1;
        } else if (a.length - e.length).abs() > 1e-7 {
            moved += 1;
        }
    }
    assert!(same >= 3 && moved >= 3, "{same} {moved}");
}

/// Two diagonal-symmetric scatterers and a small disk touching the
/// diagonal period-two chord.
fn tangency_table() -> (Table, OrbitWord, Vec<f64>) {
    let a = SupportCurve::new(vec![0.38, 0.0, 0.0, 0.0, 0.015]).unwrap();
    let b = SupportCurve::new(vec![0.2, 0.5, 0.5, 0.0, 0.0, 0.005, -0.005]).unwrap();
    let t2 = Table::new(vec![a.clone(), b.clone()]).unwrap();
    let w = diagonal_word();
    let o = find_generalized_orbit(&t2, &w).unwrap();
    let p = t2.lifted_point(LiftedLabel::new([0, 0], 0), o.params[0]);
    let q = t2.lifted_point(LiftedLabel::new([0, 0], 1), o.params[1]);
    let r = 0.02;
    let v = [q[0] - p[0], q[1] - p[1]];
    let n = v[0].hypot(v[1]);
    let c = [0.5 * (p[0] + q[0]) - r * v[1] / n, 0.5 * (p[1] + q[1]) + r * v[0] / n];
    let t = Table::new(vec![a, b, SupportCurve::circle(c, r).unwrap()]).unwrap();
    (t, w, o.params)
}

#[test]
fn degraze_removes_a_chord_tangency() {
    let (t, w, params) = tangency_table();
    let before = enumerate_spectrum(&t, 2, 1.0).unwrap();
    assert_eq!(before.entries[&w].class, OrbitClass::Grazing);
    let (d, report) = degraze(&t, 2, 1.0).unwrap();
    assert!(report.complete);
    assert_eq!(report.log.len(), 1);
    assert_eq!(report.log[0].scatterer, 2);
    assert_eq!(report.log[0].mode, BumpMode::Retract);
    let o = find_generalized_orbit(&d, &w).unwrap();
    assert_eq!(o.class(), OrbitClass::Regular);
    for k in 0..2 {
        assert!(d.scatterer(k).arc_distance(o.params[k], params[k]) < 1e-8);
    }
    let after = enumerate_spectrum(&d, 2, 1.0).unwrap();
    assert!(after.entries.values().all(|e| e.class != OrbitClass::Grazing));
    let replayed = replay_log(&t, &report.log).unwrap();
    assert_eq!(replayed.scatterer(2).curve().coeffs(), d.scatterer(2).curve().coeffs());
}

#[test]
fn genericity_fixed_points() {
    let t = reference();
    let (d, report) = degraze(&t, 2, 1.0).unwrap();
    assert!(report.complete && report.log.is_empty());
    assert_eq!(d.scatterer(0).curve().coeffs(), t.scatterer(0).curve().coeffs());
    let (s, report) = separate_lengths(&t, 2, 1.0, 1e-9).unwrap();
    assert!(report.complete && report.log.is_empty());
    assert_eq!(s.scatterer(1).curve().coeffs(), t.scatterer(1).curve().coeffs());
}

#[test]
fn tilt_separates_a_mirror_collision() {
    // Both scatterers are symmetric about the diagonal, so mirror images
    // of off-diagonal orbits have equal length.
    let a = SupportCurve::new(vec![0.38, 0.0, 0.0, 0.0, 0.015]).unwrap();
    let b = SupportCurve::new(vec![0.2, 0.5, 0.5, 0.0, 0.0, 0.005, -0.005]).unwrap();
    let t = Table::new(vec![a, b]).unwrap();
    let spec = enumerate_spectrum(&t, 2, 1.0).unwrap();
    let collisions = crate::spectrum::check_simple_spectrum(&spec, 1e-9);
    assert!(!collisions.is_empty());
    let opts = GenericityOptions { gap: 1e-9, ..GenericityOptions::new(2, 1.0) };
    let (s, report) = separate_lengths_with(&t, &opts).unwrap();
    assert!(report.complete, "{:?}", report.remaining);
    assert!(!report.log.is_empty());
    assert!(report.log.iter().all(|e| e.eps <= opts.eps_max && e.mode == BumpMode::Tilt));
    let after = enumerate_spectrum(&s, 2, 1.0).unwrap();
    assert!(crate::spectrum::check_simple_spectrum(&after, 1e-9).is_empty());
    let (a, b, _) = &collisions[0];
    assert!((after.entries[a].length - after.entries[b].length).abs() >= 1e-9);
}
