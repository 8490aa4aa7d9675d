//! Segment lengths between lifted scatterers and the cyclic length functional.

use super::word::OrbitWord;
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::linalg::CyclicTridiag;

/// Length of a chord and its derivatives in the arc-length parameters of its
/// endpoints, with the cosines and sines of the endpoint angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauPair {
    pub tau: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
    /// `cos φ` at the departure point (angle of the chord to the normal).
    pub cos1: f64,
    /// `cos φ′` at the arrival point, after reflection.
    pub cos2: f64,
    pub sin1: f64,
    pub sin2: f64,
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl TauPair {
    /// Both endpoint angles face the chord.
    pub fn admissible(&self) -> bool {
        self.cos1 > 0.0 && self.cos2 > 0.0
    }
}

/// Chord from `s` on scatterer `ρ_a` in cell `(0, 0)` to `s′` on `ρ_b` in
/// cell `I`.
pub fn tau_pair(table: &Table, disp: [i64; 2], rho_a: usize, rho_b: usize, s: f64, s2: f64) -> Result<TauPair> {
    let fa = table.scatterer(rho_a).frame(s);
    let fb = table.scatterer(rho_b).frame(s2);
    let end = [fb.point[0] + disp[0] as f64, fb.point[1] + disp[1] as f64];
    let v = [end[0] - fa.point[0], end[1] - fa.point[1]];
    let tau = v[0].hypot(v[1]);
    if !(tau > 0.0) {
        return Err(Error::DegenerateSegment);
    }
    let u = [v[0] / tau, v[1] / tau];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let cos1 = dot(u, fa.normal);
    let cos2 = -dot(u, fb.normal);
    let sin1 = dot(u, fa.tangent);
    let sin2 = dot(u, fb.tangent);
    Ok(TauPair {
        tau,
        d1: -sin1,
        d2: sin2,
        d11: fa.curvature * cos1 + cos1 * cos1 / tau,
        d12: cos1 * cos2 / tau,
        d22: fb.curvature * cos2 + cos2 * cos2 / tau,
        cos1,
        cos2,
        sin1,
        sin2,
        start: fa.point,
        end,
    })
}

/// Value, gradient and cyclic tridiagonal Hessian of the length functional,
/// together with the chord of each segment (segment `k` ends at bounce `k`).
#[derive(Debug, Clone)]
pub struct LengthEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: CyclicTridiag,
    pub segments: Vec<TauPair>,
}

impl LengthEval {
    pub fn admissible(&self) -> bool {
        self.segments.iter().all(TauPair::admissible)
    }

    /// Smallest endpoint cosine over all chords.
    pub fn min_cos(&self) -> f64 {
        self.segments.iter().map(|p| p.cos1.min(p.cos2)).fold(f64::INFINITY, f64::min)
    }
}

/// `L(s) = Σ_k τ_{I_k}(s_{k−1}, s_k)` taken cyclically.
pub fn length_functional(table: &Table, word: &OrbitWord, s: &[f64]) -> Result<LengthEval> {
    let q = word.q();
    if s.len() != q {
        return Err(Error::InvalidWord(format!("expected {q} parameters, got {}", s.len())));
    }
    let mut segments = Vec::with_capacity(q);
    for k in 0..q {
        let prev = (k + q - 1) % q;
        let st = word.steps()[k];
        segments.push(tau_pair(table, st.disp, word.scatterer(prev), st.scatterer, s[prev], s[k])?);
    }
    let mut hessian = CyclicTridiag::zeros(q);
    let mut gradient = vec![0.0; q];
    for k in 0..q {
        let into = &segments[k];
        let out = &segments[(k + 1) % q];
        gradient[k] = into.d2 + out.d1;
        hessian.diag[k] = into.d22 + out.d11;
        hessian.off[k] = out.d12;
    }
    let value = segments.iter().map(|p| p.tau).sum();
    Ok(LengthEval { value, gradient, hessian, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SupportCurve;
    use crate::spectrum::word::Step;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_disks() -> Table {
        Table::new(vec![
            SupportCurve::circle([0.0, 0.0], 0.4).unwrap(),
            SupportCurve::circle([0.5, 0.5], 0.2).unwrap(),
        ])
        .unwrap()
    }

    fn bumpy() -> Table {
        Table::new(vec![
            SupportCurve::new(vec![0.38, 0.0, 0.0, 0.015, 0.0, 0.0, 0.006]).unwrap(),
            SupportCurve::new(vec![0.2, 0.5, 0.5, -0.01, 0.008]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn head_on_second_derivative() {
        let t = two_disks();
        // Facing points on the diagonal: angle π/4 on disk 0, 5π/4 on disk 1.
        let s0 = t.scatterer(0).angle_to_arclength(0.25 * std::f64::consts::PI);
        let s1 = t.scatterer(1).angle_to_arclength(1.25 * std::f64::consts::PI);
        let p = tau_pair(&t, [0, 0], 0, 1, s0, s1).unwrap();
        let gap = 0.5f64.hypot(0.5) - 0.6;
        assert!((p.tau - gap).abs() < 1e-12);
        assert!(p.d1.abs() < 1e-12 && p.d2.abs() < 1e-12);
        assert!((p.d11 - (1.0 / 0.4 + 1.0 / gap)).abs() < 1e-9);
        assert!((p.d22 - (1.0 / 0.2 + 1.0 / gap)).abs() < 1e-9);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = bumpy();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..40 {
            let disp = [rng.gen_range(-1..=1), rng.gen_range(-1..=1)];
            let (a, b) = (rng.gen_range(0..2), rng.gen_range(0..2));
            if a == b && disp == [0, 0] {
                continue;
            }
            let s = rng.gen_range(0.0..t.scatterer(a).perimeter());
            let s2 = rng.gen_range(0.0..t.scatterer(b).perimeter());
            let f = |x: f64, y: f64| tau_pair(&t, disp, a, b, x, y).unwrap().tau;
            let p = tau_pair(&t, disp, a, b, s, s2).unwrap();
            let fd1 = (f(s + h, s2) - f(s - h, s2)) / (2.0 * h);
            let fd2 = (f(s, s2 + h) - f(s, s2 - h)) / (2.0 * h);
            let fd11 = (f(s + h, s2) - 2.0 * p.tau + f(s - h, s2)) / (h * h);
            let fd22 = (f(s, s2 + h) - 2.0 * p.tau + f(s, s2 - h)) / (h * h);
            let fd12 = (f(s + h, s2 + h) - f(s + h, s2 - h) - f(s - h, s2 + h) + f(s - h, s2 - h)) / (4.0 * h * h);
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(1.0);
            assert!(close(p.d1, fd1) && close(p.d2, fd2), "{:?} {fd1} {fd2}", p);
            let close2 = |x: f64, y: f64| (x - y).abs() <= 1e-4 * x.abs().max(1.0);
            assert!(close2(p.d11, fd11) && close2(p.d22, fd22) && close2(p.d12, fd12), "{:?} {fd11} {fd12} {fd22}", p);
        }
    }

    #[test]
    fn swapping_endpoints_swaps_derivatives() {
        let t = bumpy();
        let p = tau_pair(&t, [1, 0], 0, 1, 0.3, 0.9).unwrap();
        let r = tau_pair(&t, [-1, 0], 1, 0, 0.9, 0.3).unwrap();
        assert!((p.tau - r.tau).abs() < 1e-14);
        assert!((p.d1 - r.d2).abs() < 1e-14 && (p.d2 - r.d1).abs() < 1e-14);
        assert!((p.d11 - r.d22).abs() < 1e-12 && (p.d22 - r.d11).abs() < 1e-12);
        assert!((p.d12 - r.d12).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let t = two_disks();
        assert_eq!(tau_pair(&t, [0, 0], 0, 0, 0.1, 0.1), Err(Error::DegenerateSegment));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let t = bumpy();
        let w = OrbitWord::new(vec![
            Step { scatterer: 0, disp: [0, -1] },
            Step { scatterer: 1, disp: [0, 0] },
            Step { scatterer: 0, disp: [1, 1] },
        ]);
        let s = [0.6, 0.4, 1.9];
        let e = length_functional(&t, &w, &s).unwrap();
        let h = 1e-5;
        let dense = e.hessian.to_dense();
        for i in 0..3 {
            let mut sp = s;
            let mut sm = s;
            sp[i] += h;
            sm[i] -= h;
            let ep = length_functional(&t, &w, &sp).unwrap();
            let em = length_functional(&t, &w, &sm).unwrap();
            let g = (ep.value - em.value) / (2.0 * h);
            assert!((g - e.gradient[i]).abs() < 1e-6 * g.abs().max(1.0));
            for j in 0..3 {
                let hij = (ep.gradient[j] - em.gradient[j]) / (2.0 * h);
                assert!((hij - dense[(i, j)]).abs() < 1e-5 * hij.abs().max(1.0), "{i} {j} {hij} {}", dense[(i, j)]);
            }
        }
    }

    #[test]
    fn period_two_hessian_diagonal() {
        let r = 0.2;
        let t = Table::new(vec![
            SupportCurve::circle([0.25, 0.25], r).unwrap(),
            SupportCurve::circle([0.75, 0.75], r).unwrap(),
        ])
        .unwrap();
        let d = 0.5f64.hypot(0.5);
        let q = std::f64::consts::FRAC_PI_4;
        let s0 = t.scatterer(0).angle_to_arclength(q);
        let s1 = t.scatterer(1).angle_to_arclength(q + std::f64::consts::PI);
        let w = OrbitWord::new(vec![Step { scatterer: 0, disp: [0, 0] }, Step { scatterer: 1, disp: [0, 0] }]);
        let e = length_functional(&t, &w, &[s0, s1]).unwrap();
        let tau = d - 2.0 * r;
        assert!((e.value - 2.0 * tau).abs() < 1e-12);
        for k in 0..2 {
            assert!((e.hessian.diag[k] - (2.0 / r + 2.0 / tau)).abs() < 1e-9);
        }
    }
}
