//! First-order response of a periodic orbit to a boundary perturbation.
//!
//! With outward normals, pushing the boundary out by `ε λ` shortens each
//! chord at a bounce by `ε λ cos φ`, so `L^ε(s) = L(s) − ε P^λ(s) + O(ε²)`
//! where `P^λ(s) = Σ_k λ(s_k)(cos φ_k^in + cos φ_k^out)`. The critical point
//! moves by `ε ψ` with `D²L ψ = DP^λ`, and the length changes by
//! `−ε P^λ(σ) + ε² Δ₂` with `Δ₂ = ½(∂²_ε L^ε(σ) − ψᵀ D²L ψ)`.

use super::bump::BumpField;
use super::refit::{apply_perturbation, original_parameter};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::linalg::norm;
use crate::spectrum::{find_generalized_orbit, length_functional, GeneralizedOrbit, OrbitWord, TauPair};

/// Perturbation sizes used to validate a response.
pub const VALIDATION_EPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
/// Largest accepted residual of the linear system for `ψ`.
pub const RESPONSE_RESIDUAL: f64 = 1e-10;

/// `P^λ` and its gradient in the bounce parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PLambda {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Re-solved orbit on a perturbed table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSample {
    pub eps: f64,
    /// Parameter shift divided by `ε`, mapped back to the original curve.
    pub shift: Vec<f64>,
    pub length_change: f64,
    /// `max_k |shift_k − ψ_k|`.
    pub shift_error: f64,
    /// `|ΔL/ε − Δ|`.
    pub length_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseReport {
    pub word: OrbitWord,
    pub params: Vec<f64>,
    pub length: f64,
    pub p_value: f64,
    pub dp: Vec<f64>,
    pub psi: Vec<f64>,
    /// First-order length change per unit `ε` (equals `−P^λ(σ)`).
    pub delta: f64,
    /// Coefficient of `ε²` in the length change.
    pub delta2: f64,
    /// `‖D²L ψ − DP^λ‖`.
    pub residual: f64,
    pub samples: Vec<ResponseSample>,
}

impl ResponseReport {
    /// Ratios of consecutive shift and length errors over the samples.
    pub fn error_ratios(&self) -> (Vec<f64>, Vec<f64>) {
        let ratio = |f: fn(&ResponseSample) -> f64| self.samples.windows(2).map(|w| f(&w[0]) / f(&w[1])).collect::<Vec<_>>();
        (ratio(|s| s.shift_error), ratio(|s| s.length_error))
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Derivatives of the endpoint cosines of one chord in its two parameters:
/// `(∂cos1/∂a, ∂cos1/∂b, ∂cos2/∂a, ∂cos2/∂b)`.
fn cos_derivatives(table: &Table, word: &OrbitWord, params: &[f64], k: usize, p: &TauPair) -> [f64; 4] {
    let q = word.q();
    let prev = (k + q - 1) % q;
    let fa = table.scatterer(word.scatterer(prev)).frame(params[prev]);
    let fb = table.scatterer(word.scatterer(k)).frame(params[k]);
    let tau = p.tau;
    [
        p.sin1 * p.cos1 / tau + fa.curvature * p.sin1,
        (dot(fb.tangent, fa.normal) - p.sin2 * p.cos1) / tau,
        (dot(fa.tangent, fb.normal) + p.sin1 * p.cos2) / tau,
        -p.sin2 * p.cos2 / tau - fb.curvature * p.sin2,
    ]
}

/// `P^λ(s) = Σ λ(s_k)(cos φ_k^in + cos φ_k^out)` over bounces on the
/// perturbed scatterer; at a periodic orbit this is `2 Σ λ cos φ`.
pub fn p_lambda(table: &Table, word: &OrbitWord, params: &[f64], field: &BumpField) -> Result<PLambda> {
    let q = word.q();
    let eval = length_functional(table, word, params)?;
    let mut value = 0.0;
    let mut gradient = vec![0.0; q];
    for k in 0..q {
        if word.scatterer(k) != field.scatterer {
            continue;
        }
        let (lam, dlam) = field.eval(params[k]);
        if lam == 0.0 && dlam == 0.0 {
            continue;
        }
        let prev = (k + q - 1) % q;
        let next = (k + 1) % q;
        let into = &eval.segments[k];
        let out = &eval.segments[next];
        let di = cos_derivatives(table, word, params, k, into);
        let dout = cos_derivatives(table, word, params, next, out);
        let cos_sum = into.cos2 + out.cos1;
        value += lam * cos_sum;
        gradient[k] += dlam * cos_sum + lam * (di[3] + dout[0]);
        gradient[prev] += lam * di[2];
        gradient[next] += lam * dout[1];
    }
    Ok(PLambda { value, gradient })
}

/// Response of `orbit` to `λ`, validated at [`VALIDATION_EPS`].
pub fn first_order_response(table: &Table, orbit: &GeneralizedOrbit, field: &BumpField) -> Result<ResponseReport> {
    first_order_response_with(table, &orbit.word, &orbit.params, field, &VALIDATION_EPS)
}

/// Response at the critical point `params` of `word`, validated by
/// re-solving on perturbed tables at each `ε` in `eps` (none when empty).
pub fn first_order_response_with(
    table: &Table,
    word: &OrbitWord,
    params: &[f64],
    field: &BumpField,
    eps: &[f64],
) -> Result<ResponseReport> {
    let q = word.q();
    let eval = length_functional(table, word, params)?;
    let pl = p_lambda(table, word, params, field)?;
    if eval.hessian.min_eigenvalue() <= 0.0 {
        return Err(Error::HessianSingular(format!("Hessian of {word} is not positive definite")));
    }
    let psi = eval
        .hessian
        .solve(&pl.gradient)
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::HessianSingular(format!("Hessian of {word} could not be factored")))?;
    let hpsi = eval.hessian.mul(&psi);
    let diff: Vec<f64> = hpsi.iter().zip(&pl.gradient).map(|(a, b)| a - b).collect();
    let residual = norm(&diff);
    if residual > RESPONSE_RESIDUAL {
        return Err(Error::HessianSingular(format!("linear solve residual {residual:e} for {word}")));
    }
    let mu = |k: usize| if word.scatterer(k) == field.scatterer { field.value(params[k]) } else { 0.0 };
    let mut second = 0.0;
    for k in 0..q {
        let prev = (k + q - 1) % q;
        let (ma, mb) = (mu(prev), mu(k));
        if ma == 0.0 && mb == 0.0 {
            continue;
        }
        let p = &eval.segments[k];
        let na = table.scatterer(word.scatterer(prev)).frame(params[prev]).normal;
        let nb = table.scatterer(word.scatterer(k)).frame(params[k]).normal;
        let b = [mb * nb[0] - ma * na[0], mb * nb[1] - ma * na[1]];
        let u = [(p.end[0] - p.start[0]) / p.tau, (p.end[1] - p.start[1]) / p.tau];
        second += (dot(b, b) - dot(b, u).powi(2)) / p.tau;
    }
    let psi_h_psi: f64 = psi.iter().zip(&hpsi).map(|(a, b)| a * b).sum();
    let delta = -pl.value;
    let delta2 = 0.5 * (second - psi_h_psi);
    let mut samples = Vec::with_capacity(eps.len());
    for &e in eps {
        let perturbed = apply_perturbation(table, field, e)?;
        let o = find_generalized_orbit(&perturbed, word)?;
        let mut shift = Vec::with_capacity(q);
        for k in 0..q {
            let l = word.scatterer(k);
            let sc = table.scatterer(l);
            let s = if l == field.scatterer { original_parameter(sc, perturbed.scatterer(l), o.params[k]) } else { o.params[k] };
            let per = sc.perimeter();
            let d = (s - params[k] + 0.5 * per).rem_euclid(per) - 0.5 * per;
            shift.push(d / e);
        }
        let length_change = o.length - eval.value;
        let shift_error = shift.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let length_error = (length_change / e - delta).abs();
        samples.push(ResponseSample { eps: e, shift, length_change, shift_error, length_error });
    }
    Ok(ResponseReport {
        word: word.clone(),
        params: params.to_vec(),
        length: eval.value,
        p_value: pl.value,
        dp: pl.gradient,
        psi,
        delta,
        delta2,
        residual,
        samples,
    })
}
