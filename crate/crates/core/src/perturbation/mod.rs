//! Localised normal perturbations of one scatterer, the first-order response
//! of periodic orbits, and the de-grazing and length-separation procedures.
//!
//! A bump field `λ` on scatterer `l` displaces its boundary to
//! `γ(s) + ε λ(s) n(s)` with `n` the outward normal (pointing into the
//! billiard domain). The displaced curve is refit to the support-function
//! representation.

mod bump;
mod generic;
mod refit;
mod response;

pub use bump::{BumpField, BumpMode};
pub use generic::{
    degraze, degraze_with, replay_log, separate_lengths, separate_lengths_with, GenericityOptions, GenericityReport, LogEntry,
};
pub use refit::{apply_perturbation, apply_perturbations, displaced_curve, original_parameter, Refit, REFIT_TOL};
pub use response::{
    first_order_response, first_order_response_with, p_lambda, PLambda, ResponseReport, ResponseSample, VALIDATION_EPS,
};

#[cfg(test)]
mod tests;
