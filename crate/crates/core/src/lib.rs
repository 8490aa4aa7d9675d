//! Periodic-orbit and enriched marked length spectra of finite-horizon
//! Sinai billiards on the unit torus.
//!
//! The crate is organised by layer:
//!
//! * [`geometry`]: support-function scatterers, tables, lifts, horizon
//!   certificates and the table file format.
//! * [`dynamics`]: billiard map, Jacobi coordinates, singularity flags and
//!   the flat Crofton check.
//! * [`coding`]: symbolic coding of orbits and the Hölder-inverse check.
//! * [`spectrum`]: the length functional, Newton solver, classification and
//!   period-bounded enumeration.
//! * [`enriched`]: link sets, arc distances, the enriched length functional,
//!   billiard cycles and shortest paths among obstacles.
//! * [`perturbation`]: localised boundary perturbations, first-order
//!   response, de-grazing and length separation.
//! * [`kourganoff`]: the two-sheeted surface over the table, its flattening
//!   metrics, geodesics and closed geodesics.
//! * [`report`]: deterministic text reports and spectrum comparison.

pub mod coding;
pub mod dynamics;
pub mod enriched;
pub mod error;
pub mod geometry;
pub mod kourganoff;
pub mod linalg;
pub mod perturbation;
pub mod report;
pub mod spectrum;

pub use error::{Error, Result};
