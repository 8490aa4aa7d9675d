//! Scatterers, tables, the ℤ²-periodic lift and the table file format.

pub mod scatterer;
pub mod support;
pub mod table;
pub mod tablefile;

pub use scatterer::Scatterer;
pub use support::{CurvePoint, SupportCurve};
pub use table::{
    check_finite_horizon, convex_distance, outgoing_direction, ray_entry, CorridorWitness, HorizonCertificate, HorizonStatus, LiftedLabel,
    RayHit, Table, TableOptions,
};
