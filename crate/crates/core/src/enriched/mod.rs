//! Link sets, arc distances, the enriched length functional, billiard
//! cycles and shortest paths among obstacles.

mod linkset;
pub(crate) mod tangents;

pub use linkset::{link_set, LinkSet, LINK_SAMPLES};
pub use tangents::{arc_distance, common_tangents, tangent_angles, ArcDistance, Bitangent, Interval, TangentKind};
mod cycle;
mod geodesic;
mod table;

pub use table::{enriched_spectrum, enriched_spectrum_with, EnrichedEntry, EnrichedSpectrum};

pub use geodesic::{dl_geodesic, DlPath, PathPiece};

pub use cycle::{
    enriched_length, minimize_EL, minimize_el_cached, BilliardCycle, CycleKind, ElEval, ElProblem, LinkCache, Transition, MAX_SWEEPS,
    TOL_CERT, TOL_FEAS, TOL_SAME,
};

#[cfg(test)]
mod tests;
