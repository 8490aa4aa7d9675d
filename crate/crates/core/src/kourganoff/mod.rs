//! The two-sheeted surface over the table and its flattening metrics.
//!
//! Two copies of the table are glued along the obstacle boundaries. Near
//! scatterer `Γ` a point of the surface has collar coordinates `(θ, u)`:
//! it projects to `γ(θ) + u² n(θ)` and sits at height `ε Z(u)`, with
//! `Z(u) ≈ u` at the seam and `Z` constant once `u² ≥ δ₀`. The sign of `u`
//! is the sheet. Away from the collars both sheets are flat copies of the
//! table, so geodesics there are straight lines. As `ε → 0` the geodesic
//! flow of `g_ε` approaches the billiard flow.

mod closed;
mod converge;
mod geodesic;
mod profile;
#[cfg(test)]
mod tests;

pub use closed::{closed_geodesic_in_class, ClosedGeodesic};
pub use converge::{billiard_path, convergence_test, BilliardPath, ConvergenceReport, ConvergenceRow, DEFAULT_EPS_LIST};
pub use geodesic::{
    integrate_geodesic, lift, project, GeodesicPath, PathSample, SeamCrossing, SurfaceState, INTEGRATION_TOL, MAX_COLLAR_STEP,
};
pub use profile::{christoffel, metric_coeffs, ChartPoint, Foot, HeightProfile, MetricPatch, SeamConditions, Sheet};
