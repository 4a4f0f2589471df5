//! Charts, model metrics and curvature.
//!
//! Two curvature engines live here: an exact one acting on truncated series
//! near the conformal boundary, and a finite-difference one acting on radial
//! grids of diagonal cohomogeneity-one metrics.

mod chart;
pub mod geon;
pub mod grid;
pub mod series_metric;

pub use chart::{BoundaryModuli, CoordinateKind, RadialChart};
pub use geon::{build_geon, build_geon_on, build_geon_series, geon_radius_series, GeonGridSpec, GeonProfile};
pub use grid::{curvature_grid, derivatives_at, fornberg_weights, GridCurvature, GridMetric};
pub use series_metric::{
    build_expansion_metric, build_perturbed, conformal_ricci, curvature_series,
    expansion_coefficient_check, gauss_codazzi_check, rho_inv_sq_series, rho_series,
    ConformalWeight, ExpansionReport, GaussCodazziReport, IdentityResidual, SeriesCurvature,
    SeriesMatrix, SeriesMetric, EXACT_ORDER,
};
