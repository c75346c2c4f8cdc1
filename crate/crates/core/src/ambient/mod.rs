//! The weighted metric on `S^3 ⊂ C^2 = R^4`: contact data, geodesics,
//! sectional curvature and tube areas.
//!
//! Everything is computed in the flat coordinates of `R^4`. The metric is
//! extended off the sphere as a radial product, which keeps the sphere
//! totally geodesic, and the connection comes from finite differences of
//! that extension.

pub mod curvature;
pub mod frame;
pub mod geodesic;
pub mod tube;

pub use curvature::{curvature_sample, CurvatureRecord, CurvatureSample, PlaneKind, Riemann};
pub use frame::{AmbientPoint, Frame};
pub use geodesic::{geodesic, GeodesicPath, GeodesicState};
pub use tube::{
    default_t_grid, focal_limit, torus_shape_identity, transverse_diameter, transverse_distance,
    tube_areas, TubeBase, TubeOptions, TubeReport,
};
