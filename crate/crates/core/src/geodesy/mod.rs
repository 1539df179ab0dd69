//! Distances, curves and geodesic solvers.

pub mod bvp;
pub mod convergence;
pub mod distance;
pub mod path;
pub mod solver;
pub mod spline;
pub mod variational;

pub use bvp::{integrate_geodesic, solve_geodesic_bvp};
pub use convergence::{convergence_study, loglog_slope, ConvergenceRow, ConvergenceStudy};
pub use distance::{midpoint_distance, retraction_midpoint};
pub use path::{path_energy, path_length, reparameterize_unit_speed, PathPolyline};
pub use solver::{solve_geodesic, GeodesicSolution, GeodesicSolveConfig, SolveMode, SolveReport};
pub use spline::{SplineBasis, SplineCurve};
pub use variational::{solve_geodesic_variational, solve_variational_from, solve_variational_restarts};
