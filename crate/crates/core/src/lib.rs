//! Sampling-based motion planning on Riemannian configuration manifolds.
//!
//! * [`manifold`]: configurations, tangent vectors, metric tensors and the
//!   [`Manifold`] handle bundling a metric field with a retraction.
//! * [`metrics`]: concrete metric fields and Christoffel symbols.
//! * [`geodesy`]: midpoint distance, polylines, unit-speed resampling,
//!   geodesic solvers and convergence studies.
//! * [`expansion`]: natural-gradient vertex expansion.
//! * [`env`]: planar arm and occupancy-grid collision worlds.
//! * [`planner`]: the anytime tree planner.

pub mod env;
pub mod error;
pub mod expansion;
pub mod geodesy;
pub mod manifold;
pub mod metrics;
pub mod planner;

pub use error::{Error, Result};
pub use manifold::{Configuration, Manifold, MetricTensor, Retraction, TangentVector, WrapRule};
