//! Numerical machinery for the flow itself: trajectory integration,
//! fixed-point location with eigenvalue classification, and the wrapping
//! number built from the outer fixed point's eigenstructure.

mod fixed_point;
mod ode;

pub use fixed_point::{
    eigenvector_residual, find_fixed_points, wrapping_number, FixedPoint, FixedPointClass,
    Role, SearchOptions, ShapeLabel, WrappingReport,
};
pub use ode::{integrate, IntegrateOptions, Trajectory, DIVERGENCE_NORM};
