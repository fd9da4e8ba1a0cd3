//! Flow curvature manifolds for three-dimensional autonomous polynomial flows.
//!
//! The curvature manifold of a flow `Ẋ = F(X)` is the zero set of
//! `φ(X) = Ẋ · (Ẍ ∧ X⃛)`, the locus where the torsion of the trajectory
//! through `X` vanishes. Because `Ẍ = JẊ` and `X⃛ = JẌ + (dJ/dt)Ẋ`, the
//! manifold splits into a part built from the Jacobian alone and a part
//! carrying its material derivative:
//!
//! ```text
//! φ = φ_c + φ_t,   φ_c = Ẋ · (JẊ ∧ JẌ),   φ_t = Ẋ · (Ẍ ∧ (dJ/dt)Ẋ)
//! ```
//!
//! `φ_t` vanishes identically for affine fields; for chaotic flows of the
//! Rössler family its two paraboloid-shaped sheets act as an axis that the
//! trajectory either wraps around or crosses, which is what the
//! [`classify`] pipeline measures.
//!
//! Module map:
//! - [`field_dsl`] — polynomial vector fields as symbolic expressions, with
//!   exact differentiation and a small text format for custom systems.
//! - [`catalog`] — ready-made centered systems of the Rössler family
//!   (Rössler, Sprott, Thomas, Malasoma variants).
//! - [`dynamics`] — adaptive Runge–Kutta integration with dense output,
//!   Newton fixed-point search, eigenvalue classification, wrapping numbers.
//! - [`curvature`] — φ, φ_c, φ_t evaluation, gradients, sign-change events
//!   along trajectories, Darboux-invariance residuals.
//! - [`section_analysis`] — Poincaré sections, first-return maps,
//!   monotone-branch partitions, transition matrices.
//! - [`surface_mesh`] — marching-cubes extraction of the implicit surfaces
//!   with gradient-based singularity flagging, OBJ export.
//! - [`classify`] — the end-to-end wrap-or-cross verdict report.

pub mod catalog;
pub mod classify;
pub mod curvature;
pub mod dynamics;
pub mod error;
pub mod field_dsl;
pub mod report;
pub mod section_analysis;
pub mod surface_mesh;

pub use error::{Error, Result};
