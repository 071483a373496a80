//! Computational tools for bracket-generating families of vector fields.
//!
//! - [`trig_fields`]: exact Fourier vector fields on the circle and their bracket.
//! - [`bracket_closure`]: iterated bracket closure, spanning tests, and the
//!   pointwise rank test for polynomial fields on Rⁿ.
//! - [`flows`]: flows of circle fields, flow words acting on sampled circle
//!   diffeomorphisms, and the commutator-flow residual.
//! - [`steering`]: approximate steering of the identity toward a target diffeomorphism.
//! - [`convex`]: gauges of polytopes, symmetrization, separation, the
//!   nested-cone extremal point construction, and Mackey-Cauchy diagnostics.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default).

pub mod bracket_closure;
pub mod convex;
pub mod error;
pub mod flows;
pub mod linalg;
pub mod par;
pub mod poly_field;
pub mod rational;
pub mod steering;
pub mod trig_fields;

pub use error::{Error, Result};
