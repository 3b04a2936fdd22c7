//! Phase-field models of biomembranes with two coupled order parameters:
//! diffuse energies on uniform grids, recovery sequences built from the
//! optimal transition profile, level-set slicing diagnostics, and a
//! constrained gradient flow.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod potential;
pub mod profile;
pub mod recovery;
pub mod reduce;
pub mod slicing;

mod mc_tables;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{Geometry, PhaseSplit, SharpLimits, Surface};
pub use grid::{GridSpec, ScalarField};
pub use potential::{DoubleWell, Modulus};
pub use profile::{OptimalProfile, Profile, TruncatedProfile};

/// Version of the on-disk field format.
pub const FIELD_FORMAT_VERSION: u32 = 1;
