//! Numerical laboratory for actions in KPZ-class growth models.
//!
//! The crate is organised bottom-up:
//!
//! * [`environment`] holds the random and deterministic environments `A(y, k)`.
//! * [`lastpassage`] computes last passage values, polymer free energies and
//!   the metric inequalities they satisfy.
//! * [`actionfield`] evolves and validates actions: the max-plus recursion
//!   (Skorokhod reflection), its polymer analogue and the discrete variants.
//! * [`geodesics`] backtracks geodesics out of an action and builds geodesic
//!   actions.
//! * [`melons`] builds the RSK-transformed line ensembles.
//! * [`representations`] assembles three-argument action representations,
//!   validates their axioms and applies the scaling maps.
//! * [`hypotopo`] implements the compactified hypograph distance.
//! * [`montecarlo`] runs seeded replica experiments and compares them with the
//!   GUE Tracy-Widom law.
//!
//! Levels are numbered from 1 (the shallowest line) to `K` (the deepest). A
//! path travels from a deep level towards level 1 while moving right.

pub mod actionfield;
pub mod environment;
pub mod error;
pub mod geodesics;
pub mod hypotopo;
pub mod lastpassage;
pub mod melons;
pub mod montecarlo;
pub mod numerics;
pub mod representations;
pub mod special;

pub use error::{Error, Result};

/// Marker for an action value of minus infinity.
pub const NEG_INF: f64 = f64::NEG_INFINITY;
