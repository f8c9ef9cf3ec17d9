//! Classical ontological models of qubit prepare-and-measure channels.
//!
//! The crate covers three layers:
//! - [`models`]: the Kochen-Specker model and two reference models, with
//!   Born-rule checks, overlaps and ψ-ontic classification;
//! - [`capacity`] and [`protocol`]: the capacity of the channel ψ → x and
//!   finite-communication simulations built from it;
//! - [`bounds`]: cap volumes and overlap bounds for `n`-qubit models.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod capacity;
pub mod error;
pub mod models;
mod parallel;
pub mod protocol;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
pub use models::{ModelKind, OnticState, OntologicalModel};
pub use quantum::{BlochVector, Effect, Povm, PureState};
pub use sphere::Vec3;
