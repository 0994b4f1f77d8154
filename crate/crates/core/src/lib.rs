//! Simulation and optimization toolkit for hybrid beamforming in modular
//! extremely-large MIMO arrays serving a communication user while sensing a
//! target among interferers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod music;
pub mod sdr;

pub use config::{Layout, ObjectSpec, PathModel, ScenarioConfig};
pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, Point2, PolarPoint, Side};
