//! Event-driven hard-sphere dynamics in a spherical container, together with
//! ensemble sampling and estimators for reduced distributions, contact
//! statistics and Boltzmann-Grad scaling sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bgsweep;
pub mod codec;
pub mod densities;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod spatial;
pub mod vec3;

pub use error::{Error, Result};
pub use model::{make_params, DomainSpec, ModelParams, ParamsBuilder, ParticleState, SystemState};
pub use vec3::Vec3;
