//! Estimators on the one-particle phase space: Klimontovich samples, f1
//! histograms, contact statistics and the `I1`/`I2` split, the collision
//! integral, the free-streaming residual, the factorization defect and
//! radial field profiles.

pub mod afc;
pub mod collision;
pub mod contact;
pub mod field;
pub mod histogram;
pub mod residual;
pub mod stats;

pub use afc::{afc_defect, AfcDefect, AfcStatistics};
pub use collision::{
    boltzmann_collision_integral, default_probes, CollisionIntegral, IsotropicSpeedHistogram, Maxwellian, Mixture,
    Monokinetic, VelocityDensity,
};
pub use contact::{
    estimate_contact, estimate_i1_i2, majorization_constants, maxwell_quantile_edges, ContactEstimate,
    ContactStatistics, ContinuationRule, RepresentationField,
};
pub use field::{FieldGrid, FieldProfile};
pub use histogram::{klimontovich_points, uniform_edges, KPoint, KlimontovichSample, PhaseHistogram, Projection};
pub use residual::{free_streaming_residual, ResidualReport};
pub use stats::Estimate;
