//! Exact event-driven evolution: prediction, resolution, scheduling.

mod engine;
mod grid;
mod log;
mod predict;
mod queue;

pub use engine::{reverse_velocities, Diagnostics, EngineConfig, EventRecord, LoggedKind, Observer, Simulation};
pub use grid::NeighborGrid;
pub use log::{EventLog, LOG_MAGIC, LOG_VERSION};
pub use predict::{
    predict_pair_collision, predict_wall_collision, resolve_pair_collision, resolve_wall_collision, CollisionLaw,
    CONTACT_TOL,
};
pub use queue::{CollisionEvent, EventKind, EventQueue};
