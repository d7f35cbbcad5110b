use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("packing fraction {eta_bar:.4e} is not below the packing cap {cap}")]
    Packing { eta_bar: f64, cap: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("particle index out of range or repeated: i={i}, j={j}, n={n}")]
    Index { i: usize, j: usize, n: usize },

    #[error("overlap detected at t={time}: particles {i},{j} gap {gap:.3e}\n{dump}")]
    Overlap { time: f64, i: usize, j: usize, gap: f64, dump: String },

    #[error("particles are not in contact (gap {gap:.3e})")]
    NotInContact { gap: f64 },

    #[error("pair is receding (normal relative velocity {vn:.3e})")]
    Receding { vn: f64 },

    #[error("particle is not at the wall: {0}")]
    NotAtWall(String),

    #[error("non-finite state at t={time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("continuation undefined in {} bin(s): {bins:?}", bins.len())]
    Continuation { bins: Vec<usize> },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("plan error at entry {entry}: {reason}")]
    Plan { entry: usize, reason: String },

    #[error("replica {replica} failed: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep failed for {} value(s) of N: {}", failures.len(), failures.iter().map(|(n, e)| format!("N={n}: {e}")).collect::<Vec<_>>().join("; "))]
    Sweep { failures: Vec<(usize, String)> },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("interrupted after {completed} completed entries")]
    Interrupted { completed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
