use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which block of the alternating solver produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Association,
    Bandwidth,
    Power,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Association => "association",
            Stage::Bandwidth => "bandwidth",
            Stage::Power => "power",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("infeasible caching config: every VUE must be cached but cache capacity is zero")]
    InfeasibleCaching,

    #[error("infeasible backhaul: RSU {rsu} needs eta >= {required:.9}, above the limit {limit:.9}")]
    InfeasibleBackhaul { rsu: usize, required: f64, limit: f64 },

    #[error("QoS infeasible: VUE {vue} misses its rate floor by {violation:.6e} bit/s")]
    QosInfeasible { vue: usize, violation: f64 },

    #[error("VUE {0} is served by the HAP, not by an RSU")]
    NotTerrestrial(usize),

    #[error("VUE {0} is not served by the HAP")]
    NotHapUser(usize),

    #[error("RSU {candidate} is not closer to VUE {vue} than RSU {reference}")]
    NotCandidate {
        vue: usize,
        reference: usize,
        candidate: usize,
    },

    #[error("oracle guard: {0}")]
    OracleTooLarge(String),

    #[error("{stage} stage: {error}")]
    Stage { stage: Stage, error: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                error: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { error, .. } => error.root(),
            e => e,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(
            self.root(),
            Error::InfeasibleBackhaul { .. } | Error::QosInfeasible { .. } | Error::InfeasibleCaching
        )
    }
}
