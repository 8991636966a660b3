//! Data-driven heatcurves for hydronic heating systems.
//!
//! Measured heat demand and outdoor temperature are clustered by time of day,
//! turned into a demand model, distributed over the rooms of a building and
//! mapped through the radiator characteristic to the supply temperature each
//! heater needs. The most demanding heater sets the curve.

pub mod building;
pub mod cluster;
pub mod demand;
pub mod evaluate;
pub mod heatcurve;
pub mod ingest;
pub mod lmtd;
pub mod loads;
pub mod pipeline;
pub mod quantile;
pub mod smoothing;

use thiserror::Error;

pub use building::BuildingError;
pub use cluster::ClusterError;
pub use demand::DemandError;
pub use evaluate::EvaluateError;
pub use heatcurve::HeatcurveError;
pub use ingest::IngestError;
pub use lmtd::LmtdError;
pub use loads::LoadsError;
pub use smoothing::SmoothingError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("cluster: {0}")]
    Cluster(#[from] ClusterError),
    #[error("demand: {0}")]
    Demand(#[from] DemandError),
    #[error("building: {0}")]
    Building(#[from] BuildingError),
    #[error("loads: {0}")]
    Loads(#[from] LoadsError),
    #[error("lmtd: {0}")]
    Lmtd(#[from] LmtdError),
    #[error("heatcurve: {0}")]
    Heatcurve(#[from] HeatcurveError),
    #[error("evaluate: {0}")]
    Evaluate(#[from] EvaluateError),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameter or malformed configuration.
    Config,
    /// Input data that cannot be used.
    Data,
    /// The building cannot meet the requested demand.
    Infeasible,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Infeasible => 3,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use ErrorKind::*;
        match self {
            Error::Ingest(IngestError::InvalidOffset(_)) => Config,
            Error::Ingest(_) => Data,
            Error::Cluster(ClusterError::InvalidClusterCount(_)) => Config,
            Error::Cluster(_) => Data,
            Error::Demand(DemandError::Empty { .. }) => Data,
            Error::Demand(_) => Config,
            Error::Building(BuildingError::UnknownConstructionType(_)) => Config,
            Error::Building(_) => Data,
            Error::Loads(LoadsError::Infeasible { .. } | LoadsError::NoHeatedRoom { .. }) => Infeasible,
            Error::Loads(_) => Data,
            Error::Lmtd(_) => Data,
            Error::Heatcurve(HeatcurveError::NoComputedPoints(_)) => Data,
            Error::Heatcurve(_) => Config,
            Error::Evaluate(_) => Data,
        }
    }
}
