//! Trajectory ingestion and the weight function.
//!
//! [`build_store`] turns map-matched trajectories into a [`WeightStore`]:
//! one histogram per edge and joint distributions for sub-paths that enough
//! trajectories traversed end-to-end. A [`CostModel`] then evaluates any
//! path's joint or total travel time under the edge-centric ([`ModelMode::Edge`])
//! or path-centric ([`ModelMode::Pace`]) interpretation.

mod compose;
mod store;
mod trajectory;

use thiserror::Error;

use crate::dist::{DistError, Time};
use crate::network::NetworkError;

pub use compose::{CostModel, ModelMode, PathState, Span};
pub use store::{build_store, StoreConfig, StoreSummary, WeightStore};
pub use trajectory::{load_trajectories, parse_trajectories, trajectories_to_csv, TrajectoryRecord};

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<WeightsError> },
    #[error("{0}")]
    Parse(String),
    #[error("trajectory count must be at least 1")]
    ZeroCount,
    #[error("trajectory has {edges} edges but {times} times")]
    TimesLength { edges: usize, times: usize },
    #[error("travel time {0} is not on the time grid")]
    OffGridTime(Time),
    #[error("edge index {0} is outside the network")]
    UnknownEdgeIndex(usize),
    #[error("min_support must be at least 1")]
    ZeroMinSupport,
    #[error("max_unit_len must be at least 1")]
    ZeroUnitLength,
    #[error("resolution {0} differs from store resolution {1}")]
    ResolutionMismatch(Time, Time),
    #[error("joint weight on {0} must span at least two edges")]
    ShortUnit(String),
    #[error("inconsistent weights along {0}: overlapping units share no support")]
    Inconsistent(String),
    #[error("weight file has no entry for edge `{0}`")]
    MissingEdge(String),
    #[error("malformed weight file: {0}")]
    Format(String),
    #[error("unsupported weight file version {0}")]
    Version(u32),
    #[error("io error: {0}")]
    Io(String),
}
