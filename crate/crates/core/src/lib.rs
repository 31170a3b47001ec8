pub mod bench;
pub mod cli;
pub mod dist;
pub mod fixtures;
pub mod heuristic;
pub mod network;
pub mod oracle;
pub mod solver;
pub mod weights;

pub use dist::{snap_to_grid, DistError, Histogram, JointDist, Time};
pub use heuristic::{arrival_prob, build_min_tree, u, Heuristic, HeuristicKind, MinTree};
pub use network::{is_subpath, EdgeIdx, EdgeSpec, Network, NetworkError, Node, NodeIdx, Path, Query};
pub use solver::{solve, solve_with, SolveOptions, SolveResult, TraceEvent};
pub use weights::{
    build_store, CostModel, ModelMode, PathState, StoreConfig, TrajectoryRecord, WeightStore, WeightsError,
};
