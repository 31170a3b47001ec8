//! The six-intersection running example.
//!
//! Nodes `s, e, r, q, p, d`, edges `e1..e9`, time unit one minute. Edge
//! histograms and the two joint weights `W(⟨e1,e4⟩)` and `W(⟨e2,e6⟩)` are
//! reproduced exactly by building a store from the bundled trajectories with
//! the default `min_support` of 10.

use crate::dist::{Histogram, JointDist, Time};
use crate::network::{Network, Query};
use crate::weights::{build_store, parse_trajectories, StoreConfig, TrajectoryRecord, WeightStore};

pub const RUNNING_EXAMPLE_NETWORK: &str = include_str!("../data/running_example.network.csv");

/// The three trajectory groups over `e1` and `e4` (200 trajectories).
pub const E1_E4_TRAJECTORIES: &str = include_str!("../data/e1_e4.trajectories.csv");

/// Trajectories reproducing every weight of the running example.
pub const RUNNING_EXAMPLE_TRAJECTORIES: &str = include_str!("../data/running_example.trajectories.csv");

/// Per-edge histograms of the running example, in edge order.
pub const EDGE_WEIGHTS: [(&str, &[(Time, f64)]); 9] = [
    ("e1", &[(8, 0.9), (10, 0.1)]),
    ("e2", &[(8, 0.2), (11, 0.8)]),
    ("e3", &[(11, 0.6), (13, 0.4)]),
    ("e4", &[(6, 0.8), (10, 0.2)]),
    ("e5", &[(8, 0.8), (10, 0.2)]),
    ("e6", &[(5, 0.7), (9, 0.3)]),
    ("e7", &[(13, 0.5), (15, 0.5)]),
    ("e8", &[(8, 0.6), (12, 0.4)]),
    ("e9", &[(5, 0.4), (9, 0.6)]),
];

pub fn running_example_network() -> Network {
    Network::parse(RUNNING_EXAMPLE_NETWORK).expect("bundled network is valid")
}

pub fn running_example_trajectories(net: &Network) -> Vec<TrajectoryRecord> {
    parse_trajectories(net, RUNNING_EXAMPLE_TRAJECTORIES, 1).expect("bundled trajectories are valid")
}

/// Store built from [`RUNNING_EXAMPLE_TRAJECTORIES`].
pub fn running_example_store() -> WeightStore {
    let net = running_example_network();
    build_store(&net, &running_example_trajectories(&net), StoreConfig::default()).expect("bundled store builds")
}

/// Store assembled directly from the weight tables.
pub fn running_example_store_from_tables() -> WeightStore {
    let net = running_example_network();
    let e = |id: &str| net.edge_idx(id).unwrap();
    let hists = EDGE_WEIGHTS.iter().map(|(id, pairs)| (e(id), Histogram::new(1, pairs.iter().copied()).unwrap()));
    let joints = [
        JointDist::new(1, vec![e("e1"), e("e4")], [(vec![8, 6], 0.8), (vec![10, 10], 0.2)]).unwrap(),
        JointDist::new(1, vec![e("e2"), e("e6")], [(vec![8, 5], 0.7), (vec![11, 9], 0.3)]).unwrap(),
    ];
    WeightStore::from_parts(&net, 1, hists, joints).expect("tables are consistent")
}

/// `s` to `d` within `budget` minutes.
pub fn running_example_query(net: &Network, budget: Time) -> Query {
    Query::by_ids(net, "s", "d", budget).expect("fixture nodes exist")
}
