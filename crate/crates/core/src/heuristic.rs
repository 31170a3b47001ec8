//! Admissible lower bounds on the remaining travel time to the destination.
//!
//! [`MinTree`] is a budget-bounded shortest-path tree rooted at the
//! destination of the reversed graph, with each edge weighted by its least
//! possible travel time. The Euclidean baseline divides straight-line
//! distance by the fastest speed any edge can be traversed at.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use crate::dist::{Histogram, Time};
use crate::network::{EdgeIdx, NodeIdx};
use crate::weights::CostModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeuristicKind {
    /// Reverse shortest-path tree over minimum edge times.
    Sp,
    /// Euclidean distance over maximum speed.
    Ba,
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicKind::Sp => "SP",
            HeuristicKind::Ba => "BA",
        })
    }
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Ok(HeuristicKind::Sp),
            "ba" => Ok(HeuristicKind::Ba),
            other => Err(format!("unknown heuristic `{other}` (expected sp or ba)")),
        }
    }
}

/// Least travel time from every node within `budget` of `dest`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinTree {
    dest: NodeIdx,
    budget: Time,
    min_to_dest: Vec<Option<Time>>,
    /// First edge of a minimum route towards `dest`.
    next_edge: Vec<Option<EdgeIdx>>,
}

/// Dijkstra from `dest` over reversed edges, settling only nodes whose
/// distance does not exceed `budget`.
pub fn build_min_tree(model: &CostModel<'_>, dest: NodeIdx, budget: Time) -> MinTree {
    let net = model.net;
    let mut dist: Vec<Option<Time>> = vec![None; net.node_count()];
    let mut next_edge = vec![None; net.node_count()];
    let mut settled = vec![false; net.node_count()];
    let mut heap = BinaryHeap::from([Reverse((0, dest))]);
    dist[dest.0] = Some(0);
    while let Some(Reverse((d, v))) = heap.pop() {
        if settled[v.0] {
            continue;
        }
        settled[v.0] = true;
        for &e in net.in_edges(v) {
            let u = net.edge(e).from;
            let nd = d + model.edge_floor(e);
            if nd > budget || settled[u.0] {
                continue;
            }
            if dist[u.0].is_none_or(|old| nd < old) {
                dist[u.0] = Some(nd);
                next_edge[u.0] = Some(e);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    MinTree { dest, budget, min_to_dest: dist, next_edge }
}

impl MinTree {
    pub fn dest(&self) -> NodeIdx {
        self.dest
    }

    pub fn budget(&self) -> Time {
        self.budget
    }

    /// `None` when `v` cannot reach the destination within the budget.
    pub fn get_min(&self, v: NodeIdx) -> Option<Time> {
        self.min_to_dest[v.0]
    }

    pub fn next_edge(&self, v: NodeIdx) -> Option<EdgeIdx> {
        self.next_edge[v.0]
    }

    /// Nodes present in the tree.
    pub fn len(&self) -> usize {
        self.min_to_dest.iter().filter(|d| d.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tree edges in original orientation, sorted by index.
    pub fn tree_edges(&self) -> Vec<EdgeIdx> {
        let mut out: Vec<EdgeIdx> = self.next_edge.iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }
}

/// A built heuristic for one destination.
#[derive(Debug, Clone)]
pub enum Heuristic {
    Sp(MinTree),
    Ba(Euclid),
}

/// State of the Euclidean baseline.
#[derive(Debug, Clone)]
pub struct Euclid {
    dest: NodeIdx,
    /// Meters per time unit; at least every edge's length over its floor, so
    /// straight-line time never exceeds the least travel time.
    speed: f64,
    values: Vec<Time>,
}

impl Euclid {
    pub fn build(model: &CostModel<'_>, dest: NodeIdx) -> Euclid {
        let net = model.net;
        let res = model.resolution();
        let mut speed = net.max_speed();
        for (i, e) in net.edges().iter().enumerate() {
            let floor = model.edge_floor(EdgeIdx(i)).max(1) as f64;
            speed = speed.max(net.euclidean_m(e.from, e.to) / floor);
        }
        let values = (0..net.node_count())
            .map(|v| {
                let t = net.euclidean_m(NodeIdx(v), dest) / speed;
                ((t / res as f64).floor() as Time) * res
            })
            .collect();
        Euclid { dest, speed, values }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn get_min(&self, v: NodeIdx) -> Time {
        self.values[v.0]
    }
}

impl Heuristic {
    pub fn build(kind: HeuristicKind, model: &CostModel<'_>, dest: NodeIdx, budget: Time) -> Heuristic {
        match kind {
            HeuristicKind::Sp => Heuristic::Sp(build_min_tree(model, dest, budget)),
            HeuristicKind::Ba => Heuristic::Ba(Euclid::build(model, dest)),
        }
    }

    pub fn kind(&self) -> HeuristicKind {
        match self {
            Heuristic::Sp(_) => HeuristicKind::Sp,
            Heuristic::Ba(_) => HeuristicKind::Ba,
        }
    }

    pub fn dest(&self) -> NodeIdx {
        match self {
            Heuristic::Sp(t) => t.dest,
            Heuristic::Ba(b) => b.dest,
        }
    }

    /// Lower bound on the travel time from `v` to the destination; `None`
    /// means the destination is out of reach.
    pub fn get_min(&self, v: NodeIdx) -> Option<Time> {
        match self {
            Heuristic::Sp(t) => t.get_min(v),
            Heuristic::Ba(b) => Some(b.get_min(v)),
        }
    }
}

/// 1 if `t` suffices to reach the destination from a node whose least
/// remaining time is `node_min`, else 0.
pub fn u(node_min: Option<Time>, t: i64) -> f64 {
    match node_min {
        Some(m) if t >= m as i64 => 1.0,
        _ => 0.0,
    }
}

/// Probability of arriving within `budget` if the remainder after a prefix
/// with cost `path_cost` took exactly `node_min`: the sum over cost entries
/// `(k, p)` of `p * u(node_min, budget - k)`.
pub fn arrival_prob(path_cost: &Histogram, node_min: Option<Time>, budget: Time) -> f64 {
    path_cost
        .entries()
        .take_while(|&(k, _)| k <= budget)
        .map(|(k, p)| p * u(node_min, budget as i64 - k as i64))
        .sum::<f64>()
        .min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::weights::ModelMode;

    fn h(pairs: &[(Time, f64)]) -> Histogram {
        Histogram::new(1, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn running_example_tree() {
        let net = fixtures::running_example_network();
        let store = fixtures::running_example_store();
        let model = CostModel::new(&net, &store, ModelMode::Pace);
        let d = net.node_idx("d").unwrap();
        let n = |id: &str| net.node_idx(id).unwrap();
        let tree = build_min_tree(&model, d, 20);
        assert_eq!(tree.get_min(n("e")), Some(11));
        assert_eq!(tree.get_min(n("q")), Some(5));
        assert_eq!(tree.get_min(n("r")), Some(10));
        assert_eq!(tree.get_min(n("p")), Some(8));
        assert_eq!(tree.get_min(n("s")), Some(18));
        assert_eq!(tree.next_edge(n("s")), Some(net.edge_idx("e2").unwrap()));
        let tree = build_min_tree(&model, d, 15);
        assert_eq!(tree.get_min(n("s")), None);
        assert!(!tree.tree_edges().contains(&net.edge_idx("e2").unwrap()));
        let tree = build_min_tree(&model, d, 0);
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.get_min(d), Some(0));
    }

    #[test]
    fn euclid_is_zero_at_destination_and_below_tree() {
        let net = fixtures::running_example_network();
        let store = fixtures::running_example_store();
        let model = CostModel::new(&net, &store, ModelMode::Pace);
        let d = net.node_idx("d").unwrap();
        let ba = Heuristic::build(HeuristicKind::Ba, &model, d, 100);
        let sp = Heuristic::build(HeuristicKind::Sp, &model, d, 100);
        assert_eq!(ba.get_min(d), Some(0));
        for v in 0..net.node_count() {
            let v = NodeIdx(v);
            if let Some(s) = sp.get_min(v) {
                assert!(ba.get_min(v).unwrap() <= s);
            }
        }
    }

    #[test]
    fn indicator_boundary() {
        assert_eq!(u(Some(11), 11), 1.0);
        assert_eq!(u(Some(11), 10), 0.0);
        assert_eq!(u(Some(0), 0), 1.0);
        assert_eq!(u(None, 1000), 0.0);
    }

    #[test]
    fn arrival_prob_examples() {
        assert!((arrival_prob(&h(&[(14, 0.8), (20, 0.2)]), Some(5), 22) - 0.8).abs() < 1e-12);
        assert!((arrival_prob(&h(&[(13, 0.7), (20, 0.3)]), Some(5), 22) - 0.7).abs() < 1e-12);
        assert!((arrival_prob(&h(&[(8, 0.9), (10, 0.1)]), Some(11), 22) - 1.0).abs() < 1e-12);
        assert_eq!(arrival_prob(&h(&[(8, 1.0)]), None, 22), 0.0);
    }

    #[test]
    fn arrival_prob_with_zero_min_is_cdf() {
        let c = h(&[(3, 0.1), (5, 0.2), (9, 0.7)]);
        for b in 1..12 {
            assert!((arrival_prob(&c, Some(0), b) - c.cdf(b)).abs() < 1e-12);
        }
    }
}
