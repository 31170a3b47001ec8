//! Brute-force ground truth for small instances.
//!
//! Nothing here is used by the solver. [`exact_spotar`] enumerates every
//! node-simple path and evaluates its explicit joint distribution;
//! [`gen_instance`] produces reproducible random networks with correlated
//! trajectories; [`monte_carlo_cdf`] samples path travel times unit by unit as
//! a check of the fusion rule that does not reuse it.

use std::collections::{BTreeMap, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dist::Time;
use crate::heuristic::HeuristicKind;
use crate::network::{EdgeIdx, EdgeSpec, Network, Node, NodeIdx, Path, Query};
use crate::solver::{solve, PROB_EPS};
use crate::weights::{build_store, CostModel, ModelMode, StoreConfig, TrajectoryRecord, WeightStore};

/// Enumeration refuses to go beyond this many paths.
pub const MAX_PATHS: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("more than {0} simple paths; refusing to enumerate")]
    TooManyPaths(usize),
}

/// All node-simple paths from `source` to `dest` with at most `max_edges`
/// edges, ordered by length and then by edge ids.
pub fn enumerate_simple_paths(
    net: &Network,
    source: NodeIdx,
    dest: NodeIdx,
    max_edges: usize,
    limit: usize,
) -> Result<Vec<Path>, OracleError> {
    let mut out = Vec::new();
    if source == dest {
        return Ok(out);
    }
    let mut on_path = vec![false; net.node_count()];
    let mut stack = Vec::new();
    on_path[source.0] = true;
    dfs(net, source, dest, max_edges, limit, &mut on_path, &mut stack, &mut out)?;
    out.sort_by_cached_key(|p| (p.len(), p.edges().iter().map(|&e| net.edge_rank(e)).collect::<Vec<_>>()));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    net: &Network,
    at: NodeIdx,
    dest: NodeIdx,
    max_edges: usize,
    limit: usize,
    on_path: &mut [bool],
    stack: &mut Vec<EdgeIdx>,
    out: &mut Vec<Path>,
) -> Result<(), OracleError> {
    if stack.len() == max_edges {
        return Ok(());
    }
    for &e in net.out_edges(at) {
        let w = net.edge(e).to;
        if on_path[w.0] {
            continue;
        }
        stack.push(e);
        if w == dest {
            if out.len() == limit {
                return Err(OracleError::TooManyPaths(limit));
            }
            out.push(Path::new(net, stack.clone()).expect("dfs builds adjacent edges"));
        } else {
            on_path[w.0] = true;
            dfs(net, w, dest, max_edges, limit, on_path, stack, out)?;
            on_path[w.0] = false;
        }
        stack.pop();
    }
    Ok(())
}

/// Optimum found by exhaustive evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Exact {
    pub best_path: Option<Path>,
    pub probability: f64,
    pub paths_evaluated: usize,
}

/// On-time probability of `p`; paths whose weights cannot be fused have no
/// feasible distribution and score 0.
pub fn path_probability(model: &CostModel<'_>, p: &Path, budget: Time) -> f64 {
    match model.path_joint(p) {
        Ok(j) => j.to_cost().cdf(budget),
        Err(_) => 0.0,
    }
}

/// Maximizes the on-time probability over every simple path; ties go to the
/// path with fewer edges, then smaller edge ids.
pub fn exact_spotar(model: &CostModel<'_>, q: Query) -> Result<Exact, OracleError> {
    let paths = enumerate_simple_paths(model.net, q.source, q.destination, model.net.edge_count(), MAX_PATHS)?;
    let probs: Vec<f64> = paths.par_iter().map(|p| path_probability(model, p, q.budget)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in probs.iter().enumerate() {
        if p > best.map_or(PROB_EPS, |(_, b)| b + PROB_EPS) {
            best = Some((i, p));
        }
    }
    Ok(Exact {
        best_path: best.map(|(i, _)| paths[i].clone()),
        probability: best.map_or(0.0, |(_, p)| p),
        paths_evaluated: paths.len(),
    })
}

/// Least possible travel time from `source` to `dest` over simple paths,
/// using per-edge floors; `None` if unreachable.
pub fn brute_force_min_time(
    model: &CostModel<'_>,
    source: NodeIdx,
    dest: NodeIdx,
) -> Result<Option<Time>, OracleError> {
    if source == dest {
        return Ok(Some(0));
    }
    let paths = enumerate_simple_paths(model.net, source, dest, model.net.edge_count(), MAX_PATHS)?;
    Ok(paths.iter().map(|p| p.edges().iter().map(|&e| model.edge_floor(e)).sum()).min())
}

/// A generated network with its trajectory corpus.
#[derive(Debug, Clone)]
pub struct Instance {
    pub net: Network,
    pub trajectories: Vec<TrajectoryRecord>,
}

impl Instance {
    pub fn build_store(&self) -> WeightStore {
        build_store(&self.net, &self.trajectories, StoreConfig::default()).expect("generated trajectories are valid")
    }
}

/// Reproducible random instance.
///
/// A random directed backbone visits every node; each remaining ordered node
/// pair gets an edge with probability `density`. Every edge has a base time;
/// most edges get independent single-edge observations, and each 2-3 edge
/// sub-path is picked with probability `joint_fraction` to receive correlated
/// traversals (a shared delay level plus per-edge noise) in groups large
/// enough to meet the default `min_support`.
pub fn gen_instance(seed: u64, nodes: usize, density: f64, joint_fraction: f64) -> Instance {
    assert!(nodes >= 2, "need at least two nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<(f64, f64)> =
        (0..nodes).map(|_| (rng.gen_range(0.0..3000.0), rng.gen_range(0.0..3000.0))).collect();
    let node_list: Vec<Node> = coords
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Node {
            id: format!("v{i}"),
            lat: 57.0 + y / 111_195.0,
            lon: 9.9 + x / (111_195.0 * 57f64.to_radians().cos()),
        })
        .collect();
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(&mut rng);
    let mut pairs: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    for a in 0..nodes {
        for b in 0..nodes {
            if a != b && !pairs.contains(&(a, b)) && rng.gen_bool(density.clamp(0.0, 1.0)) {
                pairs.push((a, b));
            }
        }
    }
    let mut specs = Vec::with_capacity(pairs.len());
    let mut base = Vec::with_capacity(pairs.len());
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let (xa, ya) = coords[a];
        let (xb, yb) = coords[b];
        let length = ((xb - xa).hypot(yb - ya) * rng.gen_range(1.0..1.3)).max(10.0);
        let t: Time = rng.gen_range(3..=12);
        specs.push(EdgeSpec::new(&format!("x{i}"), &format!("v{a}"), &format!("v{b}"), length, length / t as f64));
        base.push(t);
    }
    let net = Network::new(node_list, specs).expect("generated network is valid");
    let trajectories = synth_trajectories(&net, &base, &mut rng, 0.8, joint_fraction);
    Instance { net, trajectories }
}

/// Observations around per-edge base times: a fraction `observed` of edges
/// get 1-3 distinct single-edge times, and each 2-3 edge sub-path is picked
/// with probability `joint_fraction` for 2-3 groups of 4-8 correlated
/// traversals sharing a delay level.
pub(crate) fn synth_trajectories(
    net: &Network,
    base: &[Time],
    rng: &mut ChaCha8Rng,
    observed: f64,
    joint_fraction: f64,
) -> Vec<TrajectoryRecord> {
    let mut trajectories = Vec::new();
    for (i, &b) in base.iter().enumerate() {
        if !rng.gen_bool(observed) {
            continue;
        }
        let mut values: Vec<Time> = (0..rng.gen_range(1..=3)).map(|_| b + rng.gen_range(0..=6)).collect();
        values.sort_unstable();
        values.dedup();
        for t in values {
            let path = Path::new(net, vec![EdgeIdx(i)]).unwrap();
            trajectories.push(TrajectoryRecord::new(path, vec![t], rng.gen_range(1..=9), 1).unwrap());
        }
    }
    for sub in short_subpaths(net) {
        if !rng.gen_bool(joint_fraction.clamp(0.0, 1.0)) {
            continue;
        }
        for _ in 0..rng.gen_range(2..=3) {
            let level: Time = rng.gen_range(0..=4);
            let times: Vec<Time> = sub.iter().map(|e| base[e.0] + level + rng.gen_range(0..=1)).collect();
            let path = Path::new(net, sub.clone()).unwrap();
            trajectories.push(TrajectoryRecord::new(path, times, rng.gen_range(4..=8), 1).unwrap());
        }
    }
    trajectories
}

/// Every node-simple path of two or three edges, in a fixed order.
fn short_subpaths(net: &Network) -> Vec<Vec<EdgeIdx>> {
    let mut out = Vec::new();
    for (i, e) in net.edges().iter().enumerate() {
        for &f in net.out_edges(e.to) {
            let fe = net.edge(f);
            if fe.to == e.from {
                continue;
            }
            out.push(vec![EdgeIdx(i), f]);
            for &g in net.out_edges(fe.to) {
                let ge = net.edge(g);
                if ge.to != e.from && ge.to != e.to {
                    out.push(vec![EdgeIdx(i), f, g]);
                }
            }
        }
    }
    out
}

/// A generated instance together with one query on it.
#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub instance: Instance,
    pub store: WeightStore,
    pub query: Query,
}

/// Random instance with at most `max_nodes` nodes and 20 edges, and a query
/// whose budget ranges from slightly infeasible to comfortable.
pub fn gen_case(seed: u64, max_nodes: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
    loop {
        let nodes = rng.gen_range(4..=max_nodes.max(4));
        let backbone = (nodes - 1) as f64;
        let full = (nodes * (nodes - 1)) as f64;
        let target = (20.0 - rng.gen_range(0.0..5.0f64)).min(full).max(backbone + 1.0);
        let density = ((target - backbone) / (backbone * backbone)).min(1.0);
        let instance = gen_instance(rng.gen(), nodes, density, rng.gen_range(0.2..0.8));
        if instance.net.edge_count() > 20 {
            continue;
        }
        let store = instance.build_store();
        let net = &instance.net;
        let model = CostModel::new(net, &store, ModelMode::Pace);
        let mut best: Option<(usize, NodeIdx, NodeIdx)> = None;
        for _ in 0..6 {
            let s = NodeIdx(rng.gen_range(0..nodes));
            let d = NodeIdx(rng.gen_range(0..nodes));
            let count = enumerate_simple_paths(net, s, d, net.edge_count(), MAX_PATHS).expect("small instance").len();
            if s != d && count > 0 && best.is_none_or(|(c, _, _)| count > c) {
                best = Some((count, s, d));
            }
        }
        let Some((_, s, d)) = best else {
            continue;
        };
        let Some(min) = brute_force_min_time(&model, s, d).expect("small instance") else {
            continue;
        };
        let budget = ((min as f64) * rng.gen_range(0.9..1.6)).round().max(1.0) as Time;
        let query = Query::new(s, d, budget).expect("distinct endpoints, positive budget");
        return Case { seed, instance, store, query };
    }
}

/// Outcome of one solver run against the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCheck {
    pub mode: ModelMode,
    pub heuristic: HeuristicKind,
    pub solver_probability: f64,
    pub oracle_probability: f64,
    /// Probability of the solver's path, re-evaluated by the oracle.
    pub path_probability: f64,
    pub explored_edges: usize,
}

impl MethodCheck {
    pub fn passes(&self, tol: f64) -> bool {
        (self.solver_probability - self.oracle_probability).abs() <= tol
            && (self.path_probability - self.oracle_probability).abs() <= tol
    }
}

/// Runs all four method combinations on `case` and compares with the oracle.
pub fn check_case(case: &Case) -> Result<Vec<MethodCheck>, OracleError> {
    let net = &case.instance.net;
    let mut out = Vec::with_capacity(4);
    for mode in [ModelMode::Pace, ModelMode::Edge] {
        let model = CostModel::new(net, &case.store, mode);
        let exact = exact_spotar(&model, case.query)?;
        for heuristic in [HeuristicKind::Sp, HeuristicKind::Ba] {
            let res = solve(&model, heuristic, case.query);
            let path_probability =
                res.best_path.as_ref().map_or(0.0, |p| path_probability(&model, p, case.query.budget));
            out.push(MethodCheck {
                mode,
                heuristic,
                solver_probability: res.probability,
                oracle_probability: exact.probability,
                path_probability,
                explored_edges: res.explored_edges,
            });
        }
    }
    Ok(out)
}

/// Monte-Carlo estimate of an on-time probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub probability: f64,
    pub standard_error: f64,
    pub accepted: usize,
    pub rejected: usize,
}

/// Remaining-edge rows and their sampler, keyed by the overlap times.
type Conditionals = HashMap<Vec<Time>, (Vec<Vec<Time>>, WeightedIndex<f64>)>;

/// Samples travel times along `p` one weight unit at a time, each unit
/// conditioned on the times already drawn for its overlap with the previous
/// unit. Draws whose overlap the unit never observed are rejected.
pub fn monte_carlo_cdf(model: &CostModel<'_>, p: &Path, budget: Time, samples: usize, seed: u64) -> McEstimate {
    let spans = model.coarsest_spans(p.edges());
    let tables: Vec<Conditionals> = spans
        .iter()
        .enumerate()
        .map(|(k, span)| {
            let overlap = if k == 0 { 0 } else { spans[k - 1].end - span.start };
            let joint = model.unit_joint(&p.edges()[span.start..span.end]);
            let mut groups: BTreeMap<Vec<Time>, Vec<(Vec<Time>, f64)>> = BTreeMap::new();
            for (row, prob) in joint.rows() {
                groups.entry(row[..overlap].to_vec()).or_default().push((row[overlap..].to_vec(), prob));
            }
            groups
                .into_iter()
                .map(|(key, group)| {
                    let (rows, w): (Vec<_>, Vec<_>) = group.into_iter().unzip();
                    (key, (rows, WeightedIndex::new(w).expect("positive weights")))
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut hits, mut accepted) = (0usize, 0usize);
    let mut times: Vec<Time> = Vec::with_capacity(p.len());
    'draw: for _ in 0..samples {
        times.clear();
        for (k, span) in spans.iter().enumerate() {
            let key = &times[span.start..];
            let Some((rows, dist)) = tables[k].get(key) else {
                continue 'draw;
            };
            let pick = rows[dist.sample(&mut rng)].clone();
            times.extend(pick);
        }
        accepted += 1;
        if times.iter().sum::<Time>() <= budget {
            hits += 1;
        }
    }
    let probability = if accepted == 0 { 0.0 } else { hits as f64 / accepted as f64 };
    let standard_error = if accepted == 0 { 0.0 } else { (probability * (1.0 - probability) / accepted as f64).sqrt() };
    McEstimate { probability, standard_error, accepted, rejected: samples - accepted }
}
