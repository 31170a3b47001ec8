//! Best-first search for the path maximizing the probability of arriving
//! within the budget.
//!
//! Every queued label carries an upper bound `r` on the on-time probability of
//! all its completions. The search extracts the label with the largest `r`,
//! records an incumbent whenever an extension reaches the destination, and
//! stops once no queued label can beat the incumbent. Extensions are pruned
//! when even minimum travel times overrun the budget, when their bound cannot
//! beat the incumbent, or when a queued label at the same node stochastically
//! dominates them.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use crate::dist::{Histogram, Time};
use crate::heuristic::{Heuristic, HeuristicKind};
use crate::network::{EdgeIdx, Network, NodeIdx, Path, Query};
use crate::weights::{CostModel, ModelMode, PathState};

/// Slack below which two probabilities are treated as equal.
pub const PROB_EPS: f64 = 1e-12;

/// Queue priority: larger `r` first, then smaller estimated total cost, then
/// fewer edges, then lexicographically smaller edge ids.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueKey {
    pub r: f64,
    pub estimate: f64,
    pub ranks: Vec<u32>,
}

impl QueueKey {
    fn quantized(x: f64) -> i64 {
        (x * 1e12).round() as i64
    }

    fn priority_cmp(&self, other: &Self) -> Ordering {
        Self::quantized(other.r)
            .cmp(&Self::quantized(self.r))
            .then_with(|| self.estimate.total_cmp(&other.estimate))
            .then_with(|| self.ranks.len().cmp(&other.ranks.len()))
            .then_with(|| self.ranks.cmp(&other.ranks))
    }
}

#[derive(Debug, Clone)]
struct Slot(QueueKey, u64);

impl PartialEq for Slot {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Slot {}

impl PartialOrd for Slot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Slot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.priority_cmp(&other.0).then_with(|| self.1.cmp(&other.1))
    }
}

/// Max-priority queue of labels with per-node membership lists.
#[derive(Debug, Clone)]
pub struct LabelQueue<T> {
    order: BTreeSet<Slot>,
    items: HashMap<u64, (Slot, NodeIdx, T)>,
    at_node: HashMap<NodeIdx, Vec<u64>>,
    next_id: u64,
}

impl<T> Default for LabelQueue<T> {
    fn default() -> Self {
        LabelQueue { order: BTreeSet::new(), items: HashMap::new(), at_node: HashMap::new(), next_id: 0 }
    }
}

impl<T> LabelQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, key: QueueKey, node: NodeIdx, item: T) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let slot = Slot(key, id);
        self.order.insert(slot.clone());
        self.items.insert(id, (slot, node, item));
        self.at_node.entry(node).or_default().push(id);
        id
    }

    pub fn pop_max(&mut self) -> Option<(QueueKey, T)> {
        let first = self.order.pop_first()?;
        let node = self.items[&first.1].1;
        let (slot, _, item) = self.detach(first.1, node);
        Some((slot.0, item))
    }

    fn detach(&mut self, id: u64, node: NodeIdx) -> (Slot, NodeIdx, T) {
        if let Some(ids) = self.at_node.get_mut(&node) {
            ids.retain(|&x| x != id);
        }
        self.items.remove(&id).expect("queued id")
    }

    /// Removes one label by id.
    pub fn remove(&mut self, id: u64) -> Option<T> {
        let node = self.items.get(&id)?.1;
        let (slot, _, item) = self.detach(id, node);
        self.order.remove(&slot);
        Some(item)
    }

    /// Ids of queued labels ending at `node`, in insertion order.
    pub fn ids_at(&self, node: NodeIdx) -> &[u64] {
        self.at_node.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn get(&self, id: u64) -> Option<(&QueueKey, &T)> {
        self.items.get(&id).map(|(s, _, t)| (&s.0, t))
    }

    /// Deletes every label whose `r` is below `threshold`; returns how many.
    pub fn purge(&mut self, threshold: f64) -> usize {
        let doomed: Vec<u64> =
            self.items.iter().filter(|(_, (s, _, _))| s.0.r < threshold).map(|(&id, _)| id).collect();
        for &id in &doomed {
            self.remove(id);
        }
        doomed.len()
    }

    /// Keys in extraction order.
    pub fn keys(&self) -> impl Iterator<Item = &QueueKey> {
        self.order.iter().map(|s| &s.0)
    }
}

/// Cost and node set of a closed label, as used by the dominance check.
#[derive(Debug, Clone, Copy)]
pub struct DomEntry<'a> {
    pub cost: &'a Histogram,
    /// Sorted, deduplicated nodes of the label's path.
    pub nodes: &'a [NodeIdx],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dominance {
    Keep,
    /// Index of the existing entry that makes the candidate redundant.
    Drop(usize),
    /// Indices of existing entries the candidate makes redundant.
    Replace(Vec<usize>),
}

fn is_subset(a: &[NodeIdx], b: &[NodeIdx]) -> bool {
    let mut it = b.iter();
    a.iter().all(|x| it.by_ref().any(|y| y == x))
}

/// Compares a candidate with queued labels at the same node.
///
/// A label can stand in for another only if its cost weakly dominates and
/// its nodes are a subset, so that every completion of the other remains
/// available to it. Equal costs on equal node sets drop the candidate.
pub fn dominance_check(existing: &[DomEntry<'_>], candidate: DomEntry<'_>) -> Dominance {
    for (i, old) in existing.iter().enumerate() {
        if is_subset(old.nodes, candidate.nodes) && old.cost.weakly_dominates(candidate.cost).unwrap_or(false) {
            return Dominance::Drop(i);
        }
    }
    let replaced: Vec<usize> = existing
        .iter()
        .enumerate()
        .filter(|(_, old)| {
            is_subset(candidate.nodes, old.nodes) && candidate.cost.weakly_dominates(old.cost).unwrap_or(false)
        })
        .map(|(i, _)| i)
        .collect();
    if replaced.is_empty() {
        Dominance::Keep
    } else {
        Dominance::Replace(replaced)
    }
}

/// One step of the search, recorded when tracing is enabled.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Pushed {
        path: Vec<EdgeIdx>,
        r: f64,
    },
    Extracted {
        path: Vec<EdgeIdx>,
        r: f64,
    },
    /// `path_min + edge_min + node_min` exceeds the budget; `node_min` is
    /// `None` when the new end node cannot reach the destination at all.
    BudgetPruned {
        path: Vec<EdgeIdx>,
        path_min: Time,
        edge_min: Time,
        node_min: Option<Time>,
        budget: Time,
    },
    BoundPruned {
        path: Vec<EdgeIdx>,
        r: f64,
        incumbent: f64,
    },
    Dominated {
        path: Vec<EdgeIdx>,
        by: Vec<EdgeIdx>,
    },
    Replaced {
        path: Vec<EdgeIdx>,
        by: Vec<EdgeIdx>,
    },
    /// An extension reached the destination; `improved` tells whether it
    /// became the incumbent.
    Reached {
        path: Vec<EdgeIdx>,
        probability: f64,
        improved: bool,
    },
    Purged {
        threshold: f64,
        removed: usize,
    },
    Terminated {
        r: f64,
        incumbent: f64,
    },
    Exhausted,
    /// The search stopped after creating `labels` labels.
    LabelLimit {
        labels: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    pub trace: bool,
    /// Stop once this many labels have been queued; the incumbent is then
    /// reported with `complete == false`.
    pub max_labels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub best_path: Option<Path>,
    pub probability: f64,
    /// Full travel-time distribution of `best_path`.
    pub cost: Option<Histogram>,
    /// Distinct edges whose extension passed the budget check.
    pub explored_edges: usize,
    /// Labels extracted from the queue.
    pub expanded_labels: usize,
    pub wall_time_s: f64,
    /// False if `max_labels` cut the search short, in which case
    /// `probability` is only a lower bound on the optimum.
    pub complete: bool,
    pub explored: Vec<EdgeIdx>,
    pub trace: Vec<TraceEvent>,
}

/// Path arena: each entry is an edge plus a link to its prefix.
struct Step {
    edge: EdgeIdx,
    parent: Option<usize>,
}

struct Label {
    step: usize,
    end: NodeIdx,
    state: PathState,
    /// Present for closed labels only.
    dom: Option<(Histogram, Vec<NodeIdx>)>,
}

struct Search<'m, 'a> {
    model: &'m CostModel<'a>,
    heuristic: &'m Heuristic,
    query: Query,
    steps: Vec<Step>,
    queue: LabelQueue<Label>,
    best: f64,
    incumbent: Option<Vec<EdgeIdx>>,
    explored: Vec<bool>,
    pushed: usize,
    trace: Option<Vec<TraceEvent>>,
}

impl Search<'_, '_> {
    fn edges_of(&self, step: Option<usize>) -> Vec<EdgeIdx> {
        let mut out = Vec::new();
        let mut cur = step;
        while let Some(i) = cur {
            out.push(self.steps[i].edge);
            cur = self.steps[i].parent;
        }
        out.reverse();
        out
    }

    fn log(&mut self, event: impl FnOnce() -> TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(event());
        }
    }

    fn expand(&mut self, step: Option<usize>, end: NodeIdx, state: &PathState) {
        let net: &Network = self.model.net;
        let budget = self.query.budget;
        let prefix = self.edges_of(step);
        let mut visited: Vec<NodeIdx> = prefix.iter().map(|&e| net.edge(e).to).collect();
        visited.push(self.query.source);
        let path_min = state.lower_bound();
        for &e in net.out_edges(end) {
            let w = net.edge(e).to;
            if visited.contains(&w) {
                continue;
            }
            let mut edges = prefix.clone();
            edges.push(e);
            let node_min = self.heuristic.get_min(w);
            let edge_min = self.model.edge_floor(e);
            if node_min.is_none_or(|g| path_min + edge_min + g > budget) {
                self.log(|| TraceEvent::BudgetPruned { path: edges, path_min, edge_min, node_min, budget });
                continue;
            }
            let g = node_min.expect("checked above");
            self.explored[e.0] = true;
            let next = match state.extend(self.model, &edges, Some(budget)) {
                Ok(s) => s,
                Err(err) => {
                    log::debug!("dropping {}: {err}", net.path_display(&edges));
                    continue;
                }
            };
            if w == self.query.destination {
                self.reach(edges, &next);
                continue;
            }
            let r = next.arrival_bound(g, budget);
            if r <= self.best + PROB_EPS {
                let incumbent = self.best;
                self.log(|| TraceEvent::BoundPruned { path: edges, r, incumbent });
                continue;
            }
            self.steps.push(Step { edge: e, parent: step });
            let id = self.steps.len() - 1;
            // Under independent edge weights cutting a cycle out of a walk never
            // slows it down, so node sets only constrain dominance in PACE.
            let dom = next.is_closed().then(|| {
                let mut nodes = Vec::new();
                if self.model.mode == ModelMode::Pace {
                    nodes.extend_from_slice(&visited);
                    nodes.push(w);
                    nodes.sort_unstable();
                }
                (next.cost(), nodes)
            });
            if let Some((cost, nodes)) = &dom {
                if !self.settle_dominance(&edges, w, cost, nodes) {
                    continue;
                }
            }
            let key = QueueKey {
                r,
                estimate: next.mean_estimate() + g as f64,
                ranks: edges.iter().map(|&x| net.edge_rank(x)).collect(),
            };
            self.log(|| TraceEvent::Pushed { path: edges, r });
            self.pushed += 1;
            self.queue.push(key, w, Label { step: id, end: w, state: next, dom });
        }
    }

    /// Applies the dominance check; returns whether the candidate survives.
    fn settle_dominance(&mut self, edges: &[EdgeIdx], at: NodeIdx, cost: &Histogram, nodes: &[NodeIdx]) -> bool {
        let ids: Vec<u64> = self
            .queue
            .ids_at(at)
            .iter()
            .copied()
            .filter(|&id| self.queue.get(id).is_some_and(|(_, l)| l.dom.is_some()))
            .collect();
        let verdict = {
            let entries: Vec<DomEntry<'_>> = ids
                .iter()
                .map(|&id| {
                    let (c, n) = self.queue.get(id).unwrap().1.dom.as_ref().unwrap();
                    DomEntry { cost: c, nodes: n }
                })
                .collect();
            dominance_check(&entries, DomEntry { cost, nodes })
        };
        match verdict {
            Dominance::Keep => true,
            Dominance::Drop(i) => {
                if self.trace.is_some() {
                    let by = self.edges_of(Some(self.queue.get(ids[i]).unwrap().1.step));
                    self.log(|| TraceEvent::Dominated { path: edges.to_vec(), by });
                }
                false
            }
            Dominance::Replace(list) => {
                for i in list {
                    let old = self.queue.remove(ids[i]).expect("queued");
                    if self.trace.is_some() {
                        let path = self.edges_of(Some(old.step));
                        self.log(|| TraceEvent::Replaced { path, by: edges.to_vec() });
                    }
                }
                true
            }
        }
    }

    fn reach(&mut self, edges: Vec<EdgeIdx>, state: &PathState) {
        let budget = self.query.budget;
        let closed = match state.close(self.model, &edges, Some(budget)) {
            Ok(s) => s,
            Err(err) => {
                log::debug!("dropping {}: {err}", self.model.net.path_display(&edges));
                return;
            }
        };
        let probability = closed.cost().cdf(budget);
        let improved = probability > self.best + PROB_EPS;
        if !improved {
            self.log(|| TraceEvent::Reached { path: edges, probability, improved });
            return;
        }
        self.best = probability;
        self.log(|| TraceEvent::Reached { path: edges.clone(), probability, improved });
        self.incumbent = Some(edges);
        let removed = self.queue.purge(probability);
        self.log(|| TraceEvent::Purged { threshold: probability, removed });
    }
}

/// Solves `q` with a freshly built heuristic of the given kind.
pub fn solve(model: &CostModel<'_>, kind: HeuristicKind, q: Query) -> SolveResult {
    solve_with(model, kind, q, SolveOptions::default())
}

pub fn solve_with(model: &CostModel<'_>, kind: HeuristicKind, q: Query, opts: SolveOptions) -> SolveResult {
    let started = Instant::now();
    let heuristic = Heuristic::build(kind, model, q.destination, q.budget);
    let mut result = search(model, &heuristic, q, opts);
    result.wall_time_s = started.elapsed().as_secs_f64();
    result
}

/// Runs the search with a prebuilt heuristic for `q.destination`.
pub fn search(model: &CostModel<'_>, heuristic: &Heuristic, q: Query, opts: SolveOptions) -> SolveResult {
    let started = Instant::now();
    let mut s = Search::new(model, heuristic, q, opts.trace);
    let (expanded, complete) = s.run(opts.max_labels);
    let best_path = s.incumbent.take().map(|edges| Path::new(model.net, edges).expect("search builds valid paths"));
    let cost = best_path.as_ref().map(|p| model.path_cost(p).expect("incumbent cost was computed before"));
    let explored: Vec<EdgeIdx> = (0..s.explored.len()).filter(|&i| s.explored[i]).map(EdgeIdx).collect();
    SolveResult {
        probability: if best_path.is_some() { s.best } else { 0.0 },
        best_path,
        cost,
        explored_edges: explored.len(),
        expanded_labels: expanded,
        wall_time_s: started.elapsed().as_secs_f64(),
        complete,
        explored,
        trace: s.trace.unwrap_or_default(),
    }
}

impl<'m, 'a> Search<'m, 'a> {
    fn new(model: &'m CostModel<'a>, heuristic: &'m Heuristic, query: Query, trace: bool) -> Self {
        assert_eq!(heuristic.dest(), query.destination, "heuristic built for another destination");
        Search {
            model,
            heuristic,
            query,
            steps: Vec::new(),
            queue: LabelQueue::new(),
            best: 0.0,
            incumbent: None,
            explored: vec![false; model.net.edge_count()],
            pushed: 0,
            trace: trace.then(Vec::new),
        }
    }

    /// Main loop; returns the number of extractions and whether the search
    /// finished without hitting `max_labels`.
    fn run(&mut self, max_labels: Option<usize>) -> (usize, bool) {
        self.expand(None, self.query.source, &PathState::empty());
        let mut expanded = 0;
        loop {
            let Some((key, label)) = self.queue.pop_max() else {
                self.log(|| TraceEvent::Exhausted);
                return (expanded, true);
            };
            expanded += 1;
            if self.trace.is_some() {
                let path = self.edges_of(Some(label.step));
                self.log(|| TraceEvent::Extracted { path, r: key.r });
            }
            if key.r <= self.best + PROB_EPS {
                let incumbent = self.best;
                self.log(|| TraceEvent::Terminated { r: key.r, incumbent });
                return (expanded, true);
            }
            if max_labels.is_some_and(|m| self.pushed >= m) {
                let labels = self.pushed;
                self.log(|| TraceEvent::LabelLimit { labels });
                return (expanded, false);
            }
            self.expand(Some(label.step), label.end, &label.state);
        }
    }
}
