//! Path cost distributions under the edge-centric and path-centric models.
//!
//! A path is covered left to right by weight units: stored joint sub-paths or
//! single edges. Consecutive units overlap or abut, and each unit overlaps
//! only its predecessor. Fusion multiplies by the right unit's joint and
//! divides by its marginal over the overlap; row pairs that disagree on the
//! overlap carry no mass and the result is renormalized.
//!
//! [`PathState`] is the compact form used during search. It keeps only the
//! sum of edge times that no later unit can overlap, together with the
//! explicit times of the edges that still can.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::dist::{Histogram, JointDist, Time};
use crate::network::{EdgeIdx, Network, Path};

use super::store::UnitIndex;
use super::{WeightStore, WeightsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelMode {
    /// Independent edges: path cost is the convolution of edge histograms.
    Edge,
    /// Path-centric: stored joint sub-path weights are used where available.
    Pace,
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelMode::Edge => "EDGE",
            ModelMode::Pace => "PACE",
        })
    }
}

impl FromStr for ModelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "edge" => Ok(ModelMode::Edge),
            "pace" => Ok(ModelMode::Pace),
            other => Err(format!("unknown model `{other}` (expected pace or edge)")),
        }
    }
}

/// Half-open range `[start, end)` of edge positions covered by one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// A network, its weights and the interpretation of those weights.
#[derive(Debug, Clone, Copy)]
pub struct CostModel<'a> {
    pub net: &'a Network,
    pub store: &'a WeightStore,
    pub mode: ModelMode,
}

impl<'a> CostModel<'a> {
    pub fn new(net: &'a Network, store: &'a WeightStore, mode: ModelMode) -> Self {
        CostModel { net, store, mode }
    }

    pub fn resolution(&self) -> Time {
        self.store.resolution()
    }

    /// Lower bound on `e`'s travel time under this model.
    pub fn edge_floor(&self, e: EdgeIdx) -> Time {
        match self.mode {
            ModelMode::Edge => self.store.edge_weight(e).min_cost(),
            ModelMode::Pace => self.store.edge_floor(e),
        }
    }

    fn longest_unit_at(&self, edges: &[EdgeIdx], s: usize) -> usize {
        match self.mode {
            ModelMode::Edge => 1,
            ModelMode::Pace => self.store.longest_unit_at(edges, s),
        }
    }

    fn open_suffix_len(&self, edges: &[EdgeIdx]) -> usize {
        match self.mode {
            ModelMode::Edge => 0,
            ModelMode::Pace => self.store.open_suffix_len(edges),
        }
    }

    /// Next unit when `[0, covered)` is fused and the previous unit started at
    /// `kept_start - 1`: among starts in `[kept_start, covered]` take the one
    /// reaching furthest, preferring the earliest start on ties.
    fn next_span(&self, edges: &[EdgeIdx], covered: usize, kept_start: usize) -> Span {
        let mut best = Span { start: covered, end: covered + self.longest_unit_at(edges, covered) };
        for s in (kept_start..covered).rev() {
            let end = s + self.longest_unit_at(edges, s);
            if end >= best.end {
                best = Span { start: s, end };
            }
        }
        best
    }

    /// Coarsest covering of `edges` by weight units, as position ranges.
    pub fn coarsest_spans(&self, edges: &[EdgeIdx]) -> Vec<Span> {
        let mut spans = Vec::new();
        let (mut covered, mut kept_start) = (0, 0);
        while covered < edges.len() {
            let span = self.next_span(edges, covered, kept_start);
            covered = span.end;
            kept_start = span.start + 1;
            spans.push(span);
        }
        spans
    }

    /// Coarsest covering of `p` by weight units.
    pub fn coarsest_combination(&self, p: &Path) -> Vec<Path> {
        self.coarsest_spans(p.edges())
            .into_iter()
            .map(|s| Path::new(self.net, p.edges()[s.start..s.end].to_vec()).expect("sub-path of a path"))
            .collect()
    }

    fn unit_index(&self, edges: &[EdgeIdx]) -> &'a UnitIndex {
        self.store.unit_index(edges)
    }

    /// Joint weight of a single unit.
    pub fn unit_joint(&self, edges: &[EdgeIdx]) -> JointDist {
        if edges.len() == 1 {
            JointDist::from_histogram(edges[0], self.store.edge_weight(edges[0]))
        } else {
            self.store.path_weight(edges).expect("stored unit").clone()
        }
    }

    /// Joint travel-time distribution of `p`.
    pub fn path_joint(&self, p: &Path) -> Result<JointDist, WeightsError> {
        self.joint_of(p.edges())
    }

    fn joint_of(&self, edges: &[EdgeIdx]) -> Result<JointDist, WeightsError> {
        let mut rows: BTreeMap<Vec<Time>, f64> = BTreeMap::from([(Vec::new(), 1.0)]);
        let mut covered = 0;
        for span in self.coarsest_spans(edges) {
            let unit = self.unit_index(&edges[span.start..span.end]);
            let overlap = covered - span.start;
            let mut next = BTreeMap::new();
            for (row, p) in rows {
                let Some((mass, members)) = unit.by_prefix[overlap].get(&row[span.start..covered]) else {
                    continue;
                };
                for &i in members {
                    let (urow, up) = &unit.rows[i];
                    let mut full = row.clone();
                    full.extend_from_slice(&urow[overlap..]);
                    *next.entry(full).or_insert(0.0) += p * up / mass;
                }
            }
            rows = normalized(next).ok_or_else(|| self.inconsistent(&edges[..span.end]))?;
            covered = span.end;
        }
        Ok(JointDist::from_raw(self.resolution(), edges.to_vec(), rows)?)
    }

    /// Total travel-time distribution of `p`.
    pub fn path_cost(&self, p: &Path) -> Result<Histogram, WeightsError> {
        Ok(PathState::for_path(self, p.edges(), None)?.cost())
    }

    /// Joint of `base`'s path extended by `next`; equal to recomputing
    /// [`CostModel::path_joint`] on the longer path.
    pub fn extend_joint(&self, base: &JointDist, next: EdgeIdx) -> Result<JointDist, WeightsError> {
        let mut edges = base.edges().to_vec();
        edges.push(next);
        Path::new(self.net, edges.clone())?;
        let spans = self.coarsest_spans(&edges);
        let n = edges.len();
        let last = spans[spans.len() - 1];
        if last == (Span { start: n - 1, end: n }) && self.coarsest_spans(&edges[..n - 1]) == spans[..spans.len() - 1] {
            let tail = JointDist::from_histogram(next, self.store.edge_weight(next));
            return Ok(base.joint_product(&tail)?);
        }
        self.joint_of(&edges)
    }

    fn inconsistent(&self, edges: &[EdgeIdx]) -> WeightsError {
        WeightsError::Inconsistent(self.net.path_display(edges))
    }
}

fn normalized<K: Ord>(mut rows: BTreeMap<K, f64>) -> Option<BTreeMap<K, f64>> {
    rows.retain(|_, p| *p > 0.0);
    let total: f64 = rows.values().sum();
    if total <= 0.0 {
        return None;
    }
    rows.values_mut().for_each(|p| *p /= total);
    Some(rows)
}

/// Probability over committed sums for one vector of kept times.
#[derive(Debug, Clone, PartialEq)]
struct Group {
    kept: Vec<Time>,
    /// Sum of `kept`.
    kept_sum: Time,
    /// `probs[i]` is the mass at committed-prefix sum `offset + i * resolution`.
    offset: Time,
    probs: Vec<f64>,
}

impl Group {
    fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Nonzero `(total committed time, probability)` pairs.
    fn totals(&self, res: Time) -> impl Iterator<Item = (Time, f64)> + '_ {
        let base = self.offset + self.kept_sum;
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(move |(i, &p)| (base + i as Time * res, p))
    }
}

/// Compact fused distribution of a path prefix.
///
/// Units are committed only once no extension of the path can change the
/// greedy choice that produced them. The distribution is kept as the joint
/// of the summed times on edges `[0, kept_start)` and the individual times on
/// edges `[kept_start, covered)`, grouped by the latter with a dense array
/// over the former.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    resolution: Time,
    len: usize,
    covered: usize,
    kept_start: usize,
    /// Longest suffix of the path that a stored unit could still extend.
    open_suffix: usize,
    /// Sorted by kept times; every group has positive mass; masses sum to 1.
    groups: Vec<Group>,
    /// Sum of edge floors over the uncommitted edges `[covered, len)`.
    tail_floor: Time,
    /// Sum of edge-histogram means over the uncommitted edges.
    tail_mean: f64,
}

impl PathState {
    /// State of the empty path.
    pub fn empty() -> PathState {
        PathState {
            resolution: 1,
            len: 0,
            covered: 0,
            kept_start: 0,
            open_suffix: 0,
            groups: vec![Group { kept: Vec::new(), kept_sum: 0, offset: 0, probs: vec![1.0] }],
            tail_floor: 0,
            tail_mean: 0.0,
        }
    }

    /// State of `edges`, built edge by edge and then closed.
    pub fn for_path(model: &CostModel<'_>, edges: &[EdgeIdx], cap: Option<Time>) -> Result<PathState, WeightsError> {
        let mut state = PathState::empty();
        for n in 1..=edges.len() {
            state = state.extend(model, &edges[..n], cap)?;
        }
        state.close(model, edges, cap)
    }

    /// State after appending the last edge of `edges`; `self` must be the
    /// state of `edges[..len - 1]`. Totals above `cap` are merged onto the
    /// next grid point, which preserves every probability of finishing
    /// within `cap`.
    pub fn extend(
        &self,
        model: &CostModel<'_>,
        edges: &[EdgeIdx],
        cap: Option<Time>,
    ) -> Result<PathState, WeightsError> {
        debug_assert_eq!(edges.len(), self.len + 1);
        let open_suffix = model.open_suffix_len(edges);
        let mut next = self.advance(model, edges, edges.len() - open_suffix, cap)?;
        next.open_suffix = open_suffix;
        Ok(next)
    }

    /// Commits every remaining unit, treating `edges` as a complete path.
    pub fn close(
        &self,
        model: &CostModel<'_>,
        edges: &[EdgeIdx],
        cap: Option<Time>,
    ) -> Result<PathState, WeightsError> {
        let mut next = self.advance(model, edges, edges.len(), cap)?;
        next.open_suffix = 0;
        Ok(next)
    }

    fn advance(
        &self,
        model: &CostModel<'_>,
        edges: &[EdgeIdx],
        bound: usize,
        cap: Option<Time>,
    ) -> Result<PathState, WeightsError> {
        let mut state = self.clone();
        state.resolution = model.resolution();
        state.len = edges.len();
        while state.covered < bound {
            let span = model.next_span(edges, state.covered, state.kept_start);
            state.fuse(model, edges, span, cap)?;
        }
        state.tail_floor = edges[state.covered..].iter().map(|&e| model.edge_floor(e)).sum();
        state.tail_mean = edges[state.covered..].iter().map(|&e| model.store.edge_weight(e).mean()).sum();
        Ok(state)
    }

    fn fuse(
        &mut self,
        model: &CostModel<'_>,
        edges: &[EdgeIdx],
        span: Span,
        cap: Option<Time>,
    ) -> Result<(), WeightsError> {
        let res = self.resolution;
        let unit = model.unit_index(&edges[span.start..span.end]);
        let overlap = self.covered - span.start;
        let skip = span.start - self.kept_start;
        // new kept region starts right after the unit's first edge
        let fold = span.start + 1 - self.kept_start;
        let mut next: BTreeMap<Vec<Time>, Group> = BTreeMap::new();
        for g in &self.groups {
            let Some((mass, members)) = unit.by_prefix[overlap].get(&g.kept[skip..]) else {
                continue;
            };
            for &i in members {
                let (urow, up) = &unit.rows[i];
                let mut full = g.kept.clone();
                full.extend_from_slice(&urow[overlap..]);
                let shift: Time = full[..fold].iter().sum();
                let kept = full.split_off(fold);
                let target = next.entry(kept).or_insert_with_key(|k| Group {
                    kept_sum: k.iter().sum(),
                    kept: k.clone(),
                    offset: 0,
                    probs: Vec::new(),
                });
                add_shifted(target, g, g.offset + shift, up / mass, res, cap.map(|c| c + res));
            }
        }
        let total: f64 = next.values().map(Group::mass).sum();
        if total <= 0.0 {
            return Err(model.inconsistent(&edges[..span.end]));
        }
        self.groups = next
            .into_values()
            .filter_map(|mut g| {
                g.probs.iter_mut().for_each(|p| *p /= total);
                trim(&mut g, res);
                (!g.probs.is_empty()).then_some(g)
            })
            .collect();
        self.covered = span.end;
        self.kept_start = span.start + 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// No stored unit can overlap the path's end, so any extension is
    /// independent of the current distribution.
    pub fn is_closed(&self) -> bool {
        self.open_suffix == 0
    }

    pub fn committed_edges(&self) -> usize {
        self.covered
    }

    /// Number of `(prefix sum, kept times)` pairs with positive mass.
    pub fn row_count(&self) -> usize {
        self.groups.iter().map(|g| g.probs.iter().filter(|&&p| p > 0.0).count()).sum()
    }

    /// Distribution of the committed travel time. For a closed state this is
    /// the path's cost distribution.
    pub fn cost(&self) -> Histogram {
        let mut out = BTreeMap::new();
        for g in &self.groups {
            for (t, p) in g.totals(self.resolution) {
                *out.entry(t).or_insert(0.0) += p;
            }
        }
        Histogram::from_raw(self.resolution, out)
    }

    /// Smallest total any completion of this prefix can have, excluding the
    /// part after the last edge.
    pub fn lower_bound(&self) -> Time {
        let committed = self.groups.iter().map(|g| g.offset + g.kept_sum).min().unwrap_or(0);
        committed + self.tail_floor
    }

    /// Committed mean plus the edge-histogram means of uncommitted edges.
    pub fn mean_estimate(&self) -> f64 {
        let committed: f64 =
            self.groups.iter().flat_map(|g| g.totals(self.resolution)).map(|(t, p)| t as f64 * p).sum();
        committed + self.tail_mean
    }

    /// Upper bound on the probability that any completion finishes within
    /// `budget`, given that the remainder after the last edge needs at least
    /// `remaining_min`.
    ///
    /// Later units can only reweight rows through the kept times, so the
    /// bound conditions on them and takes the most favourable value.
    pub fn arrival_bound(&self, remaining_min: Time, budget: Time) -> f64 {
        let Some(limit) = budget.checked_sub(remaining_min + self.tail_floor) else {
            return 0.0;
        };
        let within =
            |g: &Group| g.totals(self.resolution).take_while(|&(t, _)| t <= limit).map(|(_, p)| p).sum::<f64>();
        let bound = if self.is_closed() {
            self.groups.iter().map(within).sum::<f64>()
        } else {
            self.groups.iter().map(|g| within(g) / g.mass()).fold(0.0, f64::max)
        };
        bound.min(1.0)
    }
}

/// Adds `weight * src.probs` into `dst` with the source's first entry at
/// prefix sum `start`. Entries whose total committed time would exceed
/// `merge_at` are folded onto it.
fn add_shifted(dst: &mut Group, src: &Group, start: Time, weight: f64, res: Time, merge_at: Option<Time>) {
    let mut probs: &[f64] = &src.probs;
    let mut overflow = None;
    let mut limit = 0;
    if let Some(m) = merge_at {
        limit = m.saturating_sub(dst.kept_sum);
        let fit = if start > limit { 0 } else { ((limit - start) / res) as usize + 1 };
        if fit < probs.len() {
            overflow = Some(probs[fit..].iter().sum::<f64>());
            probs = &probs[..fit];
        }
    }
    if !probs.is_empty() {
        cover(dst, start, start + (probs.len() - 1) as Time * res, res);
        let at = ((start - dst.offset) / res) as usize;
        for (slot, &p) in dst.probs[at..].iter_mut().zip(probs) {
            *slot += weight * p;
        }
    }
    if let Some(o) = overflow {
        cover(dst, limit, limit, res);
        dst.probs[((limit - dst.offset) / res) as usize] += weight * o;
    }
}

/// Grows `dst` so that it spans prefix sums `lo..=hi`.
fn cover(dst: &mut Group, lo: Time, hi: Time, res: Time) {
    if dst.probs.is_empty() {
        dst.offset = lo;
    }
    if lo < dst.offset {
        let pad = ((dst.offset - lo) / res) as usize;
        dst.probs.splice(0..0, std::iter::repeat_n(0.0, pad));
        dst.offset = lo;
    }
    let need = ((hi - dst.offset) / res) as usize + 1;
    if dst.probs.len() < need {
        dst.probs.resize(need, 0.0);
    }
}

/// Drops leading and trailing zeros.
fn trim(g: &mut Group, res: Time) {
    let Some(first) = g.probs.iter().position(|&p| p > 0.0) else {
        g.probs.clear();
        return;
    };
    let last = g.probs.iter().rposition(|&p| p > 0.0).unwrap();
    g.probs.truncate(last + 1);
    g.probs.drain(..first);
    g.offset += first as Time * res;
}
