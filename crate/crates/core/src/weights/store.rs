use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::dist::{Histogram, JointDist, Time};
use crate::network::{EdgeIdx, Network, Path};

use super::{TrajectoryRecord, WeightsError};

const FORMAT_TAG: &str = "spotar-weights";
const FORMAT_VERSION: u32 = 1;

/// Parameters of weight instantiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreConfig {
    /// Trajectories needed before a sub-path gets its own joint weight.
    pub min_support: u64,
    /// Longest sub-path (in edges) that may carry a joint weight.
    pub max_unit_len: usize,
    pub resolution: Time,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { min_support: 10, max_unit_len: 8, resolution: 1 }
    }
}

/// Marginal mass and row indices per prefix.
type PrefixIndex = HashMap<Vec<Time>, (f64, Vec<usize>)>;

/// Rows of one weight unit, grouped by every prefix length so that fusion can
/// look up the rows agreeing with a given overlap.
#[derive(Debug, Clone)]
pub(crate) struct UnitIndex {
    pub(crate) rows: Vec<(Vec<Time>, f64)>,
    /// `by_prefix[k]` maps a length-`k` prefix to its marginal mass and the
    /// indices of the rows carrying it.
    pub(crate) by_prefix: Vec<PrefixIndex>,
}

impl UnitIndex {
    fn new(rows: Vec<(Vec<Time>, f64)>) -> UnitIndex {
        let len = rows.first().map_or(0, |(r, _)| r.len());
        let mut by_prefix = vec![HashMap::new(); len];
        for (k, groups) in by_prefix.iter_mut().enumerate() {
            for (i, (row, p)) in rows.iter().enumerate() {
                let slot = groups.entry(row[..k].to_vec()).or_insert((0.0, Vec::new()));
                slot.0 += p;
                slot.1.push(i);
            }
        }
        UnitIndex { rows, by_prefix }
    }

    fn from_joint(j: &JointDist) -> UnitIndex {
        UnitIndex::new(j.rows().map(|(r, p)| (r.to_vec(), p)).collect())
    }
}

/// The weight function: a histogram for every edge plus joint distributions
/// for well-supported multi-edge sub-paths.
#[derive(Debug, Clone)]
pub struct WeightStore {
    resolution: Time,
    min_support: u64,
    max_unit_len: usize,
    edge_weights: Vec<Histogram>,
    measured: Vec<bool>,
    path_weights: BTreeMap<Vec<EdgeIdx>, JointDist>,
    /// Stored units starting with each edge, longest first.
    units_from: Vec<Vec<Vec<EdgeIdx>>>,
    /// Every nonempty proper prefix of a stored unit.
    proper_prefixes: HashSet<Vec<EdgeIdx>>,
    edge_floor: Vec<Time>,
    single_index: Vec<UnitIndex>,
    path_index: HashMap<Vec<EdgeIdx>, UnitIndex>,
}

impl PartialEq for WeightStore {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution
            && self.min_support == other.min_support
            && self.max_unit_len == other.max_unit_len
            && self.edge_weights == other.edge_weights
            && self.measured == other.measured
            && self.path_weights == other.path_weights
    }
}

/// Counts of the summary printed after a build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreSummary {
    pub measured_edges: usize,
    pub fallback_edges: usize,
    pub path_weights: usize,
}

/// Instantiates edge histograms and joint path weights from trajectories.
///
/// Edge histograms pool every observation of the edge. Every contiguous
/// sub-path of 2 to `max_unit_len` edges traversed end-to-end by at least
/// `min_support` trajectories gets a joint weight. Edges never observed fall
/// back to a point mass at the free-flow time.
pub fn build_store(
    net: &Network,
    trajectories: &[TrajectoryRecord],
    config: StoreConfig,
) -> Result<WeightStore, WeightsError> {
    if config.min_support == 0 {
        return Err(WeightsError::ZeroMinSupport);
    }
    if config.max_unit_len == 0 {
        return Err(WeightsError::ZeroUnitLength);
    }
    let res = config.resolution;
    let mut edge_counts: Vec<BTreeMap<Time, u64>> = vec![BTreeMap::new(); net.edge_count()];
    let mut sub_counts: BTreeMap<Vec<EdgeIdx>, BTreeMap<Vec<Time>, u64>> = BTreeMap::new();
    for rec in trajectories {
        let edges = rec.edges();
        if let Some(&e) = edges.iter().find(|e| e.0 >= net.edge_count()) {
            return Err(WeightsError::UnknownEdgeIndex(e.0));
        }
        Path::new(net, edges.to_vec())?;
        if let Some(&t) = rec.times().iter().find(|&&t| t < res || t % res != 0) {
            return Err(WeightsError::OffGridTime(t));
        }
        for (&e, &t) in edges.iter().zip(rec.times()) {
            *edge_counts[e.0].entry(t).or_insert(0) += rec.count();
        }
        for i in 0..edges.len() {
            for j in (i + 2)..=edges.len().min(i + config.max_unit_len) {
                let rows = sub_counts.entry(edges[i..j].to_vec()).or_default();
                *rows.entry(rec.times()[i..j].to_vec()).or_insert(0) += rec.count();
            }
        }
    }
    let mut edge_weights = Vec::with_capacity(net.edge_count());
    let mut measured = Vec::with_capacity(net.edge_count());
    for (i, counts) in edge_counts.iter().enumerate() {
        if counts.is_empty() {
            edge_weights.push(Histogram::point_mass(net.free_flow_time(EdgeIdx(i), res), res)?);
            measured.push(false);
        } else {
            edge_weights.push(Histogram::from_counts(res, counts)?);
            measured.push(true);
        }
    }
    let mut path_weights = BTreeMap::new();
    for (edges, rows) in sub_counts {
        let total: u64 = rows.values().sum();
        if total < config.min_support {
            continue;
        }
        let joint = JointDist::new(res, edges.clone(), rows.into_iter().map(|(r, c)| (r, c as f64 / total as f64)))?;
        path_weights.insert(edges, joint);
    }
    Ok(WeightStore::assemble(res, config.min_support, config.max_unit_len, edge_weights, measured, path_weights))
}

impl WeightStore {
    /// Assembles a store from explicit weights. Edges without a histogram get
    /// the free-flow fallback; each joint must lie on a valid path of at
    /// least two edges.
    pub fn from_parts(
        net: &Network,
        resolution: Time,
        edge_weights: impl IntoIterator<Item = (EdgeIdx, Histogram)>,
        path_weights: impl IntoIterator<Item = JointDist>,
    ) -> Result<WeightStore, WeightsError> {
        let mut hists: Vec<Option<Histogram>> = vec![None; net.edge_count()];
        for (e, h) in edge_weights {
            if e.0 >= net.edge_count() {
                return Err(WeightsError::UnknownEdgeIndex(e.0));
            }
            if h.resolution() != resolution {
                return Err(WeightsError::ResolutionMismatch(h.resolution(), resolution));
            }
            hists[e.0] = Some(h);
        }
        let measured = hists.iter().map(Option::is_some).collect();
        let mut weights = Vec::with_capacity(net.edge_count());
        for (i, h) in hists.into_iter().enumerate() {
            let h = match h {
                Some(h) => h,
                None => Histogram::point_mass(net.free_flow_time(EdgeIdx(i), resolution), resolution)?,
            };
            weights.push(h);
        }
        let mut paths = BTreeMap::new();
        let mut max_len = StoreConfig::default().max_unit_len;
        for j in path_weights {
            if let Some(&e) = j.edges().iter().find(|e| e.0 >= net.edge_count()) {
                return Err(WeightsError::UnknownEdgeIndex(e.0));
            }
            let path = Path::new(net, j.edges().to_vec())?;
            if path.len() < 2 {
                return Err(WeightsError::ShortUnit(path.display(net)));
            }
            if j.resolution() != resolution {
                return Err(WeightsError::ResolutionMismatch(j.resolution(), resolution));
            }
            max_len = max_len.max(path.len());
            paths.insert(path.into_edges(), j);
        }
        Ok(WeightStore::assemble(resolution, StoreConfig::default().min_support, max_len, weights, measured, paths))
    }

    fn assemble(
        resolution: Time,
        min_support: u64,
        max_unit_len: usize,
        edge_weights: Vec<Histogram>,
        measured: Vec<bool>,
        path_weights: BTreeMap<Vec<EdgeIdx>, JointDist>,
    ) -> WeightStore {
        let n = edge_weights.len();
        let mut units_from: Vec<Vec<Vec<EdgeIdx>>> = vec![Vec::new(); n];
        let mut proper_prefixes = HashSet::new();
        let mut edge_floor: Vec<Time> = edge_weights.iter().map(Histogram::min_cost).collect();
        let mut path_index = HashMap::with_capacity(path_weights.len());
        for (edges, joint) in &path_weights {
            units_from[edges[0].0].push(edges.clone());
            for k in 1..edges.len() {
                proper_prefixes.insert(edges[..k].to_vec());
            }
            for (row, _) in joint.rows() {
                for (&e, &t) in edges.iter().zip(row) {
                    edge_floor[e.0] = edge_floor[e.0].min(t);
                }
            }
            path_index.insert(edges.clone(), UnitIndex::from_joint(joint));
        }
        for units in &mut units_from {
            units.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        let single_index =
            edge_weights.iter().map(|h| UnitIndex::new(h.entries().map(|(t, p)| (vec![t], p)).collect())).collect();
        WeightStore {
            resolution,
            min_support,
            max_unit_len,
            edge_weights,
            measured,
            path_weights,
            units_from,
            proper_prefixes,
            edge_floor,
            single_index,
            path_index,
        }
    }

    pub fn resolution(&self) -> Time {
        self.resolution
    }

    pub fn min_support(&self) -> u64 {
        self.min_support
    }

    pub fn max_unit_len(&self) -> usize {
        self.max_unit_len
    }

    pub fn edge_count(&self) -> usize {
        self.edge_weights.len()
    }

    pub fn edge_weight(&self, e: EdgeIdx) -> &Histogram {
        &self.edge_weights[e.0]
    }

    /// Whether `e`'s histogram comes from observations rather than the fallback.
    pub fn is_measured(&self, e: EdgeIdx) -> bool {
        self.measured[e.0]
    }

    pub fn path_weight(&self, edges: &[EdgeIdx]) -> Option<&JointDist> {
        self.path_weights.get(edges)
    }

    pub fn path_weights(&self) -> impl Iterator<Item = &JointDist> {
        self.path_weights.values()
    }

    pub fn path_weight_count(&self) -> usize {
        self.path_weights.len()
    }

    /// Least travel time `e` can take under any weight mentioning it.
    pub fn edge_floor(&self, e: EdgeIdx) -> Time {
        self.edge_floor[e.0]
    }

    pub fn summary(&self) -> StoreSummary {
        let measured_edges = self.measured.iter().filter(|&&m| m).count();
        StoreSummary {
            measured_edges,
            fallback_edges: self.measured.len() - measured_edges,
            path_weights: self.path_weights.len(),
        }
    }

    /// Length of the longest stored unit that `edges[s..]` starts with; 1
    /// when only the single edge is stored.
    pub(crate) fn longest_unit_at(&self, edges: &[EdgeIdx], s: usize) -> usize {
        let rest = &edges[s..];
        self.units_from[rest[0].0]
            .iter()
            .find(|u| u.len() <= rest.len() && rest[..u.len()] == u[..])
            .map_or(1, Vec::len)
    }

    /// Length of the longest suffix of `edges` that a stored unit could still
    /// extend.
    pub(crate) fn open_suffix_len(&self, edges: &[EdgeIdx]) -> usize {
        let longest = edges.len().min(self.max_unit_len.saturating_sub(1));
        (1..=longest).rev().find(|&l| self.proper_prefixes.contains(&edges[edges.len() - l..])).unwrap_or(0)
    }

    pub(crate) fn unit_index(&self, edges: &[EdgeIdx]) -> &UnitIndex {
        if edges.len() == 1 {
            &self.single_index[edges[0].0]
        } else {
            &self.path_index[edges]
        }
    }

    /// Serializes to the versioned JSON format; output is deterministic.
    pub fn to_json(&self, net: &Network) -> String {
        let file = StoreFile {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            resolution: self.resolution,
            min_support: self.min_support,
            max_unit_len: self.max_unit_len,
            edges: self
                .edge_weights
                .iter()
                .enumerate()
                .map(|(i, h)| EdgeEntry {
                    edge: net.edge(EdgeIdx(i)).id.clone(),
                    measured: self.measured[i],
                    dist: h.entries().collect(),
                })
                .collect(),
            paths: self
                .path_weights
                .values()
                .map(|j| PathEntry {
                    edges: j.edges().iter().map(|&e| net.edge(e).id.clone()).collect(),
                    rows: j.rows().map(|(r, p)| (r.to_vec(), p)).collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("store serializes");
        text.push('\n');
        text
    }

    pub fn from_json(net: &Network, text: &str) -> Result<WeightStore, WeightsError> {
        let file: StoreFile = serde_json::from_str(text).map_err(|e| WeightsError::Format(e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(WeightsError::Format(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(WeightsError::Version(file.version));
        }
        let res = file.resolution;
        let mut hists: Vec<Option<(Histogram, bool)>> = vec![None; net.edge_count()];
        for entry in file.edges {
            let e = net.edge_idx(&entry.edge)?;
            hists[e.0] = Some((Histogram::new(res, entry.dist)?, entry.measured));
        }
        let mut edge_weights = Vec::with_capacity(hists.len());
        let mut measured = Vec::with_capacity(hists.len());
        for (i, h) in hists.into_iter().enumerate() {
            let (h, m) = h.ok_or_else(|| WeightsError::MissingEdge(net.edge(EdgeIdx(i)).id.clone()))?;
            edge_weights.push(h);
            measured.push(m);
        }
        let mut path_weights = BTreeMap::new();
        for entry in file.paths {
            let ids: Vec<&str> = entry.edges.iter().map(String::as_str).collect();
            let path = Path::from_ids(net, &ids)?;
            if path.len() < 2 {
                return Err(WeightsError::ShortUnit(path.display(net)));
            }
            let joint = JointDist::new(res, path.edges().to_vec(), entry.rows)?;
            path_weights.insert(path.into_edges(), joint);
        }
        Ok(WeightStore::assemble(res, file.min_support, file.max_unit_len, edge_weights, measured, path_weights))
    }

    pub fn save(&self, net: &Network, path: impl AsRef<FsPath>) -> Result<(), WeightsError> {
        std::fs::write(path.as_ref(), self.to_json(net))
            .map_err(|e| WeightsError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(net: &Network, path: impl AsRef<FsPath>) -> Result<WeightStore, WeightsError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| WeightsError::Io(format!("{}: {e}", path.as_ref().display())))?;
        WeightStore::from_json(net, &text)
    }
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    format: String,
    version: u32,
    resolution: Time,
    min_support: u64,
    max_unit_len: usize,
    edges: Vec<EdgeEntry>,
    paths: Vec<PathEntry>,
}

#[derive(Serialize, Deserialize)]
struct EdgeEntry {
    edge: String,
    measured: bool,
    dist: Vec<(Time, f64)>,
}

#[derive(Serialize, Deserialize)]
struct PathEntry {
    edges: Vec<String>,
    rows: Vec<(Vec<Time>, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::weights::parse_trajectories;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn e1_e4_corpus_edge_weight() {
        let net = fixtures::running_example_network();
        let recs = parse_trajectories(&net, fixtures::E1_E4_TRAJECTORIES, 1).unwrap();
        let store = build_store(&net, &recs, StoreConfig::default()).unwrap();
        let e1 = net.edge_idx("e1").unwrap();
        let w = store.edge_weight(e1);
        assert!(close(w.prob(8), 0.9) && close(w.prob(10), 0.1));
        let e4 = net.edge_idx("e4").unwrap();
        let j = store.path_weight(&[e1, e4]).unwrap();
        assert!(close(j.prob(&[8, 6]), 0.8) && close(j.prob(&[10, 10]), 0.2));
        assert_eq!(store.path_weight_count(), 1);
    }

    #[test]
    fn min_support_filters_joints() {
        let net = fixtures::running_example_network();
        let recs = parse_trajectories(&net, fixtures::E1_E4_TRAJECTORIES, 1).unwrap();
        let cfg = StoreConfig { min_support: 101, ..StoreConfig::default() };
        assert_eq!(build_store(&net, &recs, cfg).unwrap().path_weight_count(), 0);
        let cfg = StoreConfig { min_support: 100, ..StoreConfig::default() };
        assert_eq!(build_store(&net, &recs, cfg).unwrap().path_weight_count(), 1);
        let cfg = StoreConfig { max_unit_len: 1, ..StoreConfig::default() };
        assert_eq!(build_store(&net, &recs, cfg).unwrap().path_weight_count(), 0);
    }

    #[test]
    fn fallback_is_free_flow_point_mass() {
        let net = Network::parse("#nodes\na,0,0\nb,0,0.001\n#edges\nx,a,b,100,10\n").unwrap();
        let store = build_store(&net, &[], StoreConfig::default()).unwrap();
        let w = store.edge_weight(EdgeIdx(0));
        assert_eq!(w.entries().collect::<Vec<_>>(), vec![(10, 1.0)]);
        assert!(!store.is_measured(EdgeIdx(0)));
        assert_eq!(store.summary(), StoreSummary { measured_edges: 0, fallback_edges: 1, path_weights: 0 });
    }

    #[test]
    fn full_fixture_matches_hand_weights() {
        let net = fixtures::running_example_network();
        let built = fixtures::running_example_store();
        let hand = fixtures::running_example_store_from_tables();
        for e in 0..net.edge_count() {
            let e = EdgeIdx(e);
            assert!(built.edge_weight(e).approx_eq(hand.edge_weight(e), 1e-12), "{}", net.edge(e).id);
        }
        assert_eq!(built.path_weight_count(), 2);
        for j in hand.path_weights() {
            assert!(built.path_weight(j.edges()).unwrap().approx_eq(j, 1e-12));
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let net = fixtures::running_example_network();
        let store = fixtures::running_example_store();
        let text = store.to_json(&net);
        let back = WeightStore::from_json(&net, &text).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.to_json(&net), text);
    }

    #[test]
    fn json_rejects_other_versions() {
        let net = fixtures::running_example_network();
        let text = fixtures::running_example_store().to_json(&net).replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(WeightStore::from_json(&net, &text), Err(WeightsError::Version(9))));
    }

    #[test]
    fn prefix_bookkeeping() {
        let net = fixtures::running_example_network();
        let store = fixtures::running_example_store();
        let ids = |s: &[&str]| s.iter().map(|id| net.edge_idx(id).unwrap()).collect::<Vec<_>>();
        assert_eq!(store.open_suffix_len(&ids(&["e1"])), 1);
        assert_eq!(store.open_suffix_len(&ids(&["e1", "e4"])), 0);
        assert_eq!(store.open_suffix_len(&ids(&["e2"])), 1);
        assert_eq!(store.longest_unit_at(&ids(&["e1", "e4", "e9"]), 0), 2);
        assert_eq!(store.longest_unit_at(&ids(&["e1", "e4", "e9"]), 1), 1);
        assert_eq!(store.edge_floor(net.edge_idx("e2").unwrap()), 8);
    }
}
