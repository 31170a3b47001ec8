//! Directed road network, paths and queries.
//!
//! Networks are read from a two-section CSV file:
//!
//! ```text
//! #nodes
//! node_id,lat,lon
//! #edges
//! edge_id,from,to,length_m,speed_limit_mps
//! ```
//!
//! Node and edge identifiers are arbitrary strings; internally everything is
//! addressed by dense indices ([`NodeIdx`], [`EdgeIdx`]).

use std::collections::HashMap;
use std::fmt;
use std::path::Path as FsPath;

use thiserror::Error;

use crate::dist::Time;

/// Mean earth radius used by the equirectangular projection.
const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIdx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeIdx(pub usize);

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown node `{node}`")]
    DanglingNode { edge: String, node: String },
    #[error("edge `{edge}` has non-positive {what}")]
    NonPositive { edge: String, what: &'static str },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("path is empty")]
    EmptyPath,
    #[error("path edges `{0}` and `{1}` are not adjacent")]
    NotAdjacent(String, String),
    #[error("edge `{0}` appears twice in path")]
    RepeatedEdge(String),
    #[error("query budget must be positive")]
    ZeroBudget,
    #[error("query source and destination coincide")]
    SameEndpoints,
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: NodeIdx,
    pub to: NodeIdx,
    pub length_m: f64,
    pub speed_limit_mps: f64,
}

/// Immutable directed multigraph with per-edge length and speed limit.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeIdx>>,
    in_edges: Vec<Vec<EdgeIdx>>,
    node_index: HashMap<String, NodeIdx>,
    edge_index: HashMap<String, EdgeIdx>,
    /// Position of each edge in lexicographic id order, used for tie-breaking.
    edge_rank: Vec<u32>,
    max_speed: f64,
    /// Cosine of the mean node latitude; one projection for all distance queries
    /// keeps `euclidean_m` a true metric.
    lon_scale: f64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

/// Raw edge description used when assembling a network by hand.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub speed_limit_mps: f64,
}

impl EdgeSpec {
    pub fn new(id: &str, from: &str, to: &str, length_m: f64, speed_limit_mps: f64) -> Self {
        EdgeSpec { id: id.to_string(), from: from.to_string(), to: to.to_string(), length_m, speed_limit_mps }
    }
}

impl Network {
    /// Builds and validates a network.
    pub fn new(nodes: Vec<Node>, edge_specs: Vec<EdgeSpec>) -> Result<Self, NetworkError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), NodeIdx(i)).is_some() {
                return Err(NetworkError::DuplicateNode(n.id.clone()));
            }
        }
        let mut edges = Vec::with_capacity(edge_specs.len());
        let mut edge_index = HashMap::with_capacity(edge_specs.len());
        for spec in edge_specs {
            let lookup = |id: &str| {
                node_index
                    .get(id)
                    .copied()
                    .ok_or_else(|| NetworkError::DanglingNode { edge: spec.id.clone(), node: id.to_string() })
            };
            let from = lookup(&spec.from)?;
            let to = lookup(&spec.to)?;
            // Negated so that NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(spec.length_m > 0.0) {
                return Err(NetworkError::NonPositive { edge: spec.id, what: "length" });
            }
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(spec.speed_limit_mps > 0.0) {
                return Err(NetworkError::NonPositive { edge: spec.id, what: "speed limit" });
            }
            if edge_index.insert(spec.id.clone(), EdgeIdx(edges.len())).is_some() {
                return Err(NetworkError::DuplicateEdge(spec.id));
            }
            edges.push(Edge { id: spec.id, from, to, length_m: spec.length_m, speed_limit_mps: spec.speed_limit_mps });
        }
        Ok(Self::assemble(nodes, edges, node_index, edge_index))
    }

    fn assemble(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        node_index: HashMap<String, NodeIdx>,
        edge_index: HashMap<String, EdgeIdx>,
    ) -> Self {
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by(|&a, &b| edges[a].id.cmp(&edges[b].id));
        let mut edge_rank = vec![0u32; edges.len()];
        for (rank, &e) in order.iter().enumerate() {
            edge_rank[e] = rank as u32;
        }
        // adjacency lists are kept in id order so every traversal is deterministic
        for &e in &order {
            out_edges[edges[e].from.0].push(EdgeIdx(e));
            in_edges[edges[e].to.0].push(EdgeIdx(e));
        }
        let max_speed = edges.iter().map(|e| e.speed_limit_mps).fold(0.0, f64::max);
        let mean_lat =
            if nodes.is_empty() { 0.0 } else { nodes.iter().map(|n| n.lat).sum::<f64>() / nodes.len() as f64 };
        let lon_scale = mean_lat.to_radians().cos();
        Network { nodes, edges, out_edges, in_edges, node_index, edge_index, edge_rank, max_speed, lon_scale }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, n: NodeIdx) -> &Node {
        &self.nodes[n.0]
    }

    pub fn edge(&self, e: EdgeIdx) -> &Edge {
        &self.edges[e.0]
    }

    /// Outgoing edges of `n`, sorted by edge id.
    pub fn out_edges(&self, n: NodeIdx) -> &[EdgeIdx] {
        &self.out_edges[n.0]
    }

    pub fn in_edges(&self, n: NodeIdx) -> &[EdgeIdx] {
        &self.in_edges[n.0]
    }

    pub fn node_idx(&self, id: &str) -> Result<NodeIdx, NetworkError> {
        self.node_index.get(id).copied().ok_or_else(|| NetworkError::UnknownNode(id.to_string()))
    }

    pub fn edge_idx(&self, id: &str) -> Result<EdgeIdx, NetworkError> {
        self.edge_index.get(id).copied().ok_or_else(|| NetworkError::UnknownEdge(id.to_string()))
    }

    pub fn edge_rank(&self, e: EdgeIdx) -> u32 {
        self.edge_rank[e.0]
    }

    /// Maximum speed limit over all edges, in m/s.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Straight-line distance in meters under an equirectangular projection
    /// centred on the network's mean latitude.
    pub fn euclidean_m(&self, a: NodeIdx, b: NodeIdx) -> f64 {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        let x = (nb.lon - na.lon).to_radians() * self.lon_scale;
        let y = (nb.lat - na.lat).to_radians();
        EARTH_RADIUS_M * (x * x + y * y).sqrt()
    }

    /// Same nodes, every edge flipped; ids and attributes are kept.
    pub fn reverse(&self) -> Network {
        let edges = self.edges.iter().map(|e| Edge { from: e.to, to: e.from, ..e.clone() }).collect();
        Self::assemble(self.nodes.clone(), edges, self.node_index.clone(), self.edge_index.clone())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Network, NetworkError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| NetworkError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Network, NetworkError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Nodes,
            Edges,
        }
        let mut section = Section::None;
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                match header.trim() {
                    "nodes" => section = Section::Nodes,
                    "edges" => section = Section::Edges,
                    _ => {} // comment
                }
                continue;
            }
            let err = |msg: String| NetworkError::Parse { line: line_no, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(format!("invalid {what} `{s}`")));
            match section {
                Section::None => return Err(err("data before `#nodes`/`#edges` header".into())),
                Section::Nodes => {
                    if fields.len() != 3 {
                        return Err(err(format!("expected 3 node fields, found {}", fields.len())));
                    }
                    nodes.push(Node {
                        id: fields[0].to_string(),
                        lat: num(fields[1], "latitude")?,
                        lon: num(fields[2], "longitude")?,
                    });
                }
                Section::Edges => {
                    if fields.len() != 5 {
                        return Err(err(format!("expected 5 edge fields, found {}", fields.len())));
                    }
                    edges.push(EdgeSpec {
                        id: fields[0].to_string(),
                        from: fields[1].to_string(),
                        to: fields[2].to_string(),
                        length_m: num(fields[3], "length")?,
                        speed_limit_mps: num(fields[4], "speed limit")?,
                    });
                }
            }
        }
        Network::new(nodes, edges)
    }

    /// Serializes to the CSV format accepted by [`Network::parse`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("#nodes\n");
        for n in &self.nodes {
            out.push_str(&format!("{},{},{}\n", n.id, n.lat, n.lon));
        }
        out.push_str("#edges\n");
        for e in &self.edges {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.id, self.nodes[e.from.0].id, self.nodes[e.to.0].id, e.length_m, e.speed_limit_mps
            ));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<(), NetworkError> {
        std::fs::write(path.as_ref(), self.to_csv())
            .map_err(|e| NetworkError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    /// Fallback travel time from length and speed limit, snapped to the grid.
    pub fn free_flow_time(&self, e: EdgeIdx, resolution: Time) -> Time {
        let edge = &self.edges[e.0];
        crate::dist::snap_to_grid(edge.length_m / edge.speed_limit_mps, resolution)
    }

    pub fn path_display(&self, edges: &[EdgeIdx]) -> String {
        let ids: Vec<&str> = edges.iter().map(|e| self.edges[e.0].id.as_str()).collect();
        format!("⟨{}⟩", ids.join(","))
    }
}

/// A nonempty sequence of adjacent, pairwise distinct edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    edges: Vec<EdgeIdx>,
}

impl Path {
    pub fn new(net: &Network, edges: Vec<EdgeIdx>) -> Result<Path, NetworkError> {
        if edges.is_empty() {
            return Err(NetworkError::EmptyPath);
        }
        for w in edges.windows(2) {
            if net.edge(w[0]).to != net.edge(w[1]).from {
                return Err(NetworkError::NotAdjacent(net.edge(w[0]).id.clone(), net.edge(w[1]).id.clone()));
            }
        }
        let mut seen = edges.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(NetworkError::RepeatedEdge(net.edge(w[0]).id.clone()));
        }
        Ok(Path { edges })
    }

    pub fn from_ids(net: &Network, ids: &[&str]) -> Result<Path, NetworkError> {
        let edges = ids.iter().map(|id| net.edge_idx(id)).collect::<Result<Vec<_>, _>>()?;
        Path::new(net, edges)
    }

    pub fn edges(&self) -> &[EdgeIdx] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_node(&self, net: &Network) -> NodeIdx {
        net.edge(self.edges[0]).from
    }

    pub fn last_node(&self, net: &Network) -> NodeIdx {
        net.edge(*self.edges.last().unwrap()).to
    }

    /// Visited nodes in travel order, including both endpoints.
    pub fn nodes(&self, net: &Network) -> Vec<NodeIdx> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        out.push(self.first_node(net));
        out.extend(self.edges.iter().map(|&e| net.edge(e).to));
        out
    }

    pub fn is_node_simple(&self, net: &Network) -> bool {
        let mut nodes = self.nodes(net);
        nodes.sort_unstable();
        nodes.windows(2).all(|w| w[0] != w[1])
    }

    pub fn ids<'a>(&self, net: &'a Network) -> Vec<&'a str> {
        self.edges.iter().map(|&e| net.edge(e).id.as_str()).collect()
    }

    pub fn display(&self, net: &Network) -> String {
        net.path_display(&self.edges)
    }

    pub fn into_edges(self) -> Vec<EdgeIdx> {
        self.edges
    }
}

/// True iff `sub`'s edges appear contiguously, in order, inside `whole`.
pub fn is_subpath(sub: &Path, whole: &Path) -> bool {
    is_contiguous(sub.edges(), whole.edges())
}

pub(crate) fn is_contiguous(sub: &[EdgeIdx], whole: &[EdgeIdx]) -> bool {
    !sub.is_empty() && sub.len() <= whole.len() && whole.windows(sub.len()).any(|w| w == sub)
}

/// A routing request: reach `destination` from `source` within `budget`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub source: NodeIdx,
    pub destination: NodeIdx,
    pub budget: Time,
}

impl Query {
    pub fn new(source: NodeIdx, destination: NodeIdx, budget: Time) -> Result<Query, NetworkError> {
        if budget == 0 {
            return Err(NetworkError::ZeroBudget);
        }
        if source == destination {
            return Err(NetworkError::SameEndpoints);
        }
        Ok(Query { source, destination, budget })
    }

    pub fn by_ids(net: &Network, from: &str, to: &str, budget: Time) -> Result<Query, NetworkError> {
        Query::new(net.node_idx(from)?, net.node_idx(to)?, budget)
    }
}

impl fmt::Display for NodeIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}
