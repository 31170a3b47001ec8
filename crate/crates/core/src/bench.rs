//! Query generation and method comparison at desk scale.
//!
//! A run draws source/destination pairs per (budget, distance bucket) cell,
//! solves each with every configured method, and records probability, wall
//! time and search-space size. [`city_grid`] synthesizes a road grid with
//! correlated trajectories to run on when no real data is at hand.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::Time;
use crate::heuristic::HeuristicKind;
use crate::network::{EdgeSpec, Network, Node, NodeIdx, Query};
use crate::oracle::{synth_trajectories, Instance};
use crate::solver::{solve_with, SolveOptions};
use crate::weights::{CostModel, ModelMode, WeightStore};

/// Budgets used when a config omits them.
pub const DEFAULT_BUDGETS: [Time; 4] = [300, 500, 700, 1000];
/// The alternative budget series selected by `alt_budgets`.
pub const ALT_BUDGETS: [Time; 4] = [400, 600, 800, 1000];

/// Draws per query before a bucket is declared unsatisfiable.
const MAX_DRAWS: usize = 20_000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("missing config key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("no pair at {lo}-{hi} km found after {MAX_DRAWS} draws")]
    Unsatisfiable { lo: f64, hi: f64 },
    #[error("no rows to emit")]
    NoRows,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A heuristic and a cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Method {
    pub heuristic: HeuristicKind,
    pub mode: ModelMode,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method { heuristic: HeuristicKind::Sp, mode: ModelMode::Pace },
        Method { heuristic: HeuristicKind::Sp, mode: ModelMode::Edge },
        Method { heuristic: HeuristicKind::Ba, mode: ModelMode::Pace },
        Method { heuristic: HeuristicKind::Ba, mode: ModelMode::Edge },
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.heuristic, self.mode)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, m) = s.trim().split_once('+').ok_or_else(|| format!("method `{s}` is not HEURISTIC+MODEL"))?;
        Ok(Method { heuristic: h.parse()?, mode: m.parse()? })
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Half-open straight-line distance range in kilometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
}

impl Bucket {
    pub fn contains(&self, km: f64) -> bool {
        self.lo <= km && km < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub budgets: Vec<Time>,
    /// Sorted and non-overlapping.
    pub distance_buckets: Vec<Bucket>,
    /// At least 1.
    pub queries_per_cell: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Per-solve label cap; rows that hit it are marked incomplete.
    pub max_labels: Option<usize>,
}

impl BenchConfig {
    pub fn new(
        budgets: Vec<Time>,
        distance_buckets: Vec<Bucket>,
        queries_per_cell: usize,
        methods: Vec<Method>,
        seed: u64,
    ) -> Result<Self, BenchError> {
        let bad = |key: &str, reason: &str| BenchError::BadValue { key: key.into(), reason: reason.into() };
        if queries_per_cell == 0 {
            return Err(bad("queries_per_cell", "must be at least 1"));
        }
        if budgets.is_empty() || budgets.contains(&0) {
            return Err(bad("budgets", "need one or more positive budgets"));
        }
        if distance_buckets.is_empty() {
            return Err(bad("distance_buckets", "need one or more buckets"));
        }
        if distance_buckets.iter().any(|b| !(b.lo >= 0.0 && b.lo < b.hi)) {
            return Err(bad("distance_buckets", "each bucket needs 0 <= lo < hi"));
        }
        if distance_buckets.windows(2).any(|w| w[1].lo < w[0].hi) {
            return Err(bad("distance_buckets", "buckets must be sorted and non-overlapping"));
        }
        if methods.is_empty() {
            return Err(bad("methods", "need one or more methods"));
        }
        Ok(BenchConfig { budgets, distance_buckets, queries_per_cell, methods, seed, max_labels: None })
    }

    /// Parses the flat `key = value` format. Required keys: `seed`,
    /// `queries_per_cell`, `distance_buckets`, `methods`. Optional:
    /// `budgets`, `alt_budgets = true` to use [`ALT_BUDGETS`] when
    /// `budgets` is absent, and `max_labels`. `#` starts a comment.
    ///
    /// ```text
    /// seed = 7
    /// budgets = 300, 500, 700, 1000
    /// distance_buckets = 0-1, 1-2, 2-3, 3-4
    /// queries_per_cell = 20
    /// methods = SP+PACE, SP+EDGE, BA+PACE, BA+EDGE
    /// ```
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(BenchError::Syntax { line: i + 1 })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        if let Some(k) = kv.keys().find(|k| {
            !["seed", "queries_per_cell", "distance_buckets", "methods", "budgets", "alt_budgets", "max_labels"]
                .contains(&k.as_str())
        }) {
            return Err(BenchError::UnknownKey(k.clone()));
        }
        let get = |key: &'static str| kv.get(key).ok_or(BenchError::MissingKey(key));
        let bad = |key: &str, reason: String| BenchError::BadValue { key: key.into(), reason };
        let seed = get("seed")?.parse::<u64>().map_err(|e| bad("seed", e.to_string()))?;
        let queries_per_cell =
            get("queries_per_cell")?.parse::<usize>().map_err(|e| bad("queries_per_cell", e.to_string()))?;
        let distance_buckets = list(get("distance_buckets")?)
            .map(|item| {
                let (lo, hi) =
                    item.split_once('-').ok_or_else(|| bad("distance_buckets", format!("`{item}` is not LO-HI")))?;
                let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad("distance_buckets", e.to_string()));
                Ok(Bucket { lo: num(lo)?, hi: num(hi)? })
            })
            .collect::<Result<Vec<_>, BenchError>>()?;
        let methods = list(get("methods")?)
            .map(|m| m.parse::<Method>().map_err(|e| bad("methods", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let alt = match kv.get("alt_budgets").map(String::as_str) {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(bad("alt_budgets", format!("`{other}` is not true or false"))),
        };
        let budgets = match kv.get("budgets") {
            Some(v) => list(v)
                .map(|b| b.parse::<Time>().map_err(|e| bad("budgets", e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
            None if alt => ALT_BUDGETS.to_vec(),
            None => DEFAULT_BUDGETS.to_vec(),
        };
        let max_labels = match kv.get("max_labels") {
            Some(v) => Some(v.parse::<usize>().map_err(|e| bad("max_labels", e.to_string()))?),
            None => None,
        };
        Ok(BenchConfig { max_labels, ..BenchConfig::new(budgets, distance_buckets, queries_per_cell, methods, seed)? })
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, BenchError> {
        BenchConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn query_count(&self) -> usize {
        self.budgets.len() * self.distance_buckets.len() * self.queries_per_cell
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// A generated query and the cell it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchQuery {
    pub id: usize,
    pub bucket: Bucket,
    pub query: Query,
}

/// `queries_per_cell` pairs per (budget, bucket) cell whose straight-line
/// distance lies in the bucket, in cell order.
pub fn gen_queries(net: &Network, cfg: &BenchConfig) -> Result<Vec<BenchQuery>, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = net.node_count();
    let mut out = Vec::with_capacity(cfg.query_count());
    for &budget in &cfg.budgets {
        for &bucket in &cfg.distance_buckets {
            for _ in 0..cfg.queries_per_cell {
                let pair = (0..MAX_DRAWS).find_map(|_| {
                    let s = NodeIdx(rng.gen_range(0..n));
                    let d = NodeIdx(rng.gen_range(0..n));
                    (s != d && bucket.contains(net.euclidean_m(s, d) / 1000.0)).then_some((s, d))
                });
                let (s, d) = pair.ok_or(BenchError::Unsatisfiable { lo: bucket.lo, hi: bucket.hi })?;
                let query = Query::new(s, d, budget).expect("distinct endpoints, positive budget");
                out.push(BenchQuery { id: out.len(), bucket, query });
            }
        }
    }
    Ok(out)
}

/// One solve of one query by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub budget: Time,
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    pub query_id: usize,
    pub probability: f64,
    pub wall_time_s: f64,
    pub explored_edges: usize,
    pub expanded_labels: usize,
    pub path_edges: usize,
    /// False if the label cap stopped the search; `probability` is then a
    /// lower bound.
    pub complete: bool,
}

/// Solves every query with every method in parallel; rows come back sorted
/// by query id, then method.
pub fn run_queries(
    net: &Network,
    store: &WeightStore,
    queries: &[BenchQuery],
    methods: &[Method],
    max_labels: Option<usize>,
) -> Vec<BenchRow> {
    let opts = SolveOptions { trace: false, max_labels };
    let jobs: Vec<(&BenchQuery, Method)> = queries.iter().flat_map(|q| methods.iter().map(move |&m| (q, m))).collect();
    let mut rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|&(bq, method)| {
            let model = CostModel::new(net, store, method.mode);
            let res = solve_with(&model, method.heuristic, bq.query, opts);
            if !res.complete {
                log::warn!("query {} with {method} stopped at the label cap", bq.id);
            }
            log::info!(
                "query {} {method}: p={:.4} in {:.3}s, {} labels",
                bq.id,
                res.probability,
                res.wall_time_s,
                res.expanded_labels
            );
            BenchRow {
                method,
                budget: bq.query.budget,
                bucket_lo: bq.bucket.lo,
                bucket_hi: bq.bucket.hi,
                query_id: bq.id,
                probability: res.probability,
                wall_time_s: res.wall_time_s,
                explored_edges: res.explored_edges,
                expanded_labels: res.expanded_labels,
                path_edges: res.best_path.map_or(0, |p| p.len()),
                complete: res.complete,
            }
        })
        .collect();
    rows.sort_by_key(|a| (a.query_id, a.method));
    rows
}

pub fn run_bench(net: &Network, store: &WeightStore, cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    let queries = gen_queries(net, cfg)?;
    Ok(run_queries(net, store, &queries, &cfg.methods, cfg.max_labels))
}

/// Per (method, budget, bucket) means and standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub method: Method,
    pub budget: Time,
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    pub queries: usize,
    /// Rows stopped by the label cap.
    pub incomplete: usize,
    pub mean_probability: f64,
    pub mean_wall_time_s: f64,
    pub std_wall_time_s: f64,
    pub mean_explored_edges: f64,
    pub std_explored_edges: f64,
    pub mean_expanded_labels: f64,
}

/// Population statistics per cell, ordered by method, budget, bucket.
pub fn aggregate(rows: &[BenchRow]) -> Vec<CellStats> {
    let mut cells: BTreeMap<(Method, Time, u64, u64), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.method, r.budget, r.bucket_lo.to_bits(), r.bucket_hi.to_bits())).or_default().push(r);
    }
    cells
        .into_values()
        .map(|rs| {
            let mean = |f: &dyn Fn(&BenchRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
            let std = |f: &dyn Fn(&BenchRow) -> f64| {
                let m = mean(f);
                (rs.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / rs.len() as f64).sqrt()
            };
            let first = rs[0];
            CellStats {
                method: first.method,
                budget: first.budget,
                bucket_lo: first.bucket_lo,
                bucket_hi: first.bucket_hi,
                queries: rs.len(),
                incomplete: rs.iter().filter(|r| !r.complete).count(),
                mean_probability: mean(&|r| r.probability),
                mean_wall_time_s: mean(&|r| r.wall_time_s),
                std_wall_time_s: std(&|r| r.wall_time_s),
                mean_explored_edges: mean(&|r| r.explored_edges as f64),
                std_explored_edges: std(&|r| r.explored_edges as f64),
                mean_expanded_labels: mean(&|r| r.expanded_labels as f64),
            }
        })
        .collect()
}

pub fn rows_to_csv(rows: &[BenchRow]) -> Result<String, BenchError> {
    to_csv(rows)
}

pub fn rows_from_csv(text: &str) -> Result<Vec<BenchRow>, BenchError> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

pub fn stats_to_csv(stats: &[CellStats]) -> Result<String, BenchError> {
    to_csv(stats)
}

fn to_csv<T: Serialize>(items: &[T]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for item in items {
        w.serialize(item)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Sibling path for the aggregate file: `runs.csv` becomes `runs.agg.csv`.
pub fn aggregate_path(out: &FsPath) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.agg.csv"))
}

/// Writes the rows to `out` and their aggregate next to it; returns the
/// aggregate path.
pub fn emit_csv(rows: &[BenchRow], out: &FsPath) -> Result<PathBuf, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::NoRows);
    }
    std::fs::write(out, rows_to_csv(rows)?)?;
    let agg = aggregate_path(out);
    std::fs::write(&agg, stats_to_csv(&aggregate(rows))?)?;
    Ok(agg)
}

/// Synthetic `side` x `side` city grid around 57.0 N, 9.9 E with two-way
/// streets `spacing_m` apart, per-edge base times in seconds and correlated
/// trajectories on a `joint_fraction` of 2-3 edge sub-paths.
pub fn city_grid(seed: u64, side: usize, spacing_m: f64, joint_fraction: f64) -> Instance {
    assert!(side >= 2, "grid needs at least 2x2 nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat_m = 111_195.0;
    let lon_m = lat_m * 57f64.to_radians().cos();
    let id = |r: usize, c: usize| format!("g{r}_{c}");
    let mut nodes = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let jy = rng.gen_range(-0.1..0.1) * spacing_m;
            let jx = rng.gen_range(-0.1..0.1) * spacing_m;
            nodes.push(Node {
                id: id(r, c),
                lat: 57.0 + (r as f64 * spacing_m + jy) / lat_m,
                lon: 9.9 + (c as f64 * spacing_m + jx) / lon_m,
            });
        }
    }
    let mut pairs = Vec::new();
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                pairs.push(((r, c), (r, c + 1)));
                pairs.push(((r, c + 1), (r, c)));
            }
            if r + 1 < side {
                pairs.push(((r, c), (r + 1, c)));
                pairs.push(((r + 1, c), (r, c)));
            }
        }
    }
    let mut specs = Vec::with_capacity(pairs.len());
    let mut base = Vec::with_capacity(pairs.len());
    for (i, &((r1, c1), (r2, c2))) in pairs.iter().enumerate() {
        let length = spacing_m * rng.gen_range(1.0..1.15);
        // Arterials every fourth row and column are faster.
        let arterial = (r1 == r2 && r1 % 4 == 0) || (c1 == c2 && c1 % 4 == 0);
        let speed = if arterial { rng.gen_range(6.0..9.0) } else { rng.gen_range(3.0..5.5) };
        let t = ((length / speed).round() as Time).max(1);
        specs.push(EdgeSpec::new(&format!("a{i}"), &id(r1, c1), &id(r2, c2), length, length / t as f64));
        base.push(t);
    }
    let net = Network::new(nodes, specs).expect("grid network is valid");
    let trajectories = synth_trajectories(&net, &base, &mut rng, 0.9, joint_fraction);
    Instance { net, trajectories }
}
