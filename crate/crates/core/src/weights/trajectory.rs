use std::path::Path as FsPath;

use crate::dist::{snap_to_grid, Time};
use crate::network::{EdgeIdx, Network, Path};

use super::WeightsError;

/// `count` identical map-matched traversals of `path` with the given per-edge
/// travel times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    path: Path,
    times: Vec<Time>,
    count: u64,
}

impl TrajectoryRecord {
    pub fn new(path: Path, times: Vec<Time>, count: u64, resolution: Time) -> Result<Self, WeightsError> {
        if count == 0 {
            return Err(WeightsError::ZeroCount);
        }
        if times.len() != path.len() {
            return Err(WeightsError::TimesLength { edges: path.len(), times: times.len() });
        }
        if let Some(&t) = times.iter().find(|&&t| t < resolution || t % resolution != 0) {
            return Err(WeightsError::OffGridTime(t));
        }
        Ok(TrajectoryRecord { path, times, count })
    }

    /// Convenience constructor from edge ids.
    pub fn from_ids(net: &Network, ids: &[&str], times: &[Time], count: u64) -> Result<Self, WeightsError> {
        let path = Path::from_ids(net, ids)?;
        TrajectoryRecord::new(path, times.to_vec(), count, 1)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn edges(&self) -> &[EdgeIdx] {
        self.path.edges()
    }

    pub fn times(&self) -> &[Time] {
        &self.times
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn total_time(&self) -> Time {
        self.times.iter().sum()
    }
}

/// Parses `count,edge_id:time;edge_id:time;...` lines. Blank lines and lines
/// starting with `#` are skipped; times are snapped to the grid.
pub fn parse_trajectories(net: &Network, text: &str, resolution: Time) -> Result<Vec<TrajectoryRecord>, WeightsError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |source: WeightsError| WeightsError::AtLine { line: i + 1, source: Box::new(source) };
        let bad = |msg: String| at(WeightsError::Parse(msg));
        let (count, body) = line.split_once(',').ok_or_else(|| bad("missing `,` after count".into()))?;
        let count: u64 = count.trim().parse().map_err(|_| bad(format!("invalid count `{}`", count.trim())))?;
        let mut edges = Vec::new();
        let mut times = Vec::new();
        for item in body.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (id, t) = item.split_once(':').ok_or_else(|| bad(format!("expected `edge:time`, found `{item}`")))?;
            edges.push(net.edge_idx(id.trim()).map_err(|e| at(e.into()))?);
            let t: f64 = t.trim().parse().map_err(|_| bad(format!("invalid time `{}`", t.trim())))?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(bad(format!("invalid time `{t}`")));
            }
            times.push(snap_to_grid(t, resolution));
        }
        let path = Path::new(net, edges).map_err(|e| at(e.into()))?;
        out.push(TrajectoryRecord::new(path, times, count, resolution).map_err(at)?);
    }
    Ok(out)
}

pub fn load_trajectories(
    net: &Network,
    path: impl AsRef<FsPath>,
    resolution: Time,
) -> Result<Vec<TrajectoryRecord>, WeightsError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| WeightsError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_trajectories(net, &text, resolution)
}

pub fn trajectories_to_csv(net: &Network, records: &[TrajectoryRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let items: Vec<String> =
            r.edges().iter().zip(&r.times).map(|(&e, t)| format!("{}:{t}", net.edge(e).id)).collect();
        out.push_str(&format!("{},{}\n", r.count, items.join(";")));
    }
    out
}
