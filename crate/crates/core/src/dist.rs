//! Discrete travel-time distributions on an integer time grid.
//!
//! A [`Histogram`] is the distribution of a single travel time (an edge or the
//! total of a path). A [`JointDist`] is the joint distribution of the travel
//! times of an ordered edge sequence, stored as explicit rows.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::network::EdgeIdx;

/// Travel time in grid units. All times are multiples of the resolution δ.
pub type Time = u32;

/// Absolute tolerance on total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Slack used when comparing CDF values for dominance, so that rounding noise
/// does not turn equal distributions into strictly ordered ones.
pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("resolution must be positive")]
    ZeroResolution,
    #[error("mismatched resolutions {0} and {1}")]
    MismatchedResolution(Time, Time),
    #[error("distribution has no mass")]
    Empty,
    #[error("total probability {0} is not 1")]
    NotNormalized(f64),
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("time {time} is not a positive multiple of resolution {resolution}")]
    OffGrid { time: Time, resolution: Time },
    #[error("row has {found} times, expected {expected}")]
    RowLength { expected: usize, found: usize },
    #[error("edge {0:?} occurs more than once")]
    RepeatedEdge(EdgeIdx),
    #[error("joint operands share edge {0:?}")]
    OverlappingEdges(EdgeIdx),
    #[error("requested edges are not a contiguous sub-path of the joint")]
    NotSubpath,
    #[error("malformed histogram line {0:?}")]
    Parse(String),
}

/// Rounds a real-valued time to the nearest grid point (ties upwards), never
/// below one grid step.
pub fn snap_to_grid(t: f64, resolution: Time) -> Time {
    let ticks = (t / resolution as f64 + 0.5).floor().max(1.0);
    (ticks as Time).saturating_mul(resolution)
}

fn check_prob(p: f64) -> Result<(), DistError> {
    if p.is_finite() && p >= 0.0 {
        Ok(())
    } else {
        Err(DistError::InvalidProbability(p))
    }
}

fn check_time(t: Time, resolution: Time) -> Result<(), DistError> {
    if t >= resolution && t.is_multiple_of(resolution) {
        Ok(())
    } else {
        Err(DistError::OffGrid { time: t, resolution })
    }
}

fn check_mass(total: f64) -> Result<(), DistError> {
    if total <= 0.0 {
        Err(DistError::Empty)
    } else if (total - 1.0).abs() > MASS_TOLERANCE {
        Err(DistError::NotNormalized(total))
    } else {
        Ok(())
    }
}

/// Distribution of a single travel time.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    resolution: Time,
    entries: BTreeMap<Time, f64>,
}

impl Histogram {
    /// Validated constructor; duplicate times are merged and zero-mass
    /// entries dropped.
    pub fn new(resolution: Time, pairs: impl IntoIterator<Item = (Time, f64)>) -> Result<Histogram, DistError> {
        if resolution == 0 {
            return Err(DistError::ZeroResolution);
        }
        let mut entries = BTreeMap::new();
        for (t, p) in pairs {
            check_prob(p)?;
            if p == 0.0 {
                continue;
            }
            check_time(t, resolution)?;
            *entries.entry(t).or_insert(0.0) += p;
        }
        check_mass(entries.values().sum())?;
        Ok(Histogram { resolution, entries })
    }

    /// Frequency distribution of observed counts.
    pub fn from_counts(resolution: Time, counts: &BTreeMap<Time, u64>) -> Result<Histogram, DistError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(DistError::Empty);
        }
        Histogram::new(resolution, counts.iter().map(|(&t, &c)| (t, c as f64 / total as f64)))
    }

    pub fn point_mass(time: Time, resolution: Time) -> Result<Histogram, DistError> {
        Histogram::new(resolution, [(time, 1.0)])
    }

    /// Point mass at zero: the neutral element of [`Histogram::convolve`].
    /// This is the only histogram allowed to hold a time below the resolution.
    pub fn identity(resolution: Time) -> Histogram {
        Histogram { resolution, entries: BTreeMap::from([(0, 1.0)]) }
    }

    /// Builds from already-merged positive entries, renormalizing rounding drift.
    pub(crate) fn from_raw(resolution: Time, mut entries: BTreeMap<Time, f64>) -> Histogram {
        entries.retain(|_, p| *p > 0.0);
        let total: f64 = entries.values().sum();
        if total > 0.0 {
            entries.values_mut().for_each(|p| *p /= total);
        }
        Histogram { resolution, entries }
    }

    pub fn resolution(&self) -> Time {
        self.resolution
    }

    pub fn entries(&self) -> impl Iterator<Item = (Time, f64)> + '_ {
        self.entries.iter().map(|(&t, &p)| (t, p))
    }

    pub fn prob(&self, t: Time) -> f64 {
        self.entries.get(&t).copied().unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Smallest time carrying positive mass.
    pub fn min_cost(&self) -> Time {
        *self.entries.keys().next().expect("histogram is never empty")
    }

    pub fn max_time(&self) -> Time {
        *self.entries.keys().next_back().expect("histogram is never empty")
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|(&t, &p)| t as f64 * p).sum()
    }

    /// P(X <= t).
    pub fn cdf(&self, t: Time) -> f64 {
        self.entries.range(..=t).map(|(_, &p)| p).sum::<f64>().min(1.0)
    }

    /// Distribution of the sum of two independent times.
    pub fn convolve(&self, other: &Histogram) -> Result<Histogram, DistError> {
        if self.resolution != other.resolution {
            return Err(DistError::MismatchedResolution(self.resolution, other.resolution));
        }
        let mut out = BTreeMap::new();
        for (&a, &pa) in &self.entries {
            for (&b, &pb) in &other.entries {
                *out.entry(a + b).or_insert(0.0) += pa * pb;
            }
        }
        Ok(Histogram::from_raw(self.resolution, out))
    }

    /// The same distribution shifted by a constant delay.
    pub fn shift(&self, delay: Time) -> Histogram {
        Histogram { resolution: self.resolution, entries: self.entries.iter().map(|(&t, &p)| (t + delay, p)).collect() }
    }

    /// First-order stochastic dominance: CDF of `self` is everywhere at least
    /// that of `other`, and strictly larger somewhere.
    pub fn dominates(&self, other: &Histogram) -> Result<bool, DistError> {
        Ok(self.cdf_order(other)? == Some(true))
    }

    /// CDF of `self` is everywhere at least that of `other` (equality allowed).
    pub fn weakly_dominates(&self, other: &Histogram) -> Result<bool, DistError> {
        Ok(self.cdf_order(other)?.is_some())
    }

    /// `None` if some CDF value of `self` is below `other`'s, otherwise
    /// `Some(strict)`.
    fn cdf_order(&self, other: &Histogram) -> Result<Option<bool>, DistError> {
        if self.resolution != other.resolution {
            return Err(DistError::MismatchedResolution(self.resolution, other.resolution));
        }
        let mut grid: Vec<Time> = self.entries.keys().chain(other.entries.keys()).copied().collect();
        grid.sort_unstable();
        grid.dedup();
        let (mut ca, mut cb) = (0.0, 0.0);
        let mut strict = false;
        for t in grid {
            ca += self.prob(t);
            cb += other.prob(t);
            if ca < cb - DOMINANCE_TOLERANCE {
                return Ok(None);
            }
            if ca > cb + DOMINANCE_TOLERANCE {
                strict = true;
            }
        }
        Ok(Some(strict))
    }

    /// Sorted `time:prob` pairs, one per line.
    pub fn to_debug_string(&self) -> String {
        let mut s = String::new();
        for (t, p) in self.entries() {
            let _ = writeln!(s, "{t}:{p}");
        }
        s
    }

    pub fn parse_debug(resolution: Time, text: &str) -> Result<Histogram, DistError> {
        let mut pairs = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let bad = || DistError::Parse(line.to_string());
            let (t, p) = line.split_once(':').ok_or_else(bad)?;
            let t: Time = t.trim().parse().map_err(|_| bad())?;
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            pairs.push((t, p));
        }
        Histogram::new(resolution, pairs)
    }

    /// Sum of |p_a(t) - p_b(t)| over the merged support.
    pub fn l1_distance(&self, other: &Histogram) -> f64 {
        let mut keys: Vec<Time> = self.entries.keys().chain(other.entries.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys.iter().map(|&t| (self.prob(t) - other.prob(t)).abs()).sum()
    }

    /// Entry-wise equality within `tol`.
    pub fn approx_eq(&self, other: &Histogram, tol: f64) -> bool {
        self.resolution == other.resolution
            && self.entries.keys().chain(other.entries.keys()).all(|&t| (self.prob(t) - other.prob(t)).abs() <= tol)
    }
}

/// `{t:p, ...}` with probabilities rounded to nine decimals.
impl fmt::Display for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (t, p)) in self.entries().enumerate() {
            let sep = if k == 0 { "" } else { ", " };
            write!(f, "{sep}{t}:{}", (p * 1e9).round() / 1e9)?;
        }
        f.write_str("}")
    }
}

/// Joint distribution of the travel times of an ordered edge sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    resolution: Time,
    edges: Vec<EdgeIdx>,
    rows: BTreeMap<Vec<Time>, f64>,
}

impl JointDist {
    pub fn new(
        resolution: Time,
        edges: Vec<EdgeIdx>,
        rows: impl IntoIterator<Item = (Vec<Time>, f64)>,
    ) -> Result<JointDist, DistError> {
        if resolution == 0 {
            return Err(DistError::ZeroResolution);
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(DistError::RepeatedEdge(w[0]));
        }
        let mut merged = BTreeMap::new();
        for (row, p) in rows {
            check_prob(p)?;
            if row.len() != edges.len() {
                return Err(DistError::RowLength { expected: edges.len(), found: row.len() });
            }
            if p == 0.0 {
                continue;
            }
            for &t in &row {
                check_time(t, resolution)?;
            }
            *merged.entry(row).or_insert(0.0) += p;
        }
        check_mass(merged.values().sum())?;
        Ok(JointDist { resolution, edges, rows: merged })
    }

    pub(crate) fn from_raw(
        resolution: Time,
        edges: Vec<EdgeIdx>,
        mut rows: BTreeMap<Vec<Time>, f64>,
    ) -> Result<JointDist, DistError> {
        rows.retain(|_, p| *p > 0.0);
        let total: f64 = rows.values().sum();
        if total <= 0.0 {
            return Err(DistError::Empty);
        }
        rows.values_mut().for_each(|p| *p /= total);
        Ok(JointDist { resolution, edges, rows })
    }

    /// Single-edge joint with the rows of `h`.
    pub fn from_histogram(edge: EdgeIdx, h: &Histogram) -> JointDist {
        JointDist {
            resolution: h.resolution,
            edges: vec![edge],
            rows: h.entries().map(|(t, p)| (vec![t], p)).collect(),
        }
    }

    pub fn resolution(&self) -> Time {
        self.resolution
    }

    pub fn edges(&self) -> &[EdgeIdx] {
        &self.edges
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[Time], f64)> + '_ {
        self.rows.iter().map(|(r, &p)| (r.as_slice(), p))
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn prob(&self, row: &[Time]) -> f64 {
        self.rows.get(row).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.rows.values().sum()
    }

    /// Independent product; `other`'s edges are appended after `self`'s.
    pub fn joint_product(&self, other: &JointDist) -> Result<JointDist, DistError> {
        if self.resolution != other.resolution {
            return Err(DistError::MismatchedResolution(self.resolution, other.resolution));
        }
        if let Some(&e) = other.edges.iter().find(|e| self.edges.contains(e)) {
            return Err(DistError::OverlappingEdges(e));
        }
        let mut rows = BTreeMap::new();
        for (ra, &pa) in &self.rows {
            for (rb, &pb) in &other.rows {
                let mut row = Vec::with_capacity(ra.len() + rb.len());
                row.extend_from_slice(ra);
                row.extend_from_slice(rb);
                rows.insert(row, pa * pb);
            }
        }
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        JointDist::from_raw(self.resolution, edges, rows)
    }

    /// Position of `sub` inside the edge order, if it is a contiguous run.
    pub fn find_subpath(&self, sub: &[EdgeIdx]) -> Option<usize> {
        if sub.is_empty() || sub.len() > self.edges.len() {
            return None;
        }
        self.edges.windows(sub.len()).position(|w| w == sub)
    }

    /// Joint distribution of the contiguous sub-path `sub`.
    pub fn marginal(&self, sub: &[EdgeIdx]) -> Result<JointDist, DistError> {
        let start = self.find_subpath(sub).ok_or(DistError::NotSubpath)?;
        let end = start + sub.len();
        let mut rows = BTreeMap::new();
        for (row, &p) in &self.rows {
            *rows.entry(row[start..end].to_vec()).or_insert(0.0) += p;
        }
        Ok(JointDist { resolution: self.resolution, edges: sub.to_vec(), rows })
    }

    /// Marginal of a single position as a histogram.
    pub fn edge_marginal(&self, pos: usize) -> Histogram {
        let mut out = BTreeMap::new();
        for (row, &p) in &self.rows {
            *out.entry(row[pos]).or_insert(0.0) += p;
        }
        Histogram::from_raw(self.resolution, out)
    }

    /// Distribution of the total travel time.
    pub fn to_cost(&self) -> Histogram {
        let mut out = BTreeMap::new();
        for (row, &p) in &self.rows {
            *out.entry(row.iter().sum::<Time>()).or_insert(0.0) += p;
        }
        Histogram::from_raw(self.resolution, out)
    }

    pub fn approx_eq(&self, other: &JointDist, tol: f64) -> bool {
        self.edges == other.edges
            && self.rows.keys().chain(other.rows.keys()).all(|r| (self.prob(r) - other.prob(r)).abs() <= tol)
    }
}
