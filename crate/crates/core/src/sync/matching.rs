use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{TimeDelta, TimePoint};

/// How a query time is paired with an event of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Event at exactly the query time.
    Exact,
    /// Event closest to the query; ties go to the earlier event.
    Nearest,
    /// First event at or after the query.
    Forward,
    /// Last event at or before the query.
    Backward,
}

impl MatchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MatchMode::Exact => "exact",
            MatchMode::Nearest => "nearest",
            MatchMode::Forward => "forward",
            MatchMode::Backward => "backward",
        }
    }
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "nearest" => Ok(MatchMode::Nearest),
            "forward" => Ok(MatchMode::Forward),
            "backward" => Ok(MatchMode::Backward),
            other => Err(Error::InvalidSyncConfig(format!("unknown match mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCriteria {
    pub mode: MatchMode,
    /// Largest allowed |t - query|; `None` is unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<TimeDelta>,
}

impl MatchCriteria {
    pub const fn new(mode: MatchMode) -> Self {
        MatchCriteria { mode, tolerance: None }
    }

    pub const fn nearest() -> Self {
        Self::new(MatchMode::Nearest)
    }

    pub fn with_tolerance(mut self, tolerance: TimeDelta) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.tolerance {
            Some(t) if t < TimeDelta::ZERO => Err(Error::InvalidSyncConfig(format!("negative tolerance {t}"))),
            _ => Ok(()),
        }
    }
}

fn gap(a: TimePoint, b: TimePoint) -> i128 {
    (a.micros() as i128 - b.micros() as i128).abs()
}

/// Row of `stream` paired with `query`, or `None` if no event qualifies.
/// `stream` must be strictly increasing.
pub fn match_timestamp(stream: &[TimePoint], query: TimePoint, criteria: &MatchCriteria) -> Option<usize> {
    // First row with t >= query.
    let after = stream.partition_point(|&t| t < query);
    let found = match criteria.mode {
        MatchMode::Exact => (after < stream.len() && stream[after] == query).then_some(after),
        MatchMode::Forward => (after < stream.len()).then_some(after),
        MatchMode::Backward => {
            let upto = if after < stream.len() && stream[after] == query { after + 1 } else { after };
            upto.checked_sub(1)
        }
        MatchMode::Nearest => match (after.checked_sub(1), (after < stream.len()).then_some(after)) {
            (Some(b), Some(f)) => Some(if gap(stream[b], query) <= gap(stream[f], query) { b } else { f }),
            (b, f) => b.or(f),
        },
    }?;
    match criteria.tolerance {
        Some(tol) if gap(stream[found], query) > tol.micros() as i128 => None,
        _ => Some(found),
    }
}

/// Half-open row range with `t0 <= t < t1`.
pub fn window_indices(stream: &[TimePoint], t0: TimePoint, t1: TimePoint) -> Range<usize> {
    let start = stream.partition_point(|&t| t < t0);
    let end = stream.partition_point(|&t| t < t1).max(start);
    start..end
}

/// Frame times `first + k * period` for `k = 0..=floor((last - first) / period)`.
pub fn resample_grid(first: TimePoint, last: TimePoint, period: TimeDelta) -> Vec<TimePoint> {
    assert!(period.micros() > 0, "period must be positive");
    if last < first {
        return Vec::new();
    }
    let n = (last - first).micros() / period.micros();
    (0..=n).map(|k| first + TimeDelta::from_micros(k * period.micros())).collect()
}
