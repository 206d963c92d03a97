use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Integer microseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimePoint(i64);

/// Signed span between two [`TimePoint`]s, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeDelta(i64);

impl TimePoint {
    pub const fn from_micros(micros: i64) -> Self {
        TimePoint(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs_f64(secs: f64) -> Self {
        TimePoint((secs * 1e6).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-6
    }
}

impl TimeDelta {
    pub const ZERO: TimeDelta = TimeDelta(0);

    pub const fn from_micros(micros: i64) -> Self {
        TimeDelta(micros)
    }

    pub const fn from_millis(millis: i64) -> Self {
        TimeDelta(millis * 1_000)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        TimeDelta((secs * 1e6).round() as i64)
    }

    /// Period of a rate given in Hz, rounded to whole microseconds.
    pub fn from_hz(hz: f64) -> Self {
        TimeDelta((1e6 / hz).round() as i64)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-6
    }

    pub fn abs(self) -> Self {
        TimeDelta(self.0.abs())
    }
}

impl Sub for TimePoint {
    type Output = TimeDelta;
    fn sub(self, rhs: TimePoint) -> TimeDelta {
        TimeDelta(self.0 - rhs.0)
    }
}

impl Add<TimeDelta> for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: TimeDelta) -> TimePoint {
        TimePoint(self.0 + rhs.0)
    }
}

impl Sub<TimeDelta> for TimePoint {
    type Output = TimePoint;
    fn sub(self, rhs: TimeDelta) -> TimePoint {
        TimePoint(self.0 - rhs.0)
    }
}

impl Add for TimeDelta {
    type Output = TimeDelta;
    fn add(self, rhs: TimeDelta) -> TimeDelta {
        TimeDelta(self.0 + rhs.0)
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

impl fmt::Display for TimeDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_are_exact() {
        let a = TimePoint::from_micros(1_700_000_000_000_123);
        let b = TimePoint::from_micros(1_700_000_000_000_000);
        assert_eq!((a - b).micros(), 123);
        assert_eq!(b + (a - b), a);
    }

    #[test]
    fn rate_periods() {
        assert_eq!(TimeDelta::from_hz(2.0).micros(), 500_000);
        assert_eq!(TimeDelta::from_hz(12.0).micros(), 83_333);
        assert_eq!(TimeDelta::from_secs_f64(0.5), TimeDelta::from_micros(500_000));
    }
}
