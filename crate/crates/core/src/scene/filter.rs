use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::TimeDelta;
use crate::log::Modality;

/// Declarative scene selection. Durations are in microseconds and must be whole
/// multiples of the iteration period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneFilter {
    pub split_names: Vec<String>,
    pub target_iteration_period: TimeDelta,
    pub history_duration: TimeDelta,
    pub future_duration: TimeDelta,
    /// Scenes with a null sync cell for any of these at any iteration are dropped.
    pub required_modalities: BTreeSet<Modality>,
    pub shuffle: bool,
    pub seed: u64,
    /// Frames between consecutive scene starts; defaults to the scene length.
    pub stride: Option<usize>,
}

impl Default for SceneFilter {
    fn default() -> Self {
        SceneFilter {
            split_names: Vec::new(),
            target_iteration_period: TimeDelta::from_micros(500_000),
            history_duration: TimeDelta::from_micros(0),
            future_duration: TimeDelta::from_micros(0),
            required_modalities: BTreeSet::new(),
            shuffle: false,
            seed: 0,
            stride: None,
        }
    }
}

impl SceneFilter {
    /// A filter over `splits` with durations given in seconds.
    pub fn from_secs(splits: &[&str], period_s: f64, history_s: f64, future_s: f64) -> Self {
        SceneFilter {
            split_names: splits.iter().map(|s| s.to_string()).collect(),
            target_iteration_period: TimeDelta::from_secs_f64(period_s),
            history_duration: TimeDelta::from_secs_f64(history_s),
            future_duration: TimeDelta::from_secs_f64(future_s),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFilter(m));
        let period = self.target_iteration_period.micros();
        if period <= 0 {
            return bad(format!("target_iteration_period must be positive, got {period} us"));
        }
        for (name, d) in [("history_duration", self.history_duration), ("future_duration", self.future_duration)] {
            if d.micros() < 0 {
                return bad(format!("{name} must be non-negative, got {} us", d.micros()));
            }
            if d.micros() % period != 0 {
                return bad(format!("{name} of {} us is not a multiple of the {period} us period", d.micros()));
            }
        }
        if self.split_names.is_empty() {
            return bad("no split names given".into());
        }
        let unique: BTreeSet<&String> = self.split_names.iter().collect();
        if unique.len() != self.split_names.len() {
            return bad("split names repeat".into());
        }
        if self.stride == Some(0) {
            return bad("stride must be at least one frame".into());
        }
        Ok(())
    }

    pub fn history_frames(&self) -> usize {
        (self.history_duration.micros() / self.target_iteration_period.micros()) as usize
    }

    pub fn future_frames(&self) -> usize {
        (self.future_duration.micros() / self.target_iteration_period.micros()) as usize
    }

    /// Frames per scene: history, the current frame and future.
    pub fn scene_length(&self) -> usize {
        self.history_frames() + 1 + self.future_frames()
    }

    pub fn effective_stride(&self) -> usize {
        self.stride.unwrap_or_else(|| self.scene_length())
    }
}
