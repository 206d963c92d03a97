use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use arrow_array::builder::UInt32Builder;
use arrow_array::cast::AsArray;
use arrow_array::types::{Int64Type, UInt32Type};
use arrow_array::{Array, ArrayRef, Int64Array, RecordBatch};
use arrow_schema::{DataType, Field, Schema};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::{match_timestamp, resample_grid, MatchCriteria, MatchMode};
use crate::error::{Error, Result};
use crate::geom::{TimeDelta, TimePoint};
use crate::log::{
    row_groups, write_ipc_file, IpcFile, LogHandle, Modality, ReadStats, FORMAT_VERSION, META_FORMAT_VERSION,
    META_SYNC_CONFIG, SYNC_PREFIX, SYNC_SUFFIX,
};

const FRAME_COLUMN: &str = "frame_timestamp";

/// Where the frame timeline of a sync table comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyncReference {
    /// The reference modality's own event times.
    SourceKeyframes { modality: Modality },
    /// A fixed-period grid anchored at the reference modality's first event.
    Resample { period: TimeDelta, modality: Modality },
}

impl SyncReference {
    pub fn modality(&self) -> &Modality {
        match self {
            SyncReference::SourceKeyframes { modality } | SyncReference::Resample { modality, .. } => modality,
        }
    }
}

/// Tolerance applied to modalities without explicit criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultTolerance {
    /// One period when resampling, unlimited for source keyframes.
    #[default]
    Policy,
    Unlimited,
    Fixed(TimeDelta),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncConfig {
    pub reference: SyncReference,
    #[serde(default)]
    pub criteria: BTreeMap<Modality, MatchCriteria>,
    pub default_mode: MatchMode,
    #[serde(default)]
    pub default_tolerance: DefaultTolerance,
}

impl SyncConfig {
    pub fn keyframes(modality: Modality) -> Self {
        SyncConfig {
            reference: SyncReference::SourceKeyframes { modality },
            criteria: BTreeMap::new(),
            default_mode: MatchMode::Nearest,
            default_tolerance: DefaultTolerance::Policy,
        }
    }

    pub fn resample(period: TimeDelta, modality: Modality) -> Self {
        SyncConfig { reference: SyncReference::Resample { period, modality }, ..Self::keyframes(Modality::EgoState) }
    }

    pub fn with_criteria(mut self, modality: Modality, criteria: MatchCriteria) -> Self {
        self.criteria.insert(modality, criteria);
        self
    }

    pub fn with_default_tolerance(mut self, tolerance: DefaultTolerance) -> Self {
        self.default_tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let SyncReference::Resample { period, .. } = &self.reference {
            if period.micros() <= 0 {
                return Err(Error::InvalidSyncConfig(format!("period must be positive, got {period}")));
            }
        }
        if let DefaultTolerance::Fixed(t) = self.default_tolerance {
            MatchCriteria::new(self.default_mode).with_tolerance(t).validate()?;
        }
        self.criteria.values().try_for_each(MatchCriteria::validate)
    }

    /// Criteria used to fill the column of `modality`.
    pub fn criteria_for(&self, modality: &Modality) -> MatchCriteria {
        if let Some(c) = self.criteria.get(modality) {
            return *c;
        }
        let tolerance = match (self.default_tolerance, &self.reference) {
            (DefaultTolerance::Fixed(t), _) => Some(t),
            (DefaultTolerance::Unlimited, _) => None,
            (DefaultTolerance::Policy, SyncReference::Resample { period, .. }) => Some(*period),
            (DefaultTolerance::Policy, SyncReference::SourceKeyframes { .. }) => None,
        };
        MatchCriteria { mode: self.default_mode, tolerance }
    }

    /// File-name stem: `keyframes_<modality>` or `resample_<period>us_<modality>`.
    pub fn name(&self) -> String {
        match &self.reference {
            SyncReference::SourceKeyframes { modality } => format!("keyframes_{modality}"),
            SyncReference::Resample { period, modality } => format!("resample_{}us_{modality}", period.micros()),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{SYNC_PREFIX}{}{SYNC_SUFFIX}", self.name())
    }
}

/// Per-frame row indices into every stream of a log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncTable {
    frame_timestamps: Vec<TimePoint>,
    columns: BTreeMap<Modality, Vec<Option<u32>>>,
    config: SyncConfig,
}

fn to_row(i: usize) -> u32 {
    u32::try_from(i).expect("stream rows fit in u32")
}

impl SyncTable {
    /// Builds a table from the timestamp columns of each stream.
    pub fn build(streams: &BTreeMap<Modality, &[TimePoint]>, config: &SyncConfig) -> Result<Self> {
        config.validate()?;
        let reference = config.reference.modality();
        let ref_ts = streams.get(reference).ok_or_else(|| Error::MissingModality(reference.to_string()))?;
        if let Some(m) = config.criteria.keys().find(|m| !streams.contains_key(*m)) {
            return Err(Error::MissingModality(m.to_string()));
        }
        let (Some(&first), Some(&last)) = (ref_ts.first(), ref_ts.last()) else {
            return Err(Error::EmptyReferenceStream(reference.to_string()));
        };
        let frames = match &config.reference {
            SyncReference::SourceKeyframes { .. } => ref_ts.to_vec(),
            SyncReference::Resample { period, .. } => resample_grid(first, last, *period),
        };
        let columns = streams
            .par_iter()
            .map(|(m, ts)| {
                let c = config.criteria_for(m);
                let col = frames.iter().map(|&f| match_timestamp(ts, f, &c).map(to_row)).collect();
                (m.clone(), col)
            })
            .collect();
        Ok(SyncTable { frame_timestamps: frames, columns, config: config.clone() })
    }

    pub fn len(&self) -> usize {
        self.frame_timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_timestamps.is_empty()
    }

    pub fn frame_timestamps(&self) -> &[TimePoint] {
        &self.frame_timestamps
    }

    pub fn config(&self) -> &SyncConfig {
        &self.config
    }

    pub fn modalities(&self) -> impl Iterator<Item = &Modality> {
        self.columns.keys()
    }

    pub fn column(&self, modality: &Modality) -> Option<&[Option<u32>]> {
        self.columns.get(modality).map(Vec::as_slice)
    }

    /// Row of `modality` aligned with `frame`; `None` when the cell is empty or the
    /// modality is not part of the table.
    pub fn row(&self, frame: usize, modality: &Modality) -> Option<usize> {
        self.columns.get(modality)?.get(frame).copied().flatten().map(|r| r as usize)
    }

    fn schema(&self) -> Arc<Schema> {
        let mut fields = vec![Field::new(FRAME_COLUMN, DataType::Int64, false)];
        fields.extend(self.columns.keys().map(|m| Field::new(m.to_string(), DataType::UInt32, true)));
        let meta = HashMap::from([
            (META_SYNC_CONFIG.to_string(), serde_json::to_string(&self.config).expect("config serializes")),
            (META_FORMAT_VERSION.to_string(), FORMAT_VERSION.to_string()),
        ]);
        Arc::new(Schema::new_with_metadata(fields, meta))
    }

    /// Persists the table as `sync_<name>.arrow` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.config.file_name());
        let schema = self.schema();
        let batches = row_groups(self.len())
            .map(|r| {
                let mut cols: Vec<ArrayRef> = vec![Arc::new(Int64Array::from_iter_values(
                    self.frame_timestamps[r.clone()].iter().map(|t| t.micros()),
                ))];
                for col in self.columns.values() {
                    let mut b = UInt32Builder::with_capacity(r.len());
                    b.extend(col[r.clone()].iter().copied());
                    cols.push(Arc::new(b.finish()));
                }
                Ok(RecordBatch::try_new(schema.clone(), cols)?)
            })
            .collect::<Result<Vec<_>>>()?;
        write_ipc_file(&path, &schema, &batches)?;
        Ok(path)
    }

    /// Loads a persisted table; its batches count as index reads.
    pub fn load(path: &Path, stats: Arc<ReadStats>) -> Result<Self> {
        let file = IpcFile::open(path, stats)?;
        let config_json = file
            .metadata()
            .get(META_SYNC_CONFIG)
            .ok_or_else(|| Error::corrupt(path, "missing sync configuration"))?;
        let config: SyncConfig =
            serde_json::from_str(config_json).map_err(|e| Error::corrupt(path, format!("sync configuration: {e}")))?;
        let mut modalities = Vec::new();
        for (i, f) in file.schema().fields().iter().enumerate() {
            let expected = if i == 0 { DataType::Int64 } else { DataType::UInt32 };
            if f.data_type() != &expected || (i == 0 && f.name() != FRAME_COLUMN) {
                return Err(Error::corrupt(path, format!("unexpected column `{}`", f.name())));
            }
            if i > 0 {
                modalities.push(Modality::from_str(f.name()).map_err(|e| Error::corrupt(path, e))?);
            }
        }
        let mut frames = Vec::with_capacity(file.num_rows());
        let mut columns: Vec<Vec<Option<u32>>> = vec![Vec::with_capacity(file.num_rows()); modalities.len()];
        for batch in file.read_all_index()? {
            let t = batch.column(0).as_primitive::<Int64Type>();
            if t.null_count() > 0 {
                return Err(Error::corrupt(path, "null frame timestamp"));
            }
            frames.extend(t.values().iter().map(|&v| TimePoint::from_micros(v)));
            for (k, col) in columns.iter_mut().enumerate() {
                col.extend(batch.column(k + 1).as_primitive::<UInt32Type>().iter());
            }
        }
        if frames.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::corrupt(path, "frame timestamps not strictly increasing"));
        }
        Ok(SyncTable { frame_timestamps: frames, columns: modalities.into_iter().zip(columns).collect(), config })
    }
}

/// Builds a sync table over every stream of `log`.
pub fn build_sync_table(log: &LogHandle, config: &SyncConfig) -> Result<SyncTable> {
    let ts = log
        .streams()
        .map(|s| Ok((s.modality().clone(), s.timestamps()?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let table = SyncTable::build(&ts, config)?;
    for (m, col) in &table.columns {
        let n = log.stream(m)?.len();
        debug_assert!(col.iter().flatten().all(|&r| (r as usize) < n));
    }
    Ok(table)
}

/// Loads the persisted table named `name` from `log`, if present.
pub fn load_sync_table(log: &LogHandle, name: &str) -> Result<Option<SyncTable>> {
    match log.sync_path(name) {
        None => Ok(None),
        Some(path) => {
            let table = SyncTable::load(path, log.stats().clone())?;
            for (m, col) in &table.columns {
                let n = log.stream(m).map_err(|_| Error::corrupt(path, format!("column for absent stream `{m}`")))?.len();
                if col.iter().flatten().any(|&r| r as usize >= n) {
                    return Err(Error::corrupt(path, format!("row index out of range for `{m}`")));
                }
            }
            Ok(Some(table))
        }
    }
}
