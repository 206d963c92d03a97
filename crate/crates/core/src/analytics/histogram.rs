use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::kinematics::{track_kinematics, tracks_from_frames, TrackKinematics};
use super::taxonomy::{Category, TaxonomyMap};
use crate::error::{Error, IoContext, Result};
use crate::log::{open_log, LogHandle, Modality, StreamRecords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    EgoDistance,
    Speed,
    Acceleration,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::EgoDistance, Quantity::Speed, Quantity::Acceleration];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::EgoDistance => "ego_distance",
            Quantity::Speed => "speed",
            Quantity::Acceleration => "acceleration",
        }
    }
}

/// Equal-width bins over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && width.is_finite() && hi > lo && width > 0.0) {
            return Err(Error::InvalidRecord { modality: "bins".into(), reason: format!("bad bin range [{lo}, {hi}) / {width}") });
        }
        Ok(BinSpec { lo, hi, width })
    }

    pub fn count(&self) -> usize {
        ((self.hi - self.lo) / self.width).round().max(1.0) as usize
    }

    /// Bin of `v`; values outside the range land in the end bins.
    pub fn index(&self, v: f64) -> usize {
        let i = ((v - self.lo) / self.width).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.count() - 1)
        }
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        (self.lo + i as f64 * self.width, self.lo + (i + 1) as f64 * self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinsConfig {
    pub ego_distance: BinSpec,
    pub speed: BinSpec,
    pub acceleration: BinSpec,
}

impl Default for BinsConfig {
    fn default() -> Self {
        BinsConfig {
            ego_distance: BinSpec { lo: 0.0, hi: 200.0, width: 4.0 },
            speed: BinSpec { lo: 0.0, hi: 40.0, width: 0.5 },
            acceleration: BinSpec { lo: -10.0, hi: 10.0, width: 0.25 },
        }
    }
}

impl BinsConfig {
    pub fn spec(&self, q: Quantity) -> BinSpec {
        match q {
            Quantity::EgoDistance => self.ego_distance,
            Quantity::Speed => self.speed,
            Quantity::Acceleration => self.acceleration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub spec: BinSpec,
    pub counts: Vec<u64>,
    /// NaN inputs, kept out of the bins but still accounted for.
    pub nan: u64,
}

impl Histogram {
    pub fn new(spec: BinSpec) -> Self {
        Histogram { spec, counts: vec![0; spec.count()], nan: 0 }
    }

    pub fn add(&mut self, v: f64) {
        if v.is_nan() {
            self.nan += 1;
        } else {
            self.counts[self.spec.index(v)] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.nan
    }

    /// Counts scaled so the fullest bin is 1.
    pub fn frequencies(&self) -> Vec<f64> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().map(|&c| if max == 0 { 0.0 } else { c as f64 / max as f64 }).collect()
    }

    /// Fraction of binned samples in bins lying entirely beyond `|v| > threshold`.
    pub fn tail_mass(&self, threshold: f64) -> f64 {
        let binned: u64 = self.counts.iter().sum();
        if binned == 0 {
            return 0.0;
        }
        let tail: u64 = (0..self.counts.len())
            .filter(|&i| {
                let (lo, hi) = self.spec.edges(i);
                lo >= threshold || hi <= -threshold
            })
            .map(|i| self.counts[i])
            .sum();
        tail as f64 / binned as f64
    }

    /// Approximate quantile by linear interpolation inside the bin holding it.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let binned: u64 = self.counts.iter().sum();
        if binned == 0 {
            return None;
        }
        let target = q.clamp(0.0, 1.0) * binned as f64;
        let mut seen = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > 0 && seen + c as f64 >= target {
                let (lo, hi) = self.spec.edges(i);
                return Some(lo + (hi - lo) * ((target - seen) / c as f64));
            }
            seen += c as f64;
        }
        Some(self.spec.hi)
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.nan += other.nan;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct HistogramKey {
    pub dataset: String,
    pub category: Category,
    pub quantity: Quantity,
}

/// Histograms per dataset, category and quantity, plus track counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    pub bins: BinsConfig,
    pub histograms: BTreeMap<HistogramKey, Histogram>,
    pub tracks: BTreeMap<(String, Category), u64>,
}

impl HistogramSet {
    pub fn new(bins: BinsConfig) -> Self {
        HistogramSet { bins, histograms: BTreeMap::new(), tracks: BTreeMap::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.histograms.is_empty()
    }

    pub fn get(&self, dataset: &str, category: Category, quantity: Quantity) -> Option<&Histogram> {
        self.histograms.get(&HistogramKey { dataset: dataset.to_string(), category, quantity })
    }

    pub fn add_track(&mut self, dataset: &str, category: Category, track: &TrackKinematics) {
        *self.tracks.entry((dataset.to_string(), category)).or_default() += 1;
        for s in &track.samples {
            for (q, v) in [(Quantity::EgoDistance, s.ego_distance), (Quantity::Speed, s.speed), (Quantity::Acceleration, s.acceleration)] {
                if let Some(v) = v {
                    let key = HistogramKey { dataset: dataset.to_string(), category, quantity: q };
                    self.histograms.entry(key).or_insert_with(|| Histogram::new(self.bins.spec(q))).add(v);
                }
            }
        }
    }

    /// Adds `other` into `self`. Order of merging does not change the result.
    pub fn merge(&mut self, other: HistogramSet) {
        for (k, h) in other.histograms {
            match self.histograms.get_mut(&k) {
                Some(mine) => mine.merge(&h),
                None => {
                    self.histograms.insert(k, h);
                }
            }
        }
        for (k, n) in other.tracks {
            *self.tracks.entry(k).or_default() += n;
        }
    }

    /// One row per bin: dataset, category, quantity, bin edges, count, max-normalized frequency.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "dataset,category,quantity,bin_index,bin_lo,bin_hi,count,frequency")?;
        for (k, h) in &self.histograms {
            for (i, (c, f)) in h.counts.iter().zip(h.frequencies()).enumerate() {
                let (lo, hi) = h.spec.edges(i);
                writeln!(out, "{},{},{},{i},{lo},{hi},{c},{f}", csv_field(&k.dataset), k.category, k.quantity.as_str())?;
            }
        }
        Ok(())
    }

    /// Per dataset and category: track count, sample counts and 5/50/95th percentiles
    /// estimated from the bins.
    pub fn summary(&self) -> Value {
        let mut datasets = serde_json::Map::new();
        for ((dataset, category), n) in &self.tracks {
            let mut quantities = serde_json::Map::new();
            for q in Quantity::ALL {
                if let Some(h) = self.get(dataset, *category, q) {
                    quantities.insert(
                        q.as_str().into(),
                        json!({"samples": h.total(), "p05": h.quantile(0.05), "p50": h.quantile(0.5), "p95": h.quantile(0.95)}),
                    );
                }
            }
            let entry = datasets.entry(dataset.clone()).or_insert_with(|| json!({}));
            entry[category.as_str()] = json!({"tracks": n, "quantities": quantities});
        }
        json!({"bins": self.bins, "datasets": datasets})
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Histograms of the box tracks of one open log.
pub fn log_histograms(log: &LogHandle, taxonomy: &TaxonomyMap, bins: &BinsConfig) -> Result<HistogramSet> {
    let mut set = HistogramSet::new(*bins);
    if !log.has(&Modality::Boxes) {
        return Ok(set);
    }
    let md = log.metadata();
    let StreamRecords::Boxes(frames) = log.stream(&Modality::Boxes)?.read_all()?.records else {
        unreachable!("box stream yields box frames")
    };
    let ego = match log.has(&Modality::EgoState) {
        true => match log.stream(&Modality::EgoState)?.read_all()?.records {
            StreamRecords::EgoState(v) => v,
            _ => unreachable!("ego stream yields ego records"),
        },
        false => Vec::new(),
    };
    for track in tracks_from_frames(&frames).values() {
        let k = track_kinematics(track, &ego, &md.vehicle)?;
        let category = taxonomy.map_label(&k.raw_label)?;
        set.add_track(&md.dataset, category, &k);
    }
    Ok(set)
}

/// Histograms over many logs, aggregated in parallel per log.
pub fn build_histograms(log_dirs: &[PathBuf], taxonomy: &TaxonomyMap, bins: &BinsConfig) -> Result<HistogramSet> {
    log_dirs
        .par_iter()
        .map(|d| log_histograms(&open_log(d)?, taxonomy, bins))
        .try_reduce(|| HistogramSet::new(*bins), |mut a, b| {
            a.merge(b);
            Ok(a)
        })
}

pub fn export_csv(set: &HistogramSet, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).at(path)?);
    set.write_csv(&mut out).at(path)?;
    out.flush().at(path)
}

pub fn export_summary_json(set: &HistogramSet, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&set.summary())? + "\n").at(path)
}
