//! Label taxonomy mapping and box-track statistics: ego distance, speed and
//! acceleration histograms per dataset and semantic category.

mod histogram;
mod kinematics;
mod taxonomy;

pub use histogram::{
    build_histograms, export_csv, export_summary_json, log_histograms, BinSpec, BinsConfig, Histogram, HistogramKey, HistogramSet,
    Quantity,
};
pub use kinematics::{track_kinematics, tracks_from_frames, KinematicSample, TrackKinematics};
pub use taxonomy::{map_label, Category, TaxonomyMap, UnmappedPolicy};
