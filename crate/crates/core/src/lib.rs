//! Storage and access for multi-modal driving logs.
//!
//! A log is a directory with one Arrow IPC file per modality. Each file is a
//! timestamped event stream carrying the full log metadata in its schema.
//! Sync tables map a shared frame timeline onto row indices of every stream,
//! and HD maps live in a single IPC file of WKB geometries indexed by an STR tree.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod geom;
pub mod ingest;
pub mod log;
pub mod map;
pub mod scene;
pub mod sync;

pub use error::{Error, ErrorKind, Result};
