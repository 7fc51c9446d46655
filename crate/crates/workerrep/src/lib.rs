//! File formats and the command line for `workerrep-core`: ledger snapshots
//! with a JSON index, run reports as JSON and CSV, content-store dumps, and
//! atomic output.

pub mod cli;
pub mod export;
pub mod files;
pub mod snapshot;

pub use snapshot::{Snapshot, SnapshotError};
