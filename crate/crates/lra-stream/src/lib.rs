//! Streaming low-rank subspace maintenance with bounded recourse.
//!
//! The crate tracks a rank-k output subspace over a stream of row arrivals
//! and accounts for how far the subspace moves between consecutive steps.
//! Module map:
//!
//! - [`subspace`]: factor bases, spectra, costs, and the recourse metric.
//! - [`svd_update`]: incremental thin SVD of the growing row matrix.
//! - [`ledger`]: append-only per-step recourse log.
//! - [`oracle`]: exact per-prefix optimum for offline comparison.
//! - [`fd`]: frequent-directions sketch, the high-recourse baseline.
//! - [`sketch`]: online ridge leverage-score row sampling.
//! - [`algorithms`]: the streaming subspace trackers themselves.
//! - [`streams`]: stream generators, CSV ingestion, and stream metadata.
//! - [`experiment`]: end-to-end runs, per-step reports, and summaries.

pub mod algorithms;
pub mod error;
pub mod experiment;
pub mod fd;
pub mod ledger;
pub mod oracle;
pub mod sketch;
pub mod streams;
pub mod subspace;
pub mod svd_update;

pub use error::{Error, Result};
