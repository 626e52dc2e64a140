//! Geosocial hotspot partitioning.
//!
//! Geotagged posts are binned onto a lat/lon lattice ([`grid`]), optionally
//! labeled by a text classifier ([`classify`]), and grouped into contiguous
//! regions of similar prevalence by a spatially constrained self-organizing map
//! ([`partition`]). Partitions can be scored for robustness ([`evaluate`]),
//! used to compare individual exposure across region schemes ([`exposure`]),
//! and written out as tables or GeoJSON ([`export`]).

pub mod classify;
pub mod error;
pub mod evaluate;
pub mod export;
pub mod exposure;
pub mod grid;
pub mod ingest;
pub mod partition;

pub use error::{Error, Result};
pub use grid::{bin_posts, cell_key, CellCounts, CellKey, GridField, Precision};
pub use ingest::{GeoPost, Label};
pub use partition::{run_ssom, ClusterId, Partition, PartitionMethod, SsomParams};
