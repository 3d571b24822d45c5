//! Tiled Priority-Flood depression filling.
//!
//! A DEM is cut into tiles. Each tile is filled on its own while recording
//! which border watersheds meet at what elevation. A single producer joins
//! those per-tile spillover graphs, solves for the level every watershed must
//! rise to, and sends each tile back a short list of label elevations for the
//! final pass. Only tile perimeters ever travel between workers and the
//! producer.

pub mod bench;
pub mod error;
pub mod fill;
pub mod graph;
pub mod io;
pub mod merge;
pub mod message;
pub mod oracle;
pub mod orchestrator;
pub mod raster;
pub mod store;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use fill::{fill_tile, serial_priority_flood, FilledTile};
pub use oracle::fixpoint_fill_oracle;
pub use orchestrator::{run, RunOptions, RunStats, Strategy};

pub use raster::{DType, Grid, Level, TileLayout};
