//! On-disk formats and input assembly: ESRI ASCII rasters, CSV tables, the
//! flat run configuration, raster ingestion and the synthetic generator.

pub mod config;
pub mod ingest;
pub mod raster;
pub mod synth;
pub mod tables;

pub use config::{DistanceMode, Paths, RunConfig, SynthSettings};
pub use ingest::{build_grid, ingest, ingest_files, RasterInputs};
pub use raster::{assignment_grid, read_assignment, write_assignment, AsciiGrid, NODATA};
pub use synth::{generate, SyntheticWorld};
