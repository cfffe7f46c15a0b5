//! Market areas as additively weighted Voronoi tessellations whose weights
//! come from equilibrium prices.
//!
//! A [`Grid`] with a [`CitySet`] and per-city [`DistanceFieldSet`] define an
//! [`Instance`]; [`solve`] finds the normalized equilibrium prices by gradient
//! ascent on the potential, and [`Tessellation`] holds the resulting market
//! areas. [`metrics`] compares partitions, [`compstat`] differentiates the
//! equilibrium, and [`io`] reads and writes the on-disk formats.

pub mod ces;
pub mod compstat;
pub mod economy;
pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod solver;
pub mod subcell;
pub mod tessellation;

pub use ces::{DemandBundle, EconomyParams, PriceState};
pub use economy::{Evaluation, ExcessDemand, Instance, Quadrature};
pub use error::{Error, Result};
pub use fields::{eikonal_fields, euclidean_fields, speed_from_elevation, DistanceFieldSet, Provenance};
pub use grid::{City, CitySet, Grid, Layout};
pub use io::{AsciiGrid, DistanceMode, RunConfig};
pub use metrics::{area_distance, hausdorff, hausdorff_symmetric, MetricValues};
pub use solver::{
    solve, verify_equilibrium, InitialGuess, SolveResult, SolverConfig, StepMode, Tolerance, Trajectory,
    VerificationReport,
};
pub use tessellation::{assign, region_supply, weights_from_prices, Tessellation, WeightVector};
