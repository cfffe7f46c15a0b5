//! Builds a [`Grid`] and [`CitySet`] from rasters, a cities table and a
//! run configuration.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::speed_from_elevation;
use crate::grid::{CitySet, Grid};
use crate::io::config::RunConfig;
use crate::io::raster::AsciiGrid;
use crate::io::tables::read_cities;

#[derive(Debug, Clone)]
pub struct RasterInputs {
    /// Persons per unit area; NODATA defines the inactive cells.
    pub population: AsciiGrid,
    pub elevation: AsciiGrid,
    /// Nonzero values mark rivers and lakes.
    pub water: Option<AsciiGrid>,
    /// Farm output per person; uniform 1 when absent.
    pub yield_: Option<AsciiGrid>,
}

impl RasterInputs {
    pub fn read(cfg: &RunConfig) -> Result<Self> {
        let population = AsciiGrid::read(&RunConfig::require(&cfg.paths.population, "population")?)?;
        let elevation = AsciiGrid::read(&RunConfig::require(&cfg.paths.elevation, "elevation")?)?;
        let water = cfg.paths.water.as_deref().map(AsciiGrid::read).transpose()?;
        let yield_ = cfg.paths.yield_.as_deref().map(AsciiGrid::read).transpose()?;
        Ok(RasterInputs { population, elevation, water, yield_ })
    }
}

fn shape_error(name: &str, g: &AsciiGrid, base: &AsciiGrid) -> Error {
    Error::InvalidGrid(format!(
        "{name} raster is {}x{} with cell size {}, population raster is {}x{} with cell size {}",
        g.n_rows, g.n_cols, g.cell_size, base.n_rows, base.n_cols, base.cell_size
    ))
}

/// Rural population is the raster value times `ag_labor_share`; active
/// cells with zero population count as `pop_floor` persons first.
pub fn build_grid(inputs: &RasterInputs, cfg: &RunConfig) -> Result<Grid> {
    cfg.validate()?;
    let pop = &inputs.population;
    let layout = pop.layout();
    for (name, g) in [("elevation", Some(&inputs.elevation)), ("water", inputs.water.as_ref()), ("yield", inputs.yield_.as_ref())] {
        if let Some(g) = g {
            if !g.same_shape(pop) {
                return Err(shape_error(name, g, pop));
            }
        }
    }
    let active = &layout.active;
    if let Some(x) = (0..layout.len()).find(|&x| active[x] && inputs.elevation.values[x].is_none()) {
        let (r, c) = layout.row_col(x);
        return Err(Error::InvalidGrid(format!("elevation is NODATA at active cell (row {r}, col {c})")));
    }
    let rural_pop: Vec<f64> = pop
        .values
        .iter()
        .map(|v| match v {
            Some(p) if *p == 0.0 => cfg.pop_floor * cfg.ag_labor_share,
            Some(p) => p * cfg.ag_labor_share,
            None => 0.0,
        })
        .collect();
    let rural_output = match &inputs.yield_ {
        Some(y) => y.filled(1.0),
        None => vec![1.0; layout.len()],
    };
    let water: Vec<bool> = match &inputs.water {
        Some(w) => w.values.iter().map(|v| v.is_some_and(|x| x != 0.0)).collect(),
        None => vec![false; layout.len()],
    };
    let speed = speed_from_elevation(&inputs.elevation.filled(0.0), &water, active, cfg.v_max, cfg.elevation_ref)?;
    Grid::new(layout, rural_pop, rural_output, speed)
}

pub fn ingest(inputs: &RasterInputs, cities_csv: &Path, cfg: &RunConfig) -> Result<(Grid, CitySet)> {
    let grid = build_grid(inputs, cfg)?;
    let cities = read_cities(cities_csv, &grid.layout)?;
    Ok((grid, cities))
}

/// Reads every input named in the config.
pub fn ingest_files(cfg: &RunConfig) -> Result<(Grid, CitySet)> {
    let inputs = RasterInputs::read(cfg)?;
    ingest(&inputs, &RunConfig::require(&cfg.paths.cities, "cities")?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Layout;

    fn inputs(n: usize) -> RasterInputs {
        let layout = Layout::full(n, n, 1.0);
        let mut pop = vec![10.0; n * n];
        pop[7] = 0.0;
        RasterInputs {
            population: AsciiGrid::from_values(&layout, &pop),
            elevation: AsciiGrid::from_values(&layout, &vec![500.0; n * n]),
            water: None,
            yield_: None,
        }
    }

    #[test]
    fn shape_and_floor() {
        let cfg = RunConfig::default();
        let g = build_grid(&inputs(5), &cfg).unwrap();
        assert_eq!(g.layout.n_active(), 25);
        assert!((g.rural_pop[7] - 0.03).abs() < 1e-15);
        assert!((g.rural_pop[0] - 0.3).abs() < 1e-15);
        assert!(g.speed.iter().all(|s| *s == 1.0));
    }

    #[test]
    fn mismatched_rasters() {
        let mut inp = inputs(5);
        inp.elevation = AsciiGrid::from_values(&Layout::full(4, 5, 1.0), &[1.0; 20]);
        assert!(matches!(build_grid(&inp, &RunConfig::default()), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn water_runs_at_top_speed() {
        let mut inp = inputs(3);
        let layout = Layout::full(3, 3, 1.0);
        let mut elev = vec![100.0; 9];
        elev[4] = 400.0;
        elev[8] = 400.0;
        inp.elevation = AsciiGrid::from_values(&layout, &elev);
        let mut w = vec![0.0; 9];
        w[8] = 1.0;
        inp.water = Some(AsciiGrid::from_values(&layout, &w));
        let g = build_grid(&inp, &RunConfig::default()).unwrap();
        assert_eq!(g.speed[4], 0.25);
        assert_eq!(g.speed[8], 1.0);
    }
}
