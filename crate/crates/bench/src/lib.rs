//! Shared instance builders for the benchmarks.

use marketareas_core::{CitySet, City, EconomyParams, Grid, Instance, Quadrature, Result};
use marketareas_core::{eikonal_fields, euclidean_fields};

/// A square unit-area instance with `n` cities spread on a diagonal lattice
/// and a smooth speed field.
pub fn lattice_instance(side: usize, n: usize, eikonal: bool, quadrature: Quadrature) -> Result<Instance> {
    let mut grid = Grid::uniform(side, side, 1.0 / side as f64);
    for r in 0..side {
        for c in 0..side {
            let x = r as f64 / side as f64;
            let y = c as f64 / side as f64;
            grid.speed[r * side + c] = 0.4 + 0.6 * (1.0 + (6.0 * x).sin() * (4.0 * y).cos()) / 2.0;
        }
    }
    let cities = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            let row = ((t * side as f64) as usize).min(side - 1);
            let col = (((0.3 + 0.6 * (i % 2) as f64 * t) * side as f64) as usize).min(side - 1);
            City::new(format!("c{i}"), row, col, 0.2 + 0.1 * i as f64, 1.0)
        })
        .collect();
    let cities = CitySet::new(cities, &grid.layout)?;
    let fields = if eikonal { eikonal_fields(&grid, &cities)? } else { euclidean_fields(&grid, &cities)? };
    Instance::new(grid, cities, fields, EconomyParams::new(-1.0, 2.0)?, quadrature)
}
