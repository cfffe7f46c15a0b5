#![allow(dead_code)]

use marketareas_core::{
    euclidean_fields, City, CitySet, EconomyParams, Grid, Instance, Layout, Quadrature, Tessellation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn instance(grid: Grid, cities: Vec<City>, alpha: f64, delta: f64, q: Quadrature) -> Instance {
    let cs = CitySet::new(cities, &grid.layout).unwrap();
    let f = euclidean_fields(&grid, &cs).unwrap();
    Instance::new(grid, cs, f, EconomyParams::new(alpha, delta).unwrap(), q).unwrap()
}

/// Grid with seeded random rural population and yield.
pub fn rough_grid(rows: usize, cols: usize, cell: f64, seed: u64) -> Grid {
    let mut g = Grid::uniform(rows, cols, cell);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in 0..g.layout.len() {
        g.rural_pop[x] = rng.random_range(0.5..1.5);
        g.rural_output[x] = rng.random_range(0.8..1.2);
    }
    g
}

/// 30x30 economy with four cities holding `shares` of total rural output.
pub fn four_cities(cell: f64, delta: f64, shares: [f64; 4], q: Quadrature) -> Instance {
    let g = rough_grid(30, 30, cell, 30);
    let total = g.total_rural_output();
    let cities = vec![
        City::new("a", 6, 7, shares[0] * total, 1.0),
        City::new("b", 8, 22, shares[1] * total, 1.1),
        City::new("c", 21, 10, shares[2] * total, 0.9),
        City::new("d", 23, 24, shares[3] * total, 1.0),
    ];
    instance(g, cities, -1.0, delta, q)
}

pub fn default_four() -> Instance {
    four_cities(1.0, 0.2, [0.06, 0.04, 0.05, 0.03], Quadrature::SubCell)
}

/// Random labelling with `n` regions over an optionally holed layout.
pub fn random_partition(rng: &mut ChaCha8Rng, layout: &Layout, n: usize) -> Tessellation {
    // grow blobs from random seeds so regions are mostly contiguous
    let seeds: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..layout.n_rows as f64), rng.random_range(0.0..layout.n_cols as f64)))
        .collect();
    let assignment = (0..layout.len())
        .map(|x| {
            if !layout.active[x] {
                return None;
            }
            let (r, c) = layout.row_col(x);
            let jitter: f64 = rng.random_range(0.0..2.0);
            (0..n).min_by(|&a, &b| {
                let da = (seeds[a].0 - r as f64).hypot(seeds[a].1 - c as f64);
                let db = (seeds[b].0 - r as f64).hypot(seeds[b].1 - c as f64) + jitter;
                da.total_cmp(&db)
            })
        })
        .collect();
    Tessellation::from_assignment(layout.clone(), n, assignment).unwrap()
}
