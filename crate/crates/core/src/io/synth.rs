//! Seeded synthetic geographies: an irregular country outline, hilly
//! terrain, a meandering river, clustered rural population and lognormal
//! city sizes.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::grid::{City, CitySet, Layout};
use crate::io::config::SynthSettings;
use crate::io::raster::AsciiGrid;

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub population: AsciiGrid,
    pub elevation: AsciiGrid,
    pub water: AsciiGrid,
    pub cities: CitySet,
}

/// Keeps the 4-connected component containing `seed`.
fn keep_component(n_rows: usize, n_cols: usize, active: &mut [bool], seed: usize) {
    let layout = Layout::with_mask(n_rows, n_cols, 1.0, active.to_vec());
    let mut seen = vec![false; active.len()];
    let mut queue = VecDeque::from([seed]);
    seen[seed] = true;
    while let Some(x) = queue.pop_front() {
        for y in layout.active_neighbors4(x) {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    active.copy_from_slice(&seen);
}

pub fn generate(s: &SynthSettings) -> Result<SyntheticWorld> {
    let (nr, nc) = (s.rows, s.cols);
    if nr < 4 || nc < 4 {
        return Err(Error::param("rows/cols", format!("synthetic grids need at least 4x4 cells, got {nr}x{nc}")));
    }
    if s.n_cities == 0 {
        return Err(Error::param("n_cities", "must be positive"));
    }
    if !(s.cell_size > 0.0) {
        return Err(Error::param("cell_size", format!("must be positive, got {}", s.cell_size)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let n = nr * nc;
    let (cr, cc) = ((nr as f64 - 1.0) / 2.0, (nc as f64 - 1.0) / 2.0);

    // outline: a wobbly ellipse
    let phases: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let mut active: Vec<bool> = (0..n)
        .map(|x| {
            let (r, c) = ((x / nc) as f64, (x % nc) as f64);
            let (dy, dx) = ((r - cr) / (nr as f64 / 2.0), (c - cc) / (nc as f64 / 2.0));
            let theta = dy.atan2(dx);
            let wobble = 0.88
                + 0.05 * (2.0 * theta + phases[0]).sin()
                + 0.04 * (3.0 * theta + phases[1]).sin()
                + 0.03 * (5.0 * theta + phases[2]).sin();
            dx.hypot(dy) <= wobble
        })
        .collect();
    let center = (nr / 2) * nc + nc / 2;
    active[center] = true;
    keep_component(nr, nc, &mut active, center);
    let layout = Layout::with_mask(nr, nc, s.cell_size, active.clone());

    // terrain: lowland base plus a few Gaussian massifs
    let bumps: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.0..nr as f64),
                rng.random_range(0.0..nc as f64),
                rng.random_range(0.06..0.18) * nr.min(nc) as f64,
                rng.random_range(150.0..900.0),
            )
        })
        .collect();
    let noise = Normal::new(0.0, 15.0).expect("valid normal");
    let elevation: Vec<f64> = (0..n)
        .map(|x| {
            let (r, c) = ((x / nc) as f64, (x % nc) as f64);
            let hills: f64 = bumps
                .iter()
                .map(|(br, bc, w, a)| a * (-((r - br).powi(2) + (c - bc).powi(2)) / (2.0 * w * w)).exp())
                .sum();
            (350.0 + hills + noise.sample(&mut rng)).max(200.0)
        })
        .collect();

    // river: a sine meander running north to south
    let amp = rng.random_range(0.05..0.15) * nc as f64;
    let period = rng.random_range(0.6..1.4) * nr as f64;
    let offset = rng.random_range(0.3..0.7) * nc as f64;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let water: Vec<bool> = (0..n)
        .map(|x| {
            let (r, c) = ((x / nc) as f64, (x % nc) as f64);
            let line = offset + amp * (std::f64::consts::TAU * r / period + phase).sin();
            active[x] && (c - line).abs() <= 0.5
        })
        .collect();

    // cities on dry land, kept apart
    let land: Vec<usize> = (0..n).filter(|&x| active[x] && !water[x]).collect();
    if land.len() < s.n_cities {
        return Err(Error::param("n_cities", format!("only {} dry active cells available", land.len())));
    }
    let mut spacing = (layout.n_active() as f64 / s.n_cities as f64).sqrt() * 0.6;
    let mut cells: Vec<usize> = Vec::new();
    let mut attempts = 0;
    while cells.len() < s.n_cities {
        let x = land[rng.random_range(0..land.len())];
        let far = cells.iter().all(|&y| {
            let (a, b) = (layout.row_col(x), layout.row_col(y));
            ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2)).sqrt() >= spacing
        });
        if far && !cells.contains(&x) {
            cells.push(x);
        }
        attempts += 1;
        if attempts % 500 == 0 {
            spacing *= 0.8;
        }
    }
    let sizes = LogNormal::new(0.0, 0.8).expect("valid lognormal");
    let city_sizes: Vec<f64> = cells.iter().map(|_| sizes.sample(&mut rng)).collect();

    // rural density: lognormal noise, denser near cities and valleys, empty on water
    let density = LogNormal::new(0.0, 0.6).expect("valid lognormal");
    let radius = (layout.n_active() as f64 / s.n_cities as f64).sqrt() * 0.5;
    let population: Vec<f64> = (0..n)
        .map(|x| {
            let noise = density.sample(&mut rng);
            if !active[x] || water[x] {
                return 0.0;
            }
            let (r, c) = layout.row_col(x);
            let near: f64 = cells
                .iter()
                .map(|&y| {
                    let (a, b) = layout.row_col(y);
                    let d = ((r as f64 - a as f64).powi(2) + (c as f64 - b as f64).powi(2)).sqrt();
                    (-d / radius).exp()
                })
                .sum();
            let valley = 800.0 / elevation[x];
            if rng.random_bool(0.03) {
                0.0
            } else {
                50.0 * noise * (0.3 + near) * valley
            }
        })
        .collect();

    // urban population in proportion to the farm workforce, assuming the
    // usual 3% agricultural share and most of the output lost in transit
    let farm_workers = 0.03 * population.iter().sum::<f64>();
    let mean_size = city_sizes.iter().sum::<f64>() / city_sizes.len() as f64;
    let cities: Vec<City> = cells
        .iter()
        .zip(&city_sizes)
        .enumerate()
        .map(|(i, (&x, size))| {
            let (r, c) = layout.row_col(x);
            let urban = 0.2 * farm_workers * size / (mean_size * s.n_cities as f64);
            City::new(format!("city{}", i + 1), r, c, urban, 1.0)
        })
        .collect();
    let cities = CitySet::new(cities, &layout)?;
    Ok(SyntheticWorld {
        population: AsciiGrid::from_values(&layout, &population),
        elevation: AsciiGrid::from_values(&layout, &elevation),
        water: AsciiGrid::from_values(&layout, &water.iter().map(|w| f64::from(u8::from(*w))).collect::<Vec<_>>()),
        cities,
    })
}
