//! The discretized domain: raster layout, per-cell rural data and the city set.
//!
//! Cells are stored row-major with row 0 at the north edge, matching the ESRI
//! ASCII grid convention. A cell's centroid sits at
//! `(xll + (col + 0.5) * h, yll + (n_rows - row - 0.5) * h)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raster geometry shared by every per-cell array: shape, cell size, origin
/// and the mask of cells that belong to the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_size: f64,
    pub xll: f64,
    pub yll: f64,
    pub active: Vec<bool>,
}

impl Layout {
    /// A fully active `n_rows x n_cols` layout with the origin at zero.
    pub fn full(n_rows: usize, n_cols: usize, cell_size: f64) -> Self {
        Layout {
            n_rows,
            n_cols,
            cell_size,
            xll: 0.0,
            yll: 0.0,
            active: vec![true; n_rows * n_cols],
        }
    }

    pub fn with_mask(n_rows: usize, n_cols: usize, cell_size: f64, active: Vec<bool>) -> Self {
        Layout {
            n_rows,
            n_cols,
            cell_size,
            xll: 0.0,
            yll: 0.0,
            active,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    #[inline]
    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_cols, idx % self.n_cols)
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_area(&self) -> f64 {
        self.n_active() as f64 * self.cell_area()
    }

    /// 4-neighbors of `idx` that lie inside the raster (active or not).
    pub fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.row_col(idx);
        let up = (r > 0).then(|| idx - self.n_cols);
        let down = (r + 1 < self.n_rows).then(|| idx + self.n_cols);
        let left = (c > 0).then(|| idx - 1);
        let right = (c + 1 < self.n_cols).then(|| idx + 1);
        [up, down, left, right].into_iter().flatten()
    }

    /// Active 4-neighbors of `idx`.
    pub fn active_neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors4(idx).filter(|&j| self.active[j])
    }

    /// Euclidean distance between the centroids of two cells, in length units.
    pub fn centroid_distance(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.row_col(a);
        let (rb, cb) = self.row_col(b);
        let dr = ra.abs_diff(rb) as u64;
        let dc = ca.abs_diff(cb) as u64;
        ((dr * dr + dc * dc) as f64).sqrt() * self.cell_size
    }

    /// Same raster geometry (shape, cell size, mask); the origin is ignored.
    pub fn same_geometry(&self, other: &Layout) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.cell_size == other.cell_size
            && self.active == other.active
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::InvalidGrid("grid has no cells".into()));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.active.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "active mask",
                got: self.active.len(),
                expected: self.len(),
            });
        }
        if self.n_active() == 0 {
            return Err(Error::InvalidGrid("no active cells".into()));
        }
        Ok(())
    }

    /// Checks that the active cells form one 4-connected component.
    pub fn check_connected(&self) -> Result<()> {
        let Some(start) = self.active.iter().position(|&a| a) else {
            return Err(Error::InvalidGrid("no active cells".into()));
        };
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(idx) = queue.pop_front() {
            for j in self.active_neighbors4(idx) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(cut) = (0..self.len()).find(|&i| self.active[i] && !seen[i]) {
            let (row, col) = self.row_col(cut);
            let (from_row, from_col) = self.row_col(start);
            return Err(Error::DisconnectedMask {
                row,
                col,
                from_row,
                from_col,
            });
        }
        Ok(())
    }
}

/// The domain with its per-cell rural population density, output per capita
/// and transit speed. Values on inactive cells are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub layout: Layout,
    pub rural_pop: Vec<f64>,
    pub rural_output: Vec<f64>,
    pub speed: Vec<f64>,
}

impl Grid {
    /// Builds and validates a grid (including connectivity of the mask).
    pub fn new(
        layout: Layout,
        rural_pop: Vec<f64>,
        rural_output: Vec<f64>,
        speed: Vec<f64>,
    ) -> Result<Self> {
        let grid = Grid {
            layout,
            rural_pop,
            rural_output,
            speed,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Uniform population, output and speed on a fully active rectangle.
    pub fn uniform(n_rows: usize, n_cols: usize, cell_size: f64) -> Self {
        let n = n_rows * n_cols;
        Grid {
            layout: Layout::full(n_rows, n_cols, cell_size),
            rural_pop: vec![1.0; n],
            rural_output: vec![1.0; n],
            speed: vec![1.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let n = self.layout.len();
        for (what, v) in [
            ("rural_pop", &self.rural_pop),
            ("rural_output", &self.rural_output),
            ("speed", &self.speed),
        ] {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    what,
                    got: v.len(),
                    expected: n,
                });
            }
        }
        for idx in (0..n).filter(|&i| self.layout.active[i]) {
            let (r, c) = self.layout.row_col(idx);
            let pop = self.rural_pop[idx];
            if !(pop.is_finite() && pop >= 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "rural population at ({r}, {c}) must be finite and nonnegative, got {pop}"
                )));
            }
            let y = self.rural_output[idx];
            if !(y.is_finite() && y > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "rural output at ({r}, {c}) must be finite and positive, got {y}"
                )));
            }
            let s = self.speed[idx];
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "speed at ({r}, {c}) must be finite and positive, got {s}"
                )));
            }
        }
        self.layout.check_connected()
    }

    /// Total undiscounted rural output, `sum y * L * area` over active cells.
    pub fn total_rural_output(&self) -> f64 {
        let area = self.layout.cell_area();
        (0..self.layout.len())
            .filter(|&i| self.layout.active[i])
            .map(|i| self.rural_output[i] * self.rural_pop[i] * area)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub id: String,
    pub row: usize,
    pub col: usize,
    pub urban_pop: f64,
    pub urban_output: f64,
}

impl City {
    pub fn new(id: impl Into<String>, row: usize, col: usize, urban_pop: f64, urban_output: f64) -> Self {
        City {
            id: id.into(),
            row,
            col,
            urban_pop,
            urban_output,
        }
    }
}

/// Ordered set of cities; the order defines the city index used everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySet {
    pub cities: Vec<City>,
}

impl CitySet {
    pub fn new(cities: Vec<City>, layout: &Layout) -> Result<Self> {
        let set = CitySet { cities };
        set.validate(layout)?;
        Ok(set)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cities.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn cell(&self, i: usize, layout: &Layout) -> usize {
        let c = &self.cities[i];
        layout.index(c.row, c.col)
    }

    pub fn validate(&self, layout: &Layout) -> Result<()> {
        if self.cities.is_empty() {
            return Err(Error::InvalidCities("at least one city is required".into()));
        }
        let mut cells = Vec::with_capacity(self.cities.len());
        for c in &self.cities {
            if c.row >= layout.n_rows || c.col >= layout.n_cols {
                return Err(Error::CityOffGrid {
                    id: c.id.clone(),
                    row: c.row,
                    col: c.col,
                    n_rows: layout.n_rows,
                    n_cols: layout.n_cols,
                });
            }
            let idx = layout.index(c.row, c.col);
            if !layout.active[idx] {
                return Err(Error::CityOnInactiveCell {
                    id: c.id.clone(),
                    row: c.row,
                    col: c.col,
                });
            }
            if cells.contains(&idx) {
                return Err(Error::InvalidCities(format!(
                    "city {:?} shares cell ({}, {}) with another city",
                    c.id, c.row, c.col
                )));
            }
            cells.push(idx);
            if !(c.urban_pop.is_finite() && c.urban_pop > 0.0) {
                return Err(Error::InvalidCities(format!(
                    "city {:?}: urban population must be positive, got {}",
                    c.id, c.urban_pop
                )));
            }
            if !(c.urban_output.is_finite() && c.urban_output > 0.0) {
                return Err(Error::InvalidCities(format!(
                    "city {:?}: urban output must be positive, got {}",
                    c.id, c.urban_output
                )));
            }
        }
        Ok(())
    }
}
