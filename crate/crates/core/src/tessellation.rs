//! Additively weighted Voronoi partitions of the raster domain.
//!
//! Cell `x` goes to the city minimizing `d_i(x) - lambda_i`. The comparison
//! is exact: each key is carried as an error-free two-term sum, so shifting
//! all weights by a constant that is itself added exactly cannot change any
//! assignment, ties included. Exact ties go to the lowest city index.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::ces::{EconomyParams, PriceState};
use crate::error::{Error, Result};
use crate::fields::DistanceFieldSet;
use crate::grid::{Grid, Layout};

/// Additive Voronoi weights, in the same length units as the distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub lambda: Vec<f64>,
}

impl WeightVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if let Some(i) = lambda.iter().position(|l| !l.is_finite()) {
            return Err(Error::param(
                "weights",
                format!("weight {i} is not finite ({})", lambda[i]),
            ));
        }
        Ok(WeightVector { lambda })
    }

    pub fn zeros(n: usize) -> Self {
        WeightVector { lambda: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn shifted(&self, c: f64) -> Self {
        WeightVector {
            lambda: self.lambda.iter().map(|l| l + c).collect(),
        }
    }
}

/// `lambda_i = ln(p_i * v(q, p_i)) / delta`.
pub fn weights_from_prices(prices: &PriceState, params: &EconomyParams) -> Result<WeightVector> {
    params.validate()?;
    prices.validate()?;
    Ok(WeightVector {
        lambda: prices
            .p
            .iter()
            .map(|&p| params.ln_vhat(prices.q, p) / params.delta)
            .collect(),
    })
}

/// Error-free `a - b` as `(rounded, error)`.
#[inline]
fn two_diff(a: f64, b: f64) -> (f64, f64) {
    let s = a - b;
    let bb = s - a;
    let err = (a - (s - bb)) - (b + bb);
    (s, err)
}

/// Exact ordering of `d_a - l_a` against `d_b - l_b`.
#[inline]
pub fn compare_keys(d_a: f64, l_a: f64, d_b: f64, l_b: f64) -> Ordering {
    let (ha, ea) = two_diff(d_a, l_a);
    let (hb, eb) = two_diff(d_b, l_b);
    match ha.partial_cmp(&hb).unwrap_or(Ordering::Equal) {
        Ordering::Equal => ea.partial_cmp(&eb).unwrap_or(Ordering::Equal),
        o => o,
    }
}

/// A partition of the active cells into `n_regions` labelled regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tessellation {
    pub layout: Layout,
    pub n_regions: usize,
    /// Region of each cell; `None` exactly on inactive cells.
    pub assignment: Vec<Option<usize>>,
    /// Cell count of each region.
    pub region_sizes: Vec<usize>,
    /// Active cells with at least one active 4-neighbor in another region.
    pub skeleton: Vec<bool>,
    /// `adjacency[i][j]` iff a cell of `i` is 4-adjacent to a cell of `j`.
    pub adjacency: Vec<Vec<bool>>,
}

impl Tessellation {
    /// Derives sizes, skeleton and adjacency from a per-cell labelling.
    pub fn from_assignment(layout: Layout, n_regions: usize, assignment: Vec<Option<usize>>) -> Result<Self> {
        if assignment.len() != layout.len() {
            return Err(Error::LengthMismatch {
                what: "assignment",
                got: assignment.len(),
                expected: layout.len(),
            });
        }
        let mut region_sizes = vec![0usize; n_regions];
        for (x, a) in assignment.iter().enumerate() {
            let (row, col) = layout.row_col(x);
            match (*a, layout.active[x]) {
                (Some(k), true) if k < n_regions => region_sizes[k] += 1,
                (Some(k), true) => {
                    return Err(Error::InvalidGrid(format!(
                        "cell ({row}, {col}) has label {k} outside 0..{n_regions}"
                    )))
                }
                (None, false) => {}
                (None, true) => {
                    return Err(Error::InvalidGrid(format!(
                        "active cell ({row}, {col}) is unassigned"
                    )))
                }
                (Some(_), false) => {
                    return Err(Error::InvalidGrid(format!(
                        "inactive cell ({row}, {col}) carries a label"
                    )))
                }
            }
        }
        let mut skeleton = vec![false; layout.len()];
        let mut adjacency = vec![vec![false; n_regions]; n_regions];
        for x in 0..layout.len() {
            let Some(i) = assignment[x] else { continue };
            for y in layout.active_neighbors4(x) {
                let j = assignment[y].expect("active cells are labelled");
                if j != i {
                    skeleton[x] = true;
                    adjacency[i][j] = true;
                    adjacency[j][i] = true;
                }
            }
        }
        Ok(Tessellation {
            layout,
            n_regions,
            assignment,
            region_sizes,
            skeleton,
            adjacency,
        })
    }

    pub fn region_area(&self, i: usize) -> f64 {
        self.region_sizes[i] as f64 * self.layout.cell_area()
    }

    pub fn skeleton_cells(&self) -> Vec<usize> {
        (0..self.skeleton.len()).filter(|&x| self.skeleton[x]).collect()
    }

    pub fn skeleton_is_empty(&self) -> bool {
        !self.skeleton.iter().any(|&s| s)
    }

    /// Adjacent region pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_regions {
            for j in i + 1..self.n_regions {
                if self.adjacency[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether the adjacency graph restricted to nonempty regions is connected.
    pub fn adjacency_connected(&self) -> bool {
        let nonempty: Vec<usize> = (0..self.n_regions).filter(|&i| self.region_sizes[i] > 0).collect();
        let Some(&start) = nonempty.first() else {
            return true;
        };
        let mut seen = vec![false; self.n_regions];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..self.n_regions {
                if self.adjacency[i][j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        nonempty.iter().all(|&i| seen[i])
    }
}

/// Per-cell `argmin_i (d_i(x) - lambda_i)` with lowest-index tie-break.
pub fn assign(fields: &DistanceFieldSet, weights: &WeightVector) -> Result<Tessellation> {
    let n = fields.n();
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            what: "weights",
            got: weights.len(),
            expected: n,
        });
    }
    if let Some(i) = weights.lambda.iter().position(|l| !l.is_finite()) {
        return Err(Error::param("weights", format!("weight {i} is not finite")));
    }
    let layout = &fields.layout;
    let lambda = &weights.lambda;
    let assignment = (0..layout.len())
        .map(|x| {
            layout.active[x].then(|| {
                let mut best = 0;
                for i in 1..n {
                    if compare_keys(fields.fields[i][x], lambda[i], fields.fields[best][x], lambda[best])
                        == Ordering::Less
                    {
                        best = i;
                    }
                }
                best
            })
        })
        .collect();
    Tessellation::from_assignment(layout.clone(), n, assignment)
}

/// Delivered farm supply of region `i`: `sum y * L * area * exp(-delta d_i)`
/// over the region's cells, summed in cell order.
pub fn region_supply(
    grid: &Grid,
    fields: &DistanceFieldSet,
    tess: &Tessellation,
    delta: f64,
    i: usize,
) -> f64 {
    let area = grid.layout.cell_area();
    let field = &fields.fields[i];
    tess.assignment
        .iter()
        .enumerate()
        .filter(|(_, a)| **a == Some(i))
        .map(|(x, _)| grid.rural_output[x] * grid.rural_pop[x] * area * (-delta * field[x]).exp())
        .sum()
}
