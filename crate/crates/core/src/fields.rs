//! Per-city distance fields: straight-line distances between cell centroids,
//! or geography-aware travel distances from a fast-marching Eikonal solve.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CitySet, Grid, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Euclidean,
    Eikonal,
}

/// `fields[i][x]` is the distance from cell `x` to city `i`. Inactive cells
/// hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceFieldSet {
    pub layout: Layout,
    pub fields: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl DistanceFieldSet {
    /// Wraps precomputed fields, checking shapes and finiteness on active cells.
    pub fn from_fields(layout: Layout, fields: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let set = DistanceFieldSet {
            layout,
            fields,
            provenance,
        };
        set.validate()?;
        Ok(set)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(Error::InvalidCities("no distance fields".into()));
        }
        let len = self.layout.len();
        for (i, f) in self.fields.iter().enumerate() {
            if f.len() != len {
                return Err(Error::LengthMismatch {
                    what: "distance field",
                    got: f.len(),
                    expected: len,
                });
            }
            for (x, &d) in f.iter().enumerate() {
                if self.layout.active[x] && !(d.is_finite() && d >= 0.0) {
                    let (row, col) = self.layout.row_col(x);
                    return Err(Error::InvalidGrid(format!(
                        "distance field {i} has invalid value {d} at ({row}, {col})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Straight-line centroid distances from every active cell to each city.
pub fn euclidean_fields(grid: &Grid, cities: &CitySet) -> Result<DistanceFieldSet> {
    let layout = &grid.layout;
    cities.validate(layout)?;
    let fields = (0..cities.len())
        .into_par_iter()
        .map(|i| {
            let src = cities.cell(i, layout);
            (0..layout.len())
                .map(|x| {
                    if layout.active[x] {
                        layout.centroid_distance(src, x)
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    Ok(DistanceFieldSet {
        layout: layout.clone(),
        fields,
        provenance: Provenance::Euclidean,
    })
}

/// Travel-time fields from a first-order fast-marching solve of
/// `|grad T| = 1 / speed`, one independent solve per city.
pub fn eikonal_fields(grid: &Grid, cities: &CitySet) -> Result<DistanceFieldSet> {
    let layout = &grid.layout;
    cities.validate(layout)?;
    for x in (0..layout.len()).filter(|&x| layout.active[x]) {
        let s = grid.speed[x];
        if !(s.is_finite() && s > 0.0) {
            let (r, c) = layout.row_col(x);
            return Err(Error::InvalidGrid(format!(
                "speed at ({r}, {c}) must be positive, got {s}"
            )));
        }
    }
    let fields = (0..cities.len())
        .into_par_iter()
        .map(|i| fast_march(layout, &grid.speed, cities.cell(i, layout), i))
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceFieldSet {
        layout: layout.clone(),
        fields,
        provenance: Provenance::Eikonal,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Trial {
    t: f64,
    idx: usize,
}

impl Eq for Trial {}

impl Ord for Trial {
    // min-heap on (t, idx)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Trial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source fast marching on the 4-neighborhood with a binary-heap
/// narrow band. The eight cells around the source start from the exact
/// straight-line travel time (mean slowness of the two cells), which removes
/// the point-source error of the first-order stencil near the city.
pub fn fast_march(layout: &Layout, speed: &[f64], source: usize, city: usize) -> Result<Vec<f64>> {
    let n = layout.len();
    let h = layout.cell_size;
    let mut t = vec![f64::INFINITY; n];
    let mut known = vec![false; n];
    let mut heap = BinaryHeap::new();

    t[source] = 0.0;
    heap.push(Trial { t: 0.0, idx: source });

    let (sr, sc) = layout.row_col(source);
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (r, c) = (sr as i64 + dr, sc as i64 + dc);
            if r < 0 || c < 0 || r >= layout.n_rows as i64 || c >= layout.n_cols as i64 {
                continue;
            }
            let idx = layout.index(r as usize, c as usize);
            if !layout.active[idx] {
                continue;
            }
            if dr != 0 && dc != 0 {
                // the straight segment must pass through an active cell
                let via_row = layout.index(r as usize, sc);
                let via_col = layout.index(sr, c as usize);
                if !layout.active[via_row] && !layout.active[via_col] {
                    continue;
                }
            }
            let len = ((dr * dr + dc * dc) as f64).sqrt() * h;
            let tt = len * 0.5 * (1.0 / speed[source] + 1.0 / speed[idx]);
            t[idx] = tt;
            heap.push(Trial { t: tt, idx });
        }
    }

    while let Some(Trial { t: tt, idx }) = heap.pop() {
        if known[idx] || tt > t[idx] {
            continue;
        }
        known[idx] = true;
        for nb in layout.active_neighbors4(idx) {
            if known[nb] {
                continue;
            }
            let candidate = godunov_update(layout, &t, &known, nb, h / speed[nb]);
            if candidate < t[nb] {
                t[nb] = candidate;
                heap.push(Trial { t: candidate, idx: nb });
            }
        }
    }

    if let Some(x) = (0..n).find(|&x| layout.active[x] && !known[x]) {
        let (row, col) = layout.row_col(x);
        return Err(Error::UnreachableCell { city, row, col });
    }
    Ok(t)
}

/// Upwind update of cell `idx` from its accepted neighbors; `f` is the
/// cell's traversal time `h / speed`.
fn godunov_update(layout: &Layout, t: &[f64], known: &[bool], idx: usize, f: f64) -> f64 {
    let (r, c) = layout.row_col(idx);
    let val = |j: usize| if known[j] { t[j] } else { f64::INFINITY };
    let mut a = f64::INFINITY;
    if r > 0 {
        a = a.min(val(idx - layout.n_cols));
    }
    if r + 1 < layout.n_rows {
        a = a.min(val(idx + layout.n_cols));
    }
    let mut b = f64::INFINITY;
    if c > 0 {
        b = b.min(val(idx - 1));
    }
    if c + 1 < layout.n_cols {
        b = b.min(val(idx + 1));
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi - lo >= f {
        lo + f
    } else {
        let diff = hi - lo;
        0.5 * (lo + hi + (2.0 * f * f - diff * diff).sqrt())
    }
}

/// Transit speed inversely proportional to elevation, saturated to `v_max`
/// on water cells.
///
/// The constant is chosen so the fastest non-water active cell runs at
/// `v_max`. When the lowest elevation is not positive, elevations are shifted
/// so that the minimum maps to `reference` first. Output is clamped to
/// `[1e-6 * v_max, v_max]`; inactive cells get `v_max`.
pub fn speed_from_elevation(
    elevation: &[f64],
    water: &[bool],
    active: &[bool],
    v_max: f64,
    reference: f64,
) -> Result<Vec<f64>> {
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(Error::param("v_max", format!("must be positive, got {v_max}")));
    }
    if !(reference.is_finite() && reference > 0.0) {
        return Err(Error::param(
            "elevation_ref",
            format!("must be positive, got {reference}"),
        ));
    }
    let n = elevation.len();
    for (what, len) in [("water mask", water.len()), ("active mask", active.len())] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                got: len,
                expected: n,
            });
        }
    }
    let land = |i: usize| active[i] && !water[i];
    let min_elev = (0..n)
        .filter(|&i| land(i))
        .map(|i| elevation[i])
        .fold(f64::INFINITY, f64::min);
    if let Some(i) = (0..n).find(|&i| land(i) && !elevation[i].is_finite()) {
        return Err(Error::param(
            "elevation",
            format!("non-finite elevation at cell {i}"),
        ));
    }
    let shift = if min_elev.is_finite() && min_elev <= 0.0 {
        reference - min_elev
    } else {
        0.0
    };
    let floor = 1e-6 * v_max;
    // c / min_elev == v_max
    let c = v_max * (min_elev + shift);
    Ok((0..n)
        .map(|i| {
            if !land(i) {
                v_max
            } else {
                (c / (elevation[i] + shift)).clamp(floor, v_max)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::City;

    fn one_city(layout: &Layout, row: usize, col: usize) -> CitySet {
        CitySet::new(vec![City::new("c", row, col, 1.0, 1.0)], layout).unwrap()
    }

    #[test]
    fn euclidean_three_four_five() {
        let g = Grid::uniform(6, 6, 1.0);
        let cs = one_city(&g.layout, 0, 0);
        let f = euclidean_fields(&g, &cs).unwrap();
        assert_eq!(f.fields[0][g.layout.index(3, 4)], 5.0);
        assert_eq!(f.fields[0][0], 0.0);
    }

    #[test]
    fn euclidean_matches_direct_formula() {
        let g = Grid::uniform(10, 10, 0.7);
        let cs = CitySet::new(
            vec![City::new("a", 2, 3, 1.0, 1.0), City::new("b", 8, 9, 1.0, 1.0)],
            &g.layout,
        )
        .unwrap();
        let f = euclidean_fields(&g, &cs).unwrap();
        for (i, c) in cs.cities.iter().enumerate() {
            for r in 0..10 {
                for col in 0..10 {
                    let dx = (col as f64 - c.col as f64) * 0.7;
                    let dy = (r as f64 - c.row as f64) * 0.7;
                    let want = (dx * dx + dy * dy).sqrt();
                    let got = f.fields[i][r * 10 + col];
                    assert!((got - want).abs() <= 1e-12 * want.max(1.0));
                }
            }
        }
    }

    #[test]
    fn corridor_is_exact() {
        let h = 0.25;
        let g = Grid::uniform(1, 40, h);
        let cs = one_city(&g.layout, 0, 0);
        let f = eikonal_fields(&g, &cs).unwrap();
        for k in 0..40 {
            assert_eq!(f.fields[0][k], k as f64 * h);
        }
    }

    #[test]
    fn unreachable_cell_is_reported() {
        let mut g = Grid::uniform(3, 3, 1.0);
        for r in 0..3 {
            g.layout.active[r * 3 + 1] = false;
        }
        let cs = CitySet {
            cities: vec![City::new("c", 0, 0, 1.0, 1.0)],
        };
        match eikonal_fields(&g, &cs) {
            Err(Error::UnreachableCell { col, .. }) => assert_eq!(col, 2),
            other => panic!("expected unreachable error, got {other:?}"),
        }
    }

    #[test]
    fn speed_examples() {
        let active = [true, true];
        let s = speed_from_elevation(&[100.0, 200.0], &[false, false], &active, 1.0, 1.0).unwrap();
        assert_eq!(s, vec![1.0, 0.5]);
        let flat = speed_from_elevation(&[7.0; 4], &[false; 4], &[true; 4], 3.0, 1.0).unwrap();
        assert_eq!(flat, vec![3.0; 4]);
        let a = speed_from_elevation(&[10.0, 30.0, 70.0], &[false; 3], &[true; 3], 2.0, 1.0).unwrap();
        let b = speed_from_elevation(&[20.0, 60.0, 140.0], &[false; 3], &[true; 3], 2.0, 1.0).unwrap();
        assert_eq!(a, b);
        let w = speed_from_elevation(&[10.0, 500.0], &[false, true], &active, 2.0, 1.0).unwrap();
        assert_eq!(w, vec![2.0, 2.0]);
        assert!(speed_from_elevation(&[1.0], &[false], &[true], 0.0, 1.0).is_err());
    }

    #[test]
    fn nonpositive_elevation_is_shifted() {
        let s = speed_from_elevation(&[-5.0, -4.0, 5.0], &[false; 3], &[true; 3], 1.0, 1.0).unwrap();
        // shifted to (1, 2, 11)
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 0.5);
        assert!((s[2] - 1.0 / 11.0).abs() < 1e-15);
    }
}
