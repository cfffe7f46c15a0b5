//! Distances between two partitions of the same raster: a Hausdorff distance
//! between skeletons and a best-match symmetric-difference area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tessellation::Tessellation;

fn check_pair(a: &Tessellation, b: &Tessellation) -> Result<()> {
    if !a.layout.same_geometry(&b.layout) {
        return Err(Error::IncomparablePartitions(format!(
            "grids differ: {}x{} (cell {}) vs {}x{} (cell {}) or different masks",
            a.layout.n_rows, a.layout.n_cols, a.layout.cell_size, b.layout.n_rows, b.layout.n_cols, b.layout.cell_size
        )));
    }
    if a.n_regions != b.n_regions {
        return Err(Error::IncomparablePartitions(format!(
            "region counts differ: {} vs {}",
            a.n_regions, b.n_regions
        )));
    }
    Ok(())
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
/// `f` holds 0 at sites and `INFINITY` elsewhere on input and exact squared
/// distances on output.
fn edt_1d(f: &mut [f64], v: &mut [usize], z: &mut [f64], out: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out[..n].fill(f64::INFINITY);
        return;
    }
    let mut j = 0;
    for q in 0..n {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
    f.copy_from_slice(&out[..n]);
}

/// Squared distance, in cells, from every cell centroid to the nearest
/// marked cell centroid. Exact: all intermediate values are integers.
pub fn squared_distance_transform(n_rows: usize, n_cols: usize, marked: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = marked.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let len = n_rows.max(n_cols);
    let mut v = vec![0usize; len];
    let mut z = vec![0.0; len + 1];
    let mut out = vec![0.0; len];
    let mut col = vec![0.0; n_rows];
    for c in 0..n_cols {
        for r in 0..n_rows {
            col[r] = d[r * n_cols + c];
        }
        edt_1d(&mut col, &mut v, &mut z, &mut out);
        for r in 0..n_rows {
            d[r * n_cols + c] = col[r];
        }
    }
    for r in 0..n_rows {
        edt_1d(&mut d[r * n_cols..(r + 1) * n_cols], &mut v, &mut z, &mut out);
    }
    d
}

/// `max_{x in skel(b)} min_{y in skel(a)} |x - y|` over cell centroids, in
/// length units. Not symmetric in its arguments.
pub fn hausdorff(a: &Tessellation, b: &Tessellation) -> Result<f64> {
    check_pair(a, b)?;
    if a.skeleton_is_empty() || b.skeleton_is_empty() {
        return Err(Error::EmptySkeleton);
    }
    let l = &a.layout;
    let d2 = squared_distance_transform(l.n_rows, l.n_cols, &a.skeleton);
    let worst = b
        .skeleton
        .iter()
        .zip(&d2)
        .filter(|(s, _)| **s)
        .map(|(_, d)| *d)
        .fold(0.0, f64::max);
    Ok(worst.sqrt() * l.cell_size)
}

/// `max(hausdorff(a, b), hausdorff(b, a))`.
pub fn hausdorff_symmetric(a: &Tessellation, b: &Tessellation) -> Result<f64> {
    Ok(hausdorff(a, b)?.max(hausdorff(b, a)?))
}

/// `sum_j min_k |A_j xor B_k|` in area units. The minimum is taken freely
/// per region of `a`, so several regions may match the same region of `b`.
pub fn area_distance(a: &Tessellation, b: &Tessellation) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.n_regions;
    let mut both = vec![0u64; n * n];
    for (ra, rb) in a.assignment.iter().zip(&b.assignment) {
        if let (Some(j), Some(k)) = (ra, rb) {
            both[j * n + k] += 1;
        }
    }
    let total: u64 = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| a.region_sizes[j] as u64 + b.region_sizes[k] as u64 - 2 * both[j * n + k])
                .min()
                .unwrap_or(0)
        })
        .sum();
    Ok(total as f64 * a.layout.cell_area())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub hausdorff_directional: f64,
    pub hausdorff_symmetric: f64,
    pub area_distance: f64,
}

impl MetricValues {
    /// Both partitions of a comparison must have a skeleton; single-region
    /// partitions report `NaN` Hausdorff values.
    pub fn between(reference: &Tessellation, candidate: &Tessellation) -> Result<Self> {
        let (hd, hs) = match hausdorff(reference, candidate) {
            Ok(hd) => (hd, hausdorff_symmetric(reference, candidate)?),
            Err(Error::EmptySkeleton) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        Ok(MetricValues {
            hausdorff_directional: hd,
            hausdorff_symmetric: hs,
            area_distance: area_distance(reference, candidate)?,
        })
    }
}

/// `(d_candidate - d_baseline) / d_baseline`; `None` when the baseline
/// distance is zero.
pub fn relative_improvement(d_candidate: f64, d_baseline: f64) -> Option<f64> {
    (d_baseline != 0.0 && d_baseline.is_finite()).then(|| (d_candidate - d_baseline) / d_baseline)
}
