//! The market economy on a gridded geography: farmer incomes, excess demand
//! for each city's farm market, the potential whose gradient is
//! `Z_i * v(q, p_i)`, and the cached per-instance state behind them.
//!
//! Integrals over the domain come in two flavors (see [`Quadrature`]). The
//! default, [`Quadrature::SubCell`], treats every distance field as linear
//! inside each cell (gradient from centered differences) and integrates the
//! iceberg factor exactly over the part of the cell each city wins. This
//! keeps excess demand continuous in prices, so the equilibrium `Z = 0` is
//! attainable and cross-price derivatives between neighboring markets are
//! nonzero. [`Quadrature::Midpoint`] assigns whole cells and is piecewise
//! constant in prices between cell flips.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ces::{EconomyParams, PriceState};
use crate::error::{Error, Result};
use crate::fields::DistanceFieldSet;
use crate::grid::{CitySet, Grid};
use crate::subcell::{cell_square, clip_half_plane, polygon_exp_integral, square_exp_integral, Point};
use crate::tessellation::{compare_keys, weights_from_prices, Tessellation, WeightVector};

/// Fixed chunk size for parallel cell sums, so reductions are identical
/// regardless of thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// Whole cells, valued at the centroid.
    Midpoint,
    /// Linear distances inside cells, exact integration over the clipped
    /// market areas.
    #[default]
    SubCell,
}

/// Excess demands for the `n` farm markets and the manufactured good.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessDemand {
    pub z: Vec<f64>,
    pub z_m: f64,
}

/// Everything computed at one price vector.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub prices: PriceState,
    pub weights: WeightVector,
    /// Delivered farm supply to each city.
    pub supply: Vec<f64>,
    pub excess: ExcessDemand,
    /// Excess demand via `-share_m * supply + urban farm demand`.
    pub excess_share_form: Vec<f64>,
    /// Marginal utility of income `v(q, p_i)`.
    pub marginal_utility: Vec<f64>,
    /// `dF/dp_i = Z_i * v(q, p_i)`.
    pub gradient: Vec<f64>,
    pub potential: f64,
    /// Total income `sum p_i S_i + q sum y_i^m L_i^m`, the scale for Walras checks.
    pub gross_volume: f64,
    /// Centroid winner per cell (`u32::MAX` on inactive cells).
    pub winners: Vec<u32>,
}

impl Evaluation {
    pub fn grad_inf_norm(&self) -> f64 {
        self.gradient.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// `sum p_i Z_i + q Z_m`, zero up to rounding.
    pub fn walras_residual(&self) -> f64 {
        self.prices
            .p
            .iter()
            .zip(&self.excess.z)
            .map(|(p, z)| p * z)
            .sum::<f64>()
            + self.prices.q * self.excess.z_m
    }

    /// Largest relative gap between the two excess-demand forms.
    pub fn form_discrepancy(&self) -> f64 {
        self.excess
            .z
            .iter()
            .zip(&self.excess_share_form)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / self.gross_volume.max(f64::MIN_POSITIVE)
    }
}

/// A solved-for economy: geography, cities, distance fields and parameters,
/// with the per-cell quantities that do not depend on prices cached.
#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: Grid,
    pub cities: CitySet,
    pub fields: DistanceFieldSet,
    pub params: EconomyParams,
    pub quadrature: Quadrature,
    active_cells: Vec<usize>,
    /// `y^a * L^A` per cell.
    mass: Vec<f64>,
    /// `exp(-delta d_i(x))`.
    atten: Vec<Vec<f64>>,
    /// Per field and cell, the distance gradient along rows and columns.
    grads: Vec<Vec<Point>>,
    /// `int_cell exp(-delta g_i . u) du`.
    full_cell: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(
        grid: Grid,
        cities: CitySet,
        fields: DistanceFieldSet,
        params: EconomyParams,
        quadrature: Quadrature,
    ) -> Result<Self> {
        grid.validate()?;
        cities.validate(&grid.layout)?;
        fields.validate()?;
        params.validate()?;
        if fields.n() != cities.len() {
            return Err(Error::LengthMismatch {
                what: "distance fields",
                got: fields.n(),
                expected: cities.len(),
            });
        }
        if !fields.layout.same_geometry(&grid.layout) {
            return Err(Error::InvalidGrid(
                "distance fields were computed on a different grid".into(),
            ));
        }
        let layout = &grid.layout;
        let active_cells: Vec<usize> = (0..layout.len()).filter(|&x| layout.active[x]).collect();
        let mass = (0..layout.len())
            .map(|x| {
                if layout.active[x] {
                    grid.rural_output[x] * grid.rural_pop[x]
                } else {
                    0.0
                }
            })
            .collect();
        let mut inst = Instance {
            grid,
            cities,
            fields,
            params,
            quadrature,
            active_cells,
            mass,
            atten: Vec::new(),
            grads: Vec::new(),
            full_cell: Vec::new(),
        };
        inst.rebuild_caches();
        Ok(inst)
    }

    /// Same geography and cities with different economic parameters.
    pub fn with_params(&self, params: EconomyParams) -> Result<Self> {
        params.validate()?;
        let mut inst = self.clone();
        inst.params = params;
        inst.rebuild_caches();
        Ok(inst)
    }

    /// Same instance with city `i`'s urban population replaced.
    pub fn with_urban_pop(&self, i: usize, urban_pop: f64) -> Result<Self> {
        let mut inst = self.clone();
        inst.cities.cities[i].urban_pop = urban_pop;
        inst.cities.validate(&inst.grid.layout)?;
        Ok(inst)
    }

    pub fn with_quadrature(&self, quadrature: Quadrature) -> Self {
        let mut inst = self.clone();
        inst.quadrature = quadrature;
        inst.rebuild_caches();
        inst
    }

    fn rebuild_caches(&mut self) {
        let layout = &self.grid.layout;
        let delta = self.params.delta;
        let h = layout.cell_size;
        self.atten = self
            .fields
            .fields
            .iter()
            .map(|f| {
                f.iter()
                    .enumerate()
                    .map(|(x, &d)| if layout.active[x] { (-delta * d).exp() } else { 0.0 })
                    .collect()
            })
            .collect();
        if self.quadrature == Quadrature::SubCell {
            self.grads = self
                .fields
                .fields
                .iter()
                .map(|f| (0..layout.len()).map(|x| field_gradient(layout, f, x)).collect())
                .collect();
            self.full_cell = self
                .grads
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|gx| square_exp_integral(h, [-delta * gx[0], -delta * gx[1]]))
                        .collect()
                })
                .collect();
        } else {
            self.grads.clear();
            self.full_cell.clear();
        }
    }

    pub fn n(&self) -> usize {
        self.cities.len()
    }

    pub fn total_rural_output(&self) -> f64 {
        self.grid.total_rural_output()
    }

    /// Farmer income at `cell` when selling in city `i`: `p_i y(x) exp(-delta d_i(x))`.
    pub fn farmer_income(&self, prices: &PriceState, cell: usize, i: usize) -> f64 {
        prices.p[i] * self.grid.rural_output[cell] * self.atten[i][cell]
    }

    pub fn weights(&self, prices: &PriceState) -> Result<WeightVector> {
        weights_from_prices(prices, &self.params)
    }

    /// Hard (centroid) tessellation at the given prices.
    pub fn tessellation(&self, prices: &PriceState) -> Result<Tessellation> {
        crate::tessellation::assign(&self.fields, &self.weights(prices)?)
    }

    /// Per-cell `argmax_i V(q, p_i, omega(x, s_i))`, evaluated directly on
    /// utilities (lowest index on exact ties).
    pub fn farmer_choice(&self, prices: &PriceState) -> Result<Vec<Option<usize>>> {
        prices.validate()?;
        let vhat: Vec<f64> = prices
            .p
            .iter()
            .map(|&p| p * self.params.marginal_utility(prices.q, p).unwrap_or(0.0))
            .collect();
        let layout = &self.grid.layout;
        Ok((0..layout.len())
            .map(|x| {
                layout.active[x].then(|| {
                    let mut best = 0;
                    let mut best_v = vhat[0] * self.atten[0][x];
                    for i in 1..self.n() {
                        let v = vhat[i] * self.atten[i][x];
                        if v > best_v {
                            best = i;
                            best_v = v;
                        }
                    }
                    best
                })
            })
            .collect())
    }

    fn check_prices(&self, prices: &PriceState) -> Result<()> {
        if prices.len() != self.n() {
            return Err(Error::LengthMismatch {
                what: "prices",
                got: prices.len(),
                expected: self.n(),
            });
        }
        prices.validate()
    }

    /// Delivered supply per city and the centroid winner of every cell.
    fn supply(&self, weights: &WeightVector) -> (Vec<f64>, Vec<u32>) {
        let n = self.n();
        let lambda = &weights.lambda;
        let fields = &self.fields.fields;
        let h = self.grid.layout.cell_size;
        let area = self.grid.layout.cell_area();
        let delta = self.params.delta;
        let mut winners = vec![u32::MAX; self.grid.layout.len()];

        let partials: Vec<(Vec<f64>, Vec<(usize, u32)>)> = self
            .active_cells
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut s = vec![0.0; n];
                let mut wins = Vec::with_capacity(chunk.len());
                let mut cands: Vec<usize> = Vec::with_capacity(n);
                for &x in chunk {
                    let mut m = 0;
                    for i in 1..n {
                        if compare_keys(fields[i][x], lambda[i], fields[m][x], lambda[m]) == Ordering::Less {
                            m = i;
                        }
                    }
                    wins.push((x, m as u32));
                    let mass = self.mass[x];
                    if mass == 0.0 {
                        continue;
                    }
                    match self.quadrature {
                        Quadrature::Midpoint => s[m] += mass * area * self.atten[m][x],
                        Quadrature::SubCell => {
                            let key_m = fields[m][x] - lambda[m];
                            let gm = self.grads[m][x];
                            cands.clear();
                            cands.push(m);
                            for j in 0..n {
                                if j == m {
                                    continue;
                                }
                                let gj = self.grads[j][x];
                                let reach = 0.5 * h * ((gj[0] - gm[0]).abs() + (gj[1] - gm[1]).abs());
                                if fields[j][x] - lambda[j] - key_m < reach {
                                    cands.push(j);
                                }
                            }
                            if cands.len() == 1 {
                                s[m] += mass * self.atten[m][x] * self.full_cell[m][x];
                            } else {
                                for &c in &cands {
                                    let piece = self.won_polygon(x, c, &cands, lambda);
                                    if piece.is_empty() {
                                        continue;
                                    }
                                    let g = self.grads[c][x];
                                    s[c] += mass
                                        * self.atten[c][x]
                                        * polygon_exp_integral(&piece, [-delta * g[0], -delta * g[1]]);
                                }
                            }
                        }
                    }
                }
                (s, wins)
            })
            .collect();

        let mut supply = vec![0.0; n];
        for (s, wins) in partials {
            for i in 0..n {
                supply[i] += s[i];
            }
            for (x, w) in wins {
                winners[x] = w;
            }
        }
        (supply, winners)
    }

    /// Part of cell `x` (in local coordinates) where city `c` has the lowest
    /// linearized key among `cands`.
    fn won_polygon(&self, x: usize, c: usize, cands: &[usize], lambda: &[f64]) -> Vec<Point> {
        let fields = &self.fields.fields;
        let gc = self.grads[c][x];
        let key_c = fields[c][x] - lambda[c];
        let mut poly = cell_square(self.grid.layout.cell_size);
        for &k in cands {
            if k == c {
                continue;
            }
            let gk = self.grads[k][x];
            let normal = [gc[0] - gk[0], gc[1] - gk[1]];
            let rhs = (fields[k][x] - lambda[k]) - key_c;
            if normal == [0.0, 0.0] {
                let keep = rhs > 0.0 || (rhs == 0.0 && c < k);
                if !keep {
                    return Vec::new();
                }
                continue;
            }
            poly = clip_half_plane(&poly, normal, rhs);
            if poly.is_empty() {
                break;
            }
        }
        poly
    }

    /// Full evaluation at `prices`: weights, supplies, both excess-demand
    /// forms, the potential and its gradient.
    pub fn evaluate(&self, prices: &PriceState) -> Result<Evaluation> {
        self.check_prices(prices)?;
        let params = &self.params;
        let q = prices.q;
        let weights = weights_from_prices(prices, params)?;
        let (supply, winners) = self.supply(&weights);

        let n = self.n();
        let mut z = Vec::with_capacity(n);
        let mut z_share = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut z_m = 0.0;
        let mut urban_utility = 0.0;
        let mut rural_utility = 0.0;
        let mut gross = 0.0;
        let mut manuf_supply = 0.0;
        for (i, city) in self.cities.cities.iter().enumerate() {
            let p = prices.p[i];
            let share_a = params.farm_share(q, p);
            let share_m = params.manuf_share(q, p);
            let urban_income = q * city.urban_output;
            let urban_ca = share_a * urban_income / p;
            let urban_cm = share_m * urban_income / q;
            // rural income in region i integrates to p_i * S_i
            let rural_income = p * supply[i];
            let rural_ca = share_a * rural_income / p;
            let rural_cm = share_m * rural_income / q;

            z.push(rural_ca + urban_ca * city.urban_pop - supply[i]);
            z_share.push(-share_m * supply[i] + urban_ca * city.urban_pop);
            z_m += rural_cm + urban_cm * city.urban_pop;
            manuf_supply += city.urban_output * city.urban_pop;

            let vi = params.marginal_utility(q, p)?;
            v.push(vi);
            urban_utility += vi * urban_income * city.urban_pop;
            rural_utility += vi * rural_income;
            gross += rural_income + urban_income * city.urban_pop;
        }
        z_m -= manuf_supply;

        let potential = match self.quadrature {
            Quadrature::SubCell => -urban_utility - rural_utility,
            Quadrature::Midpoint => -urban_utility - self.rural_utility_direct(prices),
        };
        let gradient = z.iter().zip(&v).map(|(zi, vi)| zi * vi).collect();
        let eval = Evaluation {
            prices: prices.clone(),
            weights,
            supply,
            excess: ExcessDemand { z, z_m },
            excess_share_form: z_share,
            marginal_utility: v,
            gradient,
            potential,
            gross_volume: gross,
            winners,
        };
        debug_assert!(eval.form_discrepancy() <= 1e-10, "excess demand forms disagree");
        Ok(eval)
    }

    /// `int_X max_i V(q, p_i, omega(x, s_i)) L(x) dx` with whole-cell
    /// maxima, computed without the tessellation.
    fn rural_utility_direct(&self, prices: &PriceState) -> f64 {
        let n = self.n();
        let area = self.grid.layout.cell_area();
        let vhat: Vec<f64> = prices
            .p
            .iter()
            .map(|&p| p * self.params.marginal_utility(prices.q, p).unwrap_or(0.0))
            .collect();
        let partials: Vec<f64> = self
            .active_cells
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|&x| {
                        let best = (0..n).map(|i| vhat[i] * self.atten[i][x]).fold(0.0, f64::max);
                        best * self.mass[x] * area
                    })
                    .sum::<f64>()
            })
            .collect();
        partials.into_iter().sum()
    }

    pub fn excess_demand(&self, prices: &PriceState) -> Result<ExcessDemand> {
        Ok(self.evaluate(prices)?.excess)
    }

    /// The potential `F(p)`; its unique maximum at `q = 1` is the equilibrium.
    pub fn potential(&self, prices: &PriceState) -> Result<f64> {
        Ok(self.evaluate(prices)?.potential)
    }

    /// `dF/dp_i = Z_i(p) v(q, p_i)` from the closed-form identity.
    pub fn potential_gradient(&self, prices: &PriceState) -> Result<Vec<f64>> {
        Ok(self.evaluate(prices)?.gradient)
    }

    /// Tessellation from the centroid winners of an evaluation.
    pub fn tessellation_from(&self, eval: &Evaluation) -> Result<Tessellation> {
        let assignment = eval
            .winners
            .iter()
            .map(|&w| (w != u32::MAX).then_some(w as usize))
            .collect();
        Tessellation::from_assignment(self.grid.layout.clone(), self.n(), assignment)
    }
}

/// Centered-difference gradient of a field at `x` along (rows, cols), in
/// distance per length. One-sided next to inactive cells or the raster edge.
fn field_gradient(layout: &crate::grid::Layout, f: &[f64], x: usize) -> Point {
    if !layout.active[x] {
        return [0.0, 0.0];
    }
    let h = layout.cell_size;
    let (r, c) = layout.row_col(x);
    let pick = |ok: bool, idx: usize| (ok && layout.active[idx]).then(|| f[idx]);
    let up = pick(r > 0, x.wrapping_sub(layout.n_cols));
    let down = pick(r + 1 < layout.n_rows, x + layout.n_cols);
    let left = pick(c > 0, x.wrapping_sub(1));
    let right = pick(c + 1 < layout.n_cols, x + 1);
    let diff = |minus: Option<f64>, plus: Option<f64>| match (minus, plus) {
        (Some(a), Some(b)) => (b - a) / (2.0 * h),
        (None, Some(b)) => (b - f[x]) / h,
        (Some(a), None) => (f[x] - a) / h,
        (None, None) => 0.0,
    };
    [diff(up, down), diff(left, right)]
}
