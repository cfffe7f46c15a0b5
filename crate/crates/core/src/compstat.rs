//! Comparative statics at an equilibrium: a finite-difference Jacobian of the
//! normalized excess-demand map, its sign structure, and price responses to
//! urban population shocks.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ces::PriceState;
use crate::economy::{Instance, Quadrature};
use crate::error::{Error, Result};
use crate::solver::{solve, InitialGuess, SolveResult, SolverConfig};

pub const DEFAULT_H_REL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianFd {
    /// `matrix[i][j] = dZ_i / dp_j` with `q = 1`.
    pub matrix: Vec<Vec<f64>>,
    /// Columns whose perturbation moved a cell between regions. Only tracked
    /// under midpoint quadrature, where such a move is a jump in `Z`.
    pub boundary_crossings: Vec<usize>,
}

impl JacobianFd {
    pub fn n(&self) -> usize {
        self.matrix.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.matrix[i][j])
    }

    /// `-J^{-1}`.
    pub fn neg_inverse(&self) -> Result<DMatrix<f64>> {
        let inv = self.to_matrix().lu().try_inverse().ok_or(Error::SingularJacobian)?;
        Ok(-inv)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.iter().map(|r| r.iter().sum()).collect()
    }

    /// `J p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|r| r.iter().zip(p).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Central differences of `(Z_1, ..., Z_n)` in each `p_j`, step `h_rel * p_j`.
pub fn jacobian_fd(inst: &Instance, prices: &PriceState, h_rel: f64) -> Result<JacobianFd> {
    if !(h_rel > 0.0 && h_rel < 1.0) {
        return Err(Error::param("h_rel", format!("must lie in (0, 1), got {h_rel}")));
    }
    let base = prices.normalized();
    let winners = inst.evaluate(&base)?.winners;
    let n = inst.n();
    let columns: Vec<(Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = h_rel * base.p[j];
            let mut up = base.clone();
            up.p[j] += h;
            let mut down = base.clone();
            down.p[j] -= h;
            if !(down.p[j] > 0.0) {
                return Err(Error::StepLeftPositiveOrthant { index: j, value: down.p[j] });
            }
            // the actual spacing after rounding
            let span = up.p[j] - down.p[j];
            let eu = inst.evaluate(&up)?;
            let ed = inst.evaluate(&down)?;
            let col = eu.excess.z.iter().zip(&ed.excess.z).map(|(a, b)| (a - b) / span).collect();
            let crossed = inst.quadrature == Quadrature::Midpoint && (eu.winners != winners || ed.winners != winners);
            Ok((col, crossed))
        })
        .collect::<Result<_>>()?;
    let matrix = (0..n).map(|i| columns.iter().map(|(c, _)| c[i]).collect()).collect();
    let boundary_crossings = columns.iter().enumerate().filter(|(_, (_, x))| *x).map(|(j, _)| j).collect();
    Ok(JacobianFd { matrix, boundary_crossings })
}

/// `dZ_i / dL_i^m`: urban farm-good demand per person in city `i`.
pub fn urban_demand_per_capita(inst: &Instance, prices: &PriceState, i: usize) -> Result<f64> {
    let city = &inst.cities.cities[i];
    Ok(inst.params.demand(prices.q, prices.p[i], prices.q * city.urban_output)?.c_a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockResponse {
    pub city: usize,
    pub dl_rel: f64,
    /// `(p' - p) / (L_i dl_rel)` from a re-solve.
    pub resolved: Vec<f64>,
    /// `-J^{-1} D_L Z`.
    pub implicit: Vec<f64>,
    /// Largest `|resolved - implicit| / |implicit|` over cities.
    pub max_rel_gap: f64,
    /// Base equilibrium the shock was applied to, re-polished at the tight tolerance.
    pub base_prices: Vec<f64>,
}

impl ShockResponse {
    pub fn all_positive(&self) -> bool {
        self.resolved.iter().all(|r| *r > 0.0)
    }

    /// The own price rises at least as much as every other price.
    pub fn own_response_largest(&self) -> bool {
        let own = self.resolved[self.city];
        self.resolved.iter().all(|r| own >= *r)
    }
}

/// Re-solves with `L_i^m (1 + dl_rel)` and compares the finite price change
/// with the implicit-function prediction. `config` should be tight enough to
/// resolve changes of order `dl_rel`; both solves warm-start from `base`.
pub fn population_shock(
    inst: &Instance,
    base: &PriceState,
    i: usize,
    dl_rel: f64,
    h_rel: f64,
    config: &SolverConfig,
) -> Result<ShockResponse> {
    if i >= inst.n() {
        return Err(Error::param("city", format!("index {i} out of range for {} cities", inst.n())));
    }
    if !(dl_rel > 0.0) {
        return Err(Error::param("dl_rel", format!("must be positive, got {dl_rel}")));
    }
    let warm = SolverConfig { init: InitialGuess::Custom(base.normalized()), ..config.clone() };
    let eq = solve(inst, &warm)?;
    let l = inst.cities.cities[i].urban_pop;
    let shocked = inst.with_urban_pop(i, l * (1.0 + dl_rel))?;
    let warm = SolverConfig { init: InitialGuess::Custom(eq.prices.clone()), ..config.clone() };
    let moved = solve(&shocked, &warm)?;
    let dl = l * (1.0 + dl_rel) - l;
    let resolved: Vec<f64> = moved.prices.p.iter().zip(&eq.prices.p).map(|(a, b)| (a - b) / dl).collect();

    let implicit = implicit_response(inst, &eq.prices, i, h_rel)?;
    let max_rel_gap = resolved
        .iter()
        .zip(&implicit)
        .map(|(r, m)| (r - m).abs() / m.abs())
        .fold(0.0, f64::max);
    Ok(ShockResponse { city: i, dl_rel, resolved, implicit, max_rel_gap, base_prices: eq.prices.p })
}

/// `dp / dL_i^m = -J^{-1} e_i c_a(q, p_i, q y_i^m)`.
pub fn implicit_response(inst: &Instance, prices: &PriceState, i: usize, h_rel: f64) -> Result<Vec<f64>> {
    let j = jacobian_fd(inst, prices, h_rel)?;
    let m = j.neg_inverse()?;
    let c = urban_demand_per_capita(inst, prices, i)?;
    let mut e = DVector::zeros(inst.n());
    e[i] = c;
    Ok((m * e).iter().cloned().collect())
}

/// Sign checks on a Jacobian against the tessellation's adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignChecks {
    /// Off-diagonals are `>= -eps` everywhere and `> eps` between adjacent regions.
    pub offdiag_signs_ok: bool,
    /// `J p << 0`.
    pub row_scaling_ok: bool,
    /// `J e <= eps`.
    pub row_sums_ok: bool,
    /// Smallest entry of `-J^{-1}`.
    pub neg_inverse_min: f64,
    /// Numerical zero used for the sign tests.
    pub eps: f64,
}

pub fn sign_checks(j: &JacobianFd, prices: &PriceState, adjacency: &[Vec<bool>]) -> Result<SignChecks> {
    let n = j.n();
    let scale = (0..n).map(|i| j.matrix[i][i].abs()).fold(0.0, f64::max);
    let eps = 1e-7 * scale;
    let mut offdiag_signs_ok = true;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let x = j.matrix[i][k];
            if x < -eps || (adjacency[i][k] && x <= eps) {
                offdiag_signs_ok = false;
            }
        }
    }
    let row_scaling_ok = j.apply(&prices.p).iter().all(|x| *x < 0.0);
    let row_sums_ok = j.row_sums().iter().all(|x| *x <= eps);
    let neg_inverse_min = j.neg_inverse()?.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SignChecks { offdiag_signs_ok, row_scaling_ok, row_sums_ok, neg_inverse_min, eps })
}

/// For every city `i`, `(-J^{-1})_{ii} >= (-J^{-1})_{ji}` for all `j`: a
/// shock to `L_i^m` raises `p_i` the most.
pub fn own_effect_dominates(neg_inv: &DMatrix<f64>) -> bool {
    let n = neg_inv.nrows();
    (0..n).all(|i| (0..n).all(|j| neg_inv[(i, i)] >= neg_inv[(j, i)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompstatReport {
    pub jacobian: Vec<Vec<f64>>,
    pub boundary_crossings: Vec<usize>,
    pub shocked_city: usize,
    pub dl_rel: f64,
    pub price_response: Vec<f64>,
    pub implicit_response: Vec<f64>,
    pub max_rel_gap: f64,
    pub all_responses_positive: bool,
    pub adjacency_connected: bool,
    pub offdiag_signs_ok: bool,
    pub row_scaling_ok: bool,
    pub row_sums_ok: bool,
    pub neg_inverse_min: f64,
    pub theorem2_holds: bool,
    pub delta_used: f64,
}

/// Full diagnostics at a solved equilibrium for a shock to city `i`.
pub fn compstat_report(
    inst: &Instance,
    eq: &SolveResult,
    i: usize,
    dl_rel: f64,
    h_rel: f64,
    config: &SolverConfig,
) -> Result<CompstatReport> {
    let shock = population_shock(inst, &eq.prices, i, dl_rel, h_rel, config)?;
    let base = PriceState { p: shock.base_prices.clone(), q: 1.0 };
    let j = jacobian_fd(inst, &base, h_rel)?;
    let tess = inst.tessellation(&base)?;
    let signs = sign_checks(&j, &base, &tess.adjacency)?;
    Ok(CompstatReport {
        boundary_crossings: j.boundary_crossings.clone(),
        jacobian: j.matrix,
        shocked_city: i,
        dl_rel,
        all_responses_positive: shock.all_positive(),
        theorem2_holds: shock.own_response_largest(),
        price_response: shock.resolved,
        implicit_response: shock.implicit,
        max_rel_gap: shock.max_rel_gap,
        adjacency_connected: tess.adjacency_connected(),
        offdiag_signs_ok: signs.offdiag_signs_ok,
        row_scaling_ok: signs.row_scaling_ok,
        row_sums_ok: signs.row_sums_ok,
        neg_inverse_min: signs.neg_inverse_min,
        delta_used: inst.params.delta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub prices: Vec<f64>,
    pub row_sums_ok: bool,
    pub theorem2_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScan {
    pub rows: Vec<DeltaRow>,
    /// Smallest scanned `delta` from which every larger scanned value passes
    /// both checks; `None` if the largest one fails.
    pub threshold: Option<f64>,
}

/// Solves at each `delta` and records the row-sum and own-effect checks,
/// in the order given.
pub fn delta_threshold_scan(inst: &Instance, deltas: &[f64], h_rel: f64, config: &SolverConfig) -> Result<DeltaScan> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut params = inst.params;
        params.delta = delta;
        let at = inst.with_params(params)?;
        let eq = solve(&at, config)?;
        let j = jacobian_fd(&at, &eq.prices, h_rel)?;
        let scale = (0..j.n()).map(|i| j.matrix[i][i].abs()).fold(0.0, f64::max);
        let row_sums_ok = j.row_sums().iter().all(|x| *x <= 1e-7 * scale);
        let theorem2_holds = own_effect_dominates(&j.neg_inverse()?);
        log::info!("delta {delta}: row sums ok {row_sums_ok}, own effect dominates {theorem2_holds}");
        rows.push(DeltaRow { delta, prices: eq.prices.p, row_sums_ok, theorem2_holds });
    }
    let mut sorted: Vec<&DeltaRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let mut threshold = None;
    for r in sorted.iter().rev() {
        if r.row_sums_ok && r.theorem2_holds {
            threshold = Some(r.delta);
        } else {
            break;
        }
    }
    Ok(DeltaScan { rows, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ces::EconomyParams;
    use crate::fields::euclidean_fields;
    use crate::grid::{City, CitySet, Grid};
    use crate::solver::Tolerance;

    fn symmetric() -> Instance {
        let g = Grid::uniform(9, 12, 1.0 / 12.0);
        let cs = CitySet::new(
            vec![City::new("w", 4, 3, 0.4, 1.0), City::new("e", 4, 8, 0.4, 1.0)],
            &g.layout,
        )
        .unwrap();
        let f = euclidean_fields(&g, &cs).unwrap();
        Instance::new(g, cs, f, EconomyParams::new(-1.0, 1.0).unwrap(), Quadrature::SubCell).unwrap()
    }

    #[test]
    fn symmetric_jacobian() {
        let inst = symmetric();
        let eq = solve(&inst, &SolverConfig::default()).unwrap();
        let p = PriceState::new(vec![eq.prices.p[0]; 2], 1.0).unwrap();
        let j = jacobian_fd(&inst, &p, DEFAULT_H_REL).unwrap();
        let m = &j.matrix;
        assert!((m[0][0] - m[1][1]).abs() < 1e-8 * m[0][0].abs());
        assert!((m[0][1] - m[1][0]).abs() < 1e-8 * m[0][0].abs());
        assert!(m[0][1] > 0.0);
        assert!(j.apply(&p.p).iter().all(|x| *x < 0.0));
    }

    #[test]
    fn scan_has_one_row_per_delta() {
        let inst = symmetric();
        let cfg = SolverConfig { tol: Tolerance::RelativeToOutput(1e-10), ..Default::default() };
        let scan = delta_threshold_scan(&inst, &[0.05, 0.2, 1.0, 5.0, 25.0], DEFAULT_H_REL, &cfg).unwrap();
        assert_eq!(scan.rows.len(), 5);
        assert_eq!(scan.rows[2].delta, 1.0);
    }

    #[test]
    fn own_effect_check() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert!(own_effect_dominates(&m));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 3.0]);
        assert!(!own_effect_dominates(&m));
    }

    #[test]
    fn rejects_bad_steps() {
        let inst = symmetric();
        assert!(jacobian_fd(&inst, &PriceState::ones(2), 1.5).is_err());
        assert!(jacobian_fd(&inst, &PriceState::ones(2), 0.0).is_err());
    }
}
