//! Gradient ascent on the potential. The equilibrium is the unique maximizer
//! with `q = 1`, and the ascent direction `Z_i v(1, p_i)` is available in
//! closed form, so each iteration costs one evaluation of the economy.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ces::PriceState;
use crate::economy::{Evaluation, Instance};
use crate::error::{Error, Result};
use crate::tessellation::{assign, Tessellation, WeightVector};

/// Relative size of `|F(p') - F(p)|` below which the change is rounding
/// noise and the Armijo test cannot discriminate.
const NOISE_FLOOR: f64 = 1e-13;
/// Halvings before a line search gives up.
const MAX_SHRINKS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepMode {
    Fixed { tau: f64 },
    /// Armijo backtracking on the gradient direction. The first iteration
    /// tries `tau0`; later ones start from the Barzilai-Borwein step.
    Backtracking { tau0: f64, shrink: f64, armijo: f64 },
    /// Limited-memory BFGS on `-F` with the same Armijo and positivity guards.
    Lbfgs { memory: usize, shrink: f64, armijo: f64 },
}

impl Default for StepMode {
    fn default() -> Self {
        StepMode::Backtracking { tau0: 1.0, shrink: 0.5, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    #[default]
    Ones,
    /// Any positive price state; it is normalized to `q = 1` first.
    Custom(PriceState),
}

/// Threshold on `max_i |Z_i v(1, p_i)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    /// Multiple of the instance's total rural output.
    RelativeToOutput(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::RelativeToOutput(1e-8)
    }
}

impl Tolerance {
    pub fn resolve(&self, inst: &Instance) -> f64 {
        match *self {
            Tolerance::Absolute(t) => t,
            Tolerance::RelativeToOutput(r) => r * inst.total_rural_output(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: Tolerance,
    pub max_iter: usize,
    pub step_mode: StepMode,
    pub init: InitialGuess,
    /// Keep the per-iteration log in the result.
    pub record_trajectory: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: Tolerance::default(),
            max_iter: 10_000,
            step_mode: StepMode::default(),
            init: InitialGuess::Ones,
            record_trajectory: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tol = match self.tol {
            Tolerance::Absolute(t) | Tolerance::RelativeToOutput(t) => t,
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::param("tol", format!("must be positive, got {tol}")));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be positive"));
        }
        let check_shrink = |shrink: f64, armijo: f64| {
            if !(shrink > 0.0 && shrink < 1.0) {
                return Err(Error::param("shrink", format!("must lie in (0, 1), got {shrink}")));
            }
            if !(armijo > 0.0 && armijo < 1.0) {
                return Err(Error::param("armijo", format!("must lie in (0, 1), got {armijo}")));
            }
            Ok(())
        };
        match self.step_mode {
            StepMode::Fixed { tau } => {
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(Error::param("tau", format!("must be positive, got {tau}")));
                }
            }
            StepMode::Backtracking { tau0, shrink, armijo } => {
                if !(tau0 > 0.0 && tau0.is_finite()) {
                    return Err(Error::param("tau0", format!("must be positive, got {tau0}")));
                }
                check_shrink(shrink, armijo)?;
            }
            StepMode::Lbfgs { memory, shrink, armijo } => {
                if memory == 0 {
                    return Err(Error::param("memory", "must be positive"));
                }
                check_shrink(shrink, armijo)?;
            }
        }
        if let InitialGuess::Custom(p) = &self.init {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub grad_inf_norm: f64,
    pub potential: f64,
    /// Step length taken from this iterate (0 for the last one).
    pub step: f64,
}

#[derive(Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("len", &self.points.len())
            .field("last", &self.points.last())
            .finish()
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Parse { path: "<trajectory>".into(), message: e.to_string() };
        wr.write_record(["iteration", "grad_inf_norm", "potential", "step"]).map_err(csv_err)?;
        for p in &self.points {
            wr.write_record([
                p.iteration.to_string(),
                format!("{:.16e}", p.grad_inf_norm),
                format!("{:.16e}", p.potential),
                format!("{:.16e}", p.step),
            ])
            .map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::io("<trajectory>", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub prices: PriceState,
    pub weights: WeightVector,
    pub tessellation: Tessellation,
    pub iterations: usize,
    pub grad_inf_norm: f64,
    /// The absolute tolerance the run was held to.
    pub tol: f64,
    pub excess: Vec<f64>,
    pub potential: f64,
    pub trajectory: Option<Trajectory>,
}

fn initial_prices(inst: &Instance, init: &InitialGuess) -> Result<PriceState> {
    match init {
        InitialGuess::Ones => Ok(PriceState::ones(inst.n())),
        InitialGuess::Custom(p) => {
            if p.len() != inst.n() {
                return Err(Error::LengthMismatch {
                    what: "initial prices",
                    got: p.len(),
                    expected: inst.n(),
                });
            }
            p.validate()?;
            Ok(p.normalized())
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn step_from(p: &PriceState, dir: &[f64], tau: f64) -> Option<PriceState> {
    let next: Vec<f64> = p.p.iter().zip(dir).map(|(pi, di)| pi + tau * di).collect();
    next.iter()
        .all(|x| *x > 0.0 && x.is_finite())
        .then(|| PriceState { p: next, q: 1.0 })
}

/// Backtracking along `dir` from `eval` until the Armijo condition holds
/// and prices stay positive. Returns the accepted evaluation and step.
fn line_search(
    inst: &Instance,
    eval: &Evaluation,
    dir: &[f64],
    tau0: f64,
    shrink: f64,
    armijo: f64,
) -> Result<Option<(Evaluation, f64)>> {
    let slope = dot(&eval.gradient, dir);
    let mut tau = tau0;
    for _ in 0..MAX_SHRINKS {
        if let Some(p) = step_from(&eval.prices, dir, tau) {
            let next = inst.evaluate(&p)?;
            let gain = next.potential - eval.potential;
            if gain >= armijo * tau * slope {
                return Ok(Some((next, tau)));
            }
            let noise = NOISE_FLOOR * eval.potential.abs().max(next.potential.abs());
            if gain.abs() <= noise && dot(&next.gradient, dir) >= 0.0 {
                return Ok(Some((next, tau)));
            }
        }
        tau *= shrink;
    }
    Ok(None)
}

/// Maximizes the potential from the configured initial guess until
/// `max_i |Z_i v(1, p_i)| <= tol`.
pub fn solve(inst: &Instance, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let tol = config.tol.resolve(inst);
    let mut eval = inst.evaluate(&initial_prices(inst, &config.init)?)?;
    let mut traj = Trajectory::default();
    // L-BFGS memory of (s, y) pairs for -F
    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    // last accepted step and gradient change, for the next first trial
    let mut previous: Option<(Vec<f64>, Vec<f64>, f64)> = None;

    for iteration in 0..=config.max_iter {
        let gnorm = eval.grad_inf_norm();
        traj.points.push(TrajectoryPoint { iteration, grad_inf_norm: gnorm, potential: eval.potential, step: 0.0 });
        log::debug!("iter {iteration}: |grad| = {gnorm:.3e}, F = {:.12e}", eval.potential);
        if gnorm <= tol {
            log::info!("converged after {iteration} iterations, |grad| = {gnorm:.3e}");
            let tessellation = inst.tessellation_from(&eval)?;
            return Ok(SolveResult {
                prices: eval.prices.clone(),
                weights: eval.weights.clone(),
                tessellation,
                iterations: iteration,
                grad_inf_norm: gnorm,
                tol,
                excess: eval.excess.z.clone(),
                potential: eval.potential,
                trajectory: config.record_trajectory.then_some(traj),
            });
        }
        if iteration == config.max_iter {
            break;
        }

        let (next, tau) = match config.step_mode {
            StepMode::Fixed { tau } => {
                let next_p: Vec<f64> = eval.prices.p.iter().zip(&eval.gradient).map(|(p, g)| p + tau * g).collect();
                if let Some((index, &value)) = next_p.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
                    return Err(Error::StepLeftPositiveOrthant { index, value });
                }
                (inst.evaluate(&PriceState { p: next_p, q: 1.0 })?, tau)
            }
            StepMode::Backtracking { tau0, shrink, armijo } => {
                let first = match &previous {
                    Some((s, y, tau)) => barzilai_borwein(s, y).unwrap_or(tau / shrink),
                    None => tau0,
                };
                match line_search(inst, &eval, &eval.gradient.clone(), first, shrink, armijo)? {
                    Some(found) => found,
                    None => {
                        return Err(Error::LineSearchFailed {
                            iteration,
                            grad_inf_norm: gnorm,
                            trajectory: Box::new(traj),
                        })
                    }
                }
            }
            StepMode::Lbfgs { memory, shrink, armijo } => {
                let mut dir = lbfgs_direction(&eval.gradient, &history);
                let mut tau0 = 1.0;
                if dot(&dir, &eval.gradient) <= 0.0 {
                    history.clear();
                    dir = eval.gradient.clone();
                }
                if history.is_empty() {
                    // first step: scale so the largest price move is 10%
                    let m = dir
                        .iter()
                        .zip(&eval.prices.p)
                        .map(|(d, p)| (d / p).abs())
                        .fold(0.0, f64::max);
                    tau0 = if m > 0.0 { 0.1 / m } else { 1.0 };
                }
                match line_search(inst, &eval, &dir, tau0, shrink, armijo)? {
                    Some((next, tau)) => {
                        let s: Vec<f64> = dir.iter().map(|d| tau * d).collect();
                        // y for the minimization of -F
                        let y: Vec<f64> = eval.gradient.iter().zip(&next.gradient).map(|(g0, g1)| g0 - g1).collect();
                        if dot(&s, &y) > 1e-300 {
                            history.push_back((s, y));
                            if history.len() > memory {
                                history.pop_front();
                            }
                        }
                        (next, tau)
                    }
                    None if !history.is_empty() => {
                        history.clear();
                        continue_with_gradient(inst, &eval, shrink, armijo, iteration, gnorm, &traj)?
                    }
                    None => {
                        return Err(Error::LineSearchFailed {
                            iteration,
                            grad_inf_norm: gnorm,
                            trajectory: Box::new(traj),
                        })
                    }
                }
            }
        };
        if let Some(last) = traj.points.last_mut() {
            last.step = tau;
        }
        let s: Vec<f64> = next.prices.p.iter().zip(&eval.prices.p).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.gradient.iter().zip(&eval.gradient).map(|(a, b)| a - b).collect();
        previous = Some((s, y, tau));
        eval = next;
    }

    let gnorm = eval.grad_inf_norm();
    Err(Error::NotConverged {
        iterations: config.max_iter,
        grad_inf_norm: gnorm,
        tol,
        prices: eval.prices.p.clone(),
        trajectory: Box::new(traj),
    })
}

fn continue_with_gradient(
    inst: &Instance,
    eval: &Evaluation,
    shrink: f64,
    armijo: f64,
    iteration: usize,
    gnorm: f64,
    traj: &Trajectory,
) -> Result<(Evaluation, f64)> {
    line_search(inst, eval, &eval.gradient.clone(), 1.0, shrink, armijo)?.ok_or_else(|| {
        Error::LineSearchFailed { iteration, grad_inf_norm: gnorm, trajectory: Box::new(traj.clone()) }
    })
}

/// `s.s / -(s.y)`: the secant step length for ascent on a concave function.
fn barzilai_borwein(s: &[f64], y: &[f64]) -> Option<f64> {
    let sy = -dot(s, y);
    let tau = dot(s, s) / sy;
    (sy > 0.0 && tau.is_finite() && tau > 0.0).then_some(tau)
}

/// Two-loop recursion for the ascent direction `H * grad`.
fn lbfgs_direction(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    // minimizing -F: gradient of -F is -grad, direction is -H(-grad) = H grad
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    if let Some((s, y)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y), (a, rho)) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub excess: Vec<f64>,
    pub excess_manufacturing: f64,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Recomputes everything at the reported prices and checks market clearing,
/// the manufacturing market via Walras, and the reported tessellation.
///
/// The solver stops on `|Z_i v_i| <= tol`, so the farm-market bound is
/// `tol * safety / min(1, min_i v_i)`.
pub fn verify_equilibrium(state: &SolveResult, inst: &Instance, safety: f64) -> Result<VerificationReport> {
    let eval = inst.evaluate(&state.prices)?;
    let v_min = eval.marginal_utility.iter().cloned().fold(f64::INFINITY, f64::min);
    let farm_limit = state.tol * safety / v_min.min(1.0);
    let mut checks = Vec::new();
    let mut failures = Vec::new();

    for (i, &z) in eval.excess.z.iter().enumerate() {
        let passed = z.abs() <= farm_limit;
        if !passed {
            failures.push(format!("farm market {i}: Z = {z:.6e} exceeds {farm_limit:.3e}"));
        }
        checks.push(Check { name: format!("farm_market_{i}"), value: z, limit: farm_limit, passed });
    }
    let p_sum: f64 = state.prices.p.iter().sum();
    let m_limit = farm_limit * p_sum;
    let z_m = eval.excess.z_m;
    let passed = z_m.abs() <= m_limit;
    if !passed {
        failures.push(format!("manufacturing market: Z = {z_m:.6e} exceeds {m_limit:.3e}"));
    }
    checks.push(Check { name: "manufacturing_market".into(), value: z_m, limit: m_limit, passed });

    let fresh = assign(&inst.fields, &eval.weights)?;
    let mismatched = fresh
        .assignment
        .iter()
        .zip(&state.tessellation.assignment)
        .filter(|(a, b)| a != b)
        .count();
    let passed = mismatched == 0 && fresh.n_regions == state.tessellation.n_regions;
    if !passed {
        failures.push(format!("tessellation: {mismatched} cells differ from the recomputed assignment"));
    }
    checks.push(Check { name: "tessellation".into(), value: mismatched as f64, limit: 0.0, passed });

    if failures.is_empty() {
        Ok(VerificationReport { excess: eval.excess.z, excess_manufacturing: z_m, checks })
    } else {
        Err(Error::VerificationFailed(failures))
    }
}
