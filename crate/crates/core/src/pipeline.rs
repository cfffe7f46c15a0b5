//! End-to-end commands: each reads a [`RunConfig`], runs the relevant stages
//! and writes its artifacts to `out_dir`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::compstat::{compstat_report, delta_threshold_scan, CompstatReport, DeltaScan};
use crate::economy::Instance;
use crate::error::{Error, Result};
use crate::fields::{eikonal_fields, euclidean_fields, DistanceFieldSet};
use crate::grid::{CitySet, Grid};
use crate::io::config::{DistanceMode, RunConfig};
use crate::io::ingest::ingest_files;
use crate::io::raster::{read_assignment, write_assignment, AsciiGrid};
use crate::io::synth::generate;
use crate::io::tables::{read_weights, write_adjacency, write_cities, write_file, write_prices};
use crate::metrics::{relative_improvement, MetricValues};
use crate::solver::{solve, verify_equilibrium, SolveResult, SolverConfig, VerificationReport};
use crate::tessellation::{assign, Tessellation, WeightVector};

pub fn distance_fields(grid: &Grid, cities: &CitySet, mode: DistanceMode) -> Result<DistanceFieldSet> {
    match mode {
        DistanceMode::Euclidean => euclidean_fields(grid, cities),
        DistanceMode::Eikonal => eikonal_fields(grid, cities),
    }
}

/// Ingests the configured inputs and computes distance fields.
pub fn build_instance(cfg: &RunConfig) -> Result<Instance> {
    cfg.validate()?;
    let (grid, cities) = ingest_files(cfg)?;
    let fields = distance_fields(&grid, &cities, cfg.distance_mode)?;
    Instance::new(grid, cities, fields, cfg.economy()?, cfg.quadrature)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = RunConfig::require(&cfg.paths.out_dir, "out_dir")?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionSummary {
    pub city_id: String,
    pub price: f64,
    pub weight: f64,
    pub cells: usize,
    pub area: f64,
    pub excess_demand: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub alpha: f64,
    pub delta: f64,
    pub distance_mode: DistanceMode,
    pub quadrature: crate::economy::Quadrature,
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub tol: f64,
    pub potential: f64,
    pub regions: Vec<RegionSummary>,
    pub adjacency_edges: Vec<(usize, usize)>,
    pub verification: VerificationReport,
}

fn summarize(cfg: &RunConfig, inst: &Instance, r: &SolveResult, verification: VerificationReport) -> SolveReport {
    let regions = inst
        .cities
        .cities
        .iter()
        .enumerate()
        .map(|(i, c)| RegionSummary {
            city_id: c.id.clone(),
            price: r.prices.p[i],
            weight: r.weights.lambda[i],
            cells: r.tessellation.region_sizes[i],
            area: r.tessellation.region_area(i),
            excess_demand: r.excess[i],
        })
        .collect();
    SolveReport {
        alpha: cfg.alpha,
        delta: cfg.delta,
        distance_mode: cfg.distance_mode,
        quadrature: cfg.quadrature,
        iterations: r.iterations,
        grad_inf_norm: r.grad_inf_norm,
        tol: r.tol,
        potential: r.potential,
        regions,
        adjacency_edges: r.tessellation.edges().into_iter().map(|(a, b)| (a + 1, b + 1)).collect(),
        verification,
    }
}

/// Solves the equilibrium and writes `prices.csv`, `assignment.asc`,
/// `adjacency.csv`, `report.json` and, if requested, `convergence.csv`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveReport> {
    let inst = build_instance(cfg)?;
    let dir = out_dir(cfg)?;
    let solver = SolverConfig { record_trajectory: cfg.write_trajectory, ..cfg.solver.clone() };
    let result = solve(&inst, &solver)?;
    let verification = verify_equilibrium(&result, &inst, cfg.safety)?;
    write_file(&dir.join("prices.csv"), |w| write_prices(w, &inst.cities, &result.prices, &result.weights))?;
    write_assignment(&result.tessellation, &dir.join("assignment.asc"))?;
    write_file(&dir.join("adjacency.csv"), |w| write_adjacency(w, &result.tessellation))?;
    if let Some(t) = &result.trajectory {
        t.save_csv(&dir.join("convergence.csv"))?;
    }
    let report = summarize(cfg, &inst, &result, verification);
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TessellateReport {
    pub distance_mode: DistanceMode,
    pub weights: Vec<f64>,
    pub region_cells: Vec<usize>,
    pub adjacency_edges: Vec<(usize, usize)>,
}

/// Tessellation for given constant weights (zero unless `weights` or
/// `weights_csv` is set).
pub fn cmd_tessellate(cfg: &RunConfig) -> Result<(Tessellation, TessellateReport)> {
    cfg.validate()?;
    let (grid, cities) = ingest_files(cfg)?;
    let fields = distance_fields(&grid, &cities, cfg.distance_mode)?;
    let weights = match (&cfg.paths.weights, &cfg.weights) {
        (Some(path), _) => read_weights(path, &cities)?,
        (None, Some(w)) => WeightVector::new(w.clone())?,
        (None, None) => WeightVector::zeros(cities.len()),
    };
    let tess = assign(&fields, &weights)?;
    let dir = out_dir(cfg)?;
    write_assignment(&tess, &dir.join("assignment.asc"))?;
    write_file(&dir.join("adjacency.csv"), |w| write_adjacency(w, &tess))?;
    let report = TessellateReport {
        distance_mode: cfg.distance_mode,
        weights: weights.lambda,
        region_cells: tess.region_sizes.clone(),
        adjacency_edges: tess.edges().into_iter().map(|(a, b)| (a + 1, b + 1)).collect(),
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok((tess, report))
}

/// Writes one `distance_<city id>.asc` per city.
pub fn cmd_distance_fields(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (grid, cities) = ingest_files(cfg)?;
    let fields = distance_fields(&grid, &cities, cfg.distance_mode)?;
    let dir = out_dir(cfg)?;
    let mut written = Vec::new();
    for (c, f) in cities.cities.iter().zip(&fields.fields) {
        let path = dir.join(format!("distance_{}.asc", c.id));
        AsciiGrid::from_values(&grid.layout, f).write(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeImprovement {
    pub hausdorff_directional: Option<f64>,
    pub hausdorff_symmetric: Option<f64>,
    pub area_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    /// Distances from the reference to the candidate.
    pub candidate: MetricValues,
    /// Distances from the reference to the baseline.
    pub baseline: Option<MetricValues>,
    /// `(d(ref, candidate) - d(ref, baseline)) / d(ref, baseline)`; negative
    /// means the candidate fits the reference better.
    pub relative_to_baseline: Option<RelativeImprovement>,
}

pub fn compare_partitions(
    reference: &Tessellation,
    candidate: &Tessellation,
    baseline: Option<&Tessellation>,
) -> Result<CompareReport> {
    let cand = MetricValues::between(reference, candidate)?;
    let base = baseline.map(|b| MetricValues::between(reference, b)).transpose()?;
    let rel = base.map(|b| RelativeImprovement {
        hausdorff_directional: relative_improvement(cand.hausdorff_directional, b.hausdorff_directional),
        hausdorff_symmetric: relative_improvement(cand.hausdorff_symmetric, b.hausdorff_symmetric),
        area_distance: relative_improvement(cand.area_distance, b.area_distance),
    });
    Ok(CompareReport { candidate: cand, baseline: base, relative_to_baseline: rel })
}

/// Compares the `candidate` assignment raster against `reference`, and the
/// `baseline` against `reference` when given. Writes `compare.json`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareReport> {
    let reference = read_assignment(&RunConfig::require(&cfg.paths.reference, "reference")?, None)?;
    let n = Some(reference.n_regions);
    let candidate = read_assignment(&RunConfig::require(&cfg.paths.candidate, "candidate")?, n)?;
    let baseline = cfg.paths.baseline.as_deref().map(|p| read_assignment(p, n)).transpose()?;
    let report = compare_partitions(&reference, &candidate, baseline.as_ref())?;
    write_json(&out_dir(cfg)?.join("compare.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompstatOutput {
    pub report: CompstatReport,
    pub delta_scan: Option<DeltaScan>,
}

/// Solves, shocks `shock_city` by `dl_rel`, and scans `deltas` if given.
/// Writes `compstat.json`.
pub fn cmd_compstat(cfg: &RunConfig) -> Result<CompstatOutput> {
    let inst = build_instance(cfg)?;
    let dir = out_dir(cfg)?;
    let i = match &cfg.shock_city {
        Some(id) => inst
            .cities
            .cities
            .iter()
            .position(|c| &c.id == id)
            .ok_or_else(|| Error::param("shock_city", format!("no city with id {id:?}")))?,
        None => 0,
    };
    let eq = solve(&inst, &cfg.solver)?;
    let report = compstat_report(&inst, &eq, i, cfg.dl_rel, cfg.h_rel, &cfg.solver)?;
    let delta_scan = if cfg.deltas.is_empty() {
        None
    } else {
        Some(delta_threshold_scan(&inst, &cfg.deltas, cfg.h_rel, &cfg.solver)?)
    };
    let out = CompstatOutput { report, delta_scan };
    write_json(&dir.join("compstat.json"), &out)?;
    Ok(out)
}

/// Writes a synthetic world (`population.asc`, `elevation.asc`,
/// `water.asc`, `cities.csv`) and a `run.cfg` pointing at it.
pub fn cmd_generate(cfg: &RunConfig) -> Result<PathBuf> {
    let world = generate(&cfg.synth)?;
    let dir = out_dir(cfg)?;
    world.population.write(&dir.join("population.asc"))?;
    world.elevation.write(&dir.join("elevation.asc"))?;
    world.water.write_integer(&dir.join("water.asc"))?;
    write_file(&dir.join("cities.csv"), |w| write_cities(w, &world.cities))?;
    let run = format!(
        "# synthetic world, seed {seed}\n\
         population = population.asc\n\
         elevation = elevation.asc\n\
         water = water.asc\n\
         cities = cities.csv\n\
         out_dir = out\n\
         alpha = {alpha}\n\
         delta = {delta}\n\
         ag_labor_share = {share}\n\
         pop_floor = {floor}\n\
         distance_mode = eikonal\n\
         v_max = {v_max}\n",
        seed = cfg.synth.seed,
        alpha = cfg.alpha,
        delta = cfg.delta,
        share = cfg.ag_labor_share,
        floor = cfg.pop_floor,
        v_max = cfg.v_max,
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, run).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
