mod common;

use std::fs;
use std::path::Path;

use common::random_partition;
use marketareas_core::io::{read_assignment, write_assignment};
use marketareas_core::pipeline::{cmd_compare, cmd_generate, cmd_solve, cmd_tessellate};
use marketareas_core::{assign, euclidean_fields, Error, Grid, Layout, RunConfig, WeightVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const HEADER_5X5: &str = "ncols 5\nnrows 5\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n";

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn five_by_five(dir: &Path, cities: &str) -> RunConfig {
    write(
        dir,
        "pop.asc",
        &format!("{HEADER_5X5}10 10 10 10 10\n10 0 10 10 10\n10 10 10 10 10\n10 10 10 10 10\n10 10 10 10 20\n"),
    );
    write(dir, "elev.asc", &format!("{HEADER_5X5}{}", "400 400 400 400 400\n".repeat(5)));
    write(dir, "water.asc", &format!("{HEADER_5X5}{}", "0 0 1 0 0\n".repeat(5)));
    write(dir, "cities.csv", cities);
    let cfg_text = "population = pop.asc\nelevation = elev.asc\nwater = water.asc\ncities = cities.csv\nout_dir = out\n";
    write(dir, "run.cfg", cfg_text);
    RunConfig::read(&dir.join("run.cfg")).unwrap()
}

#[test]
fn ingests_a_small_raster_world() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = five_by_five(tmp.path(), "id,row,col,urban_pop,urban_output\nwest,2,0,3,1\neast,2,4,2,1.5\n");
    let (grid, cities) = marketareas_core::io::ingest_files(&cfg).unwrap();
    assert_eq!(grid.layout.n_active(), 25);
    assert_eq!(cities.len(), 2);
    assert_eq!(cities.cities[1].id, "east");
    // the empty cell counts as one person before the labour share is applied
    assert!((grid.rural_pop[6] - 0.03).abs() < 1e-15);
    assert!((grid.rural_pop[24] - 0.6).abs() < 1e-15);
    assert!(grid.rural_output.iter().all(|y| *y == 1.0));
    assert_eq!(grid.speed[2], 1.0);
}

#[test]
fn city_on_nodata_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = five_by_five(tmp.path(), "id,row,col,urban_pop,urban_output\nwest,2,0,3,1\nlost,0,3,2,1\n");
    let pop = format!("{HEADER_5X5}10 10 10 -9999 10\n{}", "10 10 10 10 10\n".repeat(4));
    write(tmp.path(), "pop.asc", &pop);
    match marketareas_core::io::ingest_files(&cfg) {
        Err(e @ Error::CityOnInactiveCell { .. }) => assert!(e.to_string().contains("\"lost\"")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_city_row_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = five_by_five(tmp.path(), "id,row,col,urban_pop,urban_output\nwest,2,0,3,1\neast,2,four,2,1\n");
    match marketareas_core::io::ingest_files(&cfg) {
        Err(Error::ParseLine { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

fn generated(dir: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.synth.seed = seed;
    cfg.synth.rows = 24;
    cfg.synth.cols = 28;
    cfg.synth.n_cities = 4;
    cfg.paths.out_dir = Some(dir.to_path_buf());
    let run = cmd_generate(&cfg).unwrap();
    RunConfig::read(&run).unwrap()
}

#[test]
fn solving_twice_writes_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = generated(tmp.path(), 11);
    let out = |name: &str| tmp.path().join(name);
    cfg.paths.out_dir = Some(out("first"));
    let first = cmd_solve(&cfg).unwrap();
    cfg.paths.out_dir = Some(out("second"));
    cmd_solve(&cfg).unwrap();
    assert!(first.verification.checks.iter().all(|c| c.passed));
    for f in ["prices.csv", "assignment.asc", "adjacency.csv", "report.json"] {
        let a = fs::read(out("first").join(f)).unwrap();
        let b = fs::read(out("second").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn comparing_a_partition_with_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = generated(tmp.path(), 3);
    cfg.paths.out_dir = Some(tmp.path().join("solved"));
    cmd_solve(&cfg).unwrap();
    cfg.paths.out_dir = Some(tmp.path().join("voronoi"));
    cfg.set("distance_mode", "euclidean", tmp.path()).unwrap();
    cmd_tessellate(&cfg).unwrap();

    let solved = tmp.path().join("solved/assignment.asc");
    cfg.paths.reference = Some(solved.clone());
    cfg.paths.candidate = Some(solved);
    cfg.paths.baseline = Some(tmp.path().join("voronoi/assignment.asc"));
    cfg.paths.out_dir = Some(tmp.path().join("cmp"));
    let report = cmd_compare(&cfg).unwrap();
    assert_eq!(report.candidate.hausdorff_directional, 0.0);
    assert_eq!(report.candidate.area_distance, 0.0);
    let rel = report.relative_to_baseline.unwrap();
    assert_eq!(rel.area_distance, Some(-1.0));
    assert_eq!(rel.hausdorff_directional, Some(-1.0));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("cmp/compare.json")).unwrap()).unwrap();
    assert_eq!(json["relative_to_baseline"]["area_distance"], -1.0);
}

#[test]
fn zero_weights_reproduce_the_plain_voronoi_diagram() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = generated(tmp.path(), 5);
    cfg.set("distance_mode", "euclidean", tmp.path()).unwrap();
    cfg.paths.out_dir = Some(tmp.path().join("t"));
    let (tess, report) = cmd_tessellate(&cfg).unwrap();
    assert!(report.weights.iter().all(|w| *w == 0.0));
    let (grid, cities) = marketareas_core::io::ingest_files(&cfg).unwrap();
    let plain = assign(&euclidean_fields(&grid, &cities).unwrap(), &WeightVector::zeros(cities.len())).unwrap();
    assert_eq!(tess, plain);
    let back = read_assignment(&tmp.path().join("t/assignment.asc"), Some(cities.len())).unwrap();
    assert_eq!(back, plain);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn assignment_rasters_round_trip(rows in 2usize..12, cols in 2usize..12, n in 1usize..5, seed in any::<u64>(), holes in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut active = vec![true; rows * cols];
        // knock out a few corner cells; corners never disconnect the grid
        let corners = [0, cols - 1, (rows - 1) * cols, rows * cols - 1];
        for &c in corners.iter().take(holes) {
            active[c] = false;
        }
        let layout = Layout::with_mask(rows, cols, 0.75, active);
        let tess = random_partition(&mut rng, &layout, n);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("a.asc");
        write_assignment(&tess, &path).unwrap();
        let back = read_assignment(&path, Some(n)).unwrap();
        prop_assert_eq!(back, tess);
    }
}

#[test]
fn real_rasters_round_trip_bit_for_bit() {
    let g = Grid::uniform(3, 4, 0.1);
    let values: Vec<f64> = (0..12).map(|i| (i as f64).sqrt() * std::f64::consts::PI / 7.0).collect();
    let grid = marketareas_core::AsciiGrid::from_values(&g.layout, &values);
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("r.asc");
    grid.write(&path).unwrap();
    let back = marketareas_core::AsciiGrid::read(&path).unwrap();
    assert_eq!(back.values.iter().map(|v| v.unwrap()).collect::<Vec<_>>(), values);
}
