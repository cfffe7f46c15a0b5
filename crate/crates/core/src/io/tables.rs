//! CSV tables: cities in, prices and adjacency out.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ces::PriceState;
use crate::error::{Error, Result};
use crate::grid::{City, CitySet, Layout};
use crate::tessellation::{Tessellation, WeightVector};

#[derive(Debug, Serialize, Deserialize)]
struct CityRecord {
    id: String,
    row: usize,
    col: usize,
    urban_pop: f64,
    urban_output: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::ParseLine { path: path.to_path_buf(), line: pos.line() as usize, message: e.to_string() },
        None => Error::Parse { path: path.to_path_buf(), message: e.to_string() },
    }
}

/// Cities from CSV with header `id,row,col,urban_pop,urban_output`; rows and
/// columns are 0-based with row 0 at the northern edge.
pub fn parse_cities<R: Read>(reader: R, layout: &Layout, path: &Path) -> Result<CitySet> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut cities = Vec::new();
    for rec in rd.deserialize::<CityRecord>() {
        let r = rec.map_err(|e| csv_error(path, e))?;
        cities.push(City::new(r.id, r.row, r.col, r.urban_pop, r.urban_output));
    }
    CitySet::new(cities, layout)
}

pub fn read_cities(path: &Path, layout: &Layout) -> Result<CitySet> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cities(f, layout, path)
}

pub fn write_cities<W: Write>(w: W, cities: &CitySet) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for c in &cities.cities {
        wr.serialize(CityRecord {
            id: c.id.clone(),
            row: c.row,
            col: c.col,
            urban_pop: c.urban_pop,
            urban_output: c.urban_output,
        })
        .map_err(|e| csv_error(Path::new("<cities>"), e))?;
    }
    wr.flush().map_err(|e| Error::io("<cities>", e))
}

/// `city_id,price,weight`, one line per city in index order.
pub fn write_prices<W: Write>(w: W, cities: &CitySet, prices: &PriceState, weights: &WeightVector) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e| csv_error(Path::new("<prices>"), e);
    wr.write_record(["city_id", "price", "weight"]).map_err(err)?;
    for (i, c) in cities.cities.iter().enumerate() {
        wr.write_record([c.id.clone(), format!("{:.16e}", prices.p[i]), format!("{:.16e}", weights.lambda[i])])
            .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<prices>", e))
}

/// Reads a weight column back from a prices file, or any CSV with
/// `city_id,weight` columns.
pub fn read_weights(path: &Path, cities: &CitySet) -> Result<WeightVector> {
    #[derive(Deserialize)]
    struct Row {
        city_id: String,
        weight: f64,
    }
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(f);
    let mut lambda = vec![None; cities.len()];
    for rec in rd.deserialize::<Row>() {
        let r = rec.map_err(|e| csv_error(path, e))?;
        let i = cities.cities.iter().position(|c| c.id == r.city_id).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("unknown city id {:?}", r.city_id),
        })?;
        lambda[i] = Some(r.weight);
    }
    let lambda = lambda
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                message: format!("no weight for city {:?}", cities.cities[i].id),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    WeightVector::new(lambda)
}

/// Edge list `region_a,region_b` (1-based, `a < b`) of the adjacency graph.
pub fn write_adjacency<W: Write>(w: W, tess: &Tessellation) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e| csv_error(Path::new("<adjacency>"), e);
    wr.write_record(["region_a", "region_b"]).map_err(err)?;
    for (a, b) in tess.edges() {
        wr.write_record([(a + 1).to_string(), (b + 1).to_string()]).map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<adjacency>", e))
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}
