//! ESRI ASCII grids. Row 0 is the northern edge; `NODATA_value` marks
//! inactive cells.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Layout;
use crate::tessellation::Tessellation;

pub const NODATA: f64 = -9999.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub n_rows: usize,
    pub n_cols: usize,
    pub xll: f64,
    pub yll: f64,
    pub cell_size: f64,
    pub nodata: f64,
    /// Row-major, north first; `None` where the file holds the NODATA value.
    pub values: Vec<Option<f64>>,
}

impl AsciiGrid {
    pub fn from_values(layout: &Layout, values: &[f64]) -> Self {
        AsciiGrid {
            n_rows: layout.n_rows,
            n_cols: layout.n_cols,
            xll: layout.xll,
            yll: layout.yll,
            cell_size: layout.cell_size,
            nodata: NODATA,
            values: values
                .iter()
                .zip(&layout.active)
                .map(|(v, a)| a.then_some(*v))
                .collect(),
        }
    }

    pub fn active(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_some).collect()
    }

    pub fn layout(&self) -> Layout {
        let mut l = Layout::with_mask(self.n_rows, self.n_cols, self.cell_size, self.active());
        l.xll = self.xll;
        l.yll = self.yll;
        l
    }

    /// Values with NODATA replaced by `fill`.
    pub fn filled(&self, fill: f64) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(fill)).collect()
    }

    pub fn same_shape(&self, other: &AsciiGrid) -> bool {
        self.n_rows == other.n_rows && self.n_cols == other.n_cols && self.cell_size == other.cell_size
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::ParseLine { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
        let (mut ncols, mut nrows, mut cell) = (None, None, None);
        let (mut xll, mut yll, mut center) = (0.0, 0.0, false);
        let mut nodata = NODATA;
        while let Some(&(no, line)) = lines.peek() {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            if key.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') {
                break;
            }
            let value = parts.next().ok_or_else(|| err(no + 1, format!("header {key:?} has no value")))?;
            let num: f64 = value.parse().map_err(|_| err(no + 1, format!("bad number {value:?}")))?;
            let count = || -> Result<usize> {
                if num >= 1.0 && num.fract() == 0.0 {
                    Ok(num as usize)
                } else {
                    Err(err(no + 1, format!("{key} must be a positive integer, got {value}")))
                }
            };
            match key.as_str() {
                "ncols" => ncols = Some(count()?),
                "nrows" => nrows = Some(count()?),
                "xllcorner" => xll = num,
                "yllcorner" => yll = num,
                "xllcenter" => {
                    xll = num;
                    center = true
                }
                "yllcenter" => {
                    yll = num;
                    center = true
                }
                "cellsize" => cell = Some(num),
                "nodata_value" => nodata = num,
                _ => return Err(err(no + 1, format!("unknown header {key:?}"))),
            }
            lines.next();
        }
        let n_cols = ncols.ok_or_else(|| err(0, "missing ncols".into()))?;
        let n_rows = nrows.ok_or_else(|| err(0, "missing nrows".into()))?;
        let cell_size = cell.ok_or_else(|| err(0, "missing cellsize".into()))?;
        if !(cell_size > 0.0) {
            return Err(err(0, format!("cellsize must be positive, got {cell_size}")));
        }
        if center {
            xll -= 0.5 * cell_size;
            yll -= 0.5 * cell_size;
        }
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for (no, line) in lines {
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| err(no + 1, format!("bad value {tok:?}")))?;
                values.push((v != nodata).then_some(v));
            }
        }
        if values.len() != n_rows * n_cols {
            return Err(err(
                0,
                format!("expected {} values for {n_rows}x{n_cols}, found {}", n_rows * n_cols, values.len()),
            ));
        }
        Ok(AsciiGrid { n_rows, n_cols, xll, yll, cell_size, nodata, values })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn header(&self) -> String {
        format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
            self.n_cols, self.n_rows, self.xll, self.yll, self.cell_size, self.nodata
        )
    }

    /// Reals in 17 significant digits.
    pub fn to_text(&self) -> String {
        self.render(|s, v| write!(s, "{v:.16e}"))
    }

    /// Values rounded to integers, for label and mask grids.
    pub fn to_text_integer(&self) -> String {
        self.render(|s, v| write!(s, "{}", v.round() as i64))
    }

    fn render(&self, put: impl Fn(&mut String, f64) -> std::fmt::Result) -> String {
        let mut s = self.header();
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                if c > 0 {
                    s.push(' ');
                }
                match self.values[r * self.n_cols + c] {
                    Some(v) => put(&mut s, v).expect("writing to a String"),
                    None => s.push_str(&format!("{}", self.nodata as i64)),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn write_integer(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text_integer()).map_err(|e| Error::io(path, e))
    }
}

/// City labels `1..=n` per cell, NODATA on inactive cells.
pub fn assignment_grid(tess: &Tessellation) -> AsciiGrid {
    let values: Vec<f64> = tess.assignment.iter().map(|a| a.map_or(NODATA, |i| (i + 1) as f64)).collect();
    AsciiGrid::from_values(&tess.layout, &values)
}

pub fn write_assignment(tess: &Tessellation, path: &Path) -> Result<()> {
    assignment_grid(tess).write_integer(path)
}

/// Reads a label grid back. With `n_regions = None` the count is the
/// largest label present.
pub fn assignment_from_grid(g: &AsciiGrid, n_regions: Option<usize>, path: &Path) -> Result<Tessellation> {
    let mut assignment = Vec::with_capacity(g.values.len());
    for (x, v) in g.values.iter().enumerate() {
        assignment.push(match v {
            None => None,
            Some(v) if *v >= 1.0 && v.fract() == 0.0 => Some(*v as usize - 1),
            Some(v) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("cell {x}: label {v} is not a positive integer"),
                })
            }
        });
    }
    let n = n_regions.unwrap_or_else(|| assignment.iter().flatten().max().map_or(0, |m| m + 1));
    Tessellation::from_assignment(g.layout(), n, assignment)
}

pub fn read_assignment(path: &Path, n_regions: Option<usize>) -> Result<Tessellation> {
    assignment_from_grid(&AsciiGrid::read(path)?, n_regions, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_header_variants() {
        let text = "NCOLS 3\nnrows 2\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\nNODATA_value -1\n1 2 -1\n4 5 6\n";
        let g = AsciiGrid::parse(text, Path::new("t.asc")).unwrap();
        assert_eq!((g.n_rows, g.n_cols, g.xll, g.yll), (2, 3, 0.0, 0.0));
        assert_eq!(g.values[2], None);
        assert_eq!(g.values[3], Some(4.0));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n";
        match AsciiGrid::parse(text, Path::new("t.asc")) {
            Err(Error::ParseLine { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        let short = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n";
        assert!(AsciiGrid::parse(short, Path::new("t.asc")).is_err());
    }

    #[test]
    fn real_values_round_trip_bitwise() {
        let layout = Layout::with_mask(2, 2, 0.25, vec![true, false, true, true]);
        let vals = [0.1 + 0.2, 0.0, 1.0 / 3.0, 6.02214076e23];
        let g = AsciiGrid::from_values(&layout, &vals);
        let back = AsciiGrid::parse(&g.to_text(), Path::new("t.asc")).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.layout(), layout);
    }

    #[test]
    fn labels_round_trip() {
        let layout = Layout::with_mask(2, 3, 1.0, vec![true, true, false, true, true, true]);
        let tess = Tessellation::from_assignment(
            layout,
            3,
            vec![Some(0), Some(2), None, Some(0), Some(1), Some(2)],
        )
        .unwrap();
        let text = assignment_grid(&tess).to_text_integer();
        assert!(text.contains("1 3 -9999\n1 2 3\n"));
        let g = AsciiGrid::parse(&text, Path::new("a.asc")).unwrap();
        assert_eq!(assignment_from_grid(&g, None, Path::new("a.asc")).unwrap(), tess);
    }
}
