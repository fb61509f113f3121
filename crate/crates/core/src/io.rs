//! Grid functions as CSV: comment lines start with `#`, the first of them
//! carries a JSON header (`# grid {...}`), then one row `k,i,j,t,x,y,value`
//! per node. Values are written in shortest round-trip form, so reading back
//! reproduces the data bit for bit.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_model::{Grid, GridFunction, GridSlice, KahlerCoefficient};

const HEADER_TAG: &str = "# grid ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub grid: Grid,
    /// Number of time slices; 1 for a single slice.
    pub nt: usize,
    pub omega11: Option<KahlerCoefficient>,
    pub symmetric: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    k: usize,
    i: usize,
    j: usize,
    t: f64,
    x: f64,
    y: f64,
    value: f64,
}

fn write_rows<W: Write>(mut out: W, header: &GridHeader, comments: &[String], values: &[f64]) -> Result<()> {
    writeln!(out, "{HEADER_TAG}{}", serde_json::to_string(header)?)?;
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let grid = header.grid;
    let n = grid.nodes();
    let mut w = csv::Writer::from_writer(out);
    for k in 0..header.nt {
        let t = if header.nt > 1 {
            k as f64 / (header.nt - 1) as f64
        } else {
            1.0
        };
        for i in 0..n {
            for j in 0..n {
                let z = grid.coord(i, j);
                w.serialize(Row {
                    k,
                    i,
                    j,
                    t,
                    x: z.re,
                    y: z.im,
                    value: values[k * grid.len() + grid.index(i, j)],
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_function<W: Write>(
    out: W,
    u: &GridFunction,
    omega: Option<KahlerCoefficient>,
    comments: &[String],
) -> Result<()> {
    let header = GridHeader {
        grid: u.grid,
        nt: u.nt(),
        omega11: omega,
        symmetric: u.symmetric,
    };
    write_rows(out, &header, comments, u.values())
}

pub fn write_grid_slice<W: Write>(
    out: W,
    v: &GridSlice,
    omega: Option<KahlerCoefficient>,
    comments: &[String],
) -> Result<()> {
    let header = GridHeader {
        grid: v.grid,
        nt: 1,
        omega11: omega,
        symmetric: v.symmetry_defect() == 0.0,
    };
    write_rows(out, &header, comments, v.values())
}

fn read_rows<R: Read>(input: R) -> Result<(GridHeader, Vec<f64>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first
        .trim_end()
        .strip_prefix(HEADER_TAG)
        .ok_or_else(|| Error::InvalidInput("grid CSV must start with a '# grid {...}' header".into()))?;
    let header: GridHeader = serde_json::from_str(json)?;
    let grid = header.grid;
    let total = header
        .nt
        .checked_mul(grid.len())
        .filter(|&t| header.nt > 0 && t > 0)
        .ok_or_else(|| Error::InvalidInput("grid header has no nodes".into()))?;
    let mut values = vec![f64::NAN; total];
    let mut seen = vec![false; total];
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        if row.k >= header.nt || row.i >= grid.nodes() || row.j >= grid.nodes() {
            return Err(Error::InvalidInput(format!(
                "row ({}, {}, {}) outside the grid",
                row.k, row.i, row.j
            )));
        }
        let idx = row.k * grid.len() + grid.index(row.i, row.j);
        if seen[idx] {
            return Err(Error::InvalidInput(format!(
                "duplicate row ({}, {}, {})",
                row.k, row.i, row.j
            )));
        }
        seen[idx] = true;
        values[idx] = row.value;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!("grid CSV is missing node {missing}")));
    }
    Ok((header, values))
}

pub fn read_grid_function<R: Read>(input: R) -> Result<(GridFunction, GridHeader)> {
    let (header, values) = read_rows(input)?;
    let u = GridFunction::new(header.grid, header.nt, values, header.symmetric)?;
    Ok((u, header))
}

/// Reads a single slice; for a multi-slice file the last slice is returned.
pub fn read_grid_slice<R: Read>(input: R) -> Result<(GridSlice, GridHeader)> {
    let (header, values) = read_rows(input)?;
    let len = header.grid.len();
    let last = values[(header.nt - 1) * len..].to_vec();
    Ok((GridSlice::new(header.grid, last)?, header))
}
