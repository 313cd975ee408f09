//! CSV encodings.
//!
//! Paths: header `t,<names…>`, one row per grid time. Increments: header
//! `i,j,<names…>`, one row per ordered pair. Floats are written with 17
//! significant digits so that every value round-trips bit-exactly.

use std::io::{Read, Write};

use super::norms::Budget;
use super::{DenseIncrement, GridPath, Increment, TimeGrid};
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Row-major component names: `x0, x1, …` or `x0_1` for rank-2 shapes.
pub fn component_names(prefix: &str, shape: &[usize]) -> Vec<String> {
    let width: usize = shape.iter().product();
    (0..width)
        .map(|flat| {
            let mut idx = Vec::with_capacity(shape.len());
            let mut rem = flat;
            for &d in shape.iter().rev() {
                idx.push(rem % d);
                rem /= d;
            }
            idx.reverse();
            let parts: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
            if shape.len() <= 1 {
                format!("{prefix}{}", parts.join(""))
            } else {
                format!("{prefix}{}", parts.join("_"))
            }
        })
        .collect()
}

pub fn write_path_csv<W: Write>(path: &GridPath, prefix: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(component_names(prefix, path.shape()));
    w.write_record(&header)?;
    for i in 0..path.len() {
        let mut row = vec![fmt_f64(path.grid().t(i))];
        row.extend(path.value(i).iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::InvalidParameter(format!("row {line}: cannot parse {field:?}: {e}")))
}

/// Reads a path written by [`write_path_csv`]; `shape` defaults to a vector
/// with one entry per value column.
pub fn read_path_csv<R: Read>(input: R, shape: Option<Vec<usize>>) -> Result<GridPath> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::InvalidParameter(
            "path CSV must start with a `t` column followed by components".into(),
        ));
    }
    let width = headers.len() - 1;
    let shape = shape.unwrap_or_else(|| vec![width]);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::LengthMismatch {
                expected: headers.len(),
                got: rec.len(),
            });
        }
        times.push(parse(&rec[0], line + 2)?);
        for f in rec.iter().skip(1) {
            values.push(parse(f, line + 2)?);
        }
    }
    GridPath::new(TimeGrid::new(times)?, shape, values)
}

/// Writes the sampled pairs `i < j` of an increment.
pub fn write_increment_csv<R: Increment + ?Sized, W: Write>(
    r: &R,
    prefix: &str,
    budget: Budget,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["i".to_string(), "j".to_string()];
    header.extend(component_names(prefix, r.shape()));
    w.write_record(&header)?;
    let n = r.grid().cells();
    let exact = matches!(budget, Budget::Exact)
        || (matches!(budget, Budget::Auto) && n <= super::EXACT_PAIR_LIMIT);
    let mut buf = vec![0.0; r.width()];
    for i in 0..n {
        let mut write = |j: usize, buf: &mut [f64]| -> Result<()> {
            r.eval_into(i, j, buf);
            let mut row = vec![i.to_string(), j.to_string()];
            row.extend(buf.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
            Ok(())
        };
        if exact {
            for j in i + 1..=n {
                write(j, &mut buf)?;
            }
        } else {
            let mut step = 1;
            while i + step <= n {
                write(i + step, &mut buf)?;
                step *= 2;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads pairs written by [`write_increment_csv`]; absent pairs are zero.
pub fn read_increment_csv<R: Read>(
    input: R,
    grid: TimeGrid,
    shape: Option<Vec<usize>>,
) -> Result<DenseIncrement> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("i") || headers.get(1) != Some("j") || headers.len() < 3 {
        return Err(Error::InvalidParameter(
            "increment CSV must start with `i,j` columns followed by components".into(),
        ));
    }
    let width = headers.len() - 2;
    let shape = shape.unwrap_or_else(|| vec![width]);
    let mut entries = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let idx = |k: usize| -> Result<usize> {
            rec[k].trim().parse::<usize>().map_err(|e| {
                Error::InvalidParameter(format!("row {}: bad index {:?}: {e}", line + 2, &rec[k]))
            })
        };
        let (i, j) = (idx(0)?, idx(1)?);
        let v = rec
            .iter()
            .skip(2)
            .map(|f| parse(f, line + 2))
            .collect::<Result<Vec<_>>>()?;
        entries.push((i, j, v));
    }
    DenseIncrement::from_entries(grid, shape, entries)
}
