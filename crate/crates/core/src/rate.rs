//! Convergence-order fits over dyadic refinement levels.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::io::fmt_f64;
use crate::sewing::LevelSum;

/// Coarse-to-finest differences below this fraction of the data scale count as zero.
pub const EXACT_REL_TOL: f64 = 1e-12;

/// Fitted convergence order of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FittedOrder {
    /// All coarse sums agree with the finest one up to rounding.
    Exact,
    Order(f64),
}

impl FittedOrder {
    /// `true` for [`FittedOrder::Exact`] or an order of at least `min`.
    pub fn at_least(&self, min: f64) -> bool {
        match self {
            FittedOrder::Exact => true,
            FittedOrder::Order(p) => *p >= min,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            FittedOrder::Exact => None,
            FittedOrder::Order(p) => Some(*p),
        }
    }
}

impl std::fmt::Display for FittedOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FittedOrder::Exact => write!(f, "exact"),
            FittedOrder::Order(p) => write!(f, "{p:.4}"),
        }
    }
}

/// Rows of a refinement study and the order fitted on them.
#[derive(Clone, Debug)]
pub struct RateStudy {
    pub rows: Vec<LevelSum>,
    /// Levels that entered the least-squares fit.
    pub fitted_levels: Vec<u32>,
    pub order: FittedOrder,
    /// Order fitted on successive differences `|S_l - S_{l-1}|` over the same
    /// levels plus the finest; free of the bias from referencing the finest sum.
    pub cauchy_order: FittedOrder,
}

impl RateStudy {
    /// CSV with header `level,mesh,value,diff_to_finest` (`value` is the
    /// largest-magnitude component of the level sum).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "mesh", "value", "diff_to_finest"])?;
        for r in &self.rows {
            let v = r
                .value
                .iter()
                .copied()
                .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            w.write_record(&[
                r.level.to_string(),
                fmt_f64(r.mesh),
                fmt_f64(v),
                fmt_f64(r.diff_to_finest),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits `log(diff_to_finest)` against `log(mesh)` over the last `levels`
/// dyadic levels (the finest included).
///
/// The two coarsest studied levels are treated as pre-asymptotic and dropped
/// whenever at least two coarse levels remain afterwards.
pub fn fit_levels(all: &[LevelSum], levels: usize) -> Result<RateStudy> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!(
            "a rate study needs at least 3 levels, got {levels}"
        )));
    }
    if all.len() < levels {
        return Err(Error::InsufficientGrid(format!(
            "{levels} levels requested but the grid only has {} dyadic levels",
            all.len()
        )));
    }
    let rows = all[all.len() - levels..].to_vec();
    let coarse = &rows[..rows.len() - 1];
    let skip = if coarse.len() >= 4 { 2 } else { 0 };
    let used = &coarse[skip..];
    let scale = rows
        .last()
        .map(|r| r.value.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .unwrap_or(0.0)
        .max(1.0);
    let order = fit(used.iter().map(|r| (r.mesh, r.diff_to_finest)), scale)?;
    let cauchy_order = fit(rows[skip..].iter().map(|r| (r.mesh, r.cauchy)), scale)?;
    Ok(RateStudy {
        fitted_levels: used.iter().map(|r| r.level).collect(),
        rows,
        order,
        cauchy_order,
    })
}

fn fit(points: impl Iterator<Item = (f64, f64)>, scale: f64) -> Result<FittedOrder> {
    let points: Vec<(f64, f64)> = points.collect();
    if points.iter().all(|&(_, d)| d <= EXACT_REL_TOL * scale) {
        return Ok(FittedOrder::Exact);
    }
    // an isolated exact zero cannot be placed on a log scale
    let kept: Vec<(f64, f64)> = points.into_iter().filter(|&(_, d)| d > 0.0).collect();
    if kept.len() < 2 {
        return Err(Error::InsufficientGrid(
            "too few nonzero differences to fit an order".into(),
        ));
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    Ok(FittedOrder::Order(least_squares_slope(&xs, &ys)))
}
