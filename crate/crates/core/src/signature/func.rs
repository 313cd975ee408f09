//! Two-parameter tensor series on a time grid.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::series::{check_caps, mul_into, TensorSeries};
use crate::controlled::RoughPath2;
use crate::error::{Error, Result};
use crate::grid::{Budget, GridPath, Increment, TimeGrid};

/// A map `(i, j) ↦ Z(t_i, t_j) ∈ T^{(n)}(ℝ^d)` over index pairs `i <= j`.
pub trait TwoParamSeries: Sync {
    fn grid(&self) -> &TimeGrid;
    fn dim(&self) -> usize;
    fn level(&self) -> usize;
    fn pair(&self, i: usize, j: usize) -> TensorSeries;

    /// Declared roughness `p`, if any.
    fn roughness(&self) -> Option<f64> {
        None
    }
}

/// A multiplicative series stored by its adjacent cells.
///
/// General pairs are chained products of cells, looked up through a dyadic
/// table of partial products so a query costs `O(log n)` multiplications.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFunc {
    grid: TimeGrid,
    dim: usize,
    level: usize,
    roughness: Option<f64>,
    blocks: Vec<Vec<TensorSeries>>,
}

impl TensorFunc {
    pub fn from_cells(grid: TimeGrid, cells: Vec<TensorSeries>) -> Result<Self> {
        if cells.len() != grid.cells() {
            return Err(Error::LengthMismatch {
                expected: grid.cells(),
                got: cells.len(),
            });
        }
        let (dim, level) = (cells[0].dim(), cells[0].level());
        check_caps(dim, level)?;
        for (k, c) in cells.iter().enumerate() {
            if c.dim() != dim || c.level() != level {
                return Err(Error::Shape(format!(
                    "cell {k} has a different dimension or level"
                )));
            }
            if c.get(0)[0] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "level 0 of cell {k} is {}, not 1",
                    c.get(0)[0]
                )));
            }
            if c.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step: k,
                    state: c.data().to_vec(),
                });
            }
        }
        let mut blocks = vec![cells];
        while blocks.last().map_or(0, Vec::len) >= 2 {
            let prev = blocks.last().unwrap();
            let next: Vec<TensorSeries> = prev
                .par_chunks_exact(2)
                .map(|w| {
                    let mut out = TensorSeries::zero(dim, level);
                    mul_into(&w[0], &w[1], &mut out);
                    out
                })
                .collect();
            blocks.push(next);
        }
        Ok(Self {
            grid,
            dim,
            level,
            roughness: None,
            blocks,
        })
    }

    /// Adjacent cells of any series.
    pub fn from_series<Z: TwoParamSeries + ?Sized>(z: &Z) -> Result<Self> {
        let cells = (0..z.grid().cells())
            .into_par_iter()
            .map(|k| z.pair(k, k + 1))
            .collect();
        Ok(Self::from_cells(z.grid().clone(), cells)?.with_roughness(z.roughness()))
    }

    /// The functional equal to the unit `(1, 0, …)` on every pair.
    pub fn unit(grid: TimeGrid, dim: usize, level: usize) -> Result<Self> {
        let cells = vec![TensorSeries::unit(dim, level); grid.cells()];
        Self::from_cells(grid, cells)
    }

    pub fn with_roughness(mut self, p: Option<f64>) -> Self {
        self.roughness = p;
        self
    }

    pub fn cell(&self, k: usize) -> &TensorSeries {
        &self.blocks[0][k]
    }

    pub fn cells(&self) -> &[TensorSeries] {
        &self.blocks[0]
    }

    /// Restriction to every `stride`-th grid point.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsen(stride)?;
        let cells = (0..grid.cells())
            .into_par_iter()
            .map(|k| self.pair(k * stride, (k + 1) * stride))
            .collect();
        Ok(Self::from_cells(grid, cells)?.with_roughness(self.roughness))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn to_file(&self) -> TensorFile {
        TensorFile {
            dim: self.dim,
            level: self.level,
            roughness: self.roughness,
            times: self.grid.times().to_vec(),
            adjacent: self.cells().iter().map(TensorSeries::levels).collect(),
        }
    }

    fn from_file(f: TensorFile) -> Result<Self> {
        check_caps(f.dim, f.level)?;
        let grid = TimeGrid::new(f.times)?;
        let cells = f
            .adjacent
            .iter()
            .map(|levels| {
                if levels.len() != f.level + 1 {
                    return Err(Error::LengthMismatch {
                        expected: f.level + 1,
                        got: levels.len(),
                    });
                }
                TensorSeries::from_levels(f.dim, levels)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_cells(grid, cells)?.with_roughness(f.roughness))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorFile {
    dim: usize,
    level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roughness: Option<f64>,
    times: Vec<f64>,
    adjacent: Vec<Vec<Vec<f64>>>,
}

impl TwoParamSeries for TensorFunc {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn level(&self) -> usize {
        self.level
    }
    fn roughness(&self) -> Option<f64> {
        self.roughness
    }

    fn pair(&self, i: usize, j: usize) -> TensorSeries {
        let mut acc = TensorSeries::unit(self.dim, self.level);
        let mut tmp = acc.clone();
        let mut pos = i;
        while pos < j {
            let mut b = 0;
            while b + 1 < self.blocks.len()
                && pos.is_multiple_of(1 << (b + 1))
                && pos + (1 << (b + 1)) <= j
            {
                b += 1;
            }
            let block = &self.blocks[b][pos >> b];
            if pos == i {
                acc.clone_from(block);
            } else {
                mul_into(&acc, block, &mut tmp);
                std::mem::swap(&mut acc, &mut tmp);
            }
            pos += 1 << b;
        }
        acc
    }
}

impl TwoParamSeries for RoughPath2 {
    fn grid(&self) -> &TimeGrid {
        self.x().grid()
    }
    fn dim(&self) -> usize {
        RoughPath2::dim(self)
    }
    fn level(&self) -> usize {
        2
    }
    fn roughness(&self) -> Option<f64> {
        Some(1.0 / self.gamma())
    }

    fn pair(&self, i: usize, j: usize) -> TensorSeries {
        let d = RoughPath2::dim(self);
        let mut s = TensorSeries::unit(d, 2);
        let (xi, xj) = (self.x().value(i), self.x().value(j));
        for (o, (a, b)) in s.get_mut(1).iter_mut().zip(xi.iter().zip(xj)) {
            *o = b - a;
        }
        self.xx().eval_into(i, j, s.get_mut(2));
        s
    }
}

type PairFn<'a> = dyn Fn(usize, usize) -> TensorSeries + Send + Sync + 'a;

/// A series given by a closure on index pairs, not necessarily multiplicative.
pub struct FnSeries<'a> {
    grid: TimeGrid,
    dim: usize,
    level: usize,
    roughness: Option<f64>,
    f: Box<PairFn<'a>>,
}

impl<'a> FnSeries<'a> {
    pub fn new(
        grid: TimeGrid,
        dim: usize,
        level: usize,
        f: impl Fn(usize, usize) -> TensorSeries + Send + Sync + 'a,
    ) -> Result<Self> {
        check_caps(dim, level)?;
        Ok(Self {
            grid,
            dim,
            level,
            roughness: None,
            f: Box::new(f),
        })
    }

    pub fn with_roughness(mut self, p: Option<f64>) -> Self {
        self.roughness = p;
        self
    }
}

impl TwoParamSeries for FnSeries<'_> {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn level(&self) -> usize {
        self.level
    }
    fn roughness(&self) -> Option<f64> {
        self.roughness
    }
    fn pair(&self, i: usize, j: usize) -> TensorSeries {
        (self.f)(i, j)
    }
}

/// `z` seen on every `stride`-th grid point.
pub fn restrict<Z: TwoParamSeries + ?Sized>(z: &Z, stride: usize) -> Result<FnSeries<'_>> {
    let grid = z.grid().coarsen(stride)?;
    Ok(FnSeries::new(grid, z.dim(), z.level(), move |i, j| {
        z.pair(i * stride, j * stride)
    })?
    .with_roughness(z.roughness()))
}

/// The level-2 functional `(1, δX, 𝕏²)` of a rough path, with roughness `1/γ`.
pub fn from_rough2(rp: &RoughPath2) -> Result<TensorFunc> {
    TensorFunc::from_series(rp)
}

/// Validates the Chen relation of `xx` against `x` before building the functional.
pub fn from_level2<R: Increment + ?Sized>(
    x: GridPath,
    xx: &R,
    gamma: f64,
    budget: Budget,
) -> Result<TensorFunc> {
    from_rough2(&RoughPath2::from_increment(x, xx, gamma, budget)?)
}
