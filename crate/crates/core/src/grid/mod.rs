//! Time grids, sampled paths and increments.
//!
//! Everything in this crate lives on a finite [`TimeGrid`]. A [`GridPath`]
//! samples a tensor-valued path at the grid times, and two-parameter objects
//! (increments) are exposed through the [`Increment`] trait, evaluated lazily
//! on ordered index pairs `i <= j`. Tensor values are flattened in row-major
//! order and their magnitude is the largest absolute component.

pub(crate) mod increment;
pub mod io;
mod norms;
pub(crate) use norms::{pair_sup, triple_sup};

use std::sync::Arc;

use crate::error::{Error, Result};

pub use increment::{
    delta, n2_op, n_op, Delta, DenseIncrement, FnIncrement, FnIncrement3, Increment, Increment3,
    Increment4, N2View, NView,
};
pub use norms::{
    holder_norm, holder_norm2, holder_norm2_on, holder_norm_on, increment_scale, patch_norm_bound,
    product_norm2, triple_scale, Budget, PatchBound, EXACT_PAIR_LIMIT, EXACT_TRIPLE_LIMIT,
};

/// Largest absolute component of a flattened tensor.
pub fn magnitude(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| {
        if m.is_nan() || v.is_nan() {
            f64::NAN
        } else {
            m.max(v.abs())
        }
    })
}

/// Strictly increasing sample times `t_0 < t_1 < ... < t_n`.
///
/// Cloning is cheap: the times are shared.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    times: Arc<[f64]>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::GridTooShort(times.len()));
        }
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::NonFiniteTime(i));
            }
        }
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(Error::NotIncreasing(i));
            }
        }
        Ok(Self {
            times: times.into(),
        })
    }

    /// `cells` equal cells covering `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::GridTooShort(1));
        }
        if !(t1 > t0) {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs t1 > t0, got [{t0}, {t1}]"
            )));
        }
        let h = (t1 - t0) / cells as f64;
        let mut times: Vec<f64> = (0..=cells).map(|k| t0 + h * k as f64).collect();
        times[cells] = t1;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells `[t_i, t_{i+1}]`.
    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// The span covering the whole grid.
    pub fn full(&self) -> Span {
        Span {
            start: 0,
            end: self.cells(),
        }
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        Arc::ptr_eq(&self.times, &other.times) || self.times[..] == other.times[..]
    }

    pub fn check_span(&self, span: Span) -> Result<()> {
        if span.start >= span.end || span.end > self.cells() {
            return Err(Error::IndexOutOfRange(format!(
                "span [{}, {}] on a grid with {} cells",
                span.start,
                span.end,
                self.cells()
            )));
        }
        Ok(())
    }

    /// The sub-grid `t_start..=t_end`.
    pub fn slice(&self, span: Span) -> Result<TimeGrid> {
        self.check_span(span)?;
        Ok(TimeGrid {
            times: self.times[span.start..=span.end].into(),
        })
    }

    /// Every `stride`-th point; the number of cells must be divisible by `stride`.
    pub fn coarsen(&self, stride: usize) -> Result<TimeGrid> {
        if stride == 0 || !self.cells().is_multiple_of(stride) {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen {} cells by stride {stride}",
                self.cells()
            )));
        }
        if stride == 1 {
            return Ok(self.clone());
        }
        let times: Vec<f64> = self.times.iter().step_by(stride).copied().collect();
        Self::new(times)
    }

    /// Splits every cell into `factor` equal substeps.
    pub fn refine(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 {
            return Err(Error::InvalidParameter(
                "refinement factor must be >= 1".into(),
            ));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let mut times = Vec::with_capacity(self.cells() * factor + 1);
        for w in self.times.windows(2) {
            let h = (w[1] - w[0]) / factor as f64;
            for k in 0..factor {
                times.push(w[0] + h * k as f64);
            }
        }
        times.push(self.end());
        Self::new(times)
    }
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Inclusive range of grid point indices `start..=end` with `start < end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn cells(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }
}

/// Tensor-valued path sampled at the points of a [`TimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    grid: TimeGrid,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridPath {
    /// `values` holds one flattened tensor of the given shape per grid point.
    pub fn new(grid: TimeGrid, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let width: usize = shape.iter().product();
        if shape.is_empty() || width == 0 {
            return Err(Error::Shape(format!("invalid path shape {shape:?}")));
        }
        let expected = width * grid.len();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            shape,
            values,
        })
    }

    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, vec![1], values)
    }

    /// Samples `f(t)` at every grid time.
    pub fn from_fn(grid: TimeGrid, shape: Vec<usize>, f: impl Fn(f64, &mut [f64])) -> Result<Self> {
        let width: usize = shape.iter().product();
        let mut values = vec![0.0; width * grid.len()];
        for (i, chunk) in values.chunks_mut(width.max(1)).enumerate() {
            f(grid.t(i), chunk);
        }
        Self::new(grid, shape, values)
    }

    pub fn constant(grid: TimeGrid, shape: Vec<usize>, value: &[f64]) -> Result<Self> {
        let values = value.repeat(grid.len());
        Self::new(grid, shape, values)
    }

    pub fn zeros(grid: TimeGrid, shape: Vec<usize>) -> Result<Self> {
        let width: usize = shape.iter().product();
        Self::new(grid.clone(), shape, vec![0.0; width * grid.len()])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn width(&self) -> usize {
        self.values.len() / self.grid.len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn value(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn first(&self) -> &[f64] {
        self.value(0)
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// Component `c` of the path as a scalar series.
    pub fn component(&self, c: usize) -> Vec<f64> {
        let w = self.width();
        self.values.iter().skip(c).step_by(w).copied().collect()
    }

    /// `self(j) - self(i)` written into `out`.
    #[inline]
    pub fn delta_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let a = self.value(i);
        let b = self.value(j);
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = y - x;
        }
    }

    /// Same values reinterpreted with another shape of equal width.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let width: usize = shape.iter().product();
        if width != self.width() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Restriction to the points of `span`, on the sliced grid.
    pub fn slice(&self, span: Span) -> Result<GridPath> {
        let grid = self.grid.slice(span)?;
        let w = self.width();
        let values = self.values[span.start * w..(span.end + 1) * w].to_vec();
        GridPath::new(grid, self.shape.clone(), values)
    }

    /// Restriction to every `stride`-th grid point.
    pub fn coarsen(&self, stride: usize) -> Result<GridPath> {
        let grid = self.grid.coarsen(stride)?;
        let w = self.width();
        let values = (0..grid.len())
            .flat_map(|k| self.value(k * stride).iter().copied())
            .collect::<Vec<_>>();
        debug_assert_eq!(values.len(), w * grid.len());
        GridPath::new(grid, self.shape.clone(), values)
    }

    /// `a * self + b * other` on a shared grid.
    pub fn lin_comb(&self, a: f64, other: &GridPath, b: f64) -> Result<GridPath> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        GridPath::new(self.grid.clone(), self.shape.clone(), values)
    }

    pub fn scaled(&self, a: f64) -> GridPath {
        GridPath {
            grid: self.grid.clone(),
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// Adds a constant tensor at every point.
    pub fn shifted(&self, offset: &[f64]) -> Result<GridPath> {
        if offset.len() != self.width() {
            return Err(Error::LengthMismatch {
                expected: self.width(),
                got: offset.len(),
            });
        }
        let w = self.width();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v + offset[k % w])
            .collect();
        GridPath::new(self.grid.clone(), self.shape.clone(), values)
    }

    /// Largest absolute component over the whole path.
    pub fn scale(&self) -> f64 {
        magnitude(&self.values)
    }

    /// `max_i |self(i) - other(i)|` on a shared grid.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_compatible(&self, other: &GridPath) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
