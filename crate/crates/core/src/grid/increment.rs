use super::{GridPath, TimeGrid};
use crate::error::{Error, Result};

/// Runs `f` with a zeroed scratch buffer of the given width, on the stack when small.
#[inline]
pub(crate) fn with_scratch<T>(width: usize, f: impl FnOnce(&mut [f64]) -> T) -> T {
    if width <= 64 {
        let mut buf = [0.0_f64; 64];
        f(&mut buf[..width])
    } else {
        let mut buf = vec![0.0_f64; width];
        f(&mut buf)
    }
}

/// A two-parameter increment evaluated on ordered grid index pairs `i <= j`.
///
/// Implementations must return zero on the diagonal.
pub trait Increment: Sync {
    fn grid(&self) -> &TimeGrid;
    fn shape(&self) -> &[usize];

    fn width(&self) -> usize {
        self.shape().iter().product()
    }

    /// Writes the value at `(i, j)`, `i <= j`, into `out` (length [`Increment::width`]).
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]);

    fn eval(&self, i: usize, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.eval_into(i, j, &mut out);
        out
    }

    /// Value at an arbitrary pair, extended antisymmetrically for `i > j`.
    fn eval_signed(&self, i: usize, j: usize) -> Vec<f64> {
        if i <= j {
            self.eval(i, j)
        } else {
            self.eval(j, i).into_iter().map(|v| -v).collect()
        }
    }
}

/// A three-parameter increment on ordered triples `i <= j <= k`.
pub trait Increment3: Sync {
    fn grid(&self) -> &TimeGrid;
    fn shape(&self) -> &[usize];

    fn width(&self) -> usize {
        self.shape().iter().product()
    }

    fn eval3_into(&self, i: usize, j: usize, k: usize, out: &mut [f64]);

    fn eval3(&self, i: usize, j: usize, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.eval3_into(i, j, k, &mut out);
        out
    }
}

/// A four-parameter increment on ordered quadruples.
pub trait Increment4: Sync {
    fn grid(&self) -> &TimeGrid;
    fn shape(&self) -> &[usize];

    fn width(&self) -> usize {
        self.shape().iter().product()
    }

    fn eval4_into(&self, i: usize, j: usize, k: usize, l: usize, out: &mut [f64]);

    fn eval4(&self, i: usize, j: usize, k: usize, l: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        self.eval4_into(i, j, k, l, &mut out);
        out
    }
}

impl<T: Increment + ?Sized> Increment for &T {
    fn grid(&self) -> &TimeGrid {
        (**self).grid()
    }
    fn shape(&self) -> &[usize] {
        (**self).shape()
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        (**self).eval_into(i, j, out)
    }
}

impl<T: Increment3 + ?Sized> Increment3 for &T {
    fn grid(&self) -> &TimeGrid {
        (**self).grid()
    }
    fn shape(&self) -> &[usize] {
        (**self).shape()
    }
    fn eval3_into(&self, i: usize, j: usize, k: usize, out: &mut [f64]) {
        (**self).eval3_into(i, j, k, out)
    }
}

/// `(δA)(i, j) = A(j) - A(i)`.
#[derive(Clone, Copy, Debug)]
pub struct Delta<'a> {
    path: &'a GridPath,
}

pub fn delta(path: &GridPath) -> Delta<'_> {
    Delta { path }
}

impl Increment for Delta<'_> {
    fn grid(&self) -> &TimeGrid {
        self.path.grid()
    }
    fn shape(&self) -> &[usize] {
        self.path.shape()
    }
    #[inline]
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        self.path.delta_into(i, j, out);
    }
}

/// `(N R)(s, u, t) = R(s, t) - R(u, t) - R(s, u)`, evaluated lazily.
#[derive(Clone, Copy, Debug)]
pub struct NView<'a, R: ?Sized> {
    r: &'a R,
}

pub fn n_op<R: Increment + ?Sized>(r: &R) -> NView<'_, R> {
    NView { r }
}

impl<R: Increment + ?Sized> Increment3 for NView<'_, R> {
    fn grid(&self) -> &TimeGrid {
        self.r.grid()
    }
    fn shape(&self) -> &[usize] {
        self.r.shape()
    }
    fn eval3_into(&self, s: usize, u: usize, t: usize, out: &mut [f64]) {
        let w = out.len();
        self.r.eval_into(s, t, out);
        with_scratch(w, |tmp| {
            self.r.eval_into(u, t, tmp);
            for (o, v) in out.iter_mut().zip(tmp.iter()) {
                *o -= v;
            }
            self.r.eval_into(s, u, tmp);
            for (o, v) in out.iter_mut().zip(tmp.iter()) {
                *o -= v;
            }
        });
    }
}

/// `(N₂ A)(s, u, v, t) = -A(u, v, t) + A(s, v, t) - A(s, u, t) + A(s, u, v)`.
#[derive(Clone, Copy, Debug)]
pub struct N2View<'a, A: ?Sized> {
    a: &'a A,
}

pub fn n2_op<A: Increment3 + ?Sized>(a: &A) -> N2View<'_, A> {
    N2View { a }
}

impl<A: Increment3 + ?Sized> Increment4 for N2View<'_, A> {
    fn grid(&self) -> &TimeGrid {
        self.a.grid()
    }
    fn shape(&self) -> &[usize] {
        self.a.shape()
    }
    fn eval4_into(&self, s: usize, u: usize, v: usize, t: usize, out: &mut [f64]) {
        let w = out.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        with_scratch(w, |tmp| {
            let mut acc = |sign: f64, i: usize, j: usize, k: usize, tmp: &mut [f64]| {
                self.a.eval3_into(i, j, k, tmp);
                for (o, x) in out.iter_mut().zip(tmp.iter()) {
                    *o += sign * x;
                }
            };
            acc(-1.0, u, v, t, tmp);
            acc(1.0, s, v, t, tmp);
            acc(-1.0, s, u, t, tmp);
            acc(1.0, s, u, v, tmp);
        });
    }
}

/// Increment defined by a closure `f(i, j, out)`.
pub struct FnIncrement<F> {
    grid: TimeGrid,
    shape: Vec<usize>,
    f: F,
}

impl<F> FnIncrement<F>
where
    F: Fn(usize, usize, &mut [f64]) + Sync,
{
    pub fn new(grid: TimeGrid, shape: Vec<usize>, f: F) -> Self {
        Self { grid, shape, f }
    }
}

impl<F> Increment for FnIncrement<F>
where
    F: Fn(usize, usize, &mut [f64]) + Sync,
{
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn shape(&self) -> &[usize] {
        &self.shape
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        if i == j {
            out.iter_mut().for_each(|o| *o = 0.0);
        } else {
            (self.f)(i, j, out)
        }
    }
}

/// Three-parameter increment defined by a closure `f(i, j, k, out)`.
pub struct FnIncrement3<F> {
    grid: TimeGrid,
    shape: Vec<usize>,
    f: F,
}

impl<F> FnIncrement3<F>
where
    F: Fn(usize, usize, usize, &mut [f64]) + Sync,
{
    pub fn new(grid: TimeGrid, shape: Vec<usize>, f: F) -> Self {
        Self { grid, shape, f }
    }
}

impl<F> Increment3 for FnIncrement3<F>
where
    F: Fn(usize, usize, usize, &mut [f64]) + Sync,
{
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn shape(&self) -> &[usize] {
        &self.shape
    }
    fn eval3_into(&self, i: usize, j: usize, k: usize, out: &mut [f64]) {
        (self.f)(i, j, k, out)
    }
}

/// Increment stored as a dense table over ordered pairs `i <= j`.
///
/// Memory grows as `n² / 2`; intended for small grids and file round trips.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseIncrement {
    grid: TimeGrid,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseIncrement {
    /// Rows hold `j = i..n`; row `i` starts after `sum_{r<i} (n - r)` entries.
    #[inline]
    fn index(n: usize, i: usize, j: usize) -> usize {
        let before = i * n - if i == 0 { 0 } else { i * (i - 1) / 2 };
        before + (j - i)
    }

    pub fn from_fn(
        grid: TimeGrid,
        shape: Vec<usize>,
        f: impl Fn(usize, usize, &mut [f64]),
    ) -> Result<Self> {
        let width: usize = shape.iter().product();
        if shape.is_empty() || width == 0 {
            return Err(Error::Shape(format!("invalid increment shape {shape:?}")));
        }
        let n = grid.len();
        let mut data = vec![0.0; width * n * (n + 1) / 2];
        for i in 0..n {
            for j in i + 1..n {
                let k = Self::index(n, i, j) * width;
                f(i, j, &mut data[k..k + width]);
            }
        }
        Ok(Self { grid, shape, data })
    }

    /// Materializes any increment.
    pub fn from_increment<R: Increment + ?Sized>(r: &R) -> Self {
        let width = r.width();
        let n = r.grid().len();
        let mut data = vec![0.0; width * n * (n + 1) / 2];
        for i in 0..n {
            for j in i + 1..n {
                let k = Self::index(n, i, j) * width;
                r.eval_into(i, j, &mut data[k..k + width]);
            }
        }
        Self {
            grid: r.grid().clone(),
            shape: r.shape().to_vec(),
            data,
        }
    }

    /// Builds from explicit `(i, j, value)` entries; missing pairs are zero.
    pub fn from_entries(
        grid: TimeGrid,
        shape: Vec<usize>,
        entries: impl IntoIterator<Item = (usize, usize, Vec<f64>)>,
    ) -> Result<Self> {
        let mut dense = Self::from_fn(grid, shape, |_, _, _| {})?;
        let n = dense.grid.len();
        let width = dense.width();
        for (i, j, v) in entries {
            if i > j || j >= n {
                return Err(Error::IndexOutOfRange(format!("pair ({i}, {j})")));
            }
            if v.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    got: v.len(),
                });
            }
            if i == j {
                if v.iter().any(|x| *x != 0.0) {
                    return Err(Error::Precondition(format!(
                        "increment must vanish on the diagonal, got nonzero at ({i}, {i})"
                    )));
                }
                continue;
            }
            let k = Self::index(n, i, j) * width;
            dense.data[k..k + width].copy_from_slice(&v);
        }
        Ok(dense)
    }

    /// Overwrites one pair value; used to build corrupted fixtures in tests.
    pub fn set(&mut self, i: usize, j: usize, value: &[f64]) {
        assert!(i < j, "only off-diagonal pairs may be set");
        let n = self.grid.len();
        let width = self.width();
        let k = Self::index(n, i, j) * width;
        self.data[k..k + width].copy_from_slice(value);
    }
}

impl Increment for DenseIncrement {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn shape(&self) -> &[usize] {
        &self.shape
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let width = out.len();
        let k = Self::index(self.grid.len(), i, j) * width;
        out.copy_from_slice(&self.data[k..k + width]);
    }
}
