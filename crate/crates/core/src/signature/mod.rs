//! Truncated tensor-algebra functionals over grid pairs.
//!
//! A [`TensorFunc`] stores one element of `T^{(n)}(ℝ^d)` per adjacent grid
//! cell and answers general pairs by Chen products, so it is multiplicative
//! by construction. Arbitrary two-parameter series (for instance almost
//! multiplicative ones) implement [`TwoParamSeries`] directly.

mod func;
mod series;

pub use func::{from_level2, from_rough2, restrict, FnSeries, TensorFunc, TwoParamSeries};
pub use series::{chen_mul, TensorSeries, MAX_DIM, MAX_LEVEL};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{pair_sup, triple_sup, Budget, Increment, Increment3, TimeGrid};
use crate::rate::least_squares_slope;
use series::mul_into;

/// Relative multiplicative defect accepted on entry to [`extend_level`].
pub const EXTEND_TOL: f64 = 1e-10;
/// Cauchy differences below this fraction of the scale count as converged.
pub const FIXED_POINT_TOL: f64 = 1e-12;

struct PairView<'a, Z: ?Sized> {
    z: &'a Z,
    shape: [usize; 1],
}

impl<Z: TwoParamSeries + ?Sized> Increment for PairView<'_, Z> {
    fn grid(&self) -> &TimeGrid {
        self.z.grid()
    }
    fn shape(&self) -> &[usize] {
        &self.shape
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let s = self.z.pair(i, j);
        out.copy_from_slice(&s.data()[1..]);
    }
}

struct DefectView<'a, Z: ?Sized> {
    z: &'a Z,
    shape: [usize; 1],
}

impl<Z: TwoParamSeries + ?Sized> Increment3 for DefectView<'_, Z> {
    fn grid(&self) -> &TimeGrid {
        self.z.grid()
    }
    fn shape(&self) -> &[usize] {
        &self.shape
    }
    fn eval3_into(&self, s: usize, u: usize, t: usize, out: &mut [f64]) {
        let whole = self.z.pair(s, t);
        let mut prod = TensorSeries::zero(self.z.dim(), self.z.level());
        mul_into(&self.z.pair(s, u), &self.z.pair(u, t), &mut prod);
        for (o, (a, b)) in out.iter_mut().zip(whole.data().iter().zip(prod.data())) {
            *o = a - b;
        }
    }
}

fn series_width(dim: usize, level: usize) -> usize {
    TensorSeries::zero(dim, level).data().len()
}

/// Largest entry over levels `1..=n` on sampled pairs, at least 1.
pub fn series_scale<Z: TwoParamSeries + ?Sized>(z: &Z, budget: Budget) -> f64 {
    let view = PairView {
        z,
        shape: [series_width(z.dim(), z.level()) - 1],
    };
    pair_sup(&view, z.grid().full(), budget, |_, _| 1.0).max(1.0)
}

/// `sup |Z(s, t) - Z(s, u) ⊗ Z(u, t)|` over dyadically sampled triples and
/// all levels.
pub fn mult_defect<Z: TwoParamSeries + ?Sized>(z: &Z) -> f64 {
    mult_defect_with(z, Budget::Dyadic)
}

pub fn mult_defect_with<Z: TwoParamSeries + ?Sized>(z: &Z, budget: Budget) -> f64 {
    let view = DefectView {
        z,
        shape: [series_width(z.dim(), z.level())],
    };
    triple_sup(&view, z.grid().full(), budget, |_, _, _| 1.0)
}

/// `sup |A(s, t) - B(s, t)| / |t - s|^exponent` over sampled pairs.
pub fn holder_distance<A, B>(a: &A, b: &B, exponent: f64, budget: Budget) -> Result<f64>
where
    A: TwoParamSeries + ?Sized,
    B: TwoParamSeries + ?Sized,
{
    if !a.grid().same_as(b.grid()) {
        return Err(Error::GridMismatch);
    }
    if a.dim() != b.dim() || a.level() != b.level() {
        return Err(Error::Shape("series differ in dimension or level".into()));
    }
    let grid = a.grid();
    let view = crate::grid::FnIncrement::new(grid.clone(), vec![1], |i, j, out| {
        out[0] = a.pair(i, j).distance(&b.pair(i, j));
    });
    Ok(pair_sup(&view, grid.full(), budget, |i, j| {
        (grid.t(j) - grid.t(i)).powf(exponent)
    }))
}

/// `sup ‖Z^k(s, t)‖ / |t - s|^{k/p}` for `k = 1..=n`, with the Euclidean
/// norm on `(ℝ^d)^{⊗k}`.
pub fn level_holder_norms<Z: TwoParamSeries + ?Sized>(
    z: &Z,
    p: f64,
    budget: Budget,
) -> Result<Vec<f64>> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "roughness must be positive, got {p}"
        )));
    }
    let grid = z.grid();
    Ok((1..=z.level())
        .map(|k| {
            let view = crate::grid::FnIncrement::new(grid.clone(), vec![1], |i, j, out| {
                out[0] = z
                    .pair(i, j)
                    .get(k)
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
            });
            pair_sup(&view, grid.full(), budget, |i, j| {
                (grid.t(j) - grid.t(i)).powf(k as f64 / p)
            })
        })
        .collect())
}

/// Lifts a multiplicative level-`k` series to level `k + 1`.
///
/// The input lives on a fine grid; the output lives on the grid coarsened by
/// `factor`, each coarse cell being the Chen product of its `factor` fine
/// cells. A fine cell enters with its new level set to the level-`(k+1)` part
/// of `exp(log Z)`, the truncated logarithm taken at level `k`.
pub fn extend_level<Z: TwoParamSeries + ?Sized>(z: &Z, factor: usize) -> Result<TensorFunc> {
    let (dim, k) = (z.dim(), z.level());
    if k + 1 > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "cannot extend beyond level {MAX_LEVEL}"
        )));
    }
    if let Some(p) = z.roughness() {
        if !((k + 1) as f64 > p) {
            return Err(Error::Precondition(format!(
                "level {} does not exceed the roughness {p}",
                k + 1
            )));
        }
    }
    let defect = mult_defect(z);
    let tolerance = EXTEND_TOL * series_scale(z, Budget::Dyadic);
    if !(defect <= tolerance) {
        return Err(Error::NotMultiplicative { defect, tolerance });
    }
    let coarse = z.grid().coarsen(factor)?;
    let cells = (0..coarse.cells())
        .into_par_iter()
        .map(|c| {
            let mut acc = TensorSeries::unit(dim, k + 1);
            let mut tmp = acc.clone();
            for f in c * factor..(c + 1) * factor {
                let cell = z.pair(f, f + 1);
                let mut lifted = cell.log().truncated(k + 1).exp();
                for lvl in 0..=k {
                    lifted.get_mut(lvl).copy_from_slice(cell.get(lvl));
                }
                mul_into(&acc, &lifted, &mut tmp);
                std::mem::swap(&mut acc, &mut tmp);
            }
            acc
        })
        .collect();
    Ok(TensorFunc::from_cells(coarse, cells)?.with_roughness(z.roughness()))
}

/// Output of [`multiplicativize`].
#[derive(Clone, Debug)]
pub struct Multiplicativized {
    pub func: TensorFunc,
    /// `max_cells |P_ℓ - P_{ℓ-1}|` for `ℓ = 1..=L`, where `P_ℓ` is the
    /// product over the `2^ℓ` dyadic pieces of a coarse cell.
    pub cauchy: Vec<f64>,
}

/// The multiplicative series closest to an almost multiplicative `z`.
///
/// Each cell of the grid coarsened by `2^levels` is replaced by the Chen
/// product of `z` over its finest dyadic subdivision. Products over coarser
/// subdivisions are kept to check that the refinement converges: the Cauchy
/// differences must shrink from the first level to the last and fit a
/// negative slope against the level index.
pub fn multiplicativize<Z: TwoParamSeries + ?Sized>(
    z: &Z,
    levels: u32,
    declared: Option<f64>,
) -> Result<Multiplicativized> {
    if let Some(e) = declared {
        if !(e > 1.0) {
            return Err(Error::ExponentTooSmall(e));
        }
    }
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "multiplicativize needs at least 2 refinement levels, got {levels}"
        )));
    }
    let stride = 1usize << levels;
    if !z.grid().cells().is_multiple_of(stride) {
        return Err(Error::InsufficientGrid(format!(
            "{} cells are not divisible by 2^{levels}",
            z.grid().cells()
        )));
    }
    let coarse = z.grid().coarsen(stride)?;
    let (dim, n) = (z.dim(), z.level());
    let per_cell: Vec<(TensorSeries, Vec<f64>)> = (0..coarse.cells())
        .into_par_iter()
        .map(|c| {
            let start = c * stride;
            let mut prev = z.pair(start, start + stride);
            let mut diffs = Vec::with_capacity(levels as usize);
            let mut tmp = TensorSeries::zero(dim, n);
            for l in 1..=levels {
                let piece = stride >> l;
                let mut acc = z.pair(start, start + piece);
                for m in 1..(1usize << l) {
                    mul_into(
                        &acc,
                        &z.pair(start + m * piece, start + (m + 1) * piece),
                        &mut tmp,
                    );
                    std::mem::swap(&mut acc, &mut tmp);
                }
                diffs.push(acc.distance(&prev));
                prev = acc;
            }
            (prev, diffs)
        })
        .collect();
    let mut cauchy = vec![0.0_f64; levels as usize];
    let mut scale = 1.0_f64;
    for (p, d) in &per_cell {
        scale = scale.max(p.magnitude());
        for (c, v) in cauchy.iter_mut().zip(d) {
            *c = c.max(*v);
        }
    }
    if cauchy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence(cauchy));
    }
    if cauchy.iter().any(|&v| v > FIXED_POINT_TOL * scale) {
        let first = cauchy[0];
        let last = cauchy[cauchy.len() - 1];
        let xs: Vec<f64> = (1..=levels).map(f64::from).collect();
        let ys: Vec<f64> = cauchy
            .iter()
            .map(|v| v.max(f64::MIN_POSITIVE).ln())
            .collect();
        if !(last < first) || !(least_squares_slope(&xs, &ys) < 0.0) {
            return Err(Error::NonConvergence(cauchy));
        }
    }
    let cells = per_cell.into_iter().map(|(p, _)| p).collect();
    Ok(Multiplicativized {
        func: TensorFunc::from_cells(coarse, cells)?.with_roughness(z.roughness()),
        cauchy,
    })
}

/// `z + (t - s)^exponent E` at `level`, leaving the other levels alone.
pub fn perturb_level<'a, Z: TwoParamSeries + ?Sized>(
    z: &'a Z,
    level: usize,
    exponent: f64,
    e: &'a [f64],
) -> Result<FnSeries<'a>> {
    if level == 0 || level > z.level() {
        return Err(Error::InvalidParameter(format!(
            "cannot perturb level {level} of a level-{} series",
            z.level()
        )));
    }
    let expected = z.dim().pow(level as u32);
    if e.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: e.len(),
        });
    }
    let grid = z.grid().clone();
    let times = grid.clone();
    Ok(FnSeries::new(grid, z.dim(), z.level(), move |i, j| {
        let mut s = z.pair(i, j);
        let w = (times.t(j) - times.t(i)).powf(exponent);
        for (o, v) in s.get_mut(level).iter_mut().zip(e) {
            *o += w * v;
        }
        s
    })?
    .with_roughness(z.roughness()))
}
