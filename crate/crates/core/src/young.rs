//! Young integration `∫ F dX` for `F ∈ C^ρ`, `X ∈ C^γ`, `γ + ρ > 1`.
//!
//! The integral is the sewing of the germ `F_s δX(s, t)`; on a grid this is
//! the left-point Riemann sum. Operator-valued integrands contract their last
//! axis against the increment of `X`.

use crate::error::{Error, Result};
use crate::grid::{delta, holder_norm, increment::with_scratch, Budget, GridPath};
use crate::rate::{fit_levels, RateStudy};
use crate::sewing::{lambda_of_germ, level_sums, sewing_constant, sum_cells, Germ};
use crate::tensor::Contraction;

fn check_grids(f: &GridPath, x: &GridPath) -> Result<()> {
    if f.grid().same_as(x.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

#[allow(clippy::type_complexity)]
fn young_parts<'a>(
    f: &'a GridPath,
    x: &'a GridPath,
) -> Result<(
    Vec<usize>,
    impl Fn(usize, usize, &mut [f64]) + Send + Sync + 'a,
)> {
    check_grids(f, x)?;
    let (contraction, shape) = Contraction::resolve(f.shape(), x.shape())?;
    let xw = x.width();
    let eval = move |i: usize, j: usize, out: &mut [f64]| {
        with_scratch(xw, |dx| {
            x.delta_into(i, j, dx);
            contraction.apply(f.value(i), dx, out);
        })
    };
    Ok((shape, eval))
}

/// The germ `Ξ(s, t) = F_s · δX(s, t)` with `N Ξ ∈ C_2^{ρ, γ}`.
pub fn young_germ<'a>(f: &'a GridPath, x: &'a GridPath, rho: f64, gamma: f64) -> Result<Germ<'a>> {
    let (shape, eval) = young_parts(f, x)?;
    Germ::new(f.grid().clone(), shape, vec![(rho, gamma)], eval)
}

/// `I(t_k) = Σ_{j<k} F(t_j) · δX(t_j, t_{j+1})`.
///
/// Identical, bit for bit, to sewing [`young_germ`] on the same grid.
pub fn young_integral(f: &GridPath, x: &GridPath) -> Result<GridPath> {
    let (shape, eval) = young_parts(f, x)?;
    sum_cells(&Germ::undeclared(f.grid().clone(), shape, eval))
}

/// Sup-ratio of the Young remainder against its a-priori bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YoungBound {
    /// `sup |∫_s^t (F_u - F_s) dX_u| / |t-s|^{γ+ρ}` over grid pairs.
    pub measured: f64,
    /// `‖δF‖_ρ ‖δX‖_γ / (2^{γ+ρ} - 2)`.
    pub bound: f64,
}

impl YoungBound {
    pub fn holds(&self, slack: f64) -> bool {
        self.measured <= self.bound * (1.0 + slack)
    }
}

pub fn young_remainder_bound(
    f: &GridPath,
    x: &GridPath,
    gamma: f64,
    rho: f64,
) -> Result<YoungBound> {
    if !(gamma + rho > 1.0) {
        return Err(Error::ExponentTooSmall(gamma + rho));
    }
    let germ = young_germ(f, x, rho, gamma)?;
    let lambda = lambda_of_germ(&germ)?;
    let measured = holder_norm(&lambda, gamma + rho, Budget::Auto)?;
    let bound = sewing_constant(gamma + rho)
        * holder_norm(&delta(f), rho, Budget::Auto)?
        * holder_norm(&delta(x), gamma, Budget::Auto)?;
    Ok(YoungBound { measured, bound })
}

/// Convergence order of dyadic left-point sums over the whole grid.
///
/// The grid needs `2^L` cells with `L + 1 >= levels`; the study uses the
/// `levels` finest dyadic levels and compares each against the finest.
pub fn young_rate(
    f: &GridPath,
    x: &GridPath,
    gamma: f64,
    rho: f64,
    levels: usize,
) -> Result<RateStudy> {
    let germ = young_germ(f, x, rho, gamma)?;
    if !(germ.exponent() > 1.0) {
        return Err(Error::ExponentTooSmall(germ.exponent()));
    }
    fit_levels(&level_sums(&germ)?, levels)
}
