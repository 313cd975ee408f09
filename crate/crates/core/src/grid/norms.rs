//! Hölder-type seminorms estimated as sups over sampled index pairs or triples.
//!
//! The `Auto` budget scans every pair when a span has at most
//! [`EXACT_PAIR_LIMIT`] cells and every triple up to [`EXACT_TRIPLE_LIMIT`]
//! cells. Above that only dyadic offsets `(i, i + 2^k)` (and, for triples,
//! `(i, i + 2^a, i + 2^a + 2^b)`) are visited, which keeps every scale in
//! the sup at `O(n log n)` or `O(n log² n)` cost.

use rayon::prelude::*;

use super::increment::{n_op, with_scratch, Increment, Increment3};
use super::{magnitude, Span, TimeGrid};
use crate::error::{Error, Result};

pub const EXACT_PAIR_LIMIT: usize = 4096;
pub const EXACT_TRIPLE_LIMIT: usize = 256;

/// Sampling policy for sups over pairs or triples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Budget {
    /// Exact below the size limits, dyadic above.
    #[default]
    Auto,
    Exact,
    Dyadic,
}

impl Budget {
    fn exact_pairs(self, cells: usize) -> bool {
        match self {
            Budget::Auto => cells <= EXACT_PAIR_LIMIT,
            Budget::Exact => true,
            Budget::Dyadic => false,
        }
    }

    fn exact_triples(self, cells: usize) -> bool {
        match self {
            Budget::Auto => cells <= EXACT_TRIPLE_LIMIT,
            Budget::Exact => true,
            Budget::Dyadic => false,
        }
    }
}

#[inline]
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Offsets `j > i` visited from `i` inside `..=end`.
fn partners(i: usize, end: usize, exact: bool, mut visit: impl FnMut(usize)) {
    if exact {
        (i + 1..=end).for_each(visit);
    } else {
        let mut step = 1;
        let mut last = i;
        while i + step <= end {
            last = i + step;
            visit(last);
            step *= 2;
        }
        if last != end && end > i {
            visit(end);
        }
    }
}

/// `sup |r(i, j)| / weight(i, j)` over sampled pairs of `span`.
pub(crate) fn pair_sup<R, W>(r: &R, span: Span, budget: Budget, weight: W) -> f64
where
    R: Increment + ?Sized,
    W: Fn(usize, usize) -> f64 + Sync,
{
    let exact = budget.exact_pairs(span.cells());
    let width = r.width();
    (span.start..span.end)
        .into_par_iter()
        .map(|i| {
            with_scratch(width, |buf| {
                let mut best = 0.0_f64;
                partners(i, span.end, exact, |j| {
                    r.eval_into(i, j, buf);
                    best = nan_max(best, magnitude(buf) / weight(i, j));
                });
                best
            })
        })
        .reduce(|| 0.0, nan_max)
}

/// `sup |a(i, j, k)| / weight(i, j, k)` over sampled strict triples of `span`.
pub(crate) fn triple_sup<A, W>(a: &A, span: Span, budget: Budget, weight: W) -> f64
where
    A: Increment3 + ?Sized,
    W: Fn(usize, usize, usize) -> f64 + Sync,
{
    let exact = budget.exact_triples(span.cells());
    let width = a.width();
    (span.start..span.end)
        .into_par_iter()
        .map(|i| {
            with_scratch(width, |buf| {
                let mut best = 0.0_f64;
                partners(i, span.end, exact, |j| {
                    if j < span.end {
                        partners(j, span.end, exact, |k| {
                            a.eval3_into(i, j, k, buf);
                            best = nan_max(best, magnitude(buf) / weight(i, j, k));
                        });
                    }
                });
                best
            })
        })
        .reduce(|| 0.0, nan_max)
}

fn check_exponent(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

/// `sup |r(s, t)| / |t - s|^gamma` over the whole grid.
pub fn holder_norm<R: Increment + ?Sized>(r: &R, gamma: f64, budget: Budget) -> Result<f64> {
    holder_norm_on(r, r.grid().full(), gamma, budget)
}

/// [`holder_norm`] restricted to pairs inside `span`.
pub fn holder_norm_on<R: Increment + ?Sized>(
    r: &R,
    span: Span,
    gamma: f64,
    budget: Budget,
) -> Result<f64> {
    check_exponent("gamma", gamma)?;
    let grid = r.grid();
    grid.check_span(span)?;
    Ok(pair_sup(r, span, budget, |i, j| {
        (grid.t(j) - grid.t(i)).powf(gamma)
    }))
}

/// `sup |a(s, u, t)| / (|u - s|^rho |t - u|^gamma)` over strict triples.
pub fn holder_norm2<A: Increment3 + ?Sized>(
    a: &A,
    rho: f64,
    gamma: f64,
    budget: Budget,
) -> Result<f64> {
    holder_norm2_on(a, a.grid().full(), rho, gamma, budget)
}

pub fn holder_norm2_on<A: Increment3 + ?Sized>(
    a: &A,
    span: Span,
    rho: f64,
    gamma: f64,
    budget: Budget,
) -> Result<f64> {
    check_exponent("rho", rho)?;
    check_exponent("gamma", gamma)?;
    let grid = a.grid();
    grid.check_span(span)?;
    Ok(triple_sup(a, span, budget, |i, j, k| {
        (grid.t(j) - grid.t(i)).powf(rho) * (grid.t(k) - grid.t(j)).powf(gamma)
    }))
}

/// Exact `(rho, gamma)` norm of the three-increment `(s, u, t) ↦ a(s, u) ⊗ b(u, t)`.
///
/// The sup factorizes over the middle index, so all triples are covered in
/// `O(n²)`: `max_u [sup_s |a(s,u)|/(u-s)^rho] · [sup_t |b(u,t)|/(t-u)^gamma]`.
pub fn product_norm2<A, B>(a: &A, b: &B, rho: f64, gamma: f64) -> Result<f64>
where
    A: Increment + ?Sized,
    B: Increment + ?Sized,
{
    check_exponent("rho", rho)?;
    check_exponent("gamma", gamma)?;
    let grid = a.grid();
    if !grid.same_as(b.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = grid.cells();
    let (wa, wb) = (a.width(), b.width());
    let best = (1..n)
        .into_par_iter()
        .map(|u| {
            let left = with_scratch(wa, |buf| {
                (0..u).fold(0.0_f64, |m, s| {
                    a.eval_into(s, u, buf);
                    nan_max(m, magnitude(buf) / (grid.t(u) - grid.t(s)).powf(rho))
                })
            });
            let right = with_scratch(wb, |buf| {
                (u + 1..=n).fold(0.0_f64, |m, t| {
                    b.eval_into(u, t, buf);
                    nan_max(m, magnitude(buf) / (grid.t(t) - grid.t(u)).powf(gamma))
                })
            });
            left * right
        })
        .reduce(|| 0.0, nan_max);
    Ok(best)
}

/// Largest component magnitude over sampled pairs.
pub fn increment_scale<R: Increment + ?Sized>(r: &R, budget: Budget) -> f64 {
    pair_sup(r, r.grid().full(), budget, |_, _| 1.0)
}

/// Largest component magnitude over sampled strict triples.
pub fn triple_scale<A: Increment3 + ?Sized>(a: &A, budget: Budget) -> f64 {
    triple_sup(a, a.grid().full(), budget, |_, _, _| 1.0)
}

/// Both sides of the patching inequality
/// `‖R‖_{γ,I∪J} ≤ 2(‖R‖_{γ,I} + ‖R‖_{γ,J}) + ‖N R‖_{ρ1,ρ2,I∪J}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl PatchBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

/// Splits the grid at point `split` into `I = [0, split]` and `J = [split, n]`.
///
/// The `N R` term always includes the triples pivoting at `split`, so the
/// right-hand side stays an upper bound for the left even when the triple
/// budget is dyadic.
pub fn patch_norm_bound<R: Increment + ?Sized>(
    r: &R,
    split: usize,
    gamma: f64,
    rho1: f64,
    rho2: f64,
    budget: Budget,
) -> Result<PatchBound> {
    let grid: &TimeGrid = r.grid();
    let n = grid.cells();
    if split == 0 || split >= n {
        return Err(Error::IndexOutOfRange(format!(
            "split {split} must lie strictly inside 0..{n}"
        )));
    }
    if (rho1 + rho2 - gamma).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "rho1 + rho2 must equal gamma, got {rho1} + {rho2} != {gamma}"
        )));
    }
    let lhs = holder_norm(r, gamma, budget)?;
    let left = holder_norm_on(r, Span::new(0, split), gamma, budget)?;
    let right = holder_norm_on(r, Span::new(split, n), gamma, budget)?;
    let nr = n_op(r);
    let sampled = holder_norm2(&nr, rho1, rho2, budget)?;
    let width = r.width();
    let pivot = (0..split)
        .into_par_iter()
        .map(|s| {
            with_scratch(width, |buf| {
                (split + 1..=n).fold(0.0_f64, |m, t| {
                    nr.eval3_into(s, split, t, buf);
                    let w = (grid.t(split) - grid.t(s)).powf(rho1)
                        * (grid.t(t) - grid.t(split)).powf(rho2);
                    nan_max(m, magnitude(buf) / w)
                })
            })
        })
        .reduce(|| 0.0, nan_max);
    Ok(PatchBound {
        lhs,
        rhs: 2.0 * (left + right) + sampled.max(pivot),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{delta, FnIncrement, FnIncrement3, GridPath};

    #[test]
    fn linear_path_has_unit_lipschitz_norm() {
        let g = TimeGrid::uniform(0.0, 1.0, 32).unwrap();
        let p = GridPath::from_fn(g, vec![1], |t, o| o[0] = t).unwrap();
        let n = holder_norm(&delta(&p), 1.0, Budget::Exact).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_increment_has_zero_norms() {
        let g = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
        let z = FnIncrement::new(g.clone(), vec![3], |_, _, o| o.fill(0.0));
        assert_eq!(holder_norm(&z, 0.5, Budget::Exact).unwrap(), 0.0);
        let z3 = FnIncrement3::new(g, vec![1], |_, _, _, o: &mut [f64]| o[0] = 0.0);
        assert_eq!(holder_norm2(&z3, 0.5, 0.5, Budget::Exact).unwrap(), 0.0);
    }

    #[test]
    fn square_root_increment_has_unit_half_norm() {
        let g = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
        let gg = g.clone();
        let r = FnIncrement::new(g, vec![1], move |i, j, o| o[0] = (gg.t(j) - gg.t(i)).sqrt());
        for budget in [Budget::Exact, Budget::Dyadic] {
            let n = holder_norm(&r, 0.5, budget).unwrap();
            assert!((n - 1.0).abs() < 1e-12, "{budget:?}: {n}");
        }
    }

    #[test]
    fn product_triple_norm_is_one_for_unit_ratio() {
        let g = TimeGrid::uniform(0.0, 1.0, 20).unwrap();
        let gg = g.clone();
        let a = FnIncrement3::new(g.clone(), vec![1], move |s, u, t, o: &mut [f64]| {
            o[0] = (gg.t(u) - gg.t(s)) * (gg.t(t) - gg.t(u))
        });
        let n = holder_norm2(&a, 1.0, 1.0, Budget::Exact).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn young_germ_n_norm_with_identity_paths() {
        // N(F δX)(s,u,t) = -δF(s,u) δX(u,t) = -(u-s)(t-u) for F = X = t.
        let g = TimeGrid::uniform(0.0, 1.0, 24).unwrap();
        let id = GridPath::from_fn(g.clone(), vec![1], |t, o| o[0] = t).unwrap();
        let germ = FnIncrement::new(g, vec![1], |i, j, o| {
            o[0] = id.value(i)[0] * (id.value(j)[0] - id.value(i)[0])
        });
        let nn = n_op(&germ);
        let n = holder_norm2(&nn, 1.0, 1.0, Budget::Exact).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
        let fast = product_norm2(&delta(&id), &delta(&id), 1.0, 1.0).unwrap();
        assert!((fast - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_norm_matches_generic_triple_scan() {
        let g = TimeGrid::uniform(0.0, 1.0, 40).unwrap();
        let f = GridPath::from_fn(g.clone(), vec![1], |t, o| o[0] = (7.0 * t).sin()).unwrap();
        let x = GridPath::from_fn(g.clone(), vec![1], |t, o| o[0] = (3.0 * t).cos() + t).unwrap();
        let df = delta(&f);
        let dx = delta(&x);
        let prod = FnIncrement3::new(g, vec![1], |s, u, t, o: &mut [f64]| {
            o[0] = df.eval(s, u)[0] * dx.eval(u, t)[0]
        });
        let slow = holder_norm2(&prod, 0.7, 0.6, Budget::Exact).unwrap();
        let fast = product_norm2(&df, &dx, 0.7, 0.6).unwrap();
        assert!((slow - fast).abs() <= 1e-12 * slow);
    }

    #[test]
    fn patch_bound_rejects_bad_arguments() {
        let g = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
        let p = GridPath::from_fn(g, vec![1], |t, o| o[0] = t * t).unwrap();
        let d = delta(&p);
        assert!(patch_norm_bound(&d, 0, 1.0, 0.5, 0.5, Budget::Exact).is_err());
        assert!(patch_norm_bound(&d, 8, 1.0, 0.5, 0.5, Budget::Exact).is_err());
        assert!(patch_norm_bound(&d, 4, 1.0, 0.5, 0.4, Budget::Exact).is_err());
        let b = patch_norm_bound(&d, 4, 1.0, 0.5, 0.5, Budget::Exact).unwrap();
        assert!(b.holds());
    }

    #[test]
    fn patch_bound_of_zero_is_zero() {
        let g = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
        let z = FnIncrement::new(g, vec![1], |_, _, o| o[0] = 0.0);
        let b = patch_norm_bound(&z, 3, 0.8, 0.4, 0.4, Budget::Exact).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
    }

    #[test]
    fn invalid_exponent_is_rejected() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let z = FnIncrement::new(g, vec![1], |_, _, o| o[0] = 0.0);
        assert!(holder_norm(&z, 0.0, Budget::Exact).is_err());
        assert!(holder_norm(&z, f64::NAN, Budget::Exact).is_err());
    }
}
