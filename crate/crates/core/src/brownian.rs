//! Brownian rough paths and deterministic Hölder test paths.
//!
//! A sample is drawn on a fine grid with `M` substeps per coarse cell. Each
//! coarse cell owns an independent ChaCha stream (`seed`, stream = cell
//! index), so samples are reproducible bit for bit and cells can be drawn in
//! parallel. The Itô second level of a coarse cell is the left-point sum
//! `Σ (X_u - X_s) ⊗ δX_u` over its fine substeps; longer pairs follow from
//! the Chen relation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controlled::{
    compose_smooth, integral_against_driver, ControlledPath, RoughPath2, VectorField,
};
use crate::error::{Error, Result};
use crate::grid::{
    holder_norm, increment::with_scratch, magnitude, n_op, pair_sup, triple_sup, Budget, GridPath,
    Increment, TimeGrid,
};
use crate::rate::{least_squares_slope, FittedOrder};

/// Default number of fine substeps per coarse cell.
pub const DEFAULT_REFINEMENT: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianConfig {
    pub dim: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub refinement: usize,
}

/// JSON form `{dim, n, seed, refinement, t0, t1}` of a uniform-grid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrownianConfigFile {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t1")]
    pub t1: f64,
}

fn default_refinement() -> usize {
    DEFAULT_REFINEMENT
}

fn default_t1() -> f64 {
    1.0
}

impl BrownianConfig {
    pub fn new(dim: usize, grid: TimeGrid, seed: u64, refinement: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "Brownian dimension must be at least 1".into(),
            ));
        }
        if refinement == 0 {
            return Err(Error::InvalidParameter(
                "refinement factor must be at least 1".into(),
            ));
        }
        Ok(Self {
            dim,
            grid,
            seed,
            refinement,
        })
    }

    /// `n` uniform cells on `[0, 1]`.
    pub fn uniform(dim: usize, n: usize, seed: u64, refinement: usize) -> Result<Self> {
        Self::new(dim, TimeGrid::uniform(0.0, 1.0, n)?, seed, refinement)
    }

    pub fn from_file(file: &BrownianConfigFile) -> Result<Self> {
        Self::new(
            file.dim,
            TimeGrid::uniform(file.t0, file.t1, file.n)?,
            file.seed,
            file.refinement,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}

/// A Brownian path on the fine grid together with its coarse restriction.
#[derive(Clone, Debug)]
pub struct BrownianSample {
    pub fine: GridPath,
    pub coarse: GridPath,
    pub refinement: usize,
}

pub fn sample_bm(config: &BrownianConfig) -> Result<BrownianSample> {
    let (d, m) = (config.dim, config.refinement);
    let fine_grid = config.grid.refine(m)?;
    let n = config.grid.cells();
    let steps: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|cell| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(cell as u64);
            let mut out = Vec::with_capacity(m * d);
            for k in 0..m {
                let f = cell * m + k;
                let sd = (fine_grid.t(f + 1) - fine_grid.t(f)).sqrt();
                for _ in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(sd * z);
                }
            }
            out
        })
        .collect();
    let mut values = Vec::with_capacity((n * m + 1) * d);
    values.extend(std::iter::repeat_n(0.0, d));
    let mut current = vec![0.0; d];
    for cell in &steps {
        for dx in cell.chunks(d) {
            for (c, v) in current.iter_mut().zip(dx) {
                *c += v;
            }
            values.extend_from_slice(&current);
        }
    }
    let fine = GridPath::new(fine_grid, vec![d], values)?;
    let coarse = fine.coarsen(m)?;
    Ok(BrownianSample {
        fine,
        coarse,
        refinement: m,
    })
}

/// Itô second level on each coarse cell, row-major `[cells, d, d]`.
pub fn levy_area_ito(sample: &BrownianSample) -> Vec<f64> {
    let d = sample.fine.width();
    let m = sample.refinement;
    let n = sample.coarse.grid().cells();
    let mut cells = vec![0.0; n * d * d];
    cells
        .par_chunks_mut(d * d)
        .enumerate()
        .for_each(|(cell, out)| {
            let start = sample.fine.value(cell * m);
            for k in cell * m..(cell + 1) * m {
                let (a, b) = (sample.fine.value(k), sample.fine.value(k + 1));
                for p in 0..d {
                    let lag = a[p] - start[p];
                    for q in 0..d {
                        out[p * d + q] += lag * (b[q] - a[q]);
                    }
                }
            }
        });
    cells
}

/// The Itô lift `(X, 𝕏²_Itô)` on the coarse grid.
pub fn ito_lift(config: &BrownianConfig, gamma: f64) -> Result<RoughPath2> {
    let sample = sample_bm(config)?;
    let cells = levy_area_ito(&sample);
    RoughPath2::from_cells(sample.coarse, cells, gamma)
}

/// `𝕏²_Strat = 𝕏²_Itô + ½ I (t - s)`.
pub fn strat_from_ito(ito: &RoughPath2) -> Result<RoughPath2> {
    ito.shift_diagonal(0.5)
}

/// The Stratonovich shift applied to an arbitrary square increment.
pub fn strat_shift<R: Increment + ?Sized>(xx: &R) -> Result<StratShift<'_, R>> {
    match xx.shape() {
        [a, b] if a == b => Ok(StratShift { xx, d: *a }),
        s => Err(Error::Shape(format!(
            "Stratonovich shift needs a square level 2, got {s:?}"
        ))),
    }
}

pub struct StratShift<'a, R: ?Sized> {
    xx: &'a R,
    d: usize,
}

impl<R: Increment + ?Sized> Increment for StratShift<'_, R> {
    fn grid(&self) -> &TimeGrid {
        self.xx.grid()
    }
    fn shape(&self) -> &[usize] {
        self.xx.shape()
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        self.xx.eval_into(i, j, out);
        let h = self.grid().t(j) - self.grid().t(i);
        for a in 0..self.d {
            out[a * self.d + a] += 0.5 * h;
        }
    }
}

/// Both sides of `δJ = δI + ½ Σ_ν ∫ ∂_ν φ_ν(X_u) du` on the grid.
#[derive(Clone, Debug)]
pub struct CorrectionCheck {
    /// `J(t) - J(t_0)`, the Stratonovich integral.
    pub lhs: GridPath,
    /// `I(t) - I(t_0)` plus the trapezoid correction.
    pub rhs: GridPath,
    /// `max_t |lhs - rhs|`.
    pub gap: f64,
}

/// Compares `∫ φ(X) dX` under the Stratonovich and Itô lifts of `ito`.
///
/// `φ` maps `ℝ^d` to `ℝ^{m×d}`.
pub fn correction_identity_check(phi: &VectorField, ito: &RoughPath2) -> Result<CorrectionCheck> {
    let d = ito.dim();
    if phi.input_dim() != d || phi.output_shape().last() != Some(&d) {
        return Err(Error::Shape(format!(
            "field must map R^{d} to matrices with {d} columns, got {:?}",
            phi.output_shape()
        )));
    }
    let strat = std::sync::Arc::new(strat_from_ito(ito)?);
    let ito = std::sync::Arc::new(ito.clone());
    let j = integral_against_driver(&compose_smooth(phi, &ControlledPath::driver(strat))?)?;
    let i = integral_against_driver(&compose_smooth(phi, &ControlledPath::driver(ito.clone()))?)?;
    let m = phi.output_width() / d;
    let grid = ito.grid();
    let mut jac = vec![0.0; phi.output_width() * d];
    let mut trace = |t: usize, out: &mut [f64]| {
        phi.jacobian(ito.x().value(t), &mut jac);
        for (mu, o) in out.iter_mut().enumerate() {
            *o = 0.5 * (0..d).map(|nu| jac[(mu * d + nu) * d + nu]).sum::<f64>();
        }
    };
    let mut rhs = Vec::with_capacity(grid.len() * m);
    let mut acc = vec![0.0; m];
    let (mut prev, mut next) = (vec![0.0; m], vec![0.0; m]);
    trace(0, &mut prev);
    rhs.extend(i.z().value(0).iter().zip(&acc).map(|(a, b)| a + b));
    for k in 0..grid.cells() {
        trace(k + 1, &mut next);
        let h = grid.t(k + 1) - grid.t(k);
        for ((a, p), q) in acc.iter_mut().zip(&prev).zip(&next) {
            *a += 0.5 * h * (p + q);
        }
        rhs.extend(i.z().value(k + 1).iter().zip(&acc).map(|(a, b)| a + b));
        std::mem::swap(&mut prev, &mut next);
    }
    let rhs = GridPath::new(grid.clone(), j.z().shape().to_vec(), rhs)?;
    let gap = j.z().sup_distance(&rhs)?;
    Ok(CorrectionCheck {
        lhs: j.z().clone(),
        rhs,
        gap,
    })
}

/// Correction gaps on dyadic coarsenings of one Itô lift.
#[derive(Clone, Debug)]
pub struct CorrectionRate {
    /// `(mesh, gap)`, finest first; each gap is measured at the points of
    /// the coarsest grid.
    pub rows: Vec<(f64, f64)>,
    pub order: FittedOrder,
}

/// Gap of [`correction_identity_check`] over `levels` coarsenings by
/// powers of two, fitted against the mesh.
pub fn correction_rate(
    phi: &VectorField,
    ito: &RoughPath2,
    levels: usize,
) -> Result<CorrectionRate> {
    if levels < 2 {
        return Err(Error::InvalidParameter(
            "a correction rate needs 2 levels".into(),
        ));
    }
    let coarsest = 1usize << (levels - 1);
    if !ito.grid().cells().is_multiple_of(coarsest) {
        return Err(Error::InsufficientGrid(format!(
            "{} cells cannot be coarsened by {coarsest}",
            ito.grid().cells()
        )));
    }
    let mut rows = Vec::with_capacity(levels);
    for l in 0..levels {
        let stride = 1usize << l;
        let r = if stride == 1 {
            ito.clone()
        } else {
            ito.coarsen(stride)?
        };
        let check = correction_identity_check(phi, &r)?;
        let step = coarsest / stride;
        let gap = (0..=r.grid().cells() / step)
            .map(|k| {
                let (a, b) = (check.lhs.value(k * step), check.rhs.value(k * step));
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        rows.push((r.grid().mesh(), gap));
    }
    let scale = ito.scale(Budget::Auto);
    let order = if rows
        .iter()
        .all(|r| r.1 <= crate::rate::EXACT_REL_TOL * scale)
    {
        FittedOrder::Exact
    } else {
        let kept: Vec<_> = rows.iter().filter(|r| r.1 > 0.0).collect();
        let xs: Vec<f64> = kept.iter().map(|r| r.0.ln()).collect();
        let ys: Vec<f64> = kept.iter().map(|r| r.1.ln()).collect();
        FittedOrder::Order(least_squares_slope(&xs, &ys))
    };
    Ok(CorrectionRate { rows, order })
}

/// `W(t) = Σ_{k<terms} 2^{-γk} cos(2^k π t)`.
pub fn weierstrass_path(gamma: f64, terms: usize, grid: &TimeGrid) -> Result<GridPath> {
    weierstrass_phased(gamma, &vec![0.0; terms], grid)
}

/// Weierstrass sum with one phase per term: `Σ_k 2^{-γk} cos(2^k π t + θ_k)`.
pub fn weierstrass_phased(gamma: f64, phases: &[f64], grid: &TimeGrid) -> Result<GridPath> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Weierstrass exponent must lie in (0, 1], got {gamma}"
        )));
    }
    if phases.is_empty() {
        return Err(Error::InvalidParameter(
            "Weierstrass sum needs at least one term".into(),
        ));
    }
    let a = 2f64.powf(-gamma);
    GridPath::from_fn(grid.clone(), vec![1], |t, o| {
        let mut amp = 1.0;
        let mut freq = std::f64::consts::PI;
        let mut s = 0.0;
        for &theta in phases {
            s += amp * (freq * t + theta).cos();
            amp *= a;
            freq *= 2.0;
        }
        o[0] = s;
    })
}

/// Seeded phases in `[0, 2π)` for [`weierstrass_phased`].
pub fn random_phases(terms: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..terms)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect()
}

/// Components of the Garsia–Rodemich–Rumsey-type comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrrDiagnostic {
    /// `U_{γ+2/p, p}(R)`.
    pub u: f64,
    /// `sup |N R(s, u, t)| / |t - s|^γ`.
    pub nr_norm: f64,
    /// `‖R‖_γ`.
    pub measured: f64,
    /// `measured / (u + nr_norm)`, zero when all three vanish.
    pub ratio: f64,
}

/// `U_{θ,p}(R) = [∫∫ (|R(s,t)| / |t-s|^θ)^p ds dt]^{1/p}` with `θ = γ + 2/p`,
/// a product-trapezoid rule over ordered pairs (both orders counted), and
/// the Hölder and `N`-norms it controls.
pub fn grr_diagnostic<R: Increment + ?Sized>(r: &R, gamma: f64, p: f64) -> Result<GrrDiagnostic> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "p must be at least 1, got {p}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let grid = r.grid();
    let n = grid.cells();
    let theta = gamma + 2.0 / p;
    let weight: Vec<f64> = (0..=n)
        .map(|i| {
            let left = if i > 0 {
                grid.t(i) - grid.t(i - 1)
            } else {
                0.0
            };
            let right = if i < n {
                grid.t(i + 1) - grid.t(i)
            } else {
                0.0
            };
            0.5 * (left + right)
        })
        .collect();
    // the integrand is scaled by its sup before the p-th power so that large
    // p cannot underflow
    let sup = pair_sup(r, grid.full(), Budget::Exact, |i, j| {
        (grid.t(j) - grid.t(i)).powf(theta)
    });
    let u = if sup == 0.0 {
        0.0
    } else {
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                with_scratch(r.width(), |buf| {
                    let mut acc = 0.0;
                    for j in i + 1..=n {
                        r.eval_into(i, j, buf);
                        let v = magnitude(buf) / (grid.t(j) - grid.t(i)).powf(theta) / sup;
                        acc += weight[i] * weight[j] * v.powf(p);
                    }
                    acc
                })
            })
            .sum();
        sup * (2.0 * total).powf(1.0 / p)
    };
    let nr = n_op(r);
    let nr_norm = triple_sup(&nr, grid.full(), Budget::Auto, |s, _, t| {
        (grid.t(t) - grid.t(s)).powf(gamma)
    });
    let measured = holder_norm(r, gamma, Budget::Auto)?;
    let denom = u + nr_norm;
    let ratio = if denom == 0.0 {
        if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        measured / denom
    };
    Ok(GrrDiagnostic {
        u,
        nr_norm,
        measured,
        ratio,
    })
}
