//! Rough differential equations `dY = φ(Y) dX` driven by a level-2 rough path.
//!
//! [`solve_step`] is the explicit scheme
//! `Y_{k+1} = Y_k + φ(Y_k) δX + (∂φ(Y_k) φ(Y_k)) : 𝕏²`.
//! [`solve_picard`] iterates `Y ← Y_a + ∫ φ(Y) dX` on windows that are
//! halved until the iteration contracts. Both return the solution as a path
//! controlled by the driver with derivative `φ(Y)`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controlled::{
    compose_smooth, controlled_norm_with, integral_against_driver, ControlledPath, Reference,
    RoughPath2, VectorField,
};
use crate::error::{Error, Result};
use crate::grid::io::fmt_f64;
use crate::grid::{Budget, GridPath, Increment, Span};
use crate::rate::least_squares_slope;

/// Smallest Picard window, in grid cells.
pub const MIN_WINDOW: usize = 4;

/// Iterations without a decrease of the iterate distance before a window is
/// declared non-contracting.
pub const STALL_LIMIT: usize = 3;

#[derive(Clone, Debug)]
pub struct RdeProblem {
    pub driver: Arc<RoughPath2>,
    pub phi: VectorField,
    pub y0: Vec<f64>,
    pub interval: Span,
}

impl RdeProblem {
    pub fn new(
        driver: Arc<RoughPath2>,
        phi: VectorField,
        y0: Vec<f64>,
        interval: Span,
    ) -> Result<Self> {
        driver.grid().check_span(interval)?;
        if interval.cells() == 0 {
            return Err(Error::InvalidParameter(
                "the solve interval is empty".into(),
            ));
        }
        let (m, d) = (y0.len(), driver.dim());
        if phi.input_dim() != m || phi.output_shape() != [m, d] {
            return Err(Error::Shape(format!(
                "field must map R^{m} to R^{m}x{d}, got R^{} -> {:?}",
                phi.input_dim(),
                phi.output_shape()
            )));
        }
        let (gamma, delta) = (driver.gamma(), phi.delta());
        let ok = if gamma <= 0.5 {
            (2.0 + delta) * gamma > 1.0
        } else {
            (1.0 + delta) * gamma > 1.0
        };
        if !ok {
            return Err(Error::ExponentTooSmall(gamma * (1.0 + delta)));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "initial value must be finite".into(),
            ));
        }
        Ok(Self {
            driver,
            phi,
            y0,
            interval,
        })
    }

    /// The problem on the whole driver grid.
    pub fn on_grid(driver: Arc<RoughPath2>, phi: VectorField, y0: Vec<f64>) -> Result<Self> {
        let span = driver.grid().full();
        Self::new(driver, phi, y0, span)
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    fn window_driver(&self) -> Result<Arc<RoughPath2>> {
        if self.interval == self.driver.grid().full() {
            Ok(self.driver.clone())
        } else {
            Ok(Arc::new(self.driver.slice(self.interval)?))
        }
    }
}

/// Field value, and the level-2 coefficient `D^{μνκ} = Σ_λ ∂_λ φ^{μν} φ^{λκ}`.
struct Coefficients {
    value: Vec<f64>,
    jac: Vec<f64>,
    second: Vec<f64>,
}

impl Coefficients {
    fn new(m: usize, d: usize) -> Self {
        Self {
            value: vec![0.0; m * d],
            jac: vec![0.0; m * d * m],
            second: vec![0.0; m * d * d],
        }
    }

    fn update(&mut self, phi: &VectorField, y: &[f64], m: usize, d: usize) {
        phi.eval(y, &mut self.value);
        phi.jacobian(y, &mut self.jac);
        for mn in 0..m * d {
            let row = &self.jac[mn * m..(mn + 1) * m];
            for kappa in 0..d {
                self.second[mn * d + kappa] = row
                    .iter()
                    .enumerate()
                    .map(|(l, j)| j * self.value[l * d + kappa])
                    .sum();
            }
        }
    }
}

fn solution(
    rough: Arc<RoughPath2>,
    phi: &VectorField,
    values: Vec<f64>,
    m: usize,
) -> Result<ControlledPath> {
    let d = rough.dim();
    let grid = rough.grid().clone();
    let mut deriv = vec![0.0; grid.len() * m * d];
    for (y, out) in values.chunks(m).zip(deriv.chunks_mut(m * d)) {
        phi.eval(y, out);
    }
    let eta = 2.0 * rough.gamma();
    ControlledPath::new(
        GridPath::new(grid.clone(), vec![m], values)?,
        GridPath::new(grid, vec![m, d], deriv)?,
        Reference::Rough(rough),
        eta,
    )
}

/// The explicit level-2 scheme on `problem.interval`.
pub fn solve_step(problem: &RdeProblem) -> Result<ControlledPath> {
    let rough = problem.window_driver()?;
    let (m, d) = (problem.dim(), rough.dim());
    let n = rough.grid().cells();
    let mut values = Vec::with_capacity((n + 1) * m);
    values.extend_from_slice(&problem.y0);
    let mut c = Coefficients::new(m, d);
    let (mut dx, mut xx) = (vec![0.0; d], vec![0.0; d * d]);
    let mut next = vec![0.0; m];
    for k in 0..n {
        let y = &values[k * m..(k + 1) * m];
        c.update(&problem.phi, y, m, d);
        rough.x().delta_into(k, k + 1, &mut dx);
        rough.xx().eval_into(k, k + 1, &mut xx);
        for mu in 0..m {
            let mut acc = y[mu];
            for nu in 0..d {
                acc += c.value[mu * d + nu] * dx[nu];
                for kappa in 0..d {
                    acc += c.second[(mu * d + nu) * d + kappa] * xx[kappa * d + nu];
                }
            }
            next[mu] = acc;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: problem.interval.start + k,
                state: y.to_vec(),
            });
        }
        values.extend_from_slice(&next);
    }
    solution(rough, &problem.phi, values, m)
}

/// Per-window record of a Picard solve.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub span: Span,
    pub iterations: usize,
    /// Controlled-norm distances between successive iterates.
    pub distances: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub path: ControlledPath,
    pub windows: Vec<WindowReport>,
}

fn difference(a: &ControlledPath, b: &ControlledPath) -> Result<ControlledPath> {
    ControlledPath::new(
        a.z().lin_comb(1.0, b.z(), -1.0)?,
        a.zprime().lin_comb(1.0, b.zprime(), -1.0)?,
        a.reference().clone(),
        a.eta(),
    )
}

enum WindowOutcome {
    Converged(ControlledPath, Vec<f64>),
    Stalled(Vec<f64>),
}

fn picard_window(
    phi: &VectorField,
    rough: Arc<RoughPath2>,
    y_start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<WindowOutcome> {
    let m = y_start.len();
    let mut start = vec![0.0; m * rough.dim()];
    phi.eval(y_start, &mut start);
    let mut y = ControlledPath::new(
        GridPath::constant(rough.grid().clone(), vec![m], y_start)?,
        GridPath::constant(rough.grid().clone(), vec![m, rough.dim()], &start)?,
        Reference::Rough(rough.clone()),
        2.0 * rough.gamma(),
    )?;
    let mut distances = Vec::new();
    let mut stalled = 0;
    for _ in 0..max_iter {
        let a = integral_against_driver(&compose_smooth(phi, &y)?)?;
        let z = a.z().shifted(y_start)?;
        if !z.is_finite() {
            return Ok(WindowOutcome::Stalled(distances));
        }
        let next = ControlledPath::new(z, a.zprime().clone(), a.reference().clone(), a.eta())?;
        let dist = controlled_norm_with(&difference(&next, &y)?, Budget::Dyadic);
        if let Some(&last) = distances.last() {
            if !(dist < last) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        distances.push(dist);
        y = next;
        if dist < tol {
            return Ok(WindowOutcome::Converged(y, distances));
        }
        if stalled >= STALL_LIMIT || !dist.is_finite() {
            return Ok(WindowOutcome::Stalled(distances));
        }
    }
    Ok(WindowOutcome::Stalled(distances))
}

/// Picard iteration with adaptive contraction windows.
///
/// Each window starts as the whole remaining interval and is halved while
/// the iteration fails to contract (no decrease over [`STALL_LIMIT`]
/// iterations, or `max_iter` reached); windows shorter than [`MIN_WINDOW`]
/// cells abort with the recorded distances. Distances between iterates are
/// controlled norms sampled on dyadic pairs.
pub fn solve_picard(problem: &RdeProblem, tol: f64, max_iter: usize) -> Result<PicardSolution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(
            "Picard needs a positive tolerance and at least one iteration".into(),
        ));
    }
    let m = problem.dim();
    let Span { start, end } = problem.interval;
    let mut values: Vec<f64> = problem.y0.clone();
    let mut windows = Vec::new();
    let mut a = start;
    while a < end {
        let mut width = end - a;
        loop {
            let span = Span::new(a, a + width);
            let rough = Arc::new(problem.driver.slice(span)?);
            let y_start = values[values.len() - m..].to_vec();
            match picard_window(&problem.phi, rough, &y_start, tol, max_iter)? {
                WindowOutcome::Converged(y, distances) => {
                    values.extend_from_slice(&y.z().values()[m..]);
                    windows.push(WindowReport {
                        span,
                        iterations: distances.len(),
                        distances,
                    });
                    a += width;
                    break;
                }
                WindowOutcome::Stalled(distances) => {
                    if width / 2 < MIN_WINDOW {
                        return Err(Error::PicardFailure {
                            start: a,
                            width,
                            distances,
                        });
                    }
                    width /= 2;
                }
            }
        }
    }
    let rough = problem.window_driver()?;
    Ok(PicardSolution {
        path: solution(rough, &problem.phi, values, m)?,
        windows,
    })
}

/// Which solver a probe runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solver {
    Step,
    Picard { tol: f64, max_iter: usize },
}

impl Solver {
    pub fn solve(&self, problem: &RdeProblem) -> Result<ControlledPath> {
        match *self {
            Solver::Step => solve_step(problem),
            Solver::Picard { tol, max_iter } => Ok(solve_picard(problem, tol, max_iter)?.path),
        }
    }
}

/// A smooth seeded direction `h(t) = Σ_{k=1}^{3} a_k sin(kπ(t - t_0) + θ_k)`
/// per component, with `h(t_0)` subtracted.
pub fn smooth_direction(driver: &RoughPath2, seed: u64) -> Result<GridPath> {
    let d = driver.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..3 * d)
        .map(|_| {
            (
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * std::f64::consts::TAU,
            )
        })
        .collect();
    let t0 = driver.grid().start();
    let h = |t: f64, c: usize| -> f64 {
        (0..3)
            .map(|k| {
                let (a, th) = coeffs[c * 3 + k];
                a * ((k + 1) as f64 * std::f64::consts::PI * (t - t0) + th).sin()
            })
            .sum()
    };
    GridPath::from_fn(driver.grid().clone(), vec![d], |t, o| {
        for (c, v) in o.iter_mut().enumerate() {
            *v = h(t, c) - h(t0, c);
        }
    })
}

/// The translated driver `(X + εh, 𝕏² + ε ξ + ε² ½ δh⊗δh)` with the cell
/// cross-integrals `ξ = ½(δX⊗δh + δh⊗δX)`; Chen holds by construction.
pub fn perturb_driver(driver: &RoughPath2, h: &GridPath, eps: f64) -> Result<RoughPath2> {
    driver.x().check_compatible(h)?;
    let d = driver.dim();
    let x = driver.x().lin_comb(1.0, h, eps)?;
    let n = driver.grid().cells();
    let mut cells = driver.xx().cells().to_vec();
    let (mut dx, mut dh) = (vec![0.0; d], vec![0.0; d]);
    for k in 0..n {
        driver.x().delta_into(k, k + 1, &mut dx);
        h.delta_into(k, k + 1, &mut dh);
        for a in 0..d {
            for b in 0..d {
                cells[(k * d + a) * d + b] +=
                    eps * 0.5 * (dx[a] * dh[b] + dh[a] * dx[b]) + eps * eps * 0.5 * dh[a] * dh[b];
            }
        }
    }
    RoughPath2::from_cells(x, cells, driver.gamma())
}

/// `(X + εh, 𝕏² + ε ξ)` for a caller-supplied level-2 correction `ξ`,
/// rejected unless the Chen relation survives.
pub fn perturb_driver_with<R: Increment + ?Sized>(
    driver: &RoughPath2,
    h: &GridPath,
    eps: f64,
    xi: &R,
) -> Result<RoughPath2> {
    let x = driver.x().lin_comb(1.0, h, eps)?;
    let d = driver.dim();
    let xx = driver.xx();
    let sum = crate::grid::FnIncrement::new(driver.grid().clone(), vec![d, d], |i, j, out| {
        xx.eval_into(i, j, out);
        crate::grid::increment::with_scratch(d * d, |b| {
            xi.eval_into(i, j, b);
            for (o, v) in out.iter_mut().zip(b.iter()) {
                *o += eps * v;
            }
        })
    });
    RoughPath2::from_increment(x, &sum, driver.gamma(), Budget::Auto)
}

/// Log-log dependence of the solution on a perturbation size.
#[derive(Clone, Debug)]
pub struct ProbeResult {
    /// `(size, sup distance)`.
    pub rows: Vec<(f64, f64)>,
    pub slope: f64,
}

impl ProbeResult {
    fn fit(rows: Vec<(f64, f64)>) -> Self {
        let kept: Vec<_> = rows.iter().filter(|r| r.0 > 0.0 && r.1 > 0.0).collect();
        let slope = if kept.len() >= 2 {
            let xs: Vec<f64> = kept.iter().map(|r| r.0.ln()).collect();
            let ys: Vec<f64> = kept.iter().map(|r| r.1.ln()).collect();
            least_squares_slope(&xs, &ys)
        } else {
            f64::NAN
        };
        Self { rows, slope }
    }

    /// `max distance / size` over the probed sizes.
    pub fn lipschitz(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.0 > 0.0)
            .map(|r| r.1 / r.0)
            .fold(0.0, f64::max)
    }

    /// CSV with header `epsilon,distance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "distance"])?;
        for (e, d) in &self.rows {
            w.write_record([fmt_f64(*e), fmt_f64(*d)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default perturbation sizes `1e-1 … 1e-4`.
pub const PROBE_EPSILONS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Solves with drivers translated by `ε h` for a seeded smooth `h` and fits
/// the slope of the sup distance against `ε`.
pub fn ito_map_probe(
    problem: &RdeProblem,
    epsilons: &[f64],
    seed: u64,
    solver: Solver,
) -> Result<ProbeResult> {
    let base = solver.solve(problem)?;
    let h = smooth_direction(&problem.driver, seed)?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let driver = Arc::new(perturb_driver(&problem.driver, &h, eps)?);
        let p = RdeProblem::new(
            driver,
            problem.phi.clone(),
            problem.y0.clone(),
            problem.interval,
        )?;
        let y = solver.solve(&p)?;
        rows.push((eps, y.z().sup_distance(base.z())?));
    }
    Ok(ProbeResult::fit(rows))
}

/// Solves from `y0 + δ e` for a seeded unit direction `e` and each size `δ`.
pub fn initial_value_probe(
    problem: &RdeProblem,
    sizes: &[f64],
    seed: u64,
    solver: Solver,
) -> Result<ProbeResult> {
    let base = solver.solve(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: Vec<f64> = (0..problem.dim())
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let norm = e
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    e.iter_mut().for_each(|v| *v /= norm);
    let mut rows = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let y0: Vec<f64> = problem.y0.iter().zip(&e).map(|(a, b)| a + s * b).collect();
        let p = RdeProblem::new(
            problem.driver.clone(),
            problem.phi.clone(),
            y0,
            problem.interval,
        )?;
        rows.push((s, solver.solve(&p)?.z().sup_distance(base.z())?));
    }
    Ok(ProbeResult::fit(rows))
}

/// CSV with header `t,y0,y1,…`.
pub fn write_solution_csv<W: Write>(y: &ControlledPath, out: W) -> Result<()> {
    crate::grid::io::write_path_csv(y.z(), "y", out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlled::controlled_norm;
    use crate::grid::{holder_norm, TimeGrid};

    fn sine_driver(n: usize) -> Arc<RoughPath2> {
        let g = TimeGrid::uniform(0.0, 1.0, n).unwrap();
        let x = GridPath::from_fn(g, vec![1], |t, o| o[0] = t.sin()).unwrap();
        Arc::new(RoughPath2::geometric(x, 1.0).unwrap())
    }

    fn linear() -> VectorField {
        VectorField::linear(1, vec![1, 1], vec![1.0]).unwrap()
    }

    fn exact(r: &RoughPath2, k: usize) -> f64 {
        (r.x().value(k)[0] - r.x().value(0)[0]).exp()
    }

    #[test]
    fn zero_field_keeps_initial_value() {
        let r = sine_driver(32);
        let zero = VectorField::constant(2, vec![2, 1], vec![0.0, 0.0]).unwrap();
        let p = RdeProblem::on_grid(r, zero, vec![1.0, -2.0]).unwrap();
        let y = solve_step(&p).unwrap();
        assert!(y.z().values().chunks(2).all(|v| v == [1.0, -2.0]));
        let pic = solve_picard(&p, 1e-12, 20).unwrap();
        assert_eq!(pic.windows.len(), 1);
        assert_eq!(pic.windows[0].iterations, 1);
    }

    #[test]
    fn constant_field_is_affine_in_driver() {
        let g = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
        let x = GridPath::from_fn(g, vec![2], |t, o| {
            o[0] = (5.0 * t).sin();
            o[1] = t * t;
        })
        .unwrap();
        let r = Arc::new(RoughPath2::geometric(x.clone(), 0.5).unwrap());
        let c = [1.0, -2.0, 0.5, 3.0];
        let f = VectorField::constant(2, vec![2, 2], c.to_vec()).unwrap();
        let p = RdeProblem::on_grid(r, f, vec![0.3, 0.1]).unwrap();
        let y = solve_step(&p).unwrap();
        for k in 0..=64 {
            let dx = [x.value(k)[0] - x.value(0)[0], x.value(k)[1] - x.value(0)[1]];
            assert!((y.z().value(k)[0] - (0.3 + c[0] * dx[0] + c[1] * dx[1])).abs() < 1e-14);
            assert!((y.z().value(k)[1] - (0.1 + c[2] * dx[0] + c[3] * dx[1])).abs() < 1e-14);
        }
        let pic = solve_picard(&p, 1e-12, 20).unwrap();
        assert_eq!(pic.windows[0].iterations, 2);
        assert!(pic.path.z().sup_distance(y.z()).unwrap() < 1e-14);
    }

    #[test]
    fn linear_scalar_tends_to_exponential() {
        let mut errs = Vec::new();
        for n in [64usize, 256, 1024] {
            let r = sine_driver(n);
            let p = RdeProblem::on_grid(r.clone(), linear(), vec![1.0]).unwrap();
            let y = solve_step(&p).unwrap();
            let e = (0..=n)
                .map(|k| (y.z().value(k)[0] - exact(&r, k)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[2] < 1e-6);
        let order = (errs[0] / errs[2]).log2() / 4.0;
        assert!(order >= 1.5, "{errs:?}");
    }

    #[test]
    fn picard_agrees_with_step() {
        let r = sine_driver(512);
        let p = RdeProblem::on_grid(r, linear(), vec![1.0]).unwrap();
        let tol = 1e-10;
        let a = solve_step(&p).unwrap();
        let b = solve_picard(&p, tol, 50).unwrap();
        assert!(a.z().sup_distance(b.path.z()).unwrap() <= 10.0 * tol);
    }

    #[test]
    fn flow_property() {
        let g = TimeGrid::uniform(0.0, 1.0, 96).unwrap();
        let x = GridPath::from_fn(g, vec![2], |t, o| {
            o[0] = (5.0 * t).sin();
            o[1] = (3.0 * t).cos();
        })
        .unwrap();
        let r = Arc::new(RoughPath2::geometric(x, 0.5).unwrap());
        let f = VectorField::sine(
            2,
            vec![2, 2],
            vec![1.0, 0.5, -0.5, 1.0, 0.2, 0.3, 1.0, -1.0],
            vec![0.0, 0.1, 0.2, 0.3],
        )
        .unwrap();
        let whole = solve_step(
            &RdeProblem::new(r.clone(), f.clone(), vec![0.2, -0.4], Span::new(10, 90)).unwrap(),
        )
        .unwrap();
        let first = solve_step(
            &RdeProblem::new(r.clone(), f.clone(), vec![0.2, -0.4], Span::new(10, 50)).unwrap(),
        )
        .unwrap();
        let second = solve_step(
            &RdeProblem::new(
                r.clone(),
                f.clone(),
                first.z().last().to_vec(),
                Span::new(50, 90),
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(whole.z().value(40), first.z().last());
        assert_eq!(whole.z().last(), second.z().last());

        let tol = 1e-11;
        let pw = solve_picard(
            &RdeProblem::new(r.clone(), f.clone(), vec![0.2, -0.4], Span::new(10, 90)).unwrap(),
            tol,
            60,
        )
        .unwrap();
        let p1 = solve_picard(
            &RdeProblem::new(r.clone(), f.clone(), vec![0.2, -0.4], Span::new(10, 50)).unwrap(),
            tol,
            60,
        )
        .unwrap();
        let p2 = solve_picard(
            &RdeProblem::new(r, f, p1.path.z().last().to_vec(), Span::new(50, 90)).unwrap(),
            tol,
            60,
        )
        .unwrap();
        let gap = pw
            .path
            .z()
            .last()
            .iter()
            .zip(p2.path.z().last())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 10.0 * tol, "{gap}");
    }

    #[test]
    fn solutions_are_controlled() {
        let r = sine_driver(256);
        let p = RdeProblem::on_grid(r, linear(), vec![1.0]).unwrap();
        let y = solve_step(&p).unwrap();
        let rem = holder_norm(&y.remainder(), 2.0 * y.gamma(), Budget::Auto).unwrap();
        assert!(rem.is_finite());
        assert!(controlled_norm(&compose_smooth(&p.phi, &y).unwrap()).is_finite());
    }

    #[test]
    fn blow_up_reports_step() {
        let r = sine_driver(64);
        let cubic =
            VectorField::polynomial(1, vec![1, 1], vec![1.0], vec![0.0], [0.0, 0.0, 0.0, 1e6])
                .unwrap();
        let p = RdeProblem::on_grid(r, cubic, vec![10.0]).unwrap();
        match solve_step(&p) {
            Err(Error::NonFinite { step, state }) => {
                assert!(step < 64);
                assert_eq!(state.len(), 1);
            }
            other => panic!("expected a non-finite failure, got {other:?}"),
        }
    }

    #[test]
    fn invalid_problems() {
        let r = sine_driver(16);
        assert!(RdeProblem::on_grid(r.clone(), linear(), vec![1.0, 2.0]).is_err());
        assert!(RdeProblem::new(r.clone(), linear(), vec![1.0], Span::new(3, 3)).is_err());
        let rough = Arc::new((*r).clone().with_gamma(0.34).unwrap());
        let weak = VectorField::custom(
            1,
            vec![1, 1],
            0.5,
            |y, o| o[0] = y[0],
            |_, o| o[0] = 1.0,
            None,
        )
        .unwrap();
        assert!(matches!(
            RdeProblem::on_grid(rough, weak, vec![1.0]),
            Err(Error::ExponentTooSmall(_))
        ));
        let p = RdeProblem::on_grid(r, linear(), vec![1.0]).unwrap();
        assert!(solve_picard(&p, 0.0, 10).is_err());
    }

    #[test]
    fn picard_failure_carries_diagnostics() {
        let r = sine_driver(16);
        let p = RdeProblem::on_grid(r, linear(), vec![1.0]).unwrap();
        match solve_picard(&p, 1e-300, 2) {
            Err(Error::PicardFailure {
                width, distances, ..
            }) => {
                assert!(width < 2 * MIN_WINDOW);
                assert_eq!(distances.len(), 2);
            }
            other => panic!("expected a Picard failure, got {other:?}"),
        }
    }

    #[test]
    fn probes() {
        let r = sine_driver(512);
        let p = RdeProblem::on_grid(r.clone(), linear(), vec![1.0]).unwrap();
        let zero = ito_map_probe(&p, &[0.0], 3, Solver::Step).unwrap();
        assert_eq!(zero.rows[0].1, 0.0);
        let probe = ito_map_probe(&p, &PROBE_EPSILONS, 3, Solver::Step).unwrap();
        assert!((probe.slope - 1.0).abs() <= 0.2, "{probe:?}");
        let y0 = initial_value_probe(&p, &[1e-1, 1e-2, 1e-3], 5, Solver::Step).unwrap();
        // the linear flow multiplies initial offsets by exp(x(t) - x(0)) ≤ e
        assert!(
            y0.lipschitz() <= std::f64::consts::E * (1.0 + 1e-9),
            "{y0:?}"
        );
        let mut csv = Vec::new();
        probe.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("epsilon,distance\n"));
    }

    #[test]
    fn perturbations_keep_or_break_chen() {
        let r = sine_driver(32);
        let h = smooth_direction(&r, 9).unwrap();
        assert_eq!(h.first(), &[0.0]);
        let ok = perturb_driver(&r, &h, 0.3).unwrap();
        let defect = crate::controlled::chen_defect(ok.x(), ok.xx(), Budget::Exact).unwrap();
        assert!(defect <= 1e-12 * ok.scale(Budget::Exact));
        let zero =
            crate::grid::FnIncrement::new(r.grid().clone(), vec![1, 1], |_, _, o| o.fill(0.0));
        assert!(matches!(
            perturb_driver_with(&r, &h, 0.3, &zero),
            Err(Error::ChenViolation { .. })
        ));
    }
}
