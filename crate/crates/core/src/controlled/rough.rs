//! Level-2 rough paths `(X, 𝕏²)` with the Chen relation built in.

use crate::error::{Error, Result};
use crate::grid::{
    increment::with_scratch, increment_scale, magnitude, n_op, Budget, GridPath, Increment,
    Increment3, Span, TimeGrid,
};
use crate::grid::{pair_sup, triple_sup};

/// Relative tolerance of the Chen relation `N 𝕏² = δX ⊗ δX`.
pub const CHEN_TOL: f64 = 1e-12;

/// Second-level increments stored as adjacent cells plus the prefix values
/// `A(j) = 𝕏²(t_0, t_j)`; every other pair follows from Chen:
/// `𝕏²(i, j) = A(j) - A(i) - δX(0, i) ⊗ δX(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Level2 {
    grid: TimeGrid,
    shape: Vec<usize>,
    d: usize,
    x: Vec<f64>,
    cells: Vec<f64>,
    anchored: Vec<f64>,
}

impl Level2 {
    fn build(x: &GridPath, cells: Vec<f64>) -> Self {
        let d = x.width();
        let dd = d * d;
        let n = x.grid().cells();
        let x0 = x.first();
        let mut anchored = vec![0.0; (n + 1) * dd];
        for k in 0..n {
            let (xk, xn) = (x.value(k), x.value(k + 1));
            let (done, rest) = anchored.split_at_mut((k + 1) * dd);
            let prev = &done[k * dd..];
            let next = &mut rest[..dd];
            for a in 0..d {
                for b in 0..d {
                    let q = a * d + b;
                    next[q] = prev[q] + cells[k * dd + q] + (xk[a] - x0[a]) * (xn[b] - xk[b]);
                }
            }
        }
        Self {
            grid: x.grid().clone(),
            shape: vec![d, d],
            d,
            x: x.values().to_vec(),
            cells,
            anchored,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `𝕏²(t_k, t_{k+1})`.
    pub fn cell(&self, k: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.cells[k * dd..(k + 1) * dd]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

impl Increment for Level2 {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    fn shape(&self) -> &[usize] {
        &self.shape
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        if i == j {
            out.fill(0.0);
            return;
        }
        if j == i + 1 {
            out.copy_from_slice(self.cell(i));
            return;
        }
        let (d, dd) = (self.d, self.d * self.d);
        let (ai, aj) = (
            &self.anchored[i * dd..(i + 1) * dd],
            &self.anchored[j * dd..(j + 1) * dd],
        );
        let (x0, xi, xj) = (
            &self.x[..d],
            &self.x[i * d..(i + 1) * d],
            &self.x[j * d..(j + 1) * d],
        );
        for a in 0..d {
            for b in 0..d {
                let q = a * d + b;
                out[q] = aj[q] - ai[q] - (xi[a] - x0[a]) * (xj[b] - xi[b]);
            }
        }
    }
}

/// `sup |N𝕏²(s, u, t) - δX(s, u) ⊗ δX(u, t)|` over sampled triples.
pub fn chen_defect<R: Increment + ?Sized>(x: &GridPath, xx: &R, budget: Budget) -> Result<f64> {
    check_level2_shape(x, xx)?;
    let d = x.width();
    let nx = n_op(xx);
    let defect = crate::grid::FnIncrement3::new(x.grid().clone(), vec![d, d], |s, u, t, out| {
        nx.eval3_into(s, u, t, out);
        let (xs, xu, xt) = (x.value(s), x.value(u), x.value(t));
        for a in 0..d {
            for b in 0..d {
                out[a * d + b] -= (xu[a] - xs[a]) * (xt[b] - xu[b]);
            }
        }
    });
    Ok(triple_sup(&defect, x.grid().full(), budget, |_, _, _| 1.0))
}

fn check_level2_shape<R: Increment + ?Sized>(x: &GridPath, xx: &R) -> Result<()> {
    if x.shape().len() != 1 {
        return Err(Error::Shape(format!(
            "driver must be vector valued, got shape {:?}",
            x.shape()
        )));
    }
    if !x.grid().same_as(xx.grid()) {
        return Err(Error::GridMismatch);
    }
    let d = x.width();
    if xx.shape() != [d, d] {
        return Err(Error::Shape(format!(
            "level 2 must have shape [{d}, {d}], got {:?}",
            xx.shape()
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 1.0 / 3.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "rough path exponent must lie in (1/3, 1], got {gamma}"
        )))
    }
}

/// A level-2 rough path `(X, 𝕏²)` of exponent `γ ∈ (1/3, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoughPath2 {
    x: GridPath,
    xx: Level2,
    gamma: f64,
}

impl RoughPath2 {
    /// Builds `𝕏²` from its adjacent cells `𝕏²(t_k, t_{k+1})`, row-major
    /// `[cells, d, d]`.
    pub fn from_cells(x: GridPath, cells: Vec<f64>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if x.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "driver must be vector valued, got shape {:?}",
                x.shape()
            )));
        }
        let d = x.width();
        let expected = x.grid().cells() * d * d;
        if cells.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: cells.len(),
            });
        }
        if let Some(k) = cells.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: k / (d * d),
                state: cells[k - k % (d * d)..][..d * d].to_vec(),
            });
        }
        if !x.is_finite() {
            return Err(Error::InvalidParameter(
                "driver values must be finite".into(),
            ));
        }
        let xx = Level2::build(&x, cells);
        Ok(Self { x, xx, gamma })
    }

    /// Adopts an arbitrary second level after checking the Chen relation on
    /// sampled pairs against its own cells.
    pub fn from_increment<R: Increment + ?Sized>(
        x: GridPath,
        xx: &R,
        gamma: f64,
        budget: Budget,
    ) -> Result<Self> {
        check_level2_shape(&x, xx)?;
        let d = x.width();
        let n = x.grid().cells();
        let mut cells = vec![0.0; n * d * d];
        for (k, c) in cells.chunks_mut(d * d).enumerate() {
            xx.eval_into(k, k + 1, c);
        }
        let built = Self::from_cells(x, cells, gamma)?;
        let gap = crate::grid::FnIncrement::new(built.grid().clone(), vec![d, d], |i, j, out| {
            xx.eval_into(i, j, out);
            with_scratch(d * d, |b| {
                built.xx.eval_into(i, j, b);
                for (o, v) in out.iter_mut().zip(b.iter()) {
                    *o -= v;
                }
            })
        });
        let defect = pair_sup(&gap, built.grid().full(), budget, |_, _| 1.0);
        let tolerance = CHEN_TOL * built.scale(budget);
        if !(defect <= tolerance) {
            return Err(Error::ChenViolation { defect, tolerance });
        }
        Ok(built)
    }

    /// The piecewise-linear lift: cells `½ δX ⊗ δX`, which is geometric.
    pub fn geometric(x: GridPath, gamma: f64) -> Result<Self> {
        let d = x.width();
        let n = x.grid().cells();
        let mut cells = vec![0.0; n * d * d];
        for k in 0..n {
            let (a, b) = (x.value(k), x.value(k + 1));
            for p in 0..d {
                for q in 0..d {
                    cells[(k * d + p) * d + q] = 0.5 * (b[p] - a[p]) * (b[q] - a[q]);
                }
            }
        }
        Self::from_cells(x, cells, gamma)
    }

    pub fn x(&self) -> &GridPath {
        &self.x
    }

    pub fn xx(&self) -> &Level2 {
        &self.xx
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.x.width()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.x.grid()
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        self.gamma = gamma;
        Ok(self)
    }

    /// Largest magnitude of `δX` or `𝕏²` over sampled pairs, at least 1.
    pub fn scale(&self, budget: Budget) -> f64 {
        self.x
            .scale()
            .max(increment_scale(&self.xx, budget))
            .max(1.0)
    }

    /// Adds `c (t - s)` to the diagonal of every cell.
    pub fn shift_diagonal(&self, c: f64) -> Result<Self> {
        let d = self.dim();
        let mut cells = self.xx.cells.clone();
        for k in 0..self.grid().cells() {
            let h = self.grid().t(k + 1) - self.grid().t(k);
            for a in 0..d {
                cells[(k * d + a) * d + a] += c * h;
            }
        }
        Self::from_cells(self.x.clone(), cells, self.gamma)
    }

    /// Restriction to every `stride`-th grid point.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let x = self.x.coarsen(stride)?;
        let d = self.dim();
        let n = x.grid().cells();
        let mut cells = vec![0.0; n * d * d];
        for (k, c) in cells.chunks_mut(d * d).enumerate() {
            self.xx.eval_into(k * stride, (k + 1) * stride, c);
        }
        Self::from_cells(x, cells, self.gamma)
    }

    pub fn slice(&self, span: Span) -> Result<Self> {
        let x = self.x.slice(span)?;
        let dd = self.dim() * self.dim();
        let cells = self.xx.cells[span.start * dd..span.end * dd].to_vec();
        Self::from_cells(x, cells, self.gamma)
    }

    /// `(A X, A 𝕏² Aᵀ)` for `A` of shape `[rows, d]`.
    pub fn linear_image(&self, a: &[f64], rows: usize) -> Result<Self> {
        let d = self.dim();
        if a.len() != rows * d {
            return Err(Error::LengthMismatch {
                expected: rows * d,
                got: a.len(),
            });
        }
        let mut y = Vec::with_capacity(self.x.len() * rows);
        for i in 0..self.x.len() {
            let xi = self.x.value(i);
            for r in 0..rows {
                y.push((0..d).map(|c| a[r * d + c] * xi[c]).sum::<f64>());
            }
        }
        let y = GridPath::new(self.grid().clone(), vec![rows], y)?;
        let n = self.grid().cells();
        let mut cells = vec![0.0; n * rows * rows];
        let mut tmp = vec![0.0; rows * d];
        for k in 0..n {
            let c = self.xx.cell(k);
            for r in 0..rows {
                for q in 0..d {
                    tmp[r * d + q] = (0..d).map(|p| a[r * d + p] * c[p * d + q]).sum();
                }
            }
            for r in 0..rows {
                for s in 0..rows {
                    cells[(k * rows + r) * rows + s] =
                        (0..d).map(|q| tmp[r * d + q] * a[s * d + q]).sum();
                }
            }
        }
        Self::from_cells(y, cells, self.gamma)
    }

    /// `sup |Sym 𝕏²(s, t) - ½ δX ⊗ δX(s, t)|`, zero for geometric lifts.
    pub fn symmetric_defect(&self, budget: Budget) -> f64 {
        let d = self.dim();
        let x = &self.x;
        let xx = &self.xx;
        let sym = crate::grid::FnIncrement::new(self.grid().clone(), vec![d, d], |i, j, out| {
            with_scratch(d * d, |c| {
                xx.eval_into(i, j, c);
                let (xi, xj) = (x.value(i), x.value(j));
                for a in 0..d {
                    for b in 0..d {
                        out[a * d + b] = 0.5 * (c[a * d + b] + c[b * d + a])
                            - 0.5 * (xj[a] - xi[a]) * (xj[b] - xi[b]);
                    }
                }
            })
        });
        pair_sup(&sym, self.grid().full(), budget, |_, _| 1.0)
    }

    /// Largest cell of `𝕏²`, used by callers that bound level-2 sizes.
    pub fn max_cell(&self) -> f64 {
        magnitude(&self.xx.cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DenseIncrement;

    fn planar(n: usize) -> GridPath {
        let g = TimeGrid::uniform(0.0, 1.0, n).unwrap();
        GridPath::from_fn(g, vec![2], |t, o| {
            o[0] = (3.0 * t).sin();
            o[1] = t * t - 0.3 * t;
        })
        .unwrap()
    }

    #[test]
    fn chen_holds_by_construction() {
        let r = RoughPath2::geometric(planar(40), 0.5).unwrap();
        let defect = chen_defect(r.x(), r.xx(), Budget::Exact).unwrap();
        assert!(defect <= CHEN_TOL * r.scale(Budget::Exact), "{defect}");
    }

    #[test]
    fn scalar_geometric_lift_is_half_square() {
        let g = TimeGrid::uniform(0.0, 1.0, 30).unwrap();
        let x = GridPath::from_fn(g, vec![1], |t, o| o[0] = (5.0 * t).cos()).unwrap();
        let r = RoughPath2::geometric(x.clone(), 0.5).unwrap();
        for i in 0..=30 {
            for j in i..=30 {
                let dx = x.value(j)[0] - x.value(i)[0];
                assert!((r.xx().eval(i, j)[0] - 0.5 * dx * dx).abs() < 1e-14);
            }
        }
        assert!(r.symmetric_defect(Budget::Exact) < 1e-14);
    }

    #[test]
    fn planar_lift_symmetric_part_is_half_square() {
        let r = RoughPath2::geometric(planar(25), 0.5).unwrap();
        assert!(r.symmetric_defect(Budget::Exact) < 1e-13);
        assert!(
            r.shift_diagonal(0.5)
                .unwrap()
                .symmetric_defect(Budget::Exact)
                > 0.1
        );
    }

    #[test]
    fn broken_level_two_is_rejected() {
        let r = RoughPath2::geometric(planar(12), 0.5).unwrap();
        let mut dense = DenseIncrement::from_increment(r.xx());
        let back = RoughPath2::from_increment(r.x().clone(), &dense, 0.5, Budget::Exact).unwrap();
        assert_eq!(back.xx().cells(), r.xx().cells());
        dense.set(2, 7, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            RoughPath2::from_increment(r.x().clone(), &dense, 0.5, Budget::Exact),
            Err(Error::ChenViolation { .. })
        ));
    }

    #[test]
    fn exponent_range_is_enforced() {
        assert!(RoughPath2::geometric(planar(4), 0.3).is_err());
        assert!(RoughPath2::geometric(planar(4), 1.2).is_err());
        assert!(RoughPath2::geometric(planar(4), 1.0).is_ok());
    }

    #[test]
    fn coarsen_and_slice_agree_with_parent() {
        let r = RoughPath2::geometric(planar(24), 0.5).unwrap();
        let c = r.coarsen(4).unwrap();
        for i in 0..=6 {
            for j in i..=6 {
                let (a, b) = (c.xx().eval(i, j), r.xx().eval(4 * i, 4 * j));
                for (p, q) in a.iter().zip(&b) {
                    assert!((p - q).abs() < 1e-14);
                }
            }
        }
        let s = r.slice(Span::new(5, 17)).unwrap();
        let (a, b) = (s.xx().eval(2, 9), r.xx().eval(7, 14));
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_image_transforms_both_levels() {
        let r = RoughPath2::geometric(planar(10), 0.5).unwrap();
        let a = [1.0, 2.0, 0.0, -1.0, 0.5, 0.5];
        let y = r.linear_image(&a, 3).unwrap();
        let (xx, yy) = (r.xx().eval(1, 8), y.xx().eval(1, 8));
        for p in 0..3 {
            for q in 0..3 {
                let mut e = 0.0;
                for u in 0..2 {
                    for v in 0..2 {
                        e += a[p * 2 + u] * xx[u * 2 + v] * a[q * 2 + v];
                    }
                }
                assert!((yy[p * 3 + q] - e).abs() < 1e-14);
            }
        }
    }
}
