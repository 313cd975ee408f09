//! Paths controlled by a reference path: `δZ = Z′ δX + R_Z`.
//!
//! A [`ControlledPath`] stores `Z` and `Z′` only; the remainder `R_Z` is
//! always derived from them. The reference is either a level-2 rough path
//! (needed for integration) or a plain path with a Hölder exponent, which is
//! what a path controlled by another controlled path sees.

mod field;
mod integral;
mod rough;

use std::sync::Arc;

pub use field::{DeclaredNorms, Profile, VectorField};
pub use integral::{
    driver_germ, driver_rate, integral_against_driver, rough_germ, rough_integral, rough_rate,
    rough_remainder_bound,
};
pub use rough::{chen_defect, Level2, RoughPath2, CHEN_TOL};

use crate::error::{Error, Result};
use crate::grid::{delta, magnitude, pair_sup, Budget, GridPath, Increment, TimeGrid};
use crate::tensor::{matmul, Contraction};

/// What a controlled path is controlled by.
#[derive(Clone, Debug)]
pub enum Reference {
    Rough(Arc<RoughPath2>),
    Path { path: Arc<GridPath>, gamma: f64 },
}

impl Reference {
    pub fn path(&self) -> &GridPath {
        match self {
            Reference::Rough(r) => r.x(),
            Reference::Path { path, .. } => path,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Reference::Rough(r) => r.gamma(),
            Reference::Path { gamma, .. } => *gamma,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        self.path().grid()
    }

    pub fn rough(&self) -> Option<&Arc<RoughPath2>> {
        match self {
            Reference::Rough(r) => Some(r),
            Reference::Path { .. } => None,
        }
    }

    /// Identity of references: the same allocation or equal data.
    pub fn same_as(&self, other: &Reference) -> bool {
        match (self, other) {
            (Reference::Rough(a), Reference::Rough(b)) => Arc::ptr_eq(a, b) || a == b,
            (Reference::Path { path: a, gamma: ga }, Reference::Path { path: b, gamma: gb }) => {
                ga == gb && (Arc::ptr_eq(a, b) || a.values() == b.values() && a.grid() == b.grid())
            }
            _ => false,
        }
    }
}

/// A path `Z` with Gubinelli derivative `Z′` and remainder order `η`.
#[derive(Clone, Debug)]
pub struct ControlledPath {
    z: GridPath,
    zprime: GridPath,
    reference: Reference,
    eta: f64,
}

impl ControlledPath {
    /// `zprime` must have shape `z.shape ++ [width of the reference]`.
    pub fn new(z: GridPath, zprime: GridPath, reference: Reference, eta: f64) -> Result<Self> {
        if !z.grid().same_as(reference.grid()) || !zprime.grid().same_as(reference.grid()) {
            return Err(Error::GridMismatch);
        }
        let mut expected = z.shape().to_vec();
        expected.push(reference.path().width());
        if zprime.shape() != expected.as_slice() {
            return Err(Error::Shape(format!(
                "derivative must have shape {expected:?}, got {:?}",
                zprime.shape()
            )));
        }
        let gamma = reference.gamma();
        if !(eta > gamma) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "remainder order {eta} must exceed the reference exponent {gamma}"
            )));
        }
        Ok(Self {
            z,
            zprime,
            reference,
            eta,
        })
    }

    /// A path controlled by a rough path with the default order `2γ`.
    pub fn over(z: GridPath, zprime: GridPath, rough: Arc<RoughPath2>) -> Result<Self> {
        let eta = 2.0 * rough.gamma();
        Self::new(z, zprime, Reference::Rough(rough), eta)
    }

    /// `X` controlled by itself: `Z = X`, `Z′ = I`, `R = 0`.
    pub fn driver(rough: Arc<RoughPath2>) -> Self {
        let d = rough.dim();
        let n = rough.x().len();
        let mut id = vec![0.0; n * d * d];
        for i in 0..n {
            for a in 0..d {
                id[(i * d + a) * d + a] = 1.0;
            }
        }
        let zprime = GridPath::new(rough.grid().clone(), vec![d, d], id)
            .expect("identity derivative matches the driver grid");
        let eta = 2.0 * rough.gamma();
        Self {
            z: rough.x().clone(),
            zprime,
            reference: Reference::Rough(rough),
            eta,
        }
    }

    /// A constant path with zero derivative.
    pub fn constant(rough: Arc<RoughPath2>, shape: Vec<usize>, value: &[f64]) -> Result<Self> {
        let z = GridPath::constant(rough.grid().clone(), shape.clone(), value)?;
        let mut dshape = shape;
        dshape.push(rough.dim());
        let zprime = GridPath::zeros(rough.grid().clone(), dshape)?;
        Self::over(z, zprime, rough)
    }

    pub fn z(&self) -> &GridPath {
        &self.z
    }

    pub fn zprime(&self) -> &GridPath {
        &self.zprime
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.reference.gamma()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.z.grid()
    }

    pub fn rough(&self) -> Option<&Arc<RoughPath2>> {
        self.reference.rough()
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(self.z, self.zprime, self.reference, eta)
    }

    /// This path as a reference for paths controlled by it.
    pub fn as_reference(&self) -> Reference {
        Reference::Path {
            path: Arc::new(self.z.clone()),
            gamma: self.gamma(),
        }
    }

    /// `R_Z(i, j) = δZ(i, j) - Z′(i) δX(i, j)`.
    pub fn remainder(&self) -> Remainder<'_> {
        let (contraction, _) =
            Contraction::resolve(self.zprime.shape(), self.reference.path().shape())
                .expect("derivative shape validated at construction");
        Remainder {
            c: self,
            contraction,
        }
    }
}

/// The derived remainder of a [`ControlledPath`].
pub struct Remainder<'a> {
    c: &'a ControlledPath,
    contraction: Contraction,
}

impl Increment for Remainder<'_> {
    fn grid(&self) -> &TimeGrid {
        self.c.grid()
    }
    fn shape(&self) -> &[usize] {
        self.c.z.shape()
    }
    fn eval_into(&self, i: usize, j: usize, out: &mut [f64]) {
        let x = self.c.reference.path();
        let w = out.len();
        crate::grid::increment::with_scratch(x.width() + w, |buf| {
            let (dx, lin) = buf.split_at_mut(x.width());
            x.delta_into(i, j, dx);
            self.contraction.apply(self.c.zprime.value(i), dx, lin);
            self.c.z.delta_into(i, j, out);
            for (o, l) in out.iter_mut().zip(lin.iter()) {
                *o -= l;
            }
        })
    }
}

fn weighted_sup<R: Increment + ?Sized>(r: &R, exponent: f64, budget: Budget) -> f64 {
    let g = r.grid().clone();
    pair_sup(r, g.full(), budget, |i, j| (g.t(j) - g.t(i)).powf(exponent))
}

/// `‖Z′‖_∞ + ‖δZ′‖_{η-γ} + ‖R_Z‖_η + ‖δZ‖_γ` over grid pairs.
pub fn controlled_norm(c: &ControlledPath) -> f64 {
    controlled_norm_with(c, Budget::Auto)
}

pub fn controlled_norm_with(c: &ControlledPath, budget: Budget) -> f64 {
    let gamma = c.gamma();
    let sup = magnitude(c.zprime.values());
    sup + weighted_sup(&delta(&c.zprime), c.eta - gamma, budget)
        + weighted_sup(&c.remainder(), c.eta, budget)
        + weighted_sup(&delta(&c.z), gamma, budget)
}

/// `φ(Y)` with derivative `∂φ(Y) Y′` and order `min(γ(1 + δ_φ), η_Y)`.
pub fn compose_smooth(phi: &VectorField, y: &ControlledPath) -> Result<ControlledPath> {
    if y.z.width() != phi.input_dim() {
        return Err(Error::Shape(format!(
            "field expects inputs of width {}, path has shape {:?}",
            phi.input_dim(),
            y.z.shape()
        )));
    }
    let (k, m) = (phi.input_dim(), phi.output_width());
    let r = y.reference.path().width();
    let n = y.z.len();
    let mut z = vec![0.0; n * m];
    let mut zp = vec![0.0; n * m * r];
    let mut jac = vec![0.0; m * k];
    for i in 0..n {
        let yi = y.z.value(i);
        phi.eval(yi, &mut z[i * m..(i + 1) * m]);
        phi.jacobian(yi, &mut jac);
        matmul(
            &jac,
            y.zprime.value(i),
            m,
            k,
            r,
            &mut zp[i * m * r..(i + 1) * m * r],
        );
    }
    let shape = phi.output_shape().to_vec();
    let mut dshape = shape.clone();
    dshape.push(r);
    let eta = (y.gamma() * (1.0 + phi.delta())).min(y.eta);
    ControlledPath::new(
        GridPath::new(y.grid().clone(), shape, z)?,
        GridPath::new(y.grid().clone(), dshape, zp)?,
        y.reference.clone(),
        eta,
    )
}

/// Re-expresses `Z` controlled by `Y` as controlled by `Y`'s own reference,
/// with derivative `Z′ Y′`.
pub fn transitivity_recast(z: &ControlledPath, y: &ControlledPath) -> Result<ControlledPath> {
    let same = match &z.reference {
        Reference::Path { path, .. } => path.grid() == y.grid() && path.values() == y.z.values(),
        Reference::Rough(_) => false,
    };
    if !same {
        return Err(Error::Precondition(
            "the first path must be controlled by the second one".into(),
        ));
    }
    let zw = z.z.width();
    let yw = y.z.width();
    let xw = y.reference.path().width();
    let n = z.z.len();
    let mut zp = vec![0.0; n * zw * xw];
    for i in 0..n {
        matmul(
            z.zprime.value(i),
            y.zprime.value(i),
            zw,
            yw,
            xw,
            &mut zp[i * zw * xw..(i + 1) * zw * xw],
        );
    }
    let mut dshape = z.z.shape().to_vec();
    dshape.push(xw);
    ControlledPath::new(
        z.z.clone(),
        GridPath::new(z.grid().clone(), dshape, zp)?,
        y.reference.clone(),
        z.eta.min(y.eta),
    )
}
