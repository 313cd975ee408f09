//! Small helpers for flattened row-major tensors.

use crate::error::{Error, Result};

/// How an integrand value acts on an integrator increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Contraction {
    /// Scalar integrand times a tensor increment.
    Scale,
    /// `out[a] = Σ_b f[a·inner + b] · dx[b]`.
    Contract { outer: usize, inner: usize },
}

impl Contraction {
    /// Chooses the action of an `f_shape` integrand on an `x_shape` increment
    /// and returns it with the result shape.
    ///
    /// The last axis of `f` contracts against a flattened `x`; a width-one
    /// integrand that does not match scales instead.
    pub(crate) fn resolve(f_shape: &[usize], x_shape: &[usize]) -> Result<(Self, Vec<usize>)> {
        let xw: usize = x_shape.iter().product();
        let fw: usize = f_shape.iter().product();
        if f_shape.last() == Some(&xw) {
            let mut out = f_shape[..f_shape.len() - 1].to_vec();
            if out.is_empty() {
                out.push(1);
            }
            Ok((
                Contraction::Contract {
                    outer: fw / xw,
                    inner: xw,
                },
                out,
            ))
        } else if fw == 1 {
            Ok((Contraction::Scale, x_shape.to_vec()))
        } else {
            Err(Error::Shape(format!(
                "integrand shape {f_shape:?} cannot act on increments of shape {x_shape:?}"
            )))
        }
    }

    #[inline]
    pub(crate) fn apply(&self, f: &[f64], dx: &[f64], out: &mut [f64]) {
        match *self {
            Contraction::Scale => {
                for (o, d) in out.iter_mut().zip(dx) {
                    *o = f[0] * d;
                }
            }
            Contraction::Contract { outer, inner } => {
                for a in 0..outer {
                    let row = &f[a * inner..(a + 1) * inner];
                    out[a] = row.iter().zip(dx).map(|(x, y)| x * y).sum();
                }
            }
        }
    }
}

/// `out = a · b` for row-major `a: [m, k]`, `b: [k, n]`.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for r in 0..m {
        for c in 0..n {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[r * k + l] * b[l * n + c];
            }
            out[r * n + c] = acc;
        }
    }
}
