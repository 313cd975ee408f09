//! The rough integral as the sewing of compensated germs.

use std::sync::Arc;

use super::{controlled_norm, ControlledPath, Reference, RoughPath2};
use crate::error::{Error, Result};
use crate::grid::{delta, holder_norm, increment::with_scratch, Budget, GridPath, Increment};
use crate::rate::{fit_levels, RateStudy};
use crate::sewing::{lambda_of_germ, level_sums, sewing_constant, sum_cells, Germ, SewingBound};

fn shared_rough(z: &ControlledPath, w: &ControlledPath) -> Result<Arc<RoughPath2>> {
    match (z.reference(), w.reference()) {
        (Reference::Rough(a), Reference::Rough(_)) if z.reference().same_as(w.reference()) => {
            Ok(a.clone())
        }
        (Reference::Rough(_), Reference::Rough(_)) => Err(Error::Precondition(
            "integrand and integrator must share one rough path".into(),
        )),
        _ => Err(Error::Precondition(
            "integration needs paths controlled by a rough path".into(),
        )),
    }
}

fn check_order(eta: f64, gamma: f64) -> Result<()> {
    if eta + gamma > 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentTooSmall(eta + gamma))
    }
}

type Parts<'a> = (
    Arc<RoughPath2>,
    Vec<usize>,
    Box<dyn Fn(usize, usize, &mut [f64]) + Send + Sync + 'a>,
);

fn rough_parts<'a>(z: &'a ControlledPath, w: &'a ControlledPath) -> Result<Parts<'a>> {
    let rough = shared_rough(z, w)?;
    check_order(z.eta(), rough.gamma())?;
    let (zw, ww, d) = (z.z().width(), w.z().width(), rough.dim());
    let mut shape = z.z().shape().to_vec();
    shape.extend_from_slice(w.z().shape());
    let r = rough.clone();
    let eval = move |i: usize, j: usize, out: &mut [f64]| {
        with_scratch(d * d + ww * d + ww, |buf| {
            let (xx, rest) = buf.split_at_mut(d * d);
            let (u, dw) = rest.split_at_mut(ww * d);
            r.xx().eval_into(i, j, xx);
            w.z().delta_into(i, j, dw);
            let (zi, zpi, wpi) = (z.z().value(i), z.zprime().value(i), w.zprime().value(i));
            // u[b, κ] = Σ_ν w′[b, ν] 𝕏²[κ, ν]
            for b in 0..ww {
                for kappa in 0..d {
                    u[b * d + kappa] = (0..d).map(|nu| wpi[b * d + nu] * xx[kappa * d + nu]).sum();
                }
            }
            for a in 0..zw {
                let zpa = &zpi[a * d..(a + 1) * d];
                for b in 0..ww {
                    let area: f64 = zpa
                        .iter()
                        .zip(&u[b * d..(b + 1) * d])
                        .map(|(p, q)| p * q)
                        .sum();
                    out[a * ww + b] = zi[a] * dw[b] + area;
                }
            }
        })
    };
    Ok((rough, shape, Box::new(eval)))
}

/// `Ξ(s, t) = Z_s ⊗ δW(s, t) + (Z′_s ⊗ W′_s) : 𝕏²(s, t)`.
pub fn rough_germ<'a>(z: &'a ControlledPath, w: &'a ControlledPath) -> Result<Germ<'a>> {
    let (rough, shape, eval) = rough_parts(z, w)?;
    Germ::new(
        rough.grid().clone(),
        shape,
        vec![(z.eta(), rough.gamma())],
        eval,
    )
}

/// `∫ Z ⊗ dW` with values in `shape(Z) ++ shape(W)`, and its controlled
/// decomposition with derivative `Z ⊗ W′`.
///
/// The path equals the sewing of [`rough_germ`] bit for bit.
pub fn rough_integral(
    z: &ControlledPath,
    w: &ControlledPath,
) -> Result<(GridPath, ControlledPath)> {
    let (rough, shape, eval) = rough_parts(z, w)?;
    let path = sum_cells(&Germ::undeclared(rough.grid().clone(), shape, eval))?;
    let (zw, ww, d) = (z.z().width(), w.z().width(), rough.dim());
    let n = path.len();
    let mut dvals = vec![0.0; n * zw * ww * d];
    for i in 0..n {
        let (zi, wpi) = (z.z().value(i), w.zprime().value(i));
        let row = &mut dvals[i * zw * ww * d..(i + 1) * zw * ww * d];
        for a in 0..zw {
            for (k, v) in wpi.iter().enumerate() {
                row[a * ww * d + k] = zi[a] * v;
            }
        }
    }
    let mut dshape = path.shape().to_vec();
    dshape.push(d);
    let eta = w.eta().min(2.0 * rough.gamma());
    let deriv = GridPath::new(rough.grid().clone(), dshape, dvals)?;
    let controlled = ControlledPath::new(path.clone(), deriv, Reference::Rough(rough), eta)?;
    Ok((path, controlled))
}

fn driver_parts<'a>(w: &'a ControlledPath) -> Result<Parts<'a>> {
    let rough = w
        .rough()
        .cloned()
        .ok_or_else(|| Error::Precondition("integration needs a rough reference".into()))?;
    check_order(w.eta(), rough.gamma())?;
    let d = rough.dim();
    if w.z().shape().last() != Some(&d) {
        return Err(Error::Shape(format!(
            "integrand against a {d}-dimensional driver must end in an axis of length {d}, got {:?}",
            w.z().shape()
        )));
    }
    let m = w.z().width() / d;
    let mut shape = w.z().shape()[..w.z().shape().len() - 1].to_vec();
    if shape.is_empty() {
        shape.push(1);
    }
    let r = rough.clone();
    let eval = move |i: usize, j: usize, out: &mut [f64]| {
        with_scratch(d * d + d, |buf| {
            let (xx, dx) = buf.split_at_mut(d * d);
            r.xx().eval_into(i, j, xx);
            r.x().delta_into(i, j, dx);
            let (wi, wpi) = (w.z().value(i), w.zprime().value(i));
            for (mu, o) in out.iter_mut().enumerate().take(m) {
                let mut acc = 0.0;
                for nu in 0..d {
                    acc += wi[mu * d + nu] * dx[nu];
                    let row = &wpi[(mu * d + nu) * d..(mu * d + nu + 1) * d];
                    for kappa in 0..d {
                        acc += row[kappa] * xx[kappa * d + nu];
                    }
                }
                *o = acc;
            }
        })
    };
    Ok((rough, shape, Box::new(eval)))
}

/// `Ξ(s, t) = W_s δX(s, t) + W′_s : 𝕏²(s, t)` for `W` with values in
/// `ℝ^{m×d}`.
pub fn driver_germ(w: &ControlledPath) -> Result<Germ<'_>> {
    let (rough, shape, eval) = driver_parts(w)?;
    Germ::new(
        rough.grid().clone(),
        shape,
        vec![(w.eta(), rough.gamma())],
        eval,
    )
}

/// `A = ∫ W dX`, controlled by `X` with derivative `W` and order `2γ`.
pub fn integral_against_driver(w: &ControlledPath) -> Result<ControlledPath> {
    let (rough, shape, eval) = driver_parts(w)?;
    let a = sum_cells(&Germ::undeclared(rough.grid().clone(), shape, eval))?;
    let mut dshape = a.shape().to_vec();
    dshape.push(rough.dim());
    let deriv = GridPath::new(rough.grid().clone(), dshape, w.z().values().to_vec())?;
    let eta = 2.0 * rough.gamma();
    ControlledPath::new(a, deriv, Reference::Rough(rough), eta)
}

/// Refinement study of the compensated sums of [`rough_germ`].
pub fn rough_rate(z: &ControlledPath, w: &ControlledPath, levels: usize) -> Result<RateStudy> {
    fit_levels(&level_sums(&rough_germ(z, w)?)?, levels)
}

/// Refinement study of the compensated sums of [`driver_germ`].
pub fn driver_rate(w: &ControlledPath, levels: usize) -> Result<RateStudy> {
    fit_levels(&level_sums(&driver_germ(w)?)?, levels)
}

/// Sup-ratio of `∫(Z - Z_s) dW - Z′W′𝕏²` over `|t - s|^{η+γ}` against
/// `‖Z‖ ‖W‖ (1 + ‖X‖_γ² + ‖𝕏²‖_{2γ}) / (2^{η+γ} - 2)`.
pub fn rough_remainder_bound(z: &ControlledPath, w: &ControlledPath) -> Result<SewingBound> {
    let germ = rough_germ(z, w)?;
    let rough = shared_rough(z, w)?;
    let gamma = rough.gamma();
    let exponent = z.eta() + gamma;
    let measured = holder_norm(&lambda_of_germ(&germ)?, exponent, Budget::Auto)?;
    let xn = holder_norm(&delta(rough.x()), gamma, Budget::Auto)?;
    let xxn = holder_norm(rough.xx(), 2.0 * gamma, Budget::Auto)?;
    let bound =
        sewing_constant(exponent) * controlled_norm(z) * controlled_norm(w) * (1.0 + xn * xn + xxn);
    Ok(SewingBound {
        z: exponent,
        measured,
        bound,
    })
}
