use std::sync::Arc;

use roughpath::brownian::{ito_lift, strat_from_ito, BrownianConfig};
use roughpath::controlled::{
    compose_smooth, rough_integral, transitivity_recast, ControlledPath, Reference, RoughPath2,
    VectorField,
};
use roughpath::grid::GridPath;

fn recast_integrals(rpx: Arc<RoughPath2>, a: &[f64], rows: usize) -> (GridPath, GridPath) {
    let rpy = Arc::new(rpx.linear_image(a, rows).unwrap());
    let phi = VectorField::sine(
        rows,
        vec![2],
        (0..2 * rows).map(|k| 0.3 + 0.2 * k as f64).collect(),
        vec![0.1, -0.4],
    )
    .unwrap();

    let y_self = ControlledPath::driver(rpy.clone());
    let z_over_y = compose_smooth(&phi, &y_self).unwrap();
    let direct = rough_integral(&z_over_y, &y_self).unwrap().0;

    let d = rpx.dim();
    let a_path = GridPath::constant(rpx.grid().clone(), vec![rows, d], a).unwrap();
    let y_over_x = ControlledPath::over(rpy.x().clone(), a_path, rpx.clone()).unwrap();
    let z_path_ref = ControlledPath::new(
        z_over_y.z().clone(),
        z_over_y.zprime().clone(),
        Reference::Path {
            path: Arc::new(rpy.x().clone()),
            gamma: rpx.gamma(),
        },
        z_over_y.eta(),
    )
    .unwrap();
    let z_over_x = transitivity_recast(&z_path_ref, &y_over_x).unwrap();
    let recast = rough_integral(&z_over_x, &y_over_x).unwrap().0;
    (direct, recast)
}

#[test]
fn linear_image_of_ito_lift() {
    let rpx = Arc::new(ito_lift(&BrownianConfig::uniform(2, 512, 21, 16).unwrap(), 0.45).unwrap());
    let (direct, recast) = recast_integrals(rpx, &[1.0, 0.5, -0.3, 2.0, 0.7, 0.0], 3);
    assert_eq!(direct.shape(), &[2, 3]);
    let d = direct.sup_distance(&recast).unwrap();
    assert!(d <= 1e-10, "{d}");
}

#[test]
fn linear_image_of_strat_lift_square() {
    let ito = ito_lift(&BrownianConfig::uniform(2, 256, 5, 8).unwrap(), 0.4).unwrap();
    let rpx = Arc::new(strat_from_ito(&ito).unwrap());
    let (direct, recast) = recast_integrals(rpx, &[0.0, 1.0, -1.0, 0.0], 2);
    assert!(direct.sup_distance(&recast).unwrap() <= 1e-10);
}

#[test]
fn recast_requires_matching_reference() {
    let rpx = Arc::new(ito_lift(&BrownianConfig::uniform(2, 32, 1, 4).unwrap(), 0.45).unwrap());
    let x = ControlledPath::driver(rpx.clone());
    assert!(transitivity_recast(&x, &x).is_err());
}
