mod common;

use std::sync::Arc;

use proptest::prelude::*;
use roughpath::controlled::{rough_integral, ControlledPath, RoughPath2};
use roughpath::grid::{delta, GridPath, Increment, TimeGrid};
use roughpath::sewing::lambda_of_germ;
use roughpath::signature::{chen_mul, TensorSeries};
use roughpath::young::young_germ;

fn series(dim: usize, level: usize, raw: &[f64]) -> TensorSeries {
    let mut s = TensorSeries::unit(dim, level);
    let mut it = raw.iter().cycle();
    for k in 1..=level {
        for v in s.get_mut(k) {
            *v = *it.next().unwrap();
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coboundary_suites(seed in any::<u64>()) {
        let inst = common::instance(seed);
        for (name, suite) in common::SUITES {
            let c = suite(&inst);
            prop_assert!(c.ok(), "{name}: {} > {}", c.value, c.limit);
        }
    }

    #[test]
    fn chen_product_associates(
        dim in 1usize..=3,
        level in 1usize..=4,
        raw in proptest::collection::vec(-2.0..2.0f64, 3..40),
    ) {
        let a = series(dim, level, &raw);
        let b = series(dim, level, &raw[1..]);
        let c = series(dim, level, &raw[2..]);
        let left = chen_mul(&chen_mul(&a, &b).unwrap(), &c).unwrap();
        let right = chen_mul(&a, &chen_mul(&b, &c).unwrap()).unwrap();
        let scale = left.magnitude().max(1.0);
        prop_assert!(left.distance(&right) <= 1e-12 * scale);
    }

    #[test]
    fn sewing_decomposition_is_consistent(seed in any::<u64>()) {
        let inst = common::instance(seed);
        let f = &inst.path;
        let x = &inst.other;
        let germ = young_germ(f, x, 0.75, 0.75).unwrap();
        let lambda = lambda_of_germ(&germ).unwrap();
        let integral = lambda.integral().clone();
        let n = f.grid().len();
        let scale = f.scale().max(1.0) * x.scale().max(1.0);
        for i in 0..n {
            for j in i..n {
                let xi = germ.eval(i, j);
                let l = lambda.eval(i, j);
                let d = delta(&integral).eval(i, j);
                for k in 0..xi.len() {
                    prop_assert!((d[k] + l[k] - xi[k]).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn rough_integral_is_bilinear(
        seed in any::<u64>(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = TimeGrid::uniform(0.0, 1.0, 24).unwrap();
        let x = common::random_path(&mut rng, &grid, 2);
        let rp = Arc::new(RoughPath2::geometric(x, 0.5).unwrap());
        let mut controlled = || {
            let z = common::random_path(&mut rng, &grid, 2);
            let zp = GridPath::new(
                grid.clone(),
                vec![2, 2],
                (0..grid.len() * 4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            ControlledPath::over(z, zp, rp.clone()).unwrap()
        };
        let (z1, z2, w) = (controlled(), controlled(), controlled());
        let sum = ControlledPath::over(
            z1.z().lin_comb(a, z2.z(), b).unwrap(),
            z1.zprime().lin_comb(a, z2.zprime(), b).unwrap(),
            rp.clone(),
        )
        .unwrap();
        let lhs = rough_integral(&sum, &w).unwrap().0;
        let rhs = rough_integral(&z1, &w)
            .unwrap()
            .0
            .lin_comb(a, &rough_integral(&z2, &w).unwrap().0, b)
            .unwrap();
        let scale = lhs.scale().max(rhs.scale()).max(1.0);
        prop_assert!(lhs.sup_distance(&rhs).unwrap() <= 1e-12 * scale);
        let lhs = rough_integral(&w, &sum).unwrap().0;
        let rhs = rough_integral(&w, &z1)
            .unwrap()
            .0
            .lin_comb(a, &rough_integral(&w, &z2).unwrap().0, b)
            .unwrap();
        let scale = lhs.scale().max(rhs.scale()).max(1.0);
        prop_assert!(lhs.sup_distance(&rhs).unwrap() <= 1e-12 * scale);
    }
}
