#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughpath::grid::{
    delta, holder_norm, n2_op, n_op, patch_norm_bound, Budget, DenseIncrement, FnIncrement,
    GridPath, Increment, Increment3, Increment4, TimeGrid,
};

pub const INVARIANT_TOL: f64 = 1e-12;

/// Measured value against its allowed limit.
#[derive(Clone, Copy, Debug)]
pub struct Check {
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.value <= self.limit
    }
}

pub struct Instance {
    pub path: GridPath,
    pub other: GridPath,
    pub inc: DenseIncrement,
    pub gamma: f64,
    pub eta: f64,
}

pub fn random_grid(rng: &mut ChaCha8Rng, cells: usize) -> TimeGrid {
    let mut t = rng.random_range(-1.0..1.0);
    let mut times = vec![t];
    for _ in 0..cells {
        t += rng.random_range(0.01..0.3);
        times.push(t);
    }
    TimeGrid::new(times).unwrap()
}

pub fn random_path(rng: &mut ChaCha8Rng, grid: &TimeGrid, width: usize) -> GridPath {
    let amp = 10f64.powf(rng.random_range(-2.0..2.0));
    let values = (0..grid.len() * width)
        .map(|_| amp * rng.random_range(-1.0..1.0))
        .collect();
    GridPath::new(grid.clone(), vec![width], values).unwrap()
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = rng.random_range(6..=18);
    let width = rng.random_range(1..=3);
    let grid = random_grid(&mut rng, cells);
    let path = random_path(&mut rng, &grid, width);
    let other = random_path(&mut rng, &grid, width);
    let amp = 10f64.powf(rng.random_range(-2.0..2.0));
    let n = grid.len();
    let raw: Vec<f64> = (0..n * n * width)
        .map(|_| amp * rng.random_range(-1.0..1.0))
        .collect();
    let inc = DenseIncrement::from_fn(grid.clone(), vec![width], |i, j, out| {
        out.copy_from_slice(&raw[(i * n + j) * width..][..width]);
    })
    .unwrap();
    let gamma = rng.random_range(0.1..0.9);
    let eta = rng.random_range(gamma + 0.01..1.5);
    Instance {
        path,
        other,
        inc,
        gamma,
        eta,
    }
}

fn abs_max(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn increment_max<R: Increment + ?Sized>(r: &R) -> f64 {
    let n = r.grid().len();
    let mut m = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            m = m.max(abs_max(&r.eval(i, j)));
        }
    }
    m
}

fn triples_max<A: Increment3 + ?Sized>(a: &A) -> f64 {
    let n = a.grid().len();
    let mut m = 0.0_f64;
    for s in 0..n {
        for u in s..n {
            for t in u..n {
                m = m.max(abs_max(&a.eval3(s, u, t)));
            }
        }
    }
    m
}

fn quads_max<A: Increment4 + ?Sized>(a: &A) -> f64 {
    let n = a.grid().len();
    let mut m = 0.0_f64;
    for s in 0..n {
        for u in s..n {
            for v in u..n {
                for t in v..n {
                    m = m.max(abs_max(&a.eval4(s, u, v, t)));
                }
            }
        }
    }
    m
}

/// `N δA = 0` over every triple.
pub fn n_delta(inst: &Instance) -> Check {
    Check {
        value: triples_max(&n_op(&delta(&inst.path))),
        limit: INVARIANT_TOL * inst.path.scale().max(1.0),
    }
}

/// `N₂ N R = 0` over every quadruple.
pub fn n2_n(inst: &Instance) -> Check {
    Check {
        value: quads_max(&n2_op(&n_op(&inst.inc))),
        limit: INVARIANT_TOL * increment_max(&inst.inc).max(1.0),
    }
}

/// `N(F R)(s, u, t) = F_s NR(s, u, t) - δF(s, u) R(u, t)` with scalar `F`
/// taken from the first component of the path.
pub fn leibnitz_n(inst: &Instance) -> Check {
    let f = |i: usize| inst.path.value(i)[0];
    let r = &inst.inc;
    let fr = FnIncrement::new(r.grid().clone(), r.shape().to_vec(), |i, j, out| {
        r.eval_into(i, j, out);
        out.iter_mut().for_each(|v| *v *= f(i));
    });
    let nfr = n_op(&fr);
    let nr = n_op(r);
    let n = r.grid().len();
    let mut worst = 0.0_f64;
    for s in 0..n {
        for u in s..n {
            for t in u..n {
                let lhs = nfr.eval3(s, u, t);
                let nrv = nr.eval3(s, u, t);
                let rut = r.eval(u, t);
                for k in 0..lhs.len() {
                    let rhs = f(s) * nrv[k] - (f(u) - f(s)) * rut[k];
                    worst = worst.max((lhs[k] - rhs).abs());
                }
            }
        }
    }
    let scale = inst.path.scale().max(1.0) * increment_max(r).max(1.0);
    Check {
        value: worst,
        limit: INVARIANT_TOL * scale,
    }
}

/// `δ(F G)(s, t) = F_s δG(s, t) + δF(s, t) G_t` componentwise.
pub fn leibnitz_delta(inst: &Instance) -> Check {
    let (f, g) = (&inst.path, &inst.other);
    let n = f.grid().len();
    let mut worst = 0.0_f64;
    for s in 0..n {
        for t in s..n {
            for k in 0..f.width() {
                let (fs, ft, gs, gt) = (f.value(s)[k], f.value(t)[k], g.value(s)[k], g.value(t)[k]);
                let lhs = ft * gt - fs * gs;
                let rhs = fs * (gt - gs) + (ft - fs) * gt;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Check {
        value: worst,
        limit: INVARIANT_TOL * f.scale().max(1.0) * g.scale().max(1.0),
    }
}

/// `‖R‖_γ ≤ |b - a|^{η-γ} ‖R‖_η` on the whole grid.
pub fn norm_comparison(inst: &Instance) -> Check {
    let r = &inst.inc;
    let g = r.grid();
    let lhs = holder_norm(r, inst.gamma, Budget::Exact).unwrap();
    let rhs = (g.end() - g.start()).powf(inst.eta - inst.gamma)
        * holder_norm(r, inst.eta, Budget::Exact).unwrap();
    Check {
        value: lhs,
        limit: rhs * (1.0 + INVARIANT_TOL),
    }
}

/// Patching inequality split at the middle of the grid.
pub fn patch(inst: &Instance) -> Check {
    let r = &inst.inc;
    let split = r.grid().cells() / 2;
    let rho1 = inst.gamma * 0.4;
    let b = patch_norm_bound(r, split, inst.gamma, rho1, inst.gamma - rho1, Budget::Exact).unwrap();
    Check {
        value: b.lhs,
        limit: b.rhs * (1.0 + INVARIANT_TOL),
    }
}

pub type Suite = fn(&Instance) -> Check;

pub const SUITES: [(&str, Suite); 6] = [
    ("N∘δ = 0", n_delta),
    ("N₂∘N = 0", n2_n),
    ("Leibnitz for N", leibnitz_n),
    ("Leibnitz for δ", leibnitz_delta),
    ("norm comparison", norm_comparison),
    ("patch inequality", patch),
];
