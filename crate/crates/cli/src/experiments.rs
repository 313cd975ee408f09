//! One runner per subcommand. Each resolves its parameters, runs the
//! computation and returns the metrics, the pass flag and the CSV body.

use std::collections::BTreeMap;
use std::sync::Arc;

use roughpath::brownian::{
    correction_identity_check, correction_rate, grr_diagnostic, ito_lift, random_phases, sample_bm,
    strat_from_ito, weierstrass_path, weierstrass_phased, BrownianConfig,
};
use roughpath::controlled::{compose_smooth, driver_rate, ControlledPath, RoughPath2, VectorField};
use roughpath::grid::io::{component_names, fmt_f64, write_path_csv};
use roughpath::grid::{
    delta, increment_scale, product_norm2, Budget, FnIncrement, GridPath, Increment, TimeGrid,
};
use roughpath::rate::{least_squares_slope, FittedOrder};
use roughpath::rde::{
    ito_map_probe, solve_picard, solve_step, write_solution_csv, RdeProblem, Solver, PROBE_EPSILONS,
};
use roughpath::sewing::sewing_bound_with;
use roughpath::signature::{
    chen_mul, extend_level, from_rough2, level_holder_norms, mult_defect, series_scale, TensorFunc,
    TensorSeries, TwoParamSeries, MAX_LEVEL,
};
use roughpath::young::{young_germ, young_rate};
use serde_json::Value;

use crate::config::{power_of_two, Resolver};
use crate::error::CliError;

/// Slack on the fitted rate orders.
pub const RATE_SLACK: f64 = 0.15;
/// Terms in every Weierstrass sum.
pub const WEIERSTRASS_TERMS: usize = 25;
/// Picard iteration cap per window.
pub const PICARD_MAX_ITER: usize = 100;

pub struct Report {
    pub metrics: BTreeMap<String, Value>,
    pub pass: bool,
    pub csv: Vec<u8>,
    /// Extra files, as (suffix appended to the run name, contents).
    pub extra: Vec<(String, Vec<u8>)>,
}

impl Report {
    fn new(csv: Vec<u8>) -> Self {
        Self {
            metrics: BTreeMap::new(),
            pass: false,
            csv,
            extra: Vec::new(),
        }
    }

    fn metric(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.into(), v.into());
    }
}

pub type Resolved = BTreeMap<String, Value>;

fn order_value(o: FittedOrder) -> Value {
    match o {
        FittedOrder::Exact => "exact".into(),
        FittedOrder::Order(p) => p.into(),
    }
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

fn exponent(r: &mut Resolver, key: &str, default: f64) -> Result<f64, CliError> {
    r.f64(key, default, |g| g > 0.0 && g <= 1.0, "in (0, 1]")
}

fn cells(r: &mut Resolver, default: usize) -> Result<usize, CliError> {
    r.usize(
        "n",
        default,
        |n| (2..=1 << 20).contains(&n),
        "between 2 and 2^20",
    )
}

fn dyadic_cells(r: &mut Resolver, default: usize) -> Result<usize, CliError> {
    r.usize(
        "n",
        default,
        |n| power_of_two(n) && n <= 1 << 20,
        "a power of two up to 2^20",
    )
}

fn refinement(r: &mut Resolver, default: usize) -> Result<usize, CliError> {
    r.usize(
        "refinement",
        default,
        |m| (1..=1024).contains(&m),
        "between 1 and 1024",
    )
}

fn dim(r: &mut Resolver, default: usize) -> Result<usize, CliError> {
    r.usize("dim", default, |d| (1..=3).contains(&d), "1, 2 or 3")
}

fn coefficient(k: usize) -> f64 {
    ((k * 37 + 11) % 23) as f64 / 23.0 - 0.5
}

/// A deterministic field `ℝ^m → ℝ^{m×d}`. Linear and sine fields have
/// matrix entries `1/(ν+1)` on the diagonal `μ = λ` and small
/// off-diagonal couplings.
pub fn field(kind: &str, m: usize, d: usize) -> Result<VectorField, CliError> {
    let width = m * d;
    let matrix: Vec<f64> = (0..width * m)
        .map(|k| {
            let (row, lambda) = (k / m, k % m);
            let (mu, nu) = (row / d, row % d);
            if mu == lambda {
                1.0 / (nu + 1) as f64
            } else {
                0.25 * coefficient(k)
            }
        })
        .collect();
    let f = match kind {
        "linear" => VectorField::linear(m, vec![m, d], matrix)?,
        "sine" => {
            let offset = (0..width).map(|k| 0.5 * coefficient(k + 5)).collect();
            VectorField::sine(m, vec![m, d], matrix, offset)?
        }
        "constant" => {
            let value = (0..width).map(|k| coefficient(k) + 0.75).collect();
            VectorField::constant(m, vec![m, d], value)?
        }
        other => return Err(CliError::Config(format!("unknown field `{other}`"))),
    };
    Ok(f)
}

fn finish(r: Resolver) -> Result<Resolved, CliError> {
    r.finish()
}

pub fn sew_bound(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let gamma = exponent(&mut r, "gamma", 0.75)?;
    let rho = exponent(&mut r, "rho", 0.75)?;
    let n = cells(&mut r, 1024)?;
    let seed = r.u64("seed", 0)?;
    let samples = r.usize(
        "samples",
        20,
        |s| (1..=1000).contains(&s),
        "between 1 and 1000",
    )?;
    let params = finish(r)?;
    if gamma + rho <= 1.0 {
        return Err(CliError::Config(format!(
            "gamma + rho must exceed 1, got {}",
            gamma + rho
        )));
    }
    let grid = TimeGrid::uniform(0.0, 1.0, n)?;
    let mut rows = Vec::with_capacity(samples);
    let mut worst = 0.0_f64;
    for k in 0..samples as u64 {
        let base = seed.wrapping_add(2 * k);
        let f = weierstrass_phased(
            rho,
            &random_phases(WEIERSTRASS_TERMS, base.wrapping_add(1)),
            &grid,
        )?;
        let x = weierstrass_phased(
            gamma,
            &random_phases(WEIERSTRASS_TERMS, base.wrapping_add(2)),
            &grid,
        )?;
        let germ = young_germ(&f, &x, rho, gamma)?;
        let norm = product_norm2(&delta(&f), &delta(&x), rho, gamma)?;
        let b = sewing_bound_with(&germ, &[norm], Budget::Auto)?;
        worst = worst.max(b.ratio());
        rows.push(vec![
            k.to_string(),
            fmt_f64(b.measured),
            fmt_f64(b.bound),
            fmt_f64(b.ratio()),
        ]);
    }
    let header: Vec<String> = ["sample", "measured", "bound", "ratio"]
        .map(String::from)
        .to_vec();
    let mut rep = Report::new(csv_table(&header, &rows));
    rep.metric("worst_ratio", worst);
    rep.metric("limit", 1.05);
    rep.pass = worst <= 1.05;
    Ok((params, rep))
}

pub fn young_rate_run(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let gamma = exponent(&mut r, "gamma", 0.75)?;
    let rho = exponent(&mut r, "rho", 0.75)?;
    let n = dyadic_cells(&mut r, 1 << 12)?;
    let levels = r.usize("levels", 7, |l| l >= 3, "at least 3")?;
    let params = finish(r)?;
    let grid = TimeGrid::uniform(0.0, 1.0, n)?;
    let x = weierstrass_path(gamma, WEIERSTRASS_TERMS, &grid)?;
    let f = if rho == gamma {
        x.clone()
    } else {
        weierstrass_path(rho, WEIERSTRASS_TERMS, &grid)?
    };
    let study = young_rate(&f, &x, gamma, rho, levels)?;
    let mut csv = Vec::new();
    study.write_csv(&mut csv)?;
    let expected = gamma + rho - 1.0;
    let mut rep = Report::new(csv);
    rep.metric("order", order_value(study.order));
    rep.metric("cauchy_order", order_value(study.cauchy_order));
    rep.metric("expected_order", expected);
    rep.metric("integral", study.rows.last().map_or(0.0, |l| l.value[0]));
    rep.pass = study.order.at_least(expected - RATE_SLACK);
    Ok((params, rep))
}

pub fn rough_rate_run(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let gamma = r.f64(
        "gamma",
        0.45,
        |g| g > 1.0 / 3.0 && g <= 0.5,
        "in (1/3, 1/2]",
    )?;
    let n = dyadic_cells(&mut r, 1 << 12)?;
    let levels = r.usize("levels", 7, |l| l >= 3, "at least 3")?;
    let seed = r.u64("seed", 99)?;
    let refinement = refinement(&mut r, 8)?;
    let d = dim(&mut r, 2)?;
    let phi = r.choice("phi", "sine", &["sine", "linear", "constant"])?;
    let params = finish(r)?;
    let rp = Arc::new(ito_lift(
        &BrownianConfig::uniform(d, n, seed, refinement)?,
        gamma,
    )?);
    let w = compose_smooth(&field(&phi, d, d)?, &ControlledPath::driver(rp))?;
    let study = driver_rate(&w, levels)?;
    let mut csv = Vec::new();
    study.write_csv(&mut csv)?;
    let expected = 3.0 * gamma - 1.0;
    let mut rep = Report::new(csv);
    rep.metric("order", order_value(study.order));
    rep.metric("cauchy_order", order_value(study.cauchy_order));
    rep.metric("expected_order", expected);
    rep.pass = study.order.at_least(expected - RATE_SLACK);
    Ok((params, rep))
}

pub fn bm_gen(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let d = dim(&mut r, 2)?;
    let n = cells(&mut r, 1024)?;
    let seed = r.u64("seed", 0)?;
    let refinement = refinement(&mut r, 16)?;
    let gamma = r.f64("gamma", 0.45, |g| g > 1.0 / 3.0 && g < 0.5, "in (1/3, 1/2)")?;
    let params = finish(r)?;
    let cfg = BrownianConfig::uniform(d, n, seed, refinement)?;
    let sample = sample_bm(&cfg)?;
    let ito = ito_lift(&cfg, gamma)?;
    let strat = strat_from_ito(&ito)?;
    let mut rep = Report::new(Vec::new());
    write_path_csv(&sample.coarse, "x", &mut rep.csv)?;
    let mut pass = true;
    for (name, rp) in [("ito", &ito), ("strat", &strat)] {
        let z = from_rough2(rp)?;
        let defect = mult_defect(&z);
        let limit = 1e-12 * series_scale(&z, Budget::Dyadic);
        pass &= defect <= limit;
        rep.metric(&format!("{name}_chen_defect"), defect);
        rep.metric(&format!("{name}_chen_limit"), limit);
    }
    let grid = ito.grid().clone();
    let shift = FnIncrement::new(grid.clone(), vec![d, d], |i, j, out| {
        let (a, b) = (strat.xx().eval(i, j), ito.xx().eval(i, j));
        let h = 0.5 * (grid.t(j) - grid.t(i));
        for (k, o) in out.iter_mut().enumerate() {
            let s = if k / d == k % d { h } else { 0.0 };
            *o = a[k] - b[k] - s;
        }
    });
    let shift_error = increment_scale(&shift, Budget::Auto);
    let shift_limit = 1e-12 * ito.scale(Budget::Auto);
    pass &= shift_error <= shift_limit;
    rep.metric("shift_error", shift_error);
    rep.metric("shift_limit", shift_limit);
    rep.pass = pass;
    Ok((params, rep))
}

pub fn ito_strat(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let phi = r.choice("phi", "linear", &["linear", "sine", "constant"])?;
    let seed = r.u64("seed", 7)?;
    let n = dyadic_cells(&mut r, 1024)?;
    let refinement = refinement(&mut r, 8)?;
    let d = dim(&mut r, 2)?;
    let levels = r.usize("levels", 6, |l| l >= 2, "at least 2")?;
    let params = finish(r)?;
    let ito = ito_lift(&BrownianConfig::uniform(d, n, seed, refinement)?, 0.45)?;
    let f = field(&phi, d, d)?;
    let check = correction_identity_check(&f, &ito)?;
    let mut header = vec!["t".to_string()];
    header.extend(component_names("strat", check.lhs.shape()));
    header.extend(component_names("corrected", check.rhs.shape()));
    let rows: Vec<Vec<String>> = (0..check.lhs.len())
        .map(|k| {
            let mut row = vec![fmt_f64(ito.grid().t(k))];
            row.extend(check.lhs.value(k).iter().map(|v| fmt_f64(*v)));
            row.extend(check.rhs.value(k).iter().map(|v| fmt_f64(*v)));
            row
        })
        .collect();
    let mut rep = Report::new(csv_table(&header, &rows));
    rep.metric("gap", check.gap);
    if phi == "sine" {
        let study = correction_rate(&f, &ito, levels)?;
        rep.metric("order", order_value(study.order));
        rep.pass = study.order.at_least(1.0 - 1e-9);
    } else {
        rep.pass = check.gap <= 1e-12;
    }
    Ok((params, rep))
}

fn sine_driver(n: usize) -> Result<Arc<RoughPath2>, CliError> {
    let g = TimeGrid::uniform(0.0, 1.0, n)?;
    let x = GridPath::from_fn(g, vec![1], |t, o| o[0] = t.sin())?;
    Ok(Arc::new(RoughPath2::geometric(x, 1.0)?))
}

/// `y0 exp(x - x0)` for the scalar linear equation driven by `sin t`.
fn scalar_exact(driver: &RoughPath2, y0: f64, k: usize) -> f64 {
    y0 * (driver.x().value(k)[0] - driver.x().first()[0]).exp()
}

pub fn rde_solve(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let phi = r.choice("phi", "linear", &["linear", "sine", "constant"])?;
    let y0 = r.vec(
        "y0",
        &[1.0],
        |l| (1..=3).contains(&l),
        "1 to 3 finite numbers",
    )?;
    let n = cells(&mut r, 1024)?;
    let tol = r.f64("tol", 1e-10, |t| t > 0.0, "positive")?;
    let path = r.choice("path", "sine", &["sine", "brownian"])?;
    let driver = if path == "brownian" {
        let d = dim(&mut r, 1)?;
        let seed = r.u64("seed", 0)?;
        let refinement = refinement(&mut r, 8)?;
        finish_then(r, |params| {
            let ito = ito_lift(&BrownianConfig::uniform(d, n, seed, refinement)?, 0.45)?;
            Ok((params, Arc::new(strat_from_ito(&ito)?)))
        })?
    } else {
        finish_then(r, |params| Ok((params, sine_driver(n)?)))?
    };
    let (params, driver) = driver;
    let m = y0.len();
    let problem = RdeProblem::on_grid(driver.clone(), field(&phi, m, driver.dim())?, y0.clone())?;
    let step = solve_step(&problem)?;
    let picard = solve_picard(&problem, tol, PICARD_MAX_ITER)?;
    let gap = picard.path.z().sup_distance(step.z())?;
    let mut rep = Report::new(Vec::new());
    write_solution_csv(&step, &mut rep.csv)?;
    rep.metric("picard_gap", gap);
    rep.metric("picard_limit", 10.0 * tol);
    rep.metric("picard_windows", picard.windows.len());
    rep.metric(
        "picard_iterations",
        picard.windows.iter().map(|w| w.iterations).sum::<usize>(),
    );
    rep.metric("final", step.z().last().to_vec());
    let mut pass = gap <= 10.0 * tol;
    if path == "sine" && phi == "linear" && m == 1 {
        let err = (0..=n)
            .map(|k| (step.z().value(k)[0] - scalar_exact(&driver, y0[0], k)).abs())
            .fold(0.0, f64::max);
        rep.metric("exact_error", err);
        pass &= err <= 1e-5;
    }
    rep.pass = pass;
    Ok((params, rep))
}

fn finish_then<T>(
    r: Resolver,
    f: impl FnOnce(Resolved) -> Result<(Resolved, T), CliError>,
) -> Result<(Resolved, T), CliError> {
    f(r.finish()?)
}

pub fn rde_order(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let n = dyadic_cells(&mut r, 1 << 12)?;
    let levels = r.usize("levels", 7, |l| l >= 3, "at least 3")?;
    let y0 = r.vec("y0", &[1.0], |l| l == 1, "a single finite number")?[0];
    let params = finish(r)?;
    if (n.trailing_zeros() as usize) + 1 < levels {
        return Err(CliError::Config(format!(
            "{n} cells do not have {levels} dyadic levels"
        )));
    }
    let phi = field("linear", 1, 1)?;
    let mut rows = Vec::with_capacity(levels);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for l in (0..levels).rev() {
        let cells = n >> l;
        let driver = sine_driver(cells)?;
        let y = solve_step(&RdeProblem::on_grid(driver.clone(), phi.clone(), vec![y0])?)?;
        let err = (0..=cells)
            .map(|k| (y.z().value(k)[0] - scalar_exact(&driver, y0, k)).abs())
            .fold(0.0, f64::max);
        let mesh = 1.0 / cells as f64;
        if err > 0.0 {
            xs.push(mesh.ln());
            ys.push(err.ln());
        }
        rows.push(vec![cells.to_string(), fmt_f64(mesh), fmt_f64(err)]);
    }
    let finest = ys.last().map_or(0.0, |e| e.exp());
    let header: Vec<String> = ["cells", "mesh", "error"].map(String::from).to_vec();
    let mut rep = Report::new(csv_table(&header, &rows));
    let order = if xs.len() >= 2 {
        least_squares_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    rep.metric("order", order);
    rep.metric("finest_error", finest);
    rep.pass = order >= 1.5 && finest <= 1e-5;
    Ok((params, rep))
}

pub fn ito_map(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let phi = r.choice("phi", "linear", &["linear", "sine", "constant"])?;
    let y0 = r.vec(
        "y0",
        &[1.0],
        |l| (1..=3).contains(&l),
        "1 to 3 finite numbers",
    )?;
    let n = cells(&mut r, 1024)?;
    let seed = r.u64("seed", 17)?;
    let params = finish(r)?;
    let driver = sine_driver(n)?;
    let problem = RdeProblem::on_grid(driver, field(&phi, y0.len(), 1)?, y0)?;
    let probe = ito_map_probe(&problem, &PROBE_EPSILONS, seed, Solver::Step)?;
    let mut rep = Report::new(Vec::new());
    probe.write_csv(&mut rep.csv)?;
    rep.metric("slope", probe.slope);
    rep.metric("lipschitz", probe.lipschitz());
    rep.pass = (0.8..=1.2).contains(&probe.slope);
    Ok((params, rep))
}

/// Signature of the piecewise-linear interpolation of `curve` on `steps`
/// equal pieces of `[s, t]`.
fn polygon_signature(
    curve: &dyn Fn(f64) -> [f64; 2],
    s: f64,
    t: f64,
    steps: usize,
    level: usize,
) -> TensorSeries {
    let h = (t - s) / steps as f64;
    let mut acc = TensorSeries::unit(2, level);
    let mut prev = curve(s);
    for k in 0..steps {
        let next = curve(s + h * (k + 1) as f64);
        let piece = TensorSeries::exp_vector(&[next[0] - prev[0], next[1] - prev[1]], level);
        acc = chen_mul(&acc, &piece).expect("same shape");
        prev = next;
    }
    acc
}

pub fn sig_extend(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let path = r.choice("path", "line", &["line", "smooth"])?;
    let level = r.usize(
        "level",
        3,
        |l| (3..=MAX_LEVEL).contains(&l),
        "between 3 and 5",
    )?;
    let n = cells(&mut r, 512)?;
    let factor = refinement(&mut r, 8)?;
    let params = finish(r)?;
    if n % factor != 0 {
        return Err(CliError::Config(format!(
            "{n} cells are not divisible by refinement {factor}"
        )));
    }
    let v = [0.8, -1.3];
    let curve: Box<dyn Fn(f64) -> [f64; 2]> = if path == "line" {
        Box::new(move |t| [v[0] * t, v[1] * t])
    } else {
        Box::new(|t: f64| [(2.0 * t).sin(), t * t - 0.5 * t])
    };
    let g = TimeGrid::uniform(0.0, 1.0, n)?;
    let x = GridPath::from_fn(g, vec![2], |t, o| o.copy_from_slice(&curve(t)))?;
    let mut z: TensorFunc = extend_level(&from_rough2(&RoughPath2::geometric(x, 1.0)?)?, factor)?;
    while z.level() < level {
        z = extend_level(&z, 1)?;
    }
    let grid = z.grid().clone();
    let mut errors = vec![0.0_f64; level + 1];
    let mut record = |got: &TensorSeries, exact: &TensorSeries| {
        for (k, e) in errors.iter_mut().enumerate().skip(1) {
            for (a, b) in got.get(k).iter().zip(exact.get(k)) {
                *e = e.max((a - b).abs());
            }
        }
    };
    let (limit, pairs): (f64, Vec<(usize, usize)>) = if path == "line" {
        let all = (0..grid.len())
            .flat_map(|i| (i..grid.len()).map(move |j| (i, j)))
            .collect();
        (1e-10, all)
    } else {
        let c = grid.cells();
        let picks = vec![
            (0, c),
            (0, 1),
            (c / 4, c / 2),
            (c - 1, c),
            (c / 2, c),
            (c / 8, 7 * c / 8),
        ];
        (5.0 * grid.mesh(), picks)
    };
    for (i, j) in pairs {
        let (s, t) = (grid.t(i), grid.t(j));
        let exact = if path == "line" {
            TensorSeries::exp_vector(&[v[0] * (t - s), v[1] * (t - s)], level)
        } else if i == j {
            TensorSeries::unit(2, level)
        } else {
            polygon_signature(&*curve, s, t, 1 << 15, level)
        };
        record(&z.pair(i, j), &exact);
    }
    let norms = level_holder_norms(&z, 1.0, Budget::Auto)?;
    let rows: Vec<Vec<String>> = (1..=level)
        .map(|k| vec![k.to_string(), fmt_f64(errors[k]), fmt_f64(norms[k - 1])])
        .collect();
    let header: Vec<String> = ["level", "max_abs_err", "level_norm"]
        .map(String::from)
        .to_vec();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let mut rep = Report::new(csv_table(&header, &rows));
    rep.metric("max_abs_err", worst);
    rep.metric("limit", limit);
    rep.metric("mesh", grid.mesh());
    rep.metric("mult_defect", mult_defect(&z));
    rep.metric("level_norms", norms);
    rep.extra
        .push((".tensor.json".into(), z.to_json()?.into_bytes()));
    rep.pass = worst <= limit;
    Ok((params, rep))
}

pub fn grr_diag(mut r: Resolver) -> Result<(Resolved, Report), CliError> {
    let gamma = r.f64("gamma", 0.8, |g| g > 0.0 && g < 1.0, "in (0, 1)")?;
    let p = r.f64("p", 8.0, |p| p >= 1.0, "at least 1")?;
    let n = dyadic_cells(&mut r, 256)?;
    let seed = r.u64("seed", 5)?;
    let refinement = refinement(&mut r, 16)?;
    let d = dim(&mut r, 1)?;
    let params = finish(r)?;
    if n < 16 {
        return Err(CliError::Config("grr-diag needs at least 16 cells".into()));
    }
    let ito = ito_lift(&BrownianConfig::uniform(d, n, seed, refinement)?, 0.45)?;
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for stride in [4usize, 2, 1] {
        let coarse = ito.coarsen(stride)?;
        let g = grr_diagnostic(coarse.xx(), gamma, p)?;
        ratios.push(g.ratio);
        rows.push(vec![
            coarse.grid().cells().to_string(),
            fmt_f64(g.u),
            fmt_f64(g.nr_norm),
            fmt_f64(g.measured),
            fmt_f64(g.ratio),
        ]);
    }
    let header: Vec<String> = ["cells", "u", "nr_norm", "measured", "ratio"]
        .map(String::from)
        .to_vec();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios
        .iter()
        .map(|r| (r / mean - 1.0).abs())
        .fold(0.0, f64::max);
    let mut rep = Report::new(csv_table(&header, &rows));
    rep.metric("ratios", ratios.clone());
    rep.metric("spread", spread);
    rep.pass = ratios.iter().all(|r| r.is_finite() && *r > 0.0) && spread <= 0.5;
    Ok((params, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn fields_have_requested_shapes() {
        for kind in ["linear", "sine", "constant"] {
            let f = field(kind, 2, 3).unwrap();
            assert_eq!(f.input_dim(), 2);
            assert_eq!(f.output_shape(), &[2, 3]);
        }
        // the scalar linear field is the identity, so y = y0 exp(x - x0)
        let mut out = [0.0];
        field("linear", 1, 1).unwrap().eval(&[2.5], &mut out);
        assert_eq!(out[0], 2.5);
        assert!(field("cubic", 1, 1).is_err());
    }

    #[test]
    fn csv_table_layout() {
        let header = vec!["a".to_string(), "b".to_string()];
        let body = csv_table(&header, &[vec!["1".into(), "2".into()]]);
        assert_eq!(String::from_utf8(body).unwrap(), "a,b\n1,2\n");
    }

    #[test]
    fn sig_extend_line_is_exact() {
        let cfg = ExperimentConfig {
            n: Some(64),
            ..Default::default()
        };
        let (params, rep) = sig_extend(Resolver::new("sig-extend", &cfg).unwrap()).unwrap();
        assert_eq!(params["level"], 3);
        assert!(rep.pass);
        assert!(rep.metrics["max_abs_err"].as_f64().unwrap() <= 1e-10);
        let text = String::from_utf8(rep.csv).unwrap();
        assert!(text.starts_with("level,max_abs_err,level_norm\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn rde_order_rejects_too_many_levels() {
        let cfg = ExperimentConfig {
            n: Some(16),
            levels: Some(8),
            ..Default::default()
        };
        let err = rde_order(Resolver::new("rde-order", &cfg).unwrap())
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), 2);
    }
}
