//! Property suites with pass/fail rows. Each check reports its measured
//! value next to the bound it is held to.

use crate::config::RunConfig;
use crate::run::{simulate, RunOutput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use surfwave_core::checks::linear::{evolution_error, linear_energy_history, mms_params, propagator_radii, stokes_mms_errors};
use surfwave_core::checks::{
    analytic_function, analytic_surface, entropy_residuals, forcing_scaling, harmonicity_residual, identity_residuals,
    map_residuals, transport_residuals, IdentityResiduals, TransportFunctional,
};
use surfwave_core::{
    decay_fit, BulkField, DealiasRule, FlowState, Grid, GridSpec, Physics, SurfaceField, TensionLaw, TensionModel,
};

pub const EQUILIBRIUM_PRESET: &str = include_str!("../../../presets/equilibrium.json");
pub const SMALL_WAVE_PRESET: &str = include_str!("../../../presets/small-wave.json");

/// Observed orders are accepted from this value up when first order is
/// required; measured rates carry a few percent of pre-asymptotic noise.
pub const FIRST_ORDER: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Identities,
    Budgets,
    Scaling,
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub measured: f64,
    /// Human-readable form of the bound, e.g. "< 1e-8".
    pub bound: String,
    pub passed: bool,
}

impl Row {
    pub fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: format!("< {bound:e}"),
            passed: measured < bound,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: format!(">= {bound}"),
            passed: measured >= bound,
        }
    }

    pub fn within(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&measured),
        }
    }

    pub fn custom(name: impl Into<String>, measured: f64, bound: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: bound.into(),
            passed,
        }
    }
}

fn failed(name: &str, e: impl std::fmt::Display) -> Row {
    Row::custom(format!("{name} ({e})"), f64::NAN, "no error", false)
}

/// log₂ of successive ratios.
pub fn orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn grid(n: usize, nz: usize) -> Arc<Grid> {
    Grid::new(GridSpec::new(2.0 * PI, 2.0 * PI, 1.0, n, n, nz).with_dealias(DealiasRule::ThreeHalves))
        .expect("fixed verification grid is valid")
}

/// max|∇_*η| on the evaluation grid.
fn max_slope(eta: &SurfaceField) -> surfwave_core::Result<f64> {
    let (d1, d2) = (eta.deriv(1, 1)?.eval(), eta.deriv(2, 1)?.eval());
    Ok(d1.iter().zip(&d2).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max))
}

/// Surface identities at 16², 32², 64² on an analytic surface of slope 0.3.
/// Doubling N must cut each residual by 10³ unless it has already reached
/// the roundoff floor.
pub fn surface_identities() -> Vec<Row> {
    const FLOOR: f64 = 1e-12;
    let at = |n: usize| {
        let g = grid(n, 8);
        identity_residuals(
            &analytic_surface(&g, 0.3),
            &analytic_function(&g, 0.1),
            &analytic_function(&g, 1.3),
            &analytic_function(&g, 2.0),
        )
    };
    let levels: Result<Vec<IdentityResiduals>, _> = [16, 32, 64].into_iter().map(at).collect();
    let levels = match levels {
        Ok(l) => l,
        Err(e) => return vec![failed("surface identities", e)],
    };
    let parts = |r: &IdentityResiduals| {
        [
            ("div normal + H", r.div_normal),
            ("area gradient", r.area_gradient),
            ("area rate", r.area_rate),
            ("normal gradient", r.normal_gradient),
            ("ibp i=1", r.ibp[0].abs()),
            ("ibp i=2", r.ibp[1].abs()),
            ("ibp i=3", r.ibp[2].abs()),
            ("ibp vector", r.ibp_vector.abs()),
        ]
    };
    let mut rows = vec![Row::below("surface identities max L2 residual at 32^2", levels[1].max(), 1e-8)];
    for (k, (name, _)) in parts(&levels[0]).iter().enumerate() {
        let v: Vec<f64> = levels.iter().map(|l| parts(l)[k].1).collect();
        let ok = |a: f64, b: f64| a / b >= 1e3 || b < FLOOR;
        let worst = (v[0] / v[1]).min(if v[2] < FLOOR { f64::INFINITY } else { v[1] / v[2] });
        rows.push(Row::custom(
            format!("{name} decay per doubling"),
            worst,
            format!(">= 1e3 or below {FLOOR:e}"),
            ok(v[0], v[1]) && ok(v[1], v[2]),
        ));
    }
    rows
}

fn laws() -> [TensionLaw; 3] {
    [
        TensionLaw::Linear { sigma_s: 1.0, beta: 0.25 },
        TensionLaw::Exponential { sigma_s: 1.2, beta: 0.4 },
        TensionLaw::Tabulated {
            x: (0..=20).map(|i| i as f64 * 0.25).collect(),
            sigma: (0..=20).map(|i| 2.0 / (1.0 + 0.25 * i as f64 * 0.25)).collect(),
        },
    ]
}

/// Closed-form entropy against quadrature and its defining properties on
/// 100 points for each tension law.
pub fn entropy() -> Vec<Row> {
    let mut rows = vec![];
    for law in laws() {
        let label = match law {
            TensionLaw::Linear { .. } => "linear",
            TensionLaw::Exponential { .. } => "exponential",
            TensionLaw::Tabulated { .. } => "tabulated",
        };
        let r = match TensionModel::new(law, 1.0).and_then(|m| entropy_residuals(&m, 100)) {
            Ok(r) => r,
            Err(e) => {
                rows.push(failed(label, e));
                continue;
            }
        };
        if r.closed_form.is_finite() {
            rows.push(Row::below(format!("xi closed form vs quadrature ({label})"), r.closed_form, 1e-10));
        }
        rows.push(Row::below(format!("xi(r) - sigma(r) ({label})"), r.value_at_minimum, 1e-6));
        rows.push(Row::custom(
            format!("minimum at r ({label})"),
            r.below_minimum,
            format!("<= 0 with {} monotonicity failures", r.monotonicity_failures),
            r.below_minimum <= 0.0 && r.monotonicity_failures == 0,
        ));
        rows.push(Row::below(format!("convexity defect ({label})"), r.concavity, 1e-6));
        rows.push(Row::below(format!("xi - x xi' - sigma ({label})"), r.legendre, 1e-6));
    }
    rows
}

/// Harmonic extension at Nz = 32, flattening-map Jacobians and the
/// infinity bound on random states of slope at most 0.3.
pub fn poisson_geometry() -> Vec<Row> {
    let mut rows = vec![];
    match harmonicity_residual(&analytic_surface(&grid(32, 32), 0.3)) {
        Ok(r) => rows.push(Row::below("harmonicity of extension at Nz=32", r, 1e-8)),
        Err(e) => rows.push(failed("harmonicity", e)),
    }
    let g = grid(32, 24);
    let mut det = 0.0f64;
    let mut jk = 0.0f64;
    let mut bound = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let modes: Vec<(f64, f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.gen_range(-3..=3) as f64,
                    rng.gen_range(-3..=3) as f64,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let mut eta = SurfaceField::from_fn(&g, |x, y| modes.iter().map(|m| m.2 * (m.0 * x + m.1 * y + m.3).cos()).sum());
        eta.coeffs_mut()[0] = Default::default();
        let target = rng.gen_range(0.01..0.3);
        if eta.max_coeff() == 0.0 {
            continue;
        }
        let result = max_slope(&eta).and_then(|slope| map_residuals(&eta.scaled(target / slope)));
        match result {
            Ok(m) => {
                det = det.max(m.determinant);
                jk = jk.max(m.jk);
                bound = bound.max(m.infinity_bound);
            }
            Err(e) => return vec![failed("flattening map", e)],
        }
    }
    rows.push(Row::below("J - det(grad Theta) on 40 random states", det, 1e-10));
    rows.push(Row::below("JK - 1 on 40 random states", jk, 1e-10));
    rows.push(Row::custom(
        "|J-1|^2 + |A|^2 + |B|^2 on 40 random states",
        bound,
        "<= 0.5",
        bound <= 0.5,
    ));
    rows
}

/// Centered-difference transport identity for f = z and f = z²/2.
pub fn transport() -> Vec<Row> {
    let g = grid(16, 8);
    let dts = [1e-2, 5e-3, 2.5e-3];
    let mut rows = vec![];
    match transport_residuals(&g, 0.3, TransportFunctional::Quadratic, 0.2, &dts) {
        Ok(q) => {
            let order = orders(&q).into_iter().fold(f64::INFINITY, f64::min);
            rows.push(Row::at_least("transport f=z^2/2 observed order", order, 1.8));
        }
        Err(e) => rows.push(failed("transport f=z^2/2", e)),
    }
    // f = z has a vanishing right side, so the difference quotient is exact
    // up to roundoff and there is no order to observe.
    match transport_residuals(&g, 0.3, TransportFunctional::Mass, 0.2, &dts) {
        Ok(m) => rows.push(Row::below("transport f=z residual", m.into_iter().fold(0.0, f64::max), 1e-10)),
        Err(e) => rows.push(failed("transport f=z", e)),
    }
    rows
}

/// Manufactured Stokes solution, implicit-step order, propagator radii and
/// unforced linear energy.
pub fn linear_solver() -> Vec<Row> {
    let mut rows = vec![];
    let errs = stokes_mms_errors(&[6, 10, 14, 32]);
    rows.push(Row::below("Stokes manufactured solution error at Nz=32", errs[3], 1e-8));
    rows.push(Row::at_least("Stokes error reduction Nz 6 -> 14", errs[0] / errs[2], 1e3));
    let e: Vec<f64> = [0.02, 0.01, 0.005].into_iter().map(evolution_error).collect();
    let order = orders(&e).into_iter().fold(f64::INFINITY, f64::min);
    rows.push(Row::at_least("implicit step observed order in dt", order, FIRST_ORDER));
    let g = Grid::new(GridSpec::new(2.0 * PI, 2.0 * PI, 1.0, 16, 16, 16)).expect("valid grid");
    match propagator_radii(&g, mms_params(), 11, &[1e-3, 1e-2, 1e-1]) {
        Ok(radii) => {
            let sampled: Vec<f64> = radii.iter().filter(|(m, _)| *m != [0, 0]).map(|r| r.1).take(10).collect();
            let worst = sampled.iter().cloned().fold(0.0, f64::max);
            rows.push(Row::custom(
                format!("propagator spectral radius over {} modes", sampled.len()),
                worst,
                "< 1",
                worst < 1.0 && sampled.len() == 10,
            ));
        }
        Err(e) => rows.push(failed("propagator", e)),
    }
    match linear_energy_history(&g, mms_params(), 200, 5e-3) {
        Ok(h) => {
            let rise = h.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max);
            rows.push(Row::custom(
                "largest relative energy increase over 200 steps",
                rise,
                "<= 1e-10",
                rise <= 1e-10 && h[200] < h[0],
            ));
        }
        Err(e) => rows.push(failed("linear energy", e)),
    }
    rows
}

/// Largest change of any diagnostic over a run started at equilibrium.
pub fn equilibrium_drift(out: &RunOutput) -> f64 {
    let first = &out.samples[0];
    let col = |s: &surfwave_core::BudgetSample| [s.e_phys, s.d_phys, s.mass, s.e_sob, s.d_sob, s.eta_mean, s.compat, s.residual];
    out.samples
        .iter()
        .flat_map(|s| col(s).into_iter().zip(col(first)).map(|(a, b)| if a.is_finite() && b.is_finite() { (a - b).abs() } else { 0.0 }))
        .fold(0.0, f64::max)
}

pub fn equilibrium_config() -> RunConfig {
    RunConfig::from_json(EQUILIBRIUM_PRESET).expect("bundled preset is valid")
}

pub fn small_wave_config() -> RunConfig {
    RunConfig::from_json(SMALL_WAVE_PRESET).expect("bundled preset is valid")
}

pub fn equilibrium() -> Vec<Row> {
    let cfg = equilibrium_config();
    match simulate(&cfg) {
        Ok(out) => vec![
            Row::custom("equilibrium steps", out.summary.steps as f64, "= 1000", out.summary.steps == 1000),
            Row::custom("equilibrium diagnostic drift", equilibrium_drift(&out), "<= 1e-11", equilibrium_drift(&out) <= 1e-11),
        ],
        Err(e) => vec![failed("equilibrium run", e)],
    }
}

fn max_abs_residual(out: &RunOutput) -> f64 {
    out.samples.iter().map(|s| s.residual.abs()).filter(|r| r.is_finite()).fold(0.0, f64::max)
}

/// Mass drift and budget residual of runs at successively halved steps,
/// with the observed orders between neighbours.
pub fn refinement_rows(runs: &[(f64, RunOutput)]) -> Vec<Row> {
    let mut rows = vec![];
    for (dt, out) in runs {
        rows.push(Row::custom(format!("dt={dt:e} mass drift"), out.summary.mass_drift, "reported", true));
        rows.push(Row::custom(format!("dt={dt:e} max |budget residual|"), max_abs_residual(out), "reported", true));
    }
    let drift: Vec<f64> = runs.iter().map(|r| r.1.summary.mass_drift).collect();
    let resid: Vec<f64> = runs.iter().map(|r| max_abs_residual(&r.1)).collect();
    for (k, (a, b)) in orders(&drift).into_iter().zip(orders(&resid)).enumerate() {
        let span = format!("{:e} -> {:e}", runs[k].0, runs[k + 1].0);
        rows.push(Row::at_least(format!("mass drift order {span}"), a, FIRST_ORDER));
        rows.push(Row::at_least(format!("budget residual order {span}"), b, FIRST_ORDER));
    }
    rows
}

/// Runs `cfg` at each step size. The stride is kept, so the sampling
/// interval of the centered differences shrinks together with the step.
pub fn refine(cfg: &RunConfig, dts: &[f64]) -> Result<Vec<(f64, RunOutput)>, crate::RunError> {
    dts.iter()
        .map(|&dt| {
            let mut c = cfg.clone();
            c.stepping.dt = dt;
            simulate(&c).map(|out| (dt, out))
        })
        .collect()
}

/// A shorter, coarser version of the small-wave scenario for the table.
pub fn short_wave_config() -> RunConfig {
    let mut cfg = small_wave_config();
    cfg.grid = GridSpec::new(2.0 * PI, 2.0 * PI, 1.0, 16, 16, 12);
    cfg.stepping.dt = 4e-3;
    cfg.stepping.t_end = 0.4;
    cfg.stepping.stride = 5;
    cfg
}

pub fn budget_table() -> Vec<Row> {
    match refine(&short_wave_config(), &[4e-3, 2e-3, 1e-3]) {
        Ok(runs) => refinement_rows(&runs),
        Err(e) => vec![failed("refinement runs", e)],
    }
}

/// E_phys monotone after the first 5% of samples and both energies decaying
/// with a good exponential fit.
pub fn decay_rows(out: &RunOutput) -> Vec<Row> {
    let skip = out.samples.len() / 20;
    let rises = out.samples[skip..].windows(2).filter(|w| w[1].e_phys >= w[0].e_phys).count();
    let mut rows = vec![Row::custom("E_phys increases after first 5%", rises as f64, "= 0", rises == 0)];
    let series: Vec<(f64, f64)> = out.samples.iter().map(|s| (s.t, s.e_phys)).collect();
    match decay_fit(&series, crate::run::FIT_TRANSIENT) {
        Ok(f) => {
            rows.push(Row::custom("E_phys fitted rate", f.lambda, "> 0", f.lambda > 0.0));
            rows.push(Row::at_least("E_phys fit r^2", f.r_squared, 0.99));
        }
        Err(e) => rows.push(failed("E_phys fit", e)),
    }
    let sob: Vec<(f64, f64)> = out.samples.iter().filter(|s| s.e_sob.is_finite()).map(|s| (s.t, s.e_sob)).collect();
    match decay_fit(&sob, crate::run::FIT_TRANSIENT) {
        Ok(f) => rows.push(Row::custom("E_sob fitted rate", f.lambda, "> 0", f.lambda > 0.0)),
        Err(e) => rows.push(failed("E_sob fit", e)),
    }
    rows
}

/// Smooth perturbation shape used for the scaling test.
pub fn perturbation_shape(g: &Arc<Grid>, c0: f64) -> FlowState {
    let u = [
        BulkField::from_fn(g, |x, y, z| (z + 1.0) * (x + 0.3).cos() * (0.5 + y.sin()) * (0.7 * z).exp()),
        BulkField::from_fn(g, |x, y, z| (z + 1.0) * z * (x - y).sin()),
        BulkField::from_fn(g, |x, y, z| (z + 1.0).powi(2) * (y + 2.0 * x).cos() * (1.0 + 0.3 * z)),
    ]
    .map(|f| f.dealiased());
    FlowState {
        u,
        p: BulkField::from_fn(g, |x, y, z| (x + z).cos() + 0.4 * (2.0 * y).sin()).dealiased(),
        eta: SurfaceField::from_fn(g, |x, y| x.cos() * y.sin() + 0.5 * (2.0 * x - y).sin()).dealiased(),
        ctilde: SurfaceField::from_fn(g, |x, y| c0 * (1.0 + (x + y).cos() - 0.5 * (2.0 * y).sin())).dealiased(),
        t: 0.0,
    }
}

/// Norm ratio of every forcing block between amplitudes 1e-2 and 5e-3.
pub fn scaling() -> Vec<Row> {
    let g = grid(16, 12);
    let c0 = 1.0;
    let physics = TensionModel::new(TensionLaw::Exponential { sigma_s: 1.2, beta: 0.4 }, c0)
        .and_then(|m| Physics::new(m, 0.3));
    let result = physics.and_then(|ph| forcing_scaling(&perturbation_shape(&g, c0), &ph, 1e-2));
    match result {
        Ok(ratios) => ratios.into_iter().map(|(name, r)| Row::within(format!("{name} ratio eps/(eps/2)"), r, 3.6, 4.4)).collect(),
        Err(e) => vec![failed("forcing scaling", e)],
    }
}

pub fn run_suite(suite: Suite) -> Vec<(String, Vec<Row>)> {
    let mut groups = vec![];
    if matches!(suite, Suite::Identities | Suite::All) {
        groups.push(("surface identities".to_string(), surface_identities()));
        groups.push(("entropy".to_string(), entropy()));
        groups.push(("extension and flattening map".to_string(), poisson_geometry()));
        groups.push(("transport identity".to_string(), transport()));
    }
    if matches!(suite, Suite::Budgets | Suite::All) {
        groups.push(("linear solver".to_string(), linear_solver()));
        groups.push(("equilibrium".to_string(), equilibrium()));
        groups.push(("residual vs dt".to_string(), budget_table()));
    }
    if matches!(suite, Suite::Scaling | Suite::All) {
        groups.push(("forcing scaling".to_string(), scaling()));
    }
    groups
}

pub fn format_rows(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            let mark = if r.passed { "pass" } else { "FAIL" };
            format!("{mark}  {:width$}  {:>12.4e}  {}\n", r.name, r.measured, r.bound)
        })
        .collect()
}

/// Prints the table; 0 iff every row passed.
pub fn verify(suite: Suite) -> i32 {
    let mut all = true;
    for (title, rows) in run_suite(suite) {
        println!("[{title}]");
        print!("{}", format_rows(&rows));
        all &= rows.iter().all(|r| r.passed);
    }
    println!("{}", if all { "all checks passed" } else { "some checks failed" });
    if all {
        0
    } else {
        1
    }
}
