//! Energy, dissipation, surfactant mass, Sobolev functionals and decay
//! fitting.

use crate::dynamics::{geometry_for, FlowState, Physics};
use crate::error::{Error, Result};
use crate::geometry::GeometryPack;
use crate::spectral::{BulkField, Grid, SurfaceField};
use crate::surface_ops::SurfaceGeometry;
use serde::{Deserialize, Serialize};

/// One row of the diagnostics time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSample {
    pub t: f64,
    /// Energy with the equilibrium value σ(c₀)|Σ| subtracted.
    pub e_phys: f64,
    pub d_phys: f64,
    pub mass: f64,
    /// NaN until enough history exists for the time derivatives.
    pub e_sob: f64,
    pub d_sob: f64,
    pub eta_mean: f64,
    pub compat: f64,
    /// Centered-difference budget residual; NaN where undefined.
    pub residual: f64,
}

fn surface_integral(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64 * grid.area()
}

fn bulk_integral(grid: &Grid, values: &[f64]) -> f64 {
    let e = grid.eval_len();
    let w = grid.cheb().weights();
    let s: f64 = values.chunks(e).zip(w).map(|(plane, wz)| wz * plane.iter().sum::<f64>()).sum();
    s / e as f64 * grid.area()
}

/// Physical energy, dissipation, mass and mean height at `state`.
/// `compat` and `residual` are left at zero and NaN.
pub fn physical_budget(
    state: &FlowState,
    pack: &GeometryPack,
    geom: &SurfaceGeometry,
    physics: &Physics,
) -> Result<BudgetSample> {
    let grid = state.grid();
    let model = &physics.model;
    let c0 = model.c0();
    let j = pack.j_eval();

    let uv: Vec<Vec<f64>> = state.u.iter().map(|f| f.eval()).collect();
    let grads: Vec<[Vec<f64>; 3]> = state.u.iter().map(|f| pack.cal_a_grad_eval(f)).collect();
    let len = j.len();
    let mut kinetic = vec![0.0; len];
    let mut viscous = vec![0.0; len];
    for q in 0..len {
        kinetic[q] = 0.5 * j[q] * (uv[0][q].powi(2) + uv[1][q].powi(2) + uv[2][q].powi(2));
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += (grads[b][a][q] + grads[a][b][q]).powi(2);
            }
        }
        viscous[q] = 0.5 * j[q] * s;
    }

    let area = geom.area_eval();
    let [h1, h2] = geom.grad_eta_eval();
    let eta = state.eta.eval();
    let ct = state.ctilde.eval();
    let grad_c = geom.grad_gamma_eval(&state.ctilde)?;
    let e = eta.len();
    let sigma0 = model.sigma0();
    let mut surf_energy = vec![0.0; e];
    let mut surf_diss = vec![0.0; e];
    let mut mass = vec![0.0; e];
    for s in 0..e {
        let g2 = h1[s] * h1[s] + h2[s] * h2[s];
        let area_excess = g2 / (area[s] + 1.0);
        let xi_excess = model.xi_excess(c0, ct[s])?;
        surf_energy[s] = 0.5 * eta[s] * eta[s] + xi_excess * area[s] + sigma0 * area_excess;
        let gc2 = grad_c[0][s].powi(2) + grad_c[1][s].powi(2) + grad_c[2][s].powi(2);
        surf_diss[s] = physics.gamma * model.xi_second(c0, ct[s])? * gc2 * area[s];
        mass[s] = ct[s] * area[s];
    }
    Ok(BudgetSample {
        t: state.t,
        e_phys: bulk_integral(grid, &kinetic) + surface_integral(grid, &surf_energy),
        d_phys: bulk_integral(grid, &viscous) + surface_integral(grid, &surf_diss),
        mass: surface_integral(grid, &mass),
        e_sob: f64::NAN,
        d_sob: f64::NAN,
        eta_mean: state.eta.mean(),
        compat: 0.0,
        residual: f64::NAN,
    })
}

/// [`physical_budget`] building the geometry from `state.eta`.
pub fn physical_budget_at(state: &FlowState, physics: &Physics) -> Result<BudgetSample> {
    let (pack, geom) = geometry_for(&state.eta)?;
    physical_budget(state, &pack, &geom, physics)
}

/// Centered-difference residual dE/dt + D at every interior sample.
pub fn budget_residual(samples: &[BudgetSample]) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    let dt = samples[1].t - samples[0].t;
    for w in samples.windows(2) {
        let d = w[1].t - w[0].t;
        if !(dt > 0.0) || (d - dt).abs() > 1e-9 * dt.max(w[1].t.abs()) {
            return Err(Error::InvalidParameter("budget samples must be uniformly spaced in time".into()));
        }
    }
    Ok(samples
        .windows(3)
        .map(|w| (w[1].t, (w[2].e_phys - w[0].e_phys) / (2.0 * dt) + w[1].d_phys))
        .collect())
}

/// The two Sobolev functionals plus whether every term was available.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevValues {
    pub energy: f64,
    pub dissipation: f64,
    pub complete: bool,
}

/// Bulk and surface unknowns of the last two steps, for backward
/// differences in time.
#[derive(Clone, Debug, Default)]
pub struct History {
    levels: Vec<FlowState>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `state` as the newest level, keeping two.
    pub fn push(&mut self, state: &FlowState) {
        self.levels.insert(0, state.clone());
        self.levels.truncate(2);
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[FlowState] {
        &self.levels
    }
}

fn diff_bulk(a: &BulkField, b: &BulkField, dt: f64) -> BulkField {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.scaled(1.0 / dt)
}

fn diff_surf(a: &SurfaceField, b: &SurfaceField, dt: f64) -> SurfaceField {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.scaled(1.0 / dt)
}

fn bulk_sq(u: &[BulkField; 3], k: usize) -> Result<f64> {
    let mut s = 0.0;
    for f in u {
        s += f.sobolev_norm(k)?.powi(2);
    }
    Ok(s)
}

/// 𝓔 and 𝓓 at `state`, with `history` holding the previous levels
/// (newest first) taken `dt` apart. Terms needing missing levels are left
/// out and `complete` is false.
pub fn sobolev_functionals(state: &FlowState, history: &History, dt: f64, c0: f64) -> Result<SobolevValues> {
    let c = state.c(c0);
    let sq = |f: &SurfaceField, s: f64| f.sobolev_norm(s).powi(2);
    let mut energy = bulk_sq(&state.u, 2)? + state.p.sobolev_norm(1)?.powi(2) + sq(&state.eta, 3.0) + sq(&c, 2.0);
    let mut dissipation =
        bulk_sq(&state.u, 3)? + state.p.sobolev_norm(2)?.powi(2) + sq(&state.eta, 3.5) + sq(&c, 3.0);
    let levels = history.levels();
    if let Some(prev) = levels.first() {
        let ut = [0, 1, 2].map(|i| diff_bulk(&state.u[i], &prev.u[i], dt));
        let eta_t = diff_surf(&state.eta, &prev.eta, dt);
        let c_t = diff_surf(&state.ctilde, &prev.ctilde, dt);
        energy += bulk_sq(&ut, 0)? + sq(&eta_t, 1.5) + sq(&c_t, 0.0);
        dissipation += bulk_sq(&ut, 1)? + sq(&eta_t, 2.5) + sq(&c_t, 1.0);
        if let Some(prev2) = levels.get(1) {
            let eta_t_prev = diff_surf(&prev.eta, &prev2.eta, dt);
            let eta_tt = diff_surf(&eta_t, &eta_t_prev, dt);
            energy += sq(&eta_tt, -0.5);
            dissipation += sq(&eta_tt, 0.5);
        }
    }
    Ok(SobolevValues {
        energy,
        dissipation,
        complete: levels.len() >= 2,
    })
}

/// Exponential fit E ≈ C e^{−λt}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lambda: f64,
    pub r_squared: f64,
}

/// Default fraction of the series discarded as transient.
pub const DEFAULT_TRANSIENT: f64 = 0.2;

/// Least-squares line through (t, ln E) after dropping the leading
/// `transient` fraction of the samples.
pub fn decay_fit(series: &[(f64, f64)], transient: f64) -> Result<DecayFit> {
    if !(0.0..1.0).contains(&transient) {
        return Err(Error::InvalidParameter(format!("transient fraction must lie in [0, 1), got {transient}")));
    }
    let skip = (series.len() as f64 * transient).floor() as usize;
    let window = &series[skip.min(series.len())..];
    if window.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: window.len(),
        });
    }
    if let Some(&(t, value)) = window.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::FitDomainError { t, value });
    }
    let n = window.len() as f64;
    let mt = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, e) in window {
        let (dt, dy) = (t - mt, e.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if !(stt > 0.0) {
        return Err(Error::InvalidParameter("decay fit needs distinct sample times".into()));
    }
    let slope = sty / stt;
    let ss_res = (syy - slope * sty).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        lambda: -slope,
        r_squared,
    })
}

/// |∫_Σ c| together with |∫_Σ c̃ (1 − √(1+|∇_*η|²))|; the two agree when
/// the surfactant mass equals c₀|Σ|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanCCheck {
    pub integral: f64,
    pub identity: f64,
}

pub fn mean_c_check(state: &FlowState, geom: &SurfaceGeometry, c0: f64) -> MeanCCheck {
    let grid = state.grid();
    let ct = state.ctilde.eval();
    let area = geom.area_eval();
    let [h1, h2] = geom.grad_eta_eval();
    let c: Vec<f64> = ct.iter().map(|v| v - c0).collect();
    let rhs: Vec<f64> = (0..ct.len())
        .map(|s| {
            let g2 = h1[s] * h1[s] + h2[s] * h2[s];
            -ct[s] * g2 / (area[s] + 1.0)
        })
        .collect();
    MeanCCheck {
        integral: surface_integral(grid, &c).abs(),
        identity: surface_integral(grid, &rhs).abs(),
    }
}

/// Sum over the surface of c̃ √(1+|∇_*η|²).
pub fn surfactant_mass(state: &FlowState, geom: &SurfaceGeometry) -> f64 {
    let ct = state.ctilde.eval();
    let v: Vec<f64> = ct.iter().zip(geom.area_eval()).map(|(c, a)| c * a).collect();
    surface_integral(state.grid(), &v)
}
