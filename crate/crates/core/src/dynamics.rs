//! Explicit nonlinear forcing, the IMEX step of the full system, and
//! construction of compatible initial data.
//!
//! Everything nonlinear is evaluated pointwise on the evaluation grid and
//! projected back onto the retained band.

use crate::error::{Error, Result};
use crate::geometry::{build_geometry_pack, poisson_extend, GeometryPack};
use crate::linear_core::{LinearFields, LinearParams, LinearRhs, LinearSolver};
use crate::spectral::{Band, BulkField, Grid, SurfaceField, C64};
use crate::surface_ops::{build_geometry, laplace_gamma, SurfaceGeometry};
use crate::tension::{equilibrium_concentration, TensionLaw, TensionModel};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Below this Jacobian the run aborts; below [`J_WARN`] a warning is logged.
pub const J_ABORT: f64 = 0.1;
pub const J_WARN: f64 = 0.5;

const COMPAT_MAX_ITER: usize = 50;
const COMPAT_TOL: f64 = 1e-10;

/// Tension model plus surfactant diffusivity.
#[derive(Clone, Debug, PartialEq)]
pub struct Physics {
    pub model: TensionModel,
    pub gamma: f64,
}

impl Physics {
    pub fn new(model: TensionModel, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("diffusivity must be positive, got {gamma}")));
        }
        Ok(Self { model, gamma })
    }

    pub fn linear_params(&self) -> LinearParams {
        LinearParams::from_model(&self.model, self.gamma)
    }
}

/// Flattened-coordinate state (u, p, η, c̃) at time `t`.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: [BulkField; 3],
    pub p: BulkField,
    pub eta: SurfaceField,
    pub ctilde: SurfaceField,
    pub t: f64,
}

impl FlowState {
    /// The equilibrium u = 0, p = 0, η = 0, c̃ = c₀.
    pub fn equilibrium(grid: &Arc<Grid>, c0: f64) -> Self {
        Self {
            u: [BulkField::zeros(grid), BulkField::zeros(grid), BulkField::zeros(grid)],
            p: BulkField::zeros(grid),
            eta: SurfaceField::zeros(grid),
            ctilde: SurfaceField::constant(grid, c0),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.eta.grid()
    }

    /// c = c̃ − c₀.
    pub fn c(&self, c0: f64) -> SurfaceField {
        let mut c = self.ctilde.clone();
        c.coeffs_mut()[0] -= c0;
        c
    }

    /// State multiplied by `eps` around the equilibrium with concentration `c0`.
    pub fn scaled_perturbation(&self, c0: f64, eps: f64) -> Self {
        let mut ctilde = self.c(c0).scaled(eps);
        ctilde.coeffs_mut()[0] += c0;
        Self {
            u: [self.u[0].scaled(eps), self.u[1].scaled(eps), self.u[2].scaled(eps)],
            p: self.p.scaled(eps),
            eta: self.eta.scaled(eps),
            ctilde,
            t: self.t,
        }
    }
}

/// The right-hand sides G¹ … G⁵ of the constant-coefficient form.
#[derive(Clone, Debug)]
pub struct ForcingPack {
    pub g1: [BulkField; 3],
    pub g2: BulkField,
    pub g3: [SurfaceField; 3],
    pub g4: SurfaceField,
    pub g5: SurfaceField,
}

impl ForcingPack {
    pub fn max_norm(&self) -> f64 {
        let bulk = self.g1.iter().chain(std::iter::once(&self.g2)).map(|f| f.max_coeff());
        let surf = self.g3.iter().chain([&self.g4, &self.g5]).map(|f| f.max_coeff());
        bulk.chain(surf).fold(0.0, f64::max)
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let mix_b = |x: &BulkField, y: &BulkField| {
            let mut z = x.scaled(a);
            z.axpy(b, y);
            z
        };
        let mix_s = |x: &SurfaceField, y: &SurfaceField| {
            let mut z = x.scaled(a);
            z.axpy(b, y);
            z
        };
        Self {
            g1: [0, 1, 2].map(|i| mix_b(&self.g1[i], &other.g1[i])),
            g2: mix_b(&self.g2, &other.g2),
            g3: [0, 1, 2].map(|i| mix_s(&self.g3[i], &other.g3[i])),
            g4: mix_s(&self.g4, &other.g4),
            g5: mix_s(&self.g5, &other.g5),
        }
    }
}

/// Pointwise values of every derivative the forcing needs.
struct Pointwise {
    e: usize,
    u: [Vec<f64>; 3],
    du: [[Vec<f64>; 3]; 3],
    d13: [Vec<f64>; 3],
    d23: [Vec<f64>; 3],
    d33: [Vec<f64>; 3],
    dp3: Vec<f64>,
    p_top: Vec<f64>,
    eta_t_bar: Vec<f64>,
}

impl Pointwise {
    fn new(state: &FlowState, geom: &SurfaceGeometry) -> Result<Self> {
        let grid = state.grid();
        let e = grid.eval_len();
        let u = [state.u[0].eval(), state.u[1].eval(), state.u[2].eval()];
        let mut du: [[Vec<f64>; 3]; 3] = Default::default();
        let mut d13: [Vec<f64>; 3] = Default::default();
        let mut d23: [Vec<f64>; 3] = Default::default();
        let mut d33: [Vec<f64>; 3] = Default::default();
        for i in 0..3 {
            let d3 = state.u[i].deriv_vertical(1)?;
            du[i][0] = state.u[i].deriv_horizontal(1, 1)?.eval();
            du[i][1] = state.u[i].deriv_horizontal(2, 1)?.eval();
            d13[i] = d3.deriv_horizontal(1, 1)?.eval();
            d23[i] = d3.deriv_horizontal(2, 1)?.eval();
            du[i][2] = d3.eval();
            d33[i] = state.u[i].deriv_vertical(2)?.eval();
        }
        let dp3 = state.p.deriv_vertical(1)?.eval();
        let p_top = state.p.trace_top().eval();

        // ∂_tη̄ = 𝒫(u·𝓝) from the kinematic condition.
        let [g1, g2] = geom.grad_eta_eval();
        let flux: Vec<f64> = (0..e).map(|q| u[2][q] - g1[q] * u[0][q] - g2[q] * u[1][q]).collect();
        let eta_t = SurfaceField::from_eval(grid, &flux, Band::Retained);
        let eta_t_bar = poisson_extend(&eta_t).eval();
        Ok(Self {
            e,
            u,
            du,
            d13,
            d23,
            d33,
            dp3,
            p_top,
            eta_t_bar,
        })
    }
}

/// Every sub-block of the forcing on the evaluation grid.
struct Blocks {
    g1: [[Vec<f64>; 3]; 5],
    g2: Vec<f64>,
    g3: [[Vec<f64>; 3]; 4],
    g4: Vec<f64>,
    g5: Vec<f64>,
}

fn eval_blocks(state: &FlowState, pack: &GeometryPack, geom: &SurfaceGeometry, physics: &Physics) -> Result<Blocks> {
    let grid = state.grid();
    let model = &physics.model;
    let c0 = model.c0();
    let pw = Pointwise::new(state, geom)?;
    let e = pw.e;
    let nz = grid.nz();
    let len = e * nz;
    let (a, b, k, fo) = (pack.a_eval(), pack.b_eval(), pack.k_eval(), pack.first_order_eval());
    let bt = pack.b_tilde_nodes();

    let mut g1: [[Vec<f64>; 3]; 5] = Default::default();
    for blk in g1.iter_mut() {
        *blk = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    }
    let mut g2 = vec![0.0; len];
    for q in 0..len {
        let (a, b, k) = (a[q], b[q], k[q]);
        let ak = a * k;
        let bk = b * k;
        let transport = [pw.u[0][q], pw.u[1][q], -ak * pw.u[0][q] - bk * pw.u[1][q] + k * pw.u[2][q]];
        let metric = k * k * (1.0 + a * a + b * b) - 1.0;
        let stretch = pw.eta_t_bar[q] * bt[q / e] * k;
        let dp3 = pw.dp3[q];
        for i in 0..3 {
            let d = &pw.du[i];
            g1[0][i][q] = match i {
                0 => ak * dp3,
                1 => bk * dp3,
                _ => (1.0 - k) * dp3,
            };
            g1[1][i][q] = -(transport[0] * d[0][q] + transport[1] * d[1][q] + transport[2] * d[2][q]);
            g1[2][i][q] = metric * pw.d33[i][q] - 2.0 * ak * pw.d13[i][q] - 2.0 * bk * pw.d23[i][q];
            g1[3][i][q] = fo[q] * d[2][q];
            g1[4][i][q] = stretch * d[2][q];
        }
        g2[q] = ak * pw.du[0][2][q] + bk * pw.du[1][2][q] + (1.0 - k) * pw.du[2][2][q];
    }

    // Surface blocks use the top plane (index < e) of the bulk arrays.
    let c = state.c(c0);
    let cv = c.eval();
    let etav = state.eta.eval();
    let ct = state.ctilde.eval();
    let lap_eta = state.eta.laplacian().eval();
    let dc1 = c.deriv(1, 1)?.eval();
    let dc2 = c.deriv(2, 1)?.eval();
    let lap_c = c.laplacian().eval();
    let lap_gamma_c = laplace_gamma(&c, geom)?.eval();
    let grad_gamma_c = geom.tangential_gradient_eval(&dc1, &dc2);
    let [h1, h2] = geom.grad_eta_eval();
    let nu = geom.nu_eval();
    let q_area = geom.area_eval();
    let curv = geom.curvature_eval();
    let sigma0 = model.sigma0();
    let sigma0p = model.sigma0_prime();

    let mut g3: [[Vec<f64>; 3]; 4] = Default::default();
    for blk in g3.iter_mut() {
        *blk = [vec![0.0; e], vec![0.0; e], vec![0.0; e]];
    }
    let mut g4 = vec![0.0; e];
    let mut g5 = vec![0.0; e];
    for s in 0..e {
        let (a, b, k) = (a[s], b[s], k[s]);
        let (ak, bk) = (a * k, b * k);
        let d = |i: usize, j: usize| pw.du[i][j][s];
        let pe = pw.p_top[s] - etav[s];
        let shear12 = -d(0, 1) - d(1, 0) + bk * d(0, 2) + ak * d(1, 2);
        let col1 = [pe - 2.0 * (d(0, 0) - ak * d(0, 2)), shear12, -d(2, 0) - k * d(0, 2) + ak * d(2, 2)];
        let col2 = [shear12, pe - 2.0 * (d(1, 1) - bk * d(1, 2)), -d(2, 1) - k * d(1, 2) + bk * d(2, 2)];
        let flat = [
            (k - 1.0) * d(0, 2) - ak * d(2, 2),
            (k - 1.0) * d(1, 2) - bk * d(2, 2),
            2.0 * (k - 1.0) * d(2, 2),
        ];
        let normal = [-h1[s], -h2[s], 1.0];
        let sig = model.sigma(ct[s]);
        let sigp = model.sigma_prime(ct[s]);
        for i in 0..3 {
            g3[0][i][s] = h1[s] * col1[i] + h2[s] * col2[i] + flat[i];
            let e3 = if i == 2 { 1.0 } else { 0.0 };
            g3[1][i][s] = -((sig - sigma0) * lap_eta[s] * e3
                + sig * (curv[s] - lap_eta[s]) * normal[i]
                + sig * lap_eta[s] * (normal[i] - e3));
        }
        let dc = [dc1[s], dc2[s]];
        for i in 0..2 {
            g3[2][i][s] = -((q_area[s] - 1.0) * sigp * dc[i]
                + (sigp - sigma0p) * dc[i]
                + q_area[s] * sigp * (grad_gamma_c[i][s] - dc[i]));
        }
        g3[3][2][s] = sigp * (nu[0][s] * dc1[s] + nu[1][s] * dc2[s]);

        let ut = [pw.u[0][s], pw.u[1][s], pw.u[2][s]];
        g4[s] = -h1[s] * ut[0] - h2[s] * ut[1];

        let w = |i: usize| nu[0][s] * d(i, 0) + nu[1][s] * d(i, 1);
        let div_gamma_u = d(0, 0) - nu[0][s] * w(0) + d(1, 1) - nu[1][s] * w(1) - nu[2][s] * w(2);
        let div_flat = d(0, 0) + d(1, 1);
        g5[s] = -(ut[0] * dc1[s] + ut[1] * dc2[s]) - cv[s] * div_gamma_u + physics.gamma * (lap_gamma_c[s] - lap_c[s])
            - c0 * (div_gamma_u - div_flat);
    }
    Ok(Blocks { g1, g2, g3, g4, g5 })
}

/// Both geometry packs for `eta`, aborting when the flattening map degenerates.
pub fn geometry_for(eta: &SurfaceField) -> Result<(GeometryPack, SurfaceGeometry)> {
    let geom = build_geometry(eta)?;
    let pack = build_geometry_pack(eta)?;
    let min_j = pack.min_j();
    if min_j < J_ABORT {
        return Err(Error::DegenerateMap { min_j });
    }
    if min_j < J_WARN {
        log::warn!("flattening map nearly degenerate: min J = {min_j:.3}");
    }
    Ok((pack, geom))
}

/// G¹ … G⁵ at `state`, given the geometry built from `state.eta`.
pub fn eval_g(state: &FlowState, pack: &GeometryPack, geom: &SurfaceGeometry, physics: &Physics) -> Result<ForcingPack> {
    let grid = state.grid();
    let blk = eval_blocks(state, pack, geom, physics)?;
    let sum = |parts: &[&Vec<f64>]| -> Vec<f64> {
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            for (o, v) in out.iter_mut().zip(p.iter()) {
                *o += v;
            }
        }
        out
    };
    let bulk = |v: &[f64]| BulkField::from_eval(grid, v, Band::Retained);
    let surf = |v: &[f64]| SurfaceField::from_eval(grid, v, Band::Retained);
    let g1 = [0, 1, 2].map(|i| bulk(&sum(&blk.g1.iter().map(|b| &b[i]).collect::<Vec<_>>())));
    let g3 = [0, 1, 2].map(|i| surf(&sum(&blk.g3.iter().map(|b| &b[i]).collect::<Vec<_>>())));
    Ok(ForcingPack {
        g1,
        g2: bulk(&blk.g2),
        g3,
        g4: surf(&blk.g4),
        g5: surf(&blk.g5),
    })
}

/// [`eval_g`] building the geometry itself.
pub fn eval_g_at(state: &FlowState, physics: &Physics) -> Result<ForcingPack> {
    let (pack, geom) = geometry_for(&state.eta)?;
    eval_g(state, &pack, &geom, physics)
}

/// L² norm of every forcing sub-block, labelled.
pub fn forcing_block_norms(state: &FlowState, physics: &Physics) -> Result<Vec<(&'static str, f64)>> {
    let (pack, geom) = geometry_for(&state.eta)?;
    let blk = eval_blocks(state, &pack, &geom, physics)?;
    let grid = state.grid();
    let e = grid.eval_len();
    let w = grid.cheb().weights();
    let cell = grid.area() / e as f64;
    let bulk_norm = |v: &[&Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for comp in v {
            for (iz, plane) in comp.chunks(e).enumerate() {
                s += w[iz] * plane.iter().map(|x| x * x).sum::<f64>();
            }
        }
        (s * cell).sqrt()
    };
    let surf_norm = |v: &[&Vec<f64>]| -> f64 {
        let s: f64 = v.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>()).sum();
        (s * cell).sqrt()
    };
    const G1: [&str; 5] = ["G1.1", "G1.2", "G1.3", "G1.4", "G1.5"];
    const G3: [&str; 4] = ["G3.1", "G3.2", "G3.3", "G3.4"];
    let mut out = vec![];
    for (name, b) in G1.iter().zip(&blk.g1) {
        out.push((*name, bulk_norm(&b.iter().collect::<Vec<_>>())));
    }
    out.push(("G2", bulk_norm(&[&blk.g2])));
    for (name, b) in G3.iter().zip(&blk.g3) {
        out.push((*name, surf_norm(&b.iter().collect::<Vec<_>>())));
    }
    out.push(("G4", surf_norm(&[&blk.g4])));
    out.push(("G5", surf_norm(&[&blk.g5])));
    Ok(out)
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit Euler for the linear part, explicit forcing.
    #[default]
    Imex1,
    /// Second-order backward differences with extrapolated forcing.
    ImexBdf2,
}

/// One IMEX step driver holding the factorization cache and, for the
/// two-level scheme, the previous level.
pub struct Stepper {
    physics: Physics,
    solver: LinearSolver,
    scheme: Scheme,
    corrector: bool,
    previous: Option<(FlowState, ForcingPack)>,
}

impl std::fmt::Debug for Stepper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stepper")
            .field("scheme", &self.scheme)
            .field("corrector", &self.corrector)
            .finish()
    }
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, physics: Physics, scheme: Scheme) -> Self {
        let solver = LinearSolver::new(grid, physics.linear_params());
        Self {
            physics,
            solver,
            scheme,
            corrector: false,
            previous: None,
        }
    }

    /// Re-evaluates the forcing at the predicted state and repeats the solve.
    pub fn with_corrector(mut self, on: bool) -> Self {
        self.corrector = on;
        self
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn solver(&self) -> &LinearSolver {
        &self.solver
    }

    /// Forgets the previous level (the next two-level step starts with Euler).
    pub fn reset_history(&mut self) {
        self.previous = None;
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// The level before the last step, kept by the two-level scheme.
    pub fn previous_state(&self) -> Option<&FlowState> {
        self.previous.as_ref().map(|p| &p.0)
    }

    /// Restores the previous level after a restart; its forcing is
    /// recomputed, so the continuation matches an uninterrupted run.
    pub fn set_previous(&mut self, prev: Option<FlowState>) -> Result<()> {
        self.previous = match prev {
            Some(s) => {
                let f = eval_g_at(&s, &self.physics)?;
                Some((s, f))
            }
            None => None,
        };
        Ok(())
    }

    pub fn step(&mut self, state: &FlowState, dt: f64) -> Result<FlowState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let forcing = eval_g_at(state, &self.physics)?;
        let next = match (self.scheme, self.previous.take()) {
            (Scheme::ImexBdf2, Some((prev, prev_forcing))) => {
                let tau = 2.0 * dt / 3.0;
                let extrapolated = forcing.combine(2.0, &prev_forcing, -1.0);
                let rhs = self.rhs_two_level(state, &prev, &extrapolated, tau);
                self.finish(self.solver.step_linear(tau, &rhs)?, state.t + dt)
            }
            _ => {
                let predicted = self.euler(state, &forcing, dt)?;
                if self.corrector {
                    let f2 = eval_g_at(&predicted, &self.physics)?;
                    self.euler(state, &f2, dt)?
                } else {
                    predicted
                }
            }
        };
        if self.scheme == Scheme::ImexBdf2 {
            self.previous = Some((state.clone(), forcing));
        }
        let min_c = next.ctilde.eval().into_iter().fold(f64::INFINITY, f64::min);
        if min_c <= 0.0 {
            log::warn!("surfactant concentration became non-positive (min {min_c:.3e}) at t = {}", next.t);
        }
        Ok(next)
    }

    fn euler(&self, state: &FlowState, forcing: &ForcingPack, dt: f64) -> Result<FlowState> {
        let c0 = self.physics.model.c0();
        let c = state.c(c0);
        let axpy_b = |x: &BulkField, y: &BulkField| {
            let mut z = x.clone();
            z.axpy(dt, y);
            z
        };
        let axpy_s = |x: &SurfaceField, y: &SurfaceField| {
            let mut z = x.clone();
            z.axpy(dt, y);
            z
        };
        let rhs = LinearRhs {
            momentum: [0, 1, 2].map(|i| axpy_b(&state.u[i], &forcing.g1[i])),
            continuity: forcing.g2.clone(),
            top: forcing.g3.clone(),
            kinematic: axpy_s(&state.eta, &forcing.g4),
            surfactant: axpy_s(&c, &forcing.g5),
        };
        Ok(self.finish(self.solver.step_linear(dt, &rhs)?, state.t + dt))
    }

    fn rhs_two_level(&self, state: &FlowState, prev: &FlowState, forcing: &ForcingPack, tau: f64) -> LinearRhs {
        let c0 = self.physics.model.c0();
        let combo_b = |x: &BulkField, y: &BulkField, g: &BulkField| {
            let mut z = x.scaled(4.0 / 3.0);
            z.axpy(-1.0 / 3.0, y);
            z.axpy(tau, g);
            z
        };
        let combo_s = |x: &SurfaceField, y: &SurfaceField, g: &SurfaceField| {
            let mut z = x.scaled(4.0 / 3.0);
            z.axpy(-1.0 / 3.0, y);
            z.axpy(tau, g);
            z
        };
        LinearRhs {
            momentum: [0, 1, 2].map(|i| combo_b(&state.u[i], &prev.u[i], &forcing.g1[i])),
            continuity: forcing.g2.clone(),
            top: forcing.g3.clone(),
            kinematic: combo_s(&state.eta, &prev.eta, &forcing.g4),
            surfactant: combo_s(&state.c(c0), &prev.c(c0), &forcing.g5),
        }
    }

    fn finish(&self, fields: LinearFields, t: f64) -> FlowState {
        let LinearFields { u, p, eta, c } = fields;
        let mut ctilde = c;
        ctilde.coeffs_mut()[0] += self.physics.model.c0();
        FlowState { u, p, eta, ctilde, t }
    }
}

/// Single implicit-Euler IMEX step.
pub fn step(state: &FlowState, dt: f64, physics: &Physics) -> Result<FlowState> {
    Stepper::new(state.grid(), physics.clone(), Scheme::Imex1).step(state, dt)
}

/// How the initial velocity is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialVelocity {
    #[default]
    Zero,
    StokesCompatible,
}

/// Initial state together with the physics it fixes (c₀ comes from the data).
#[derive(Clone, Debug)]
pub struct InitialData {
    pub state: FlowState,
    pub physics: Physics,
    /// Fixed-point iterations spent on the compatible velocity (0 if unused).
    pub iterations: usize,
}

/// Builds (u₀, p₀, η₀, c̃₀): η₀ loses its mean, c₀ is fixed by the mass of
/// c̃₀ on the initial surface, u₀ is zero or solves the compatibility
/// conditions, and p₀ comes from one stress-Stokes solve.
pub fn make_initial_data(
    eta0: &SurfaceField,
    ctilde0: &SurfaceField,
    law: TensionLaw,
    gamma: f64,
    velocity: InitialVelocity,
) -> Result<InitialData> {
    let grid = eta0.grid().clone();
    let mut eta = eta0.clone().dealiased();
    eta.coeffs_mut()[0] = C64::default();
    let ctilde = ctilde0.clone().dealiased();
    let min_c = ctilde.eval().into_iter().fold(f64::INFINITY, f64::min);
    if !(min_c > 0.0) {
        return Err(Error::InvalidConcentration { min: min_c });
    }
    let c0 = equilibrium_concentration(&eta, &ctilde)?;
    let model = TensionModel::new(law, c0)?;
    let physics = Physics::new(model, gamma)?;
    let mut state = FlowState {
        u: [BulkField::zeros(&grid), BulkField::zeros(&grid), BulkField::zeros(&grid)],
        p: BulkField::zeros(&grid),
        eta,
        ctilde,
        t: 0.0,
    };
    let (pack, geom) = geometry_for(&state.eta)?;
    let solver = LinearSolver::new(&grid, physics.linear_params());
    let mut iterations = 0;
    if velocity == InitialVelocity::StokesCompatible {
        let target = marangoni_target(&state, &geom, &physics.model)?;
        let mut last_update = f64::INFINITY;
        loop {
            if iterations == COMPAT_MAX_ITER {
                return Err(Error::CompatibilityFailed {
                    iterations,
                    last_update,
                });
            }
            iterations += 1;
            let tangential = tangential_stress_mismatch(&state.u, &pack, &geom, &target);
            let flat = flat_shear(&state.u)?;
            let alpha = [
                surf(&grid, &flat[0]).scaled(-1.0).plus(&tangential[0]),
                surf(&grid, &flat[1]).scaled(-1.0).plus(&tangential[1]),
                SurfaceField::zeros(&grid),
            ];
            let h = divergence_forcing(&state.u, &pack);
            let zero = || BulkField::zeros(&grid);
            let (u, _) = solver.solve_stokes_stress(&[zero(), zero(), zero()], &h, &alpha)?;
            let scale = u.iter().map(|f| f.max_coeff()).fold(1e-300, f64::max);
            last_update = (0..3)
                .map(|i| {
                    let mut d = u[i].clone();
                    d.axpy(-1.0, &state.u[i]);
                    d.max_coeff()
                })
                .fold(0.0, f64::max);
            state.u = u;
            if last_update <= COMPAT_TOL * scale.max(1.0) {
                break;
            }
        }
    }
    state.p = initial_pressure(&state, &pack, &geom, &physics, &solver)?;
    Ok(InitialData {
        state,
        physics,
        iterations,
    })
}

fn surf(grid: &Arc<Grid>, v: &[f64]) -> SurfaceField {
    SurfaceField::from_eval(grid, v, Band::Retained)
}

trait Plus {
    fn plus(self, other: &Self) -> Self;
}

impl Plus for SurfaceField {
    fn plus(mut self, other: &Self) -> Self {
        self.axpy(1.0, other);
        self
    }
}

/// √(1+|∇_*η|²) σ′(c̃) ∇_Γc̃ on the evaluation grid.
fn marangoni_target(state: &FlowState, geom: &SurfaceGeometry, model: &TensionModel) -> Result<[Vec<f64>; 3]> {
    let mut t = geom.grad_gamma_eval(&state.ctilde)?;
    let ct = state.ctilde.eval();
    let q = geom.area_eval();
    for comp in t.iter_mut() {
        for (s, v) in comp.iter_mut().enumerate() {
            *v *= q[s] * model.sigma_prime(ct[s]);
        }
    }
    Ok(t)
}

/// 𝔻_𝒜u 𝓝 on Σ, pointwise.
fn stress_on_surface(u: &[BulkField; 3], pack: &GeometryPack, geom: &SurfaceGeometry) -> [Vec<f64>; 3] {
    let e = pack.grid().eval_len();
    let grads: Vec<[Vec<f64>; 3]> = u.iter().map(|f| pack.cal_a_grad_eval(f)).collect();
    let [h1, h2] = geom.grad_eta_eval();
    let mut out = [vec![0.0; e], vec![0.0; e], vec![0.0; e]];
    for s in 0..e {
        let n = [-h1[s], -h2[s], 1.0];
        for i in 0..3 {
            let mut acc = 0.0;
            for (j, nj) in n.iter().enumerate() {
                // (𝔻_𝒜u)_ij = (∇_𝒜u_j)_i + (∇_𝒜u_i)_j
                acc += (grads[j][i][s] + grads[i][j][s]) * nj;
            }
            out[i][s] = acc;
        }
    }
    out
}

/// Π(𝔻_𝒜u𝓝) − target, projected, horizontal components.
fn tangential_stress_mismatch(
    u: &[BulkField; 3],
    pack: &GeometryPack,
    geom: &SurfaceGeometry,
    target: &[Vec<f64>; 3],
) -> [SurfaceField; 3] {
    let grid = pack.grid();
    let r = compat_surface_residual(u, pack, geom, target);
    [surf(grid, &r[0]), surf(grid, &r[1]), surf(grid, &r[2])]
}

fn compat_surface_residual(
    u: &[BulkField; 3],
    pack: &GeometryPack,
    geom: &SurfaceGeometry,
    target: &[Vec<f64>; 3],
) -> [Vec<f64>; 3] {
    let mut v = stress_on_surface(u, pack, geom);
    let [h1, h2] = geom.grad_eta_eval();
    for s in 0..v[0].len() {
        let n = [-h1[s], -h2[s], 1.0];
        let nn = 1.0 + h1[s] * h1[s] + h2[s] * h2[s];
        let vn = (v[0][s] * n[0] + v[1][s] * n[1] + v[2][s] * n[2]) / nn;
        for i in 0..3 {
            v[i][s] += -vn * n[i] - target[i][s];
        }
    }
    v
}

/// Horizontal components of (𝔻u)e₃ on Σ.
fn flat_shear(u: &[BulkField; 3]) -> Result<[Vec<f64>; 2]> {
    let u3 = u[2].trace_top();
    let mut out: [Vec<f64>; 2] = Default::default();
    for i in 0..2 {
        let mut s = u3.deriv(i + 1, 1)?;
        s.axpy(1.0, &u[i].deriv_vertical(1)?.trace_top());
        out[i] = s.eval();
    }
    Ok(out)
}

/// G²(u) with the geometry of `pack`.
fn divergence_forcing(u: &[BulkField; 3], pack: &GeometryPack) -> BulkField {
    let d3: Vec<Vec<f64>> = u.iter().map(|f| f.deriv_vertical(1).expect("first derivative").eval()).collect();
    let (a, b, k) = (pack.a_eval(), pack.b_eval(), pack.k_eval());
    let v: Vec<f64> = (0..k.len())
        .map(|q| a[q] * k[q] * d3[0][q] + b[q] * k[q] * d3[1][q] + (1.0 - k[q]) * d3[2][q])
        .collect();
    BulkField::from_eval(pack.grid(), &v, Band::Retained)
}

/// Pressure from one stress-Stokes solve whose data are the boundary
/// conditions at the initial state.
fn initial_pressure(
    state: &FlowState,
    pack: &GeometryPack,
    geom: &SurfaceGeometry,
    physics: &Physics,
    solver: &LinearSolver,
) -> Result<BulkField> {
    let grid = state.grid();
    let forcing = eval_g(state, pack, geom, physics)?;
    let flat = flat_shear(&state.u)?;
    let mut normal = state.eta.clone();
    normal.axpy(-physics.model.sigma0(), &state.eta.laplacian());
    normal.axpy(1.0, &forcing.g3[2]);
    let alpha = [surf(grid, &flat[0]).scaled(-1.0), surf(grid, &flat[1]).scaled(-1.0), normal];
    let zero = || BulkField::zeros(grid);
    let (_, p) = solver.solve_stokes_stress(&[zero(), zero(), zero()], &forcing.g2, &alpha)?;
    Ok(p)
}

/// Residual of the compatibility conditions: L²(Σ) norm of the tangential
/// stress balance, plus L²(Ω) norm of div_𝒜u, plus L²(Σ_b) norm of u.
pub fn compatibility_residual(state: &FlowState, physics: &Physics) -> Result<f64> {
    let grid = state.grid();
    let (pack, geom) = geometry_for(&state.eta)?;
    let target = marangoni_target(state, &geom, &physics.model)?;
    let r = compat_surface_residual(&state.u, &pack, &geom, &target);
    let surf_norm = |v: &[f64]| -> f64 {
        let f = surf(grid, v);
        f.sobolev_norm(0.0).powi(2)
    };
    let stress = (surf_norm(&r[0]) + surf_norm(&r[1]) + surf_norm(&r[2])).sqrt();

    let grads: Vec<[Vec<f64>; 3]> = state.u.iter().map(|f| pack.cal_a_grad_eval(f)).collect();
    let div: Vec<f64> = (0..grads[0][0].len()).map(|q| grads[0][0][q] + grads[1][1][q] + grads[2][2][q]).collect();
    let div = BulkField::from_eval(grid, &div, Band::Retained).sobolev_norm(0)?;

    let bottom: f64 = state.u.iter().map(|f| f.trace_bottom().sobolev_norm(0.0).powi(2)).sum::<f64>().sqrt();
    Ok(stress + div + bottom)
}
