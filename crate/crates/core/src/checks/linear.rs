//! Manufactured solutions and spectral checks for the constant-coefficient
//! solver.

use crate::error::Result;
use crate::linear_core::{
    assemble_matrix, assemble_rhs, linear_energy, LinearFields, LinearParams, LinearRhs, LinearSolver, ModeParams,
    ModeRhs, OperatorKind,
};
use crate::spectral::{BulkField, Chebyshev, Grid, SurfaceField, C64};
use nalgebra::DVector;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Linear parameters used by the manufactured-solution checks.
pub fn mms_params() -> LinearParams {
    LinearParams {
        gamma: 0.5,
        sigma0: 0.75,
        sigma0_prime: -0.25,
        c0: 1.0,
    }
}

/// Smooth single-mode profile vanishing at the bottom, with its first and
/// second derivatives.
pub struct Profile {
    a: f64,
    amp: C64,
    b: f64,
}

impl Profile {
    pub fn v(&self, z: f64) -> C64 {
        self.amp * (z + self.b) * (self.a * z).exp()
    }
    pub fn d(&self, z: f64) -> C64 {
        self.amp * (1.0 + self.a * (z + self.b)) * (self.a * z).exp()
    }
    pub fn dd(&self, z: f64) -> C64 {
        self.amp * (2.0 * self.a + self.a * self.a * (z + self.b)) * (self.a * z).exp()
    }
}

pub struct Exact {
    pub u: [Profile; 3],
    p: [C64; 2],
    eta: C64,
    c: C64,
}

impl Exact {
    pub fn new(b: f64) -> Self {
        Self {
            u: [
                Profile { a: 0.7, amp: C64::new(0.4, 0.2), b },
                Profile { a: -0.3, amp: C64::new(-0.1, 0.5), b },
                Profile { a: 1.1, amp: C64::new(0.3, -0.6), b },
            ],
            p: [C64::new(0.8, 0.1), C64::new(-0.2, 0.4)],
            eta: C64::new(0.05, -0.02),
            c: C64::new(-0.03, 0.04),
        }
    }
    pub fn p(&self, z: f64) -> C64 {
        self.p[0] * (1.3 * z).cos() + self.p[1] * z
    }
    fn dp(&self, z: f64) -> C64 {
        -self.p[0] * 1.3 * (1.3 * z).sin() + self.p[1]
    }
}

/// Stationary residual data for `exact`: momentum, continuity and top data.
pub fn stokes_data(kind: OperatorKind, mode: ModeParams, cheb: &Chebyshev, ex: &Exact) -> ModeRhs {
    let nz = cheb.len();
    let [k1, k2] = mode.k;
    let kk = k1 * k1 + k2 * k2;
    let ik = [I * k1, I * k2];
    let mut rhs = ModeRhs::zeros(nz);
    for (j, &z) in cheb.nodes().iter().enumerate() {
        for i in 0..3 {
            let grad_p = if i < 2 { ik[i] * ex.p(z) } else { ex.dp(z) };
            rhs.momentum[i][j] = ex.u[i].v(z) * kk - ex.u[i].dd(z) + grad_p;
        }
        rhs.continuity[j] = ik[0] * ex.u[0].v(z) + ik[1] * ex.u[1].v(z) + ex.u[2].d(z);
    }
    match kind {
        OperatorKind::StokesDirichlet => {
            for i in 0..3 {
                rhs.top[i] = ex.u[i].v(0.0);
            }
        }
        _ => {
            for i in 0..2 {
                rhs.top[i] = -ik[i] * ex.u[2].v(0.0) - ex.u[i].d(0.0);
            }
            rhs.top[2] = ex.p(0.0) - 2.0 * ex.u[2].d(0.0);
        }
    }
    rhs
}

pub fn solve_mode(kind: OperatorKind, mode: ModeParams, cheb: &Chebyshev, rhs: &ModeRhs) -> DVector<C64> {
    let m = assemble_matrix(kind, mode, cheb, &mms_params());
    let b = assemble_rhs(kind, mode, rhs);
    m.lu().solve(&b).unwrap()
}

pub fn velocity_error(x: &DVector<C64>, cheb: &Chebyshev, ex: &Exact) -> f64 {
    let nz = cheb.len();
    let mut err = 0.0f64;
    for (j, &z) in cheb.nodes().iter().enumerate() {
        for i in 0..3 {
            err = err.max((x[i * nz + j] - ex.u[i].v(z)).norm());
        }
    }
    err
}

pub fn pressure_error(x: &DVector<C64>, cheb: &Chebyshev, ex: &Exact, shift: C64) -> f64 {
    let nz = cheb.len();
    cheb.nodes()
        .iter()
        .enumerate()
        .map(|(j, &z)| (x[3 * nz + j] - ex.p(z) - shift).norm())
        .fold(0.0, f64::max)
}

/// Evolution data for the decaying solution e^{-t}·exact, forcing taken
/// at the old time level.
fn evolution_rhs(mode: ModeParams, cheb: &Chebyshev, ex: &Exact, t: f64, tau: f64, state: &DVector<C64>) -> ModeRhs {
    let nz = cheb.len();
    let p = mms_params();
    let [k1, k2] = mode.k;
    let kk = k1 * k1 + k2 * k2;
    let ik = [I * k1, I * k2];
    let s = (-t).exp();
    let mut rhs = stokes_data(OperatorKind::StokesStress, mode, cheb, ex);
    for (j, &z) in cheb.nodes().iter().enumerate() {
        for i in 0..3 {
            let g1 = rhs.momentum[i][j] - ex.u[i].v(z);
            rhs.momentum[i][j] = state[i * nz + j] + tau * s * g1;
        }
        rhs.continuity[j] *= s;
    }
    for i in 0..2 {
        rhs.top[i] = s * (rhs.top[i] + p.sigma0_prime * ik[i] * ex.c);
    }
    rhs.top[2] = s * (rhs.top[2] - (1.0 + p.sigma0 * kk) * ex.eta);
    let g4 = s * (-ex.eta - ex.u[2].v(0.0));
    let g5 = s * ((-1.0 + p.gamma * kk) * ex.c + p.c0 * (ik[0] * ex.u[0].v(0.0) + ik[1] * ex.u[1].v(0.0)));
    rhs.kinematic = state[4 * nz] + tau * g4;
    rhs.surfactant = state[4 * nz + 1] + tau * g5;
    rhs
}

pub fn evolution_error(dt: f64) -> f64 {
    let b = 1.0;
    let ex = Exact::new(b);
    let mode = ModeParams { k: [2.0, 1.0], mean: false };
    let cheb = Chebyshev::new(16, b);
    let nz = cheb.len();
    let kind = OperatorKind::Evolution { tau: dt };
    let lu = assemble_matrix(kind, mode, &cheb, &mms_params()).lu();
    let mut x = DVector::<C64>::zeros(4 * nz + 2);
    for (j, &z) in cheb.nodes().iter().enumerate() {
        for i in 0..3 {
            x[i * nz + j] = ex.u[i].v(z);
        }
    }
    x[4 * nz] = ex.eta;
    x[4 * nz + 1] = ex.c;
    let steps = (0.5 / dt).round() as usize;
    for n in 0..steps {
        let rhs = evolution_rhs(mode, &cheb, &ex, n as f64 * dt, dt, &x);
        x = lu.solve(&assemble_rhs(kind, mode, &rhs)).unwrap();
    }
    let s = (-0.5f64).exp();
    let mut err = (x[4 * nz] - s * ex.eta).norm().max((x[4 * nz + 1] - s * ex.c).norm());
    for (j, &z) in cheb.nodes().iter().enumerate() {
        for i in 0..3 {
            err = err.max((x[i * nz + j] - s * ex.u[i].v(z)).norm());
        }
    }
    err
}


/// Max velocity/pressure error of the stress Stokes solve against the
/// manufactured solution, over three modes (mean included), per `nz`.
pub fn stokes_mms_errors(nzs: &[usize]) -> Vec<f64> {
    let b = 1.0;
    let ex = Exact::new(b);
    let modes = [
        ModeParams { k: [2.0, -1.0], mean: false },
        ModeParams { k: [0.0, 3.5], mean: false },
        ModeParams { k: [0.0, 0.0], mean: true },
    ];
    nzs.iter()
        .map(|&nz| {
            let cheb = Chebyshev::new(nz, b);
            modes
                .iter()
                .map(|&mode| {
                    let rhs = stokes_data(OperatorKind::StokesStress, mode, &cheb, &ex);
                    let x = solve_mode(OperatorKind::StokesStress, mode, &cheb, &rhs);
                    velocity_error(&x, &cheb, &ex).max(pressure_error(&x, &cheb, &ex, C64::default()))
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Spectral radius of the one-step propagator of the first `count`
/// half-plane modes, maximised over `dts`.
pub fn propagator_radii(grid: &Arc<Grid>, params: LinearParams, count: usize, dts: &[f64]) -> Result<Vec<([i64; 2], f64)>> {
    let solver = LinearSolver::new(grid, params);
    let mut out = vec![];
    for idx in grid.half_plane_modes().into_iter().take(count) {
        let mut worst = 0.0f64;
        for &dt in dts {
            let sys = solver.system(idx, OperatorKind::Evolution { tau: dt })?;
            let eig = sys.propagator().schur().eigenvalues().expect("complex Schur form is triangular");
            worst = worst.max(eig.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let (s1, s2) = grid.mode(idx / grid.n2(), idx % grid.n2());
        out.push(([s1, s2], worst));
    }
    Ok(out)
}

/// Quadratic energy of the unforced linear system along `steps` implicit
/// steps of size `dt` from a fixed smooth state.
pub fn linear_energy_history(grid: &Arc<Grid>, params: LinearParams, steps: usize, dt: f64) -> Result<Vec<f64>> {
    let solver = LinearSolver::new(grid, params);
    let eta = SurfaceField::from_fn(grid, |x, y| 0.02 * (x.sin() + (2.0 * y).cos() + (x + y).sin())).dealiased();
    let c = SurfaceField::from_fn(grid, |x, y| 0.01 * (x - 2.0 * y).cos()).dealiased();
    let u = [
        BulkField::from_fn(grid, |x, _, z| 0.01 * (z + 1.0) * x.cos()).dealiased(),
        BulkField::from_fn(grid, |_, y, z| 0.01 * (z + 1.0) * z * y.sin()).dealiased(),
        BulkField::zeros(grid),
    ];
    let mut state = LinearFields {
        u,
        p: BulkField::zeros(grid),
        eta,
        c,
    };
    let mut rhs = LinearRhs::zeros(grid);
    let mut out = vec![linear_energy(&state, &params)];
    for _ in 0..steps {
        rhs.momentum = state.u.clone();
        rhs.kinematic = state.eta.clone();
        rhs.surfactant = state.c.clone();
        state = solver.step_linear(dt, &rhs)?;
        out.push(linear_energy(&state, &params));
    }
    Ok(out)
}
