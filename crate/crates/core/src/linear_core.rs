//! The constant-coefficient linear part of the perturbed system, solved one
//! horizontal mode at a time.
//!
//! Per mode the unknowns are `û₁, û₂, û₃, p̂` at the `Nz` vertical nodes
//! followed by `η̂` and `ĉ` (4·Nz + 2 in total). Rows follow the same
//! layout: velocity rows hold the momentum equation at interior nodes and
//! the boundary conditions at the end nodes, pressure rows hold continuity.
//!
//! The mean mode needs special rows. Its velocity u₃ is fixed by the bottom
//! condition and continuity below the surface, so continuity at the surface
//! node is traded for the vertical momentum equation at the bottom node
//! (stress problems), or for a pressure gauge (Dirichlet problem). The mean
//! of η is pinned to zero.

use crate::error::{Error, Result};
use crate::spectral::{Band, BulkField, Chebyshev, Grid, SurfaceField, C64};
use crate::tension::TensionModel;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Physical constants entering the linear operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearParams {
    pub gamma: f64,
    pub sigma0: f64,
    pub sigma0_prime: f64,
    pub c0: f64,
}

impl LinearParams {
    pub fn from_model(model: &TensionModel, gamma: f64) -> Self {
        Self {
            gamma,
            sigma0: model.sigma0(),
            sigma0_prime: model.sigma0_prime(),
            c0: model.c0(),
        }
    }
}

/// Which boundary-value problem a mode system discretizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    /// One implicit Euler step of length `tau` for the full coupled system.
    Evolution { tau: f64 },
    /// −Δu + ∇p = f, div u = h, (pI − 𝔻u)e₃ = α on Σ, u = 0 on Σ_b.
    StokesStress,
    /// −Δu + ∇p = f, div u = h, u = φ on Σ, u = 0 on Σ_b; ∫p = 0 on the mean mode.
    StokesDirichlet,
}

impl OperatorKind {
    fn key(&self) -> (u8, u64) {
        match self {
            OperatorKind::Evolution { tau } => (0, tau.to_bits()),
            OperatorKind::StokesStress => (1, 0),
            OperatorKind::StokesDirichlet => (2, 0),
        }
    }
}

/// Horizontal wavevector of one mode and whether it is the mean mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeParams {
    pub k: [f64; 2],
    pub mean: bool,
}

/// Right-hand side of one mode system.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRhs {
    /// Momentum data at every node (only interior nodes, plus the bottom
    /// node of the vertical component on the mean mode, are read).
    pub momentum: [Vec<C64>; 3],
    pub continuity: Vec<C64>,
    /// Stress data (α or G³) or Dirichlet data φ on Σ.
    pub top: [C64; 3],
    pub kinematic: C64,
    pub surfactant: C64,
}

impl ModeRhs {
    pub fn zeros(nz: usize) -> Self {
        Self {
            momentum: [vec![C64::default(); nz], vec![C64::default(); nz], vec![C64::default(); nz]],
            continuity: vec![C64::default(); nz],
            top: [C64::default(); 3],
            kinematic: C64::default(),
            surfactant: C64::default(),
        }
    }
}

/// Solution of one mode system.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSolution {
    pub u: [Vec<C64>; 3],
    pub p: Vec<C64>,
    pub eta: C64,
    pub c: C64,
}

struct Layout {
    nz: usize,
}

impl Layout {
    fn u(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }
    fn p(&self, j: usize) -> usize {
        3 * self.nz + j
    }
    fn eta(&self) -> usize {
        4 * self.nz
    }
    fn c(&self) -> usize {
        4 * self.nz + 1
    }
    fn size(&self) -> usize {
        4 * self.nz + 2
    }
}

/// Dense matrix of one mode system.
pub fn assemble_matrix(kind: OperatorKind, mode: ModeParams, cheb: &Chebyshev, params: &LinearParams) -> DMatrix<C64> {
    let nz = cheb.len();
    let last = nz - 1;
    let lay = Layout { nz };
    let mut m = DMatrix::<C64>::zeros(lay.size(), lay.size());
    let (mass, visc) = match kind {
        OperatorKind::Evolution { tau } => (1.0, tau),
        _ => (0.0, 1.0),
    };
    let [k1, k2] = mode.k;
    let kk = k1 * k1 + k2 * k2;
    let ik = [I * k1, I * k2];

    let momentum_row = |m: &mut DMatrix<C64>, row: usize, i: usize, j: usize| {
        m[(row, lay.u(i, j))] += C64::from(mass + visc * kk);
        for l in 0..nz {
            m[(row, lay.u(i, l))] -= C64::from(visc * cheb.d2(j, l));
        }
        if i < 2 {
            m[(row, lay.p(j))] += visc * ik[i];
        } else {
            for l in 0..nz {
                m[(row, lay.p(l))] += C64::from(visc * cheb.d1(j, l));
            }
        }
    };

    for i in 0..3 {
        for j in 1..last {
            momentum_row(&mut m, lay.u(i, j), i, j);
        }
        m[(lay.u(i, last), lay.u(i, last))] = C64::from(1.0);
        let row = lay.u(i, 0);
        match kind {
            OperatorKind::StokesDirichlet => m[(row, lay.u(i, 0))] = C64::from(1.0),
            _ if i < 2 => {
                m[(row, lay.u(2, 0))] -= ik[i];
                for l in 0..nz {
                    m[(row, lay.u(i, l))] -= C64::from(cheb.d1(0, l));
                }
                if let OperatorKind::Evolution { .. } = kind {
                    m[(row, lay.c())] += params.sigma0_prime * ik[i];
                }
            }
            _ => {
                m[(row, lay.p(0))] += C64::from(1.0);
                for l in 0..nz {
                    m[(row, lay.u(2, l))] -= C64::from(2.0 * cheb.d1(0, l));
                }
                if let OperatorKind::Evolution { .. } = kind {
                    m[(row, lay.eta())] -= C64::from(1.0 + params.sigma0 * kk);
                }
            }
        }
    }

    for j in 0..nz {
        let row = lay.p(j);
        m[(row, lay.u(0, j))] = ik[0];
        m[(row, lay.u(1, j))] = ik[1];
        for l in 0..nz {
            m[(row, lay.u(2, l))] += C64::from(cheb.d1(j, l));
        }
    }

    if mode.mean {
        let row = lay.p(0);
        for col in 0..lay.size() {
            m[(row, col)] = C64::default();
        }
        match kind {
            OperatorKind::StokesDirichlet => {
                for (j, w) in cheb.weights().iter().enumerate() {
                    m[(row, lay.p(j))] = C64::from(*w);
                }
                // The top velocity condition becomes a compatibility check;
                // its row removes the highest Chebyshev mode of p.
                let row = lay.u(2, 0);
                for col in 0..lay.size() {
                    m[(row, col)] = C64::default();
                }
                for j in 0..nz {
                    let end = if j == 0 || j == last { 0.5 } else { 1.0 };
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    m[(row, lay.p(j))] = C64::from(sign * end);
                }
            }
            _ => momentum_row(&mut m, row, 2, last),
        }
    }

    match kind {
        OperatorKind::Evolution { tau } => {
            m[(lay.eta(), lay.eta())] = C64::from(1.0);
            if !mode.mean {
                m[(lay.eta(), lay.u(2, 0))] = C64::from(-tau);
            }
            m[(lay.c(), lay.c())] = C64::from(1.0 + tau * params.gamma * kk);
            m[(lay.c(), lay.u(0, 0))] += tau * params.c0 * ik[0];
            m[(lay.c(), lay.u(1, 0))] += tau * params.c0 * ik[1];
        }
        _ => {
            m[(lay.eta(), lay.eta())] = C64::from(1.0);
            m[(lay.c(), lay.c())] = C64::from(1.0);
        }
    }
    m
}

/// Right-hand-side vector matching [`assemble_matrix`]'s row layout.
pub fn assemble_rhs(kind: OperatorKind, mode: ModeParams, rhs: &ModeRhs) -> DVector<C64> {
    let nz = rhs.continuity.len();
    let last = nz - 1;
    let lay = Layout { nz };
    let mut v = DVector::<C64>::zeros(lay.size());
    for i in 0..3 {
        for j in 1..last {
            v[lay.u(i, j)] = rhs.momentum[i][j];
        }
        v[lay.u(i, 0)] = rhs.top[i];
    }
    for j in 0..nz {
        v[lay.p(j)] = rhs.continuity[j];
    }
    if mode.mean {
        match kind {
            OperatorKind::StokesDirichlet => {
                v[lay.p(0)] = C64::default();
                v[lay.u(2, 0)] = C64::default();
            }
            _ => v[lay.p(0)] = rhs.momentum[2][last],
        }
    }
    if let OperatorKind::Evolution { .. } = kind {
        if !mode.mean {
            v[lay.eta()] = rhs.kinematic;
        }
        v[lay.c()] = rhs.surfactant;
    }
    v
}

fn split_solution(x: &DVector<C64>, nz: usize) -> ModeSolution {
    let lay = Layout { nz };
    let seg = |start: usize| (0..nz).map(|j| x[start + j]).collect::<Vec<_>>();
    ModeSolution {
        u: [seg(lay.u(0, 0)), seg(lay.u(1, 0)), seg(lay.u(2, 0))],
        p: seg(lay.p(0)),
        eta: x[lay.eta()],
        c: x[lay.c()],
    }
}

/// Assembled and factorized system for one horizontal mode.
pub struct ModeSystem {
    mode: (i64, i64),
    params: ModeParams,
    kind: OperatorKind,
    nz: usize,
    matrix: DMatrix<C64>,
    lu: nalgebra::linalg::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl std::fmt::Debug for ModeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModeSystem")
            .field("mode", &self.mode)
            .field("kind", &self.kind)
            .field("size", &self.matrix.nrows())
            .finish()
    }
}

impl ModeSystem {
    pub fn mode(&self) -> (i64, i64) {
        self.mode
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn solve(&self, rhs: &ModeRhs) -> ModeSolution {
        let b = assemble_rhs(self.kind, self.params, rhs);
        let x = self.lu.solve(&b).expect("factorization was checked at assembly");
        split_solution(&x, self.nz)
    }

    /// One-step propagator on (u, p, η, c) for zero forcing: column `j` is
    /// the solution started from unit vector `j` in the state slots.
    pub fn propagator(&self) -> DMatrix<C64> {
        let n = self.matrix.nrows();
        let lay = Layout { nz: self.nz };
        let mut b = DMatrix::<C64>::zeros(n, n);
        for i in 0..3 {
            for j in 1..self.nz - 1 {
                b[(lay.u(i, j), lay.u(i, j))] = C64::from(1.0);
            }
        }
        if self.params.mean {
            b[(lay.p(0), lay.u(2, self.nz - 1))] = C64::from(1.0);
        } else {
            b[(lay.eta(), lay.eta())] = C64::from(1.0);
        }
        b[(lay.c(), lay.c())] = C64::from(1.0);
        self.lu.solve(&b).expect("factorization was checked at assembly")
    }
}

/// Builds and factorizes the system for mode `idx` of `grid`.
pub fn assemble_mode(grid: &Grid, idx: usize, kind: OperatorKind, params: &LinearParams) -> Result<ModeSystem> {
    if let OperatorKind::Evolution { tau } = kind {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
    }
    let mode = grid.mode(idx / grid.n2(), idx % grid.n2());
    let mp = ModeParams {
        k: grid.wavevector(idx),
        mean: idx == 0,
    };
    let matrix = assemble_matrix(kind, mp, grid.cheb(), params);
    let lu = matrix.clone().lu();
    if !lu.is_invertible() || !lu_is_sound(&lu) {
        return Err(Error::SingularMode(mode.0, mode.1));
    }
    Ok(ModeSystem {
        mode,
        params: mp,
        kind,
        nz: grid.nz(),
        matrix,
        lu,
    })
}

fn lu_is_sound(lu: &nalgebra::linalg::LU<C64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    min.is_finite() && min > 1e-13 * max
}

/// Spectral representation of the linear unknowns.
#[derive(Clone, Debug)]
pub struct LinearFields {
    pub u: [BulkField; 3],
    pub p: BulkField,
    pub eta: SurfaceField,
    pub c: SurfaceField,
}

impl LinearFields {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            u: [BulkField::zeros(grid), BulkField::zeros(grid), BulkField::zeros(grid)],
            p: BulkField::zeros(grid),
            eta: SurfaceField::zeros(grid),
            c: SurfaceField::zeros(grid),
        }
    }
}

/// Whole-grid right-hand side, in the same slots as [`ModeRhs`].
#[derive(Clone, Debug)]
pub struct LinearRhs {
    pub momentum: [BulkField; 3],
    pub continuity: BulkField,
    pub top: [SurfaceField; 3],
    pub kinematic: SurfaceField,
    pub surfactant: SurfaceField,
}

impl LinearRhs {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            momentum: [BulkField::zeros(grid), BulkField::zeros(grid), BulkField::zeros(grid)],
            continuity: BulkField::zeros(grid),
            top: [SurfaceField::zeros(grid), SurfaceField::zeros(grid), SurfaceField::zeros(grid)],
            kinematic: SurfaceField::zeros(grid),
            surfactant: SurfaceField::zeros(grid),
        }
    }

    fn mode(&self, idx: usize) -> ModeRhs {
        ModeRhs {
            momentum: [
                self.momentum[0].profile(idx),
                self.momentum[1].profile(idx),
                self.momentum[2].profile(idx),
            ],
            continuity: self.continuity.profile(idx),
            top: [self.top[0].coeffs()[idx], self.top[1].coeffs()[idx], self.top[2].coeffs()[idx]],
            kinematic: self.kinematic.coeffs()[idx],
            surfactant: self.surfactant.coeffs()[idx],
        }
    }
}

type CacheKey = (usize, u8, u64);

/// Per-mode solver over the retained band with cached factorizations.
pub struct LinearSolver {
    grid: Arc<Grid>,
    params: LinearParams,
    cache: RwLock<HashMap<CacheKey, Arc<ModeSystem>>>,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver").field("params", &self.params).finish()
    }
}

impl LinearSolver {
    pub fn new(grid: &Arc<Grid>, params: LinearParams) -> Self {
        Self {
            grid: grid.clone(),
            params,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &LinearParams {
        &self.params
    }

    /// Cached system for mode `idx`.
    pub fn system(&self, idx: usize, kind: OperatorKind) -> Result<Arc<ModeSystem>> {
        let (tag, bits) = kind.key();
        let key = (idx, tag, bits);
        if let Some(s) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let sys = Arc::new(assemble_mode(&self.grid, idx, kind, &self.params)?);
        self.cache.write().expect("cache lock").insert(key, sys.clone());
        Ok(sys)
    }

    /// Drops every cached factorization.
    pub fn clear_cache(&self) {
        self.cache.write().expect("cache lock").clear();
    }

    /// Solves `kind` for every retained mode; Hermitian symmetry is imposed
    /// by solving half the modes and conjugating.
    pub fn solve(&self, kind: OperatorKind, rhs: &LinearRhs) -> Result<LinearFields> {
        let grid = &self.grid;
        let modes = grid.half_plane_modes();
        let solutions: Vec<(usize, ModeSolution)> = modes
            .par_iter()
            .map(|&idx| {
                let sys = self.system(idx, kind)?;
                Ok((idx, sys.solve(&rhs.mode(idx))))
            })
            .collect::<Result<_>>()?;
        let mut out = LinearFields::zeros(grid);
        for (idx, sol) in solutions {
            let conj = grid.conjugate_index(idx);
            for (field, prof) in out.u.iter_mut().zip(&sol.u) {
                field.set_profile(idx, prof);
            }
            out.p.set_profile(idx, &sol.p);
            out.eta.coeffs_mut()[idx] = sol.eta;
            out.c.coeffs_mut()[idx] = sol.c;
            if idx == 0 {
                for field in out.u.iter_mut().chain(std::iter::once(&mut out.p)) {
                    let prof: Vec<C64> = field.profile(0).iter().map(|v| C64::from(v.re)).collect();
                    field.set_profile(0, &prof);
                }
                out.eta.coeffs_mut()[0] = C64::from(sol.eta.re);
                out.c.coeffs_mut()[0] = C64::from(sol.c.re);
            } else {
                let cj = |v: &[C64]| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
                for (field, prof) in out.u.iter_mut().zip(&sol.u) {
                    field.set_profile(conj, &cj(prof));
                }
                out.p.set_profile(conj, &cj(&sol.p));
                out.eta.coeffs_mut()[conj] = sol.eta.conj();
                out.c.coeffs_mut()[conj] = sol.c.conj();
            }
        }
        Ok(out)
    }

    /// One implicit step of length `tau`: `rhs` already holds
    /// `state + tau·G` in the evolution slots and G², G³ in the others.
    pub fn step_linear(&self, tau: f64, rhs: &LinearRhs) -> Result<LinearFields> {
        self.solve(OperatorKind::Evolution { tau }, rhs)
    }

    /// Stationary Stokes problem with stress data on Σ.
    pub fn solve_stokes_stress(&self, f: &[BulkField; 3], h: &BulkField, alpha: &[SurfaceField; 3]) -> Result<(
        [BulkField; 3],
        BulkField,
    )> {
        let rhs = LinearRhs {
            momentum: f.clone(),
            continuity: h.clone(),
            top: alpha.clone(),
            ..LinearRhs::zeros(&self.grid)
        };
        let sol = self.solve(OperatorKind::StokesStress, &rhs)?;
        Ok((sol.u, sol.p))
    }

    /// Stationary Stokes problem with velocity `phi` on Σ and zero velocity
    /// on Σ_b; the pressure has zero mean.
    pub fn solve_stokes_dirichlet(&self, f: &[BulkField; 3], h: &BulkField, phi: &[SurfaceField; 3]) -> Result<(
        [BulkField; 3],
        BulkField,
    )> {
        let cheb = self.grid.cheb();
        let flux: f64 = cheb.integrate(&h.profile(0).iter().map(|v| v.re).collect::<Vec<_>>());
        let top = phi[2].coeffs()[0].re;
        let scale = 1.0f64.max(top.abs()).max(h.max_coeff());
        if (flux - top).abs() > 1e-9 * scale {
            return Err(Error::IncompatibleData(format!(
                "mean flux {flux:.6e} through the layer differs from the prescribed surface velocity {top:.6e}"
            )));
        }
        let rhs = LinearRhs {
            momentum: f.clone(),
            continuity: h.clone(),
            top: phi.clone(),
            ..LinearRhs::zeros(&self.grid)
        };
        let sol = self.solve(OperatorKind::StokesDirichlet, &rhs)?;
        Ok((sol.u, sol.p))
    }
}

/// Projects every field of `rhs` onto the retained band.
pub fn dealias_rhs(rhs: LinearRhs) -> LinearRhs {
    let LinearRhs {
        momentum,
        continuity,
        top,
        kinematic,
        surfactant,
    } = rhs;
    LinearRhs {
        momentum: momentum.map(|f| f.dealiased()),
        continuity: continuity.dealiased(),
        top: top.map(|f| f.dealiased()),
        kinematic: kinematic.dealiased(),
        surfactant: surfactant.dealiased(),
    }
}

/// The quadratic energy the linear step dissipates:
/// ∫_Ω|u|²/2 + ∫_Σ |η|²/2 + σ₀|∇_*η|²/2 + (−σ₀′/2c₀)|c|².
pub fn linear_energy(fields: &LinearFields, params: &LinearParams) -> f64 {
    let grid = fields.eta.grid();
    let plen = grid.plane_len();
    let w = grid.cheb().weights();
    let area = grid.area();
    let mut bulk = 0.0;
    for u in &fields.u {
        for (iz, wz) in w.iter().enumerate() {
            bulk += wz * u.plane(iz).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    let mut surf = 0.0;
    for idx in 0..plen {
        if !grid.in_band(idx, Band::Full) {
            continue;
        }
        let k = grid.wavevector(idx);
        let kk = k[0] * k[0] + k[1] * k[1];
        surf += (1.0 + params.sigma0 * kk) * fields.eta.coeffs()[idx].norm_sqr()
            - params.sigma0_prime / params.c0 * fields.c.coeffs()[idx].norm_sqr();
    }
    0.5 * area * (bulk + surf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    fn params() -> LinearParams {
        LinearParams {
            gamma: 1.0,
            sigma0: 0.75,
            sigma0_prime: -0.25,
            c0: 1.0,
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 10)).unwrap();
        let solver = LinearSolver::new(&g, params());
        let out = solver.step_linear(1e-2, &LinearRhs::zeros(&g)).unwrap();
        assert_eq!(out.u[2].max_coeff(), 0.0);
        assert_eq!(out.p.max_coeff(), 0.0);
        assert_eq!(out.eta.max_coeff(), 0.0);
        let (u, p) = solver
            .solve_stokes_dirichlet(
                &[BulkField::zeros(&g), BulkField::zeros(&g), BulkField::zeros(&g)],
                &BulkField::zeros(&g),
                &[SurfaceField::zeros(&g), SurfaceField::zeros(&g), SurfaceField::zeros(&g)],
            )
            .unwrap();
        assert_eq!(u[0].max_coeff() + p.max_coeff(), 0.0);
    }

    #[test]
    fn nonpositive_step_is_rejected() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 10)).unwrap();
        assert!(assemble_mode(&g, 1, OperatorKind::Evolution { tau: 0.0 }, &params()).is_err());
    }

    #[test]
    fn constant_normal_stress_gives_hydrostatic_pressure() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 12)).unwrap();
        let solver = LinearSolver::new(&g, params());
        let zero = || BulkField::zeros(&g);
        let alpha = [SurfaceField::zeros(&g), SurfaceField::zeros(&g), SurfaceField::constant(&g, 1.0)];
        let (u, p) = solver.solve_stokes_stress(&[zero(), zero(), zero()], &zero(), &alpha).unwrap();
        for iz in 0..12 {
            assert!((p.plane(iz)[0].re - 1.0).abs() < 1e-12);
        }
        assert!(u.iter().all(|f| f.max_coeff() < 1e-12));
    }

    #[test]
    fn dirichlet_flux_mismatch_is_rejected() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 12)).unwrap();
        let solver = LinearSolver::new(&g, params());
        let zero = || BulkField::zeros(&g);
        let phi = [SurfaceField::zeros(&g), SurfaceField::zeros(&g), SurfaceField::constant(&g, 0.3)];
        assert!(matches!(
            solver.solve_stokes_dirichlet(&[zero(), zero(), zero()], &zero(), &phi),
            Err(Error::IncompatibleData(_))
        ));
    }
}
