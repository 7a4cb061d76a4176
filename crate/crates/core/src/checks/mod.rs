//! Measurements behind the property suites: residuals of the surface
//! identities, the entropy properties, the extension and flattening map,
//! the surfactant transport identity and the quadratic scaling of the
//! forcing. Each returns raw numbers; tolerances belong to the caller.

use crate::dynamics::{forcing_block_norms, FlowState, Physics};
use crate::error::Result;
use crate::geometry::{build_geometry_pack, poisson_extend};
use crate::quad;
use crate::spectral::{Band, BulkField, Grid, SurfaceField};
use crate::surface_ops::{build_geometry, div_gamma, grad_gamma, ibp_residual, laplace_gamma, SurfaceGeometry};
use crate::tension::{TensionLaw, TensionModel};
use nalgebra::Matrix3;

pub mod linear;
use std::sync::Arc;

fn eval_l2(grid: &Grid, values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64 * grid.area()).sqrt()
}

fn eval_integral(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64 * grid.area()
}

/// Zero-mean analytic surface whose Fourier coefficients decay like (3 − √8)^{|n|},
/// scaled so that max|∇_*η| = `slope`.
pub fn analytic_surface(grid: &Arc<Grid>, slope: f64) -> SurfaceField {
    let (l1, l2) = (grid.spec().l1, grid.spec().l2);
    let (k1, k2) = (2.0 * std::f64::consts::PI / l1, 2.0 * std::f64::consts::PI / l2);
    let bump = |s: f64| 1.0 / (3.0 - s.cos());
    let raw = SurfaceField::from_fn(grid, |x, y| bump(k1 * x - 0.3) + 0.6 * bump(k2 * y + 0.2) * (k1 * x).cos());
    let mut raw = raw;
    raw.coeffs_mut()[0] = Default::default();
    let geom = build_geometry_with_no_bound(&raw);
    raw.scaled(slope / geom.max_slope())
}

fn build_geometry_with_no_bound(eta: &SurfaceField) -> SurfaceGeometry {
    crate::surface_ops::build_geometry_with_bound(eta, None).expect("geometry of a finite surface")
}

/// Analytic test function on Σ with geometrically decaying spectrum.
pub fn analytic_function(grid: &Arc<Grid>, shift: f64) -> SurfaceField {
    let (k1, k2) = (
        2.0 * std::f64::consts::PI / grid.spec().l1,
        2.0 * std::f64::consts::PI / grid.spec().l2,
    );
    SurfaceField::from_fn(grid, |x, y| (1.0 + 0.4 * (k2 * y + shift).sin()) / (3.0 - (k1 * x + 2.0 * shift).cos()))
}

/// L² residuals of the pointwise surface identities and the signed
/// integration-by-parts residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResiduals {
    /// div_Γν + H.
    pub div_normal: f64,
    /// ∂_i√(1+|∇_*η|²) + ν_*·∇_*∂_iη, both i.
    pub area_gradient: f64,
    /// ∂_t√(1+|∇_*η|²) − div_*(∂_tη ∇_*η/√…) + ∂_tη H for ∂_tη = `rate`.
    pub area_rate: f64,
    /// ∇_Γf·ν.
    pub normal_gradient: f64,
    /// Scalar integration by parts, i = 1, 2, 3.
    pub ibp: [f64; 3],
    /// ∫ div_Γ X √… + ∫ X·ν H √… for X = (f g, g, f).
    pub ibp_vector: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        let mut m = self.div_normal.max(self.area_gradient).max(self.area_rate).max(self.normal_gradient);
        for v in self.ibp {
            m = m.max(v.abs());
        }
        m.max(self.ibp_vector.abs())
    }
}

pub fn identity_residuals(
    eta: &SurfaceField,
    f: &SurfaceField,
    g: &SurfaceField,
    rate: &SurfaceField,
) -> Result<IdentityResiduals> {
    let grid = eta.grid().clone();
    let geom = build_geometry(eta)?;
    let n = grid.eval_len();
    let nu = geom.nu();
    let h = geom.mean_curvature();
    let nu_eval: Vec<Vec<f64>> = nu.iter().map(|c| c.eval()).collect();
    let h_eval = h.eval();

    let div_nu = div_gamma(&nu, &geom)?.eval();
    let r01: Vec<f64> = (0..n).map(|j| div_nu[j] + h_eval[j]).collect();

    let area = geom.area_element();
    let mut r02 = 0.0f64;
    for i in 1..=2 {
        let lhs = area.deriv(i, 1)?.eval();
        let d1 = eta.deriv(i, 1)?.deriv(1, 1)?.eval();
        let d2 = eta.deriv(i, 1)?.deriv(2, 1)?.eval();
        let res: Vec<f64> = (0..n).map(|j| lhs[j] + nu_eval[0][j] * d1[j] + nu_eval[1][j] * d2[j]).collect();
        r02 = r02.max(eval_l2(&grid, &res));
    }

    // ∂_t of the area element along η + t·rate, by the chain rule.
    let [g1, g2] = geom.grad_eta_eval();
    let rv = rate.eval();
    let r1 = rate.deriv(1, 1)?.eval();
    let r2 = rate.deriv(2, 1)?.eval();
    let sq = geom.area_eval();
    let dt_area: Vec<f64> = (0..n).map(|j| (g1[j] * r1[j] + g2[j] * r2[j]) / sq[j]).collect();
    let flux1 = SurfaceField::from_eval(&grid, &(0..n).map(|j| rv[j] * g1[j] / sq[j]).collect::<Vec<_>>(), Band::Full);
    let flux2 = SurfaceField::from_eval(&grid, &(0..n).map(|j| rv[j] * g2[j] / sq[j]).collect::<Vec<_>>(), Band::Full);
    let div = flux1.deriv(1, 1)?.eval();
    let div2 = flux2.deriv(2, 1)?.eval();
    let r03: Vec<f64> = (0..n).map(|j| dt_area[j] - (div[j] + div2[j]) + rv[j] * h_eval[j]).collect();

    let gg = grad_gamma(f, &geom)?;
    let gg_eval: Vec<Vec<f64>> = gg.iter().map(|c| c.eval()).collect();
    let r04: Vec<f64> = (0..n).map(|j| (0..3).map(|i| gg_eval[i][j] * nu_eval[i][j]).sum()).collect();

    let ibp = [ibp_residual(f, g, &geom, 1)?, ibp_residual(f, g, &geom, 2)?, ibp_residual(f, g, &geom, 3)?];

    let fg = SurfaceField::from_eval(
        &grid,
        &f.eval().iter().zip(g.eval()).map(|(a, b)| a * b).collect::<Vec<_>>(),
        Band::Full,
    );
    let x = [fg, g.clone(), f.clone()];
    let dx = div_gamma(&x, &geom)?.eval();
    let xe: Vec<Vec<f64>> = x.iter().map(|c| c.eval()).collect();
    let a = geom.area_element().eval();
    let integrand: Vec<f64> = (0..n)
        .map(|j| {
            let xn: f64 = (0..3).map(|i| xe[i][j] * nu_eval[i][j]).sum();
            (dx[j] + xn * h_eval[j]) * a[j]
        })
        .collect();

    Ok(IdentityResiduals {
        div_normal: eval_l2(&grid, &r01),
        area_gradient: r02,
        area_rate: eval_l2(&grid, &r03),
        normal_gradient: eval_l2(&grid, &r04),
        ibp,
        ibp_vector: eval_integral(&grid, &integrand),
    })
}

/// Worst-case violations of the entropy properties over a sample of the
/// validity window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyResiduals {
    /// Closed form against quadrature of the definition (linear law only,
    /// NaN otherwise).
    pub closed_form: f64,
    /// |ξ_r(r) − σ(r)|.
    pub value_at_minimum: f64,
    /// max(σ(r) − ξ_r(x), 0) over the sample.
    pub below_minimum: f64,
    /// max(−second difference, 0).
    pub concavity: f64,
    /// Sampled points where ξ_r fails to decrease on (0, r) or increase beyond r.
    pub monotonicity_failures: usize,
    /// |ξ_r(x) − xξ_r′(x) − σ(x)| with ξ′ by central differences.
    pub legendre: f64,
}

/// ξ_r(x) = x(σ(r)/r − ∫_r^x σ(z)/z² dz) by adaptive quadrature.
pub fn xi_by_definition(model: &TensionModel, r: f64, x: f64) -> f64 {
    if x == 0.0 {
        return model.sigma(0.0);
    }
    x * (model.sigma(r) / r - quad::integrate(|z| model.sigma(z) / (z * z), r, x, 1e-14))
}

pub fn entropy_residuals(model: &TensionModel, points: usize) -> Result<EntropyResiduals> {
    let r = model.c0();
    let hi = model.upper().min(4.0 * r);
    let xs: Vec<f64> = (1..=points).map(|i| hi * i as f64 / (points as f64 + 1.0)).collect();
    let s_r = model.sigma(r);
    let mut out = EntropyResiduals {
        closed_form: if matches!(model.law(), TensionLaw::Linear { .. }) { 0.0 } else { f64::NAN },
        value_at_minimum: (model.xi(r, r)? - s_r).abs(),
        below_minimum: 0.0,
        concavity: 0.0,
        monotonicity_failures: 0,
        legendre: 0.0,
    };
    let h = 1e-5 * hi;
    let mut prev: Option<(f64, f64)> = None;
    for &x in &xs {
        let xi = model.xi(r, x)?;
        if out.closed_form.is_finite() {
            out.closed_form = out.closed_form.max((xi - xi_by_definition(model, r, x)).abs());
        }
        out.below_minimum = out.below_minimum.max(s_r - xi);
        if let Some((px, pxi)) = prev {
            let ok = if x <= r { xi < pxi } else if px >= r { xi > pxi } else { true };
            if !ok {
                out.monotonicity_failures += 1;
            }
        }
        prev = Some((x, xi));
        if x - h > 0.0 && x + h <= model.upper() {
            let (lo, up) = (model.xi(r, x - h)?, model.xi(r, x + h)?);
            let d1 = (up - lo) / (2.0 * h);
            out.legendre = out.legendre.max((xi - x * d1 - model.sigma(x)).abs());
        }
    }
    for w in xs.windows(3) {
        let second = model.xi(r, w[0])? - 2.0 * model.xi(r, w[1])? + model.xi(r, w[2])?;
        out.concavity = out.concavity.max(-second);
    }
    out.below_minimum = out.below_minimum.max(0.0);
    Ok(out)
}

/// L² norm of Δ(𝒫f) over the strip, measured by collocation.
pub fn harmonicity_residual(f: &SurfaceField) -> Result<f64> {
    let ext = poisson_extend(f);
    let mut lap = ext.deriv_horizontal(1, 2)?;
    lap.axpy(1.0, &ext.deriv_horizontal(2, 2)?);
    lap.axpy(1.0, &ext.deriv_vertical(2)?);
    lap.sobolev_norm(0)
}

/// ‖∇𝒫f‖_{L²(Ω)} / ‖f‖_{H^{1/2}(Σ)}.
pub fn extension_gradient_ratio(f: &SurfaceField) -> Result<f64> {
    let ext = poisson_extend(f);
    let mut total = 0.0;
    for d in [ext.deriv_horizontal(1, 1)?, ext.deriv_horizontal(2, 1)?, ext.deriv_vertical(1)?] {
        total += d.sobolev_norm(0)?.powi(2);
    }
    Ok(total.sqrt() / f.sobolev_norm(0.5))
}

/// Pointwise mismatches of the flattening map against an independent
/// evaluation of ∇Θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapResiduals {
    /// max |J − det ∇Θ|.
    pub determinant: f64,
    /// max |JK − 1|.
    pub jk: f64,
    /// max over entries of |𝒜 − (∇Θ)^{−T}|.
    pub cal_a: f64,
    /// max |Θ₃ + b| on the bottom plane.
    pub bottom: f64,
    /// ‖J − 1‖²_∞ + ‖A‖²_∞ + ‖B‖²_∞.
    pub infinity_bound: f64,
}

pub fn map_residuals(eta: &SurfaceField) -> Result<MapResiduals> {
    let grid = eta.grid().clone();
    let pack = build_geometry_pack(eta)?;
    let depth = grid.spec().b;
    let e = grid.eval_len();
    let nodes = grid.cheb().nodes();
    let bar = poisson_extend(eta).eval();
    let theta3: Vec<f64> = (0..bar.len())
        .map(|p| {
            let z = nodes[p / e];
            z + bar[p] * (1.0 + z / depth)
        })
        .collect();
    let bottom = theta3[(nodes.len() - 1) * e..].iter().map(|v| (v + depth).abs()).fold(0.0, f64::max);
    let th = BulkField::from_eval(&grid, &theta3, Band::Full);
    let d1 = th.deriv_horizontal(1, 1)?.eval();
    let d2 = th.deriv_horizontal(2, 1)?.eval();
    let d3 = th.deriv_vertical(1)?.eval();
    let cal_a: Vec<Vec<f64>> = (0..9).map(|k| pack.cal_a_eval(k / 3 + 1, k % 3 + 1)).collect();
    let (j, kk) = (pack.j_eval(), pack.k_eval());
    let mut out = MapResiduals {
        determinant: 0.0,
        jk: 0.0,
        cal_a: 0.0,
        bottom,
        infinity_bound: pack.infinity_bound(),
    };
    for p in 0..j.len() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, d1[p], d2[p], d3[p]);
        out.determinant = out.determinant.max((j[p] - m.determinant()).abs());
        out.jk = out.jk.max((j[p] * kk[p] - 1.0).abs());
        let inv_t = m.try_inverse().expect("invertible map").transpose();
        for k in 0..9 {
            out.cal_a = out.cal_a.max((cal_a[k][p] - inv_t[(k / 3, k % 3)]).abs());
        }
    }
    Ok(out)
}

/// Which entropy-type functional the transport identity is checked with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportFunctional {
    /// f(z) = z.
    Mass,
    /// f(z) = z²/2.
    Quadratic,
}

impl TransportFunctional {
    fn f(self, z: f64) -> (f64, f64, f64) {
        match self {
            Self::Mass => (z, 1.0, 0.0),
            Self::Quadratic => (0.5 * z * z, z, 1.0),
        }
    }
}

/// Manufactured surface path: η and the horizontal velocity are prescribed,
/// u₃ follows from the kinematic condition.
struct TransportPath {
    grid: Arc<Grid>,
    gamma: f64,
}

impl TransportPath {
    fn eta(&self, t: f64) -> SurfaceField {
        SurfaceField::from_fn(&self.grid, |x, y| 0.05 * (x + t).cos() + 0.025 * (y - 0.7 * t).sin() + 0.01 * (x + y).sin())
    }

    fn eta_t(&self, t: f64) -> SurfaceField {
        SurfaceField::from_fn(&self.grid, |x, y| -0.05 * (x + t).sin() - 0.0175 * (y - 0.7 * t).cos())
    }

    fn velocity(&self, t: f64) -> Result<[SurfaceField; 3]> {
        let u1 = SurfaceField::from_fn(&self.grid, |_, y| 0.1 * (y + t).sin());
        let u2 = SurfaceField::from_fn(&self.grid, |x, _| 0.1 * (x - 0.5 * t).cos());
        let eta = self.eta(t);
        let (e1, e2) = (eta.deriv(1, 1)?.eval(), eta.deriv(2, 1)?.eval());
        let (a, b, r) = (u1.eval(), u2.eval(), self.eta_t(t).eval());
        // ∂_tη = u·𝓝 = u₃ − u₁∂₁η − u₂∂₂η.
        let u3: Vec<f64> = (0..a.len()).map(|j| r[j] + a[j] * e1[j] + b[j] * e2[j]).collect();
        Ok([u1, u2, SurfaceField::from_eval(&self.grid, &u3, Band::Full)])
    }

    /// ∂_tc̃ = −u_*·∇_*c̃ − c̃ div_Γu + γΔ_Γc̃.
    fn rhs(&self, t: f64, c: &SurfaceField) -> Result<SurfaceField> {
        let geom = build_geometry(&self.eta(t))?;
        let u = self.velocity(t)?;
        let div = div_gamma(&u, &geom)?.eval();
        let lap = laplace_gamma(c, &geom)?.eval();
        let (c1, c2) = (c.deriv(1, 1)?.eval(), c.deriv(2, 1)?.eval());
        let (a, b, cv) = (u[0].eval(), u[1].eval(), c.eval());
        let v: Vec<f64> = (0..cv.len())
            .map(|j| -(a[j] * c1[j] + b[j] * c2[j]) - cv[j] * div[j] + self.gamma * lap[j])
            .collect();
        Ok(SurfaceField::from_eval(&self.grid, &v, Band::Full))
    }

    fn functional(&self, t: f64, c: &SurfaceField, which: TransportFunctional) -> Result<f64> {
        let geom = build_geometry(&self.eta(t))?;
        let v: Vec<f64> = c.eval().iter().zip(geom.area_eval()).map(|(z, a)| which.f(*z).0 * a).collect();
        Ok(eval_integral(&self.grid, &v))
    }

    fn production(&self, t: f64, c: &SurfaceField, which: TransportFunctional) -> Result<f64> {
        let geom = build_geometry(&self.eta(t))?;
        let u = self.velocity(t)?;
        let div = div_gamma(&u, &geom)?.eval();
        let gc = geom.grad_gamma_eval(c)?;
        let cv = c.eval();
        let a = geom.area_eval();
        let v: Vec<f64> = (0..cv.len())
            .map(|j| {
                let (f, fp, fpp) = which.f(cv[j]);
                let g2 = gc[0][j].powi(2) + gc[1][j].powi(2) + gc[2][j].powi(2);
                ((f - fp * cv[j]) * div[j] - self.gamma * fpp * g2) * a[j]
            })
            .collect();
        Ok(eval_integral(&self.grid, &v))
    }

    fn rk4(&self, t: f64, c: &SurfaceField, h: f64) -> Result<SurfaceField> {
        let k1 = self.rhs(t, c)?;
        let stage = |k: &SurfaceField, a: f64| {
            let mut s = c.clone();
            s.axpy(a * h, k);
            s
        };
        let k2 = self.rhs(t + 0.5 * h, &stage(&k1, 0.5))?;
        let k3 = self.rhs(t + 0.5 * h, &stage(&k2, 0.5))?;
        let k4 = self.rhs(t + h, &stage(&k3, 1.0))?;
        let mut out = c.clone();
        out.axpy(h / 6.0, &k1);
        out.axpy(h / 3.0, &k2);
        out.axpy(h / 3.0, &k3);
        out.axpy(h / 6.0, &k4);
        Ok(out)
    }
}

/// |centered difference of ∫f(c̃)√… − ∫[(f − f′c̃)div_Γu − γf″|∇_Γc̃|²]√…|
/// at `t0` for each step in `dts`, along a manufactured path with c̃
/// integrated by RK4 at step `dts.min() / 4`.
pub fn transport_residuals(grid: &Arc<Grid>, gamma: f64, which: TransportFunctional, t0: f64, dts: &[f64]) -> Result<Vec<f64>> {
    let path = TransportPath {
        grid: grid.clone(),
        gamma,
    };
    let h = dts.iter().cloned().fold(f64::INFINITY, f64::min) / 4.0;
    let ticks = |t: f64| (t / h).round() as usize;
    let t_max = t0 + dts.iter().cloned().fold(0.0, f64::max);
    let mut c = SurfaceField::from_fn(grid, |x, y| 1.0 + 0.2 * (x - y).cos() + 0.1 * (2.0 * y).sin());
    let mut states = vec![c.clone()];
    for n in 0..ticks(t_max) {
        c = path.rk4(n as f64 * h, &c, h)?;
        states.push(c.clone());
    }
    let centre = path.production(t0, &states[ticks(t0)], which)?;
    dts.iter()
        .map(|&dt| {
            let up = path.functional(t0 + dt, &states[ticks(t0 + dt)], which)?;
            let lo = path.functional(t0 - dt, &states[ticks(t0 - dt)], which)?;
            Ok(((up - lo) / (2.0 * dt) - centre).abs())
        })
        .collect()
}

/// Ratio of each forcing block's norm at amplitude `eps` to its norm at
/// `eps / 2`, for the perturbation `shape` around `c0`.
pub fn forcing_scaling(shape: &FlowState, physics: &Physics, eps: f64) -> Result<Vec<(&'static str, f64)>> {
    let c0 = physics.model.c0();
    let big = forcing_block_norms(&shape.scaled_perturbation(c0, eps), physics)?;
    let small = forcing_block_norms(&shape.scaled_perturbation(c0, eps / 2.0), physics)?;
    Ok(big.iter().zip(small).map(|(a, b)| (a.0, a.1 / b.1)).collect())
}
