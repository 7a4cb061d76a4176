//! Geometry of the free surface x₃ = η(x_*) and the surface calculus pulled
//! back to Σ: normals, mean curvature, ∇_Γ, div_Γ and Δ_Γ.
//!
//! Every rational expression is formed pointwise on the evaluation grid.
//! Results handed back as [`SurfaceField`]s are projected onto the full
//! native band; callers that need the dealiased band project again.

use crate::error::{Error, Result};
use crate::spectral::{Band, Grid, SurfaceField};
use std::sync::Arc;

/// Surfaces steeper than this are rejected outright.
pub const SLOPE_HARD_BOUND: f64 = 1.0;
/// Surfaces steeper than this are accepted with a warning.
pub const SLOPE_WARN: f64 = 0.5;

/// Normals, area element and curvature derived from one η.
#[derive(Clone, Debug)]
pub struct SurfaceGeometry {
    grid: Arc<Grid>,
    eta: SurfaceField,
    grad: [Vec<f64>; 2],
    area: Vec<f64>,
    nu: [Vec<f64>; 3],
    curvature: Vec<f64>,
    max_slope: f64,
}

/// Builds the geometry of `eta`, enforcing [`SLOPE_HARD_BOUND`].
pub fn build_geometry(eta: &SurfaceField) -> Result<SurfaceGeometry> {
    build_geometry_with_bound(eta, Some(SLOPE_HARD_BOUND))
}

/// As [`build_geometry`] with a configurable slope bound (`None` disables it).
pub fn build_geometry_with_bound(eta: &SurfaceField, bound: Option<f64>) -> Result<SurfaceGeometry> {
    let grid = eta.grid().clone();
    let d1 = eta.deriv(1, 1)?;
    let d2 = eta.deriv(2, 1)?;
    let d11 = eta.deriv(1, 2)?;
    let d22 = eta.deriv(2, 2)?;
    let d12 = d1.deriv(2, 1)?;
    let v = grid.planes_to_eval(&[d1.coeffs(), d2.coeffs(), d11.coeffs(), d22.coeffs(), d12.coeffs()]);
    let n = grid.eval_len();
    let (e1, rest) = v.split_at(n);
    let (e2, rest) = rest.split_at(n);
    let (e11, rest) = rest.split_at(n);
    let (e22, e12) = rest.split_at(n);

    let mut area = vec![0.0; n];
    let mut nu = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut curvature = vec![0.0; n];
    let mut max_slope: f64 = 0.0;
    for j in 0..n {
        let (a, b) = (e1[j], e2[j]);
        let q = 1.0 + a * a + b * b;
        let s = q.sqrt();
        max_slope = max_slope.max((a * a + b * b).sqrt());
        area[j] = s;
        nu[0][j] = -a / s;
        nu[1][j] = -b / s;
        nu[2][j] = 1.0 / s;
        // div_*(∇η / √q), expanded so that it is exact pointwise.
        let lap = e11[j] + e22[j];
        let hess = a * a * e11[j] + 2.0 * a * b * e12[j] + b * b * e22[j];
        curvature[j] = (lap * q - hess) / (q * s);
    }
    if let Some(bound) = bound {
        if max_slope >= bound {
            return Err(Error::SlopeTooLarge { max_slope, bound });
        }
    }
    if max_slope >= SLOPE_WARN {
        log::warn!("surface slope {max_slope:.3} is outside the small-slope regime");
    }
    Ok(SurfaceGeometry {
        eta: eta.clone(),
        grad: [e1.to_vec(), e2.to_vec()],
        area,
        nu,
        curvature,
        max_slope,
        grid,
    })
}

impl SurfaceGeometry {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eta(&self) -> &SurfaceField {
        &self.eta
    }

    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    fn field(&self, values: &[f64]) -> SurfaceField {
        SurfaceField::from_eval(&self.grid, values, Band::Full)
    }

    /// ∇_*η.
    pub fn grad_eta(&self) -> [SurfaceField; 2] {
        [self.field(&self.grad[0]), self.field(&self.grad[1])]
    }

    /// √(1 + |∇_*η|²).
    pub fn area_element(&self) -> SurfaceField {
        self.field(&self.area)
    }

    /// Outward unit normal ν.
    pub fn nu(&self) -> [SurfaceField; 3] {
        [self.field(&self.nu[0]), self.field(&self.nu[1]), self.field(&self.nu[2])]
    }

    /// Non-unit normal 𝓝 = (−∇_*η, 1).
    pub fn cal_n(&self) -> [SurfaceField; 3] {
        let [a, b] = self.grad_eta();
        [a.scaled(-1.0), b.scaled(-1.0), SurfaceField::constant(&self.grid, 1.0)]
    }

    /// Mean curvature H = div_*(∇_*η / √(1 + |∇_*η|²)).
    pub fn mean_curvature(&self) -> SurfaceField {
        self.field(&self.curvature)
    }

    /// ∇_*η on the evaluation grid.
    pub fn grad_eta_eval(&self) -> [&[f64]; 2] {
        [&self.grad[0], &self.grad[1]]
    }

    pub fn area_eval(&self) -> &[f64] {
        &self.area
    }

    pub fn nu_eval(&self) -> [&[f64]; 3] {
        [&self.nu[0], &self.nu[1], &self.nu[2]]
    }

    pub fn curvature_eval(&self) -> &[f64] {
        &self.curvature
    }

    /// ∂_{Γ,i} applied pointwise, given ∂₁f and ∂₂f on the evaluation grid.
    pub fn tangential_gradient_eval(&self, df1: &[f64], df2: &[f64]) -> [Vec<f64>; 3] {
        let n = df1.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for j in 0..n {
            let w = self.nu[0][j] * df1[j] + self.nu[1][j] * df2[j];
            out[0][j] = df1[j] - self.nu[0][j] * w;
            out[1][j] = df2[j] - self.nu[1][j] * w;
            out[2][j] = -self.nu[2][j] * w;
        }
        out
    }

    /// ∇_Γf on the evaluation grid.
    pub fn grad_gamma_eval(&self, f: &SurfaceField) -> Result<[Vec<f64>; 3]> {
        let d1 = f.deriv(1, 1)?;
        let d2 = f.deriv(2, 1)?;
        let v = self.grid.planes_to_eval(&[d1.coeffs(), d2.coeffs()]);
        let (a, b) = v.split_at(self.grid.eval_len());
        Ok(self.tangential_gradient_eval(a, b))
    }

    /// div_Γ X on the evaluation grid.
    pub fn div_gamma_eval(&self, x: &[SurfaceField; 3]) -> Result<Vec<f64>> {
        let mut coeffs = Vec::with_capacity(6);
        for xi in x {
            coeffs.push(xi.deriv(1, 1)?);
            coeffs.push(xi.deriv(2, 1)?);
        }
        let refs: Vec<&[_]> = coeffs.iter().map(|c| c.coeffs()).collect();
        let v = self.grid.planes_to_eval(&refs);
        let n = self.grid.eval_len();
        let d = |k: usize| &v[k * n..(k + 1) * n];
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let (n1, n2, n3) = (self.nu[0][i], self.nu[1][i], self.nu[2][i]);
            let w = |c: usize| n1 * d(2 * c)[i] + n2 * d(2 * c + 1)[i];
            *o = d(0)[i] - n1 * w(0) + d(3)[i] - n2 * w(1) - n3 * w(2);
        }
        Ok(out)
    }
}

/// ∇_Γf = (∂_{Γ,1}f, ∂_{Γ,2}f, ∂_{Γ,3}f).
pub fn grad_gamma(f: &SurfaceField, g: &SurfaceGeometry) -> Result<[SurfaceField; 3]> {
    let [a, b, c] = g.grad_gamma_eval(f)?;
    Ok([g.field(&a), g.field(&b), g.field(&c)])
}

/// div_Γ X = ∂_{Γ,i} X_i.
pub fn div_gamma(x: &[SurfaceField; 3], g: &SurfaceGeometry) -> Result<SurfaceField> {
    Ok(g.field(&g.div_gamma_eval(x)?))
}

/// Δ_Γf = div_Γ ∇_Γ f.
pub fn laplace_gamma(f: &SurfaceField, g: &SurfaceGeometry) -> Result<SurfaceField> {
    div_gamma(&grad_gamma(f, g)?, g)
}

/// Signed residual of the surface integration-by-parts identity in
/// direction `i`: ∫_Σ [∂_{Γ,i}f g + f ∂_{Γ,i}g + f g ν_i H] √(1+|∇_*η|²).
pub fn ibp_residual(f: &SurfaceField, h: &SurfaceField, g: &SurfaceGeometry, i: usize) -> Result<f64> {
    if !(1..=3).contains(&i) {
        return Err(Error::InvalidParameter(format!("direction must be 1, 2 or 3, got {i}")));
    }
    let gf = g.grad_gamma_eval(f)?;
    let gh = g.grad_gamma_eval(h)?;
    let v = g.grid.planes_to_eval(&[f.coeffs(), h.coeffs()]);
    let n = g.grid.eval_len();
    let (fv, hv) = v.split_at(n);
    let k = i - 1;
    let sum: f64 = (0..n)
        .map(|j| (gf[k][j] * hv[j] + fv[j] * gh[k][j] + fv[j] * hv[j] * g.nu[k][j] * g.curvature[j]) * g.area[j])
        .sum();
    Ok(sum / n as f64 * g.grid.area())
}
