//! Surface-tension closure σ(c̃), the equilibrium concentration and the
//! convex entropy ξ_r used by the energy budget.

use crate::error::{Error, Result};
use crate::quad;
use crate::spectral::SurfaceField;
use serde::{Deserialize, Serialize};

const QUAD_TOL: f64 = 1e-13;

/// Constitutive law for the surface tension as a function of concentration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TensionLaw {
    /// σ(x) = σ_s − βx, valid while σ ≥ 0.
    Linear { sigma_s: f64, beta: f64 },
    /// σ(x) = σ_s e^{−βx}.
    Exponential { sigma_s: f64, beta: f64 },
    /// Natural cubic spline through `(x, sigma)`; `x` starts at 0 and
    /// `sigma` must be strictly decreasing and positive.
    Tabulated { x: Vec<f64>, sigma: Vec<f64> },
}

impl Default for TensionLaw {
    fn default() -> Self {
        TensionLaw::Linear {
            sigma_s: 1.0,
            beta: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl Spline {
    fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        // Tridiagonal solve for interior second derivatives.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (r - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn segment(&self, t: f64) -> usize {
        let i = self.x.partition_point(|&v| v <= t);
        i.clamp(1, self.x.len() - 1) - 1
    }

    /// Value and first two derivatives at `t`.
    fn eval(&self, t: f64) -> [f64; 3] {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        [v, d1, d2]
    }
}

/// A tension law together with the equilibrium concentration `c0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensionModel {
    law: TensionLaw,
    spline: Option<Spline>,
    c0: f64,
}

impl TensionModel {
    pub fn new(law: TensionLaw, c0: f64) -> Result<Self> {
        let spline = match &law {
            TensionLaw::Linear { sigma_s, beta } | TensionLaw::Exponential { sigma_s, beta } => {
                if !(*sigma_s > 0.0 && sigma_s.is_finite() && *beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "tension law needs sigma_s > 0 and beta > 0, got {sigma_s}, {beta}"
                    )));
                }
                None
            }
            TensionLaw::Tabulated { x, sigma } => Some(build_table(x, sigma)?),
        };
        let model = Self { law, spline, c0 };
        if !(c0 > 0.0) || model.check(c0).is_err() || !(model.sigma(c0) > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "equilibrium concentration {c0} outside (0, {})",
                model.upper()
            )));
        }
        Ok(model)
    }

    pub fn law(&self) -> &TensionLaw {
        &self.law
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// σ(c₀).
    pub fn sigma0(&self) -> f64 {
        self.sigma(self.c0)
    }

    /// σ′(c₀), always negative.
    pub fn sigma0_prime(&self) -> f64 {
        self.sigma_prime(self.c0)
    }

    /// Upper end of the validity window `[0, upper]`.
    pub fn upper(&self) -> f64 {
        match &self.law {
            TensionLaw::Linear { sigma_s, beta } => sigma_s / beta,
            TensionLaw::Exponential { .. } => f64::INFINITY,
            TensionLaw::Tabulated { x, .. } => *x.last().unwrap(),
        }
    }

    /// Checks that `x` lies in the window where the law is admissible.
    pub fn check(&self, x: f64) -> Result<()> {
        let upper = self.upper();
        if x >= 0.0 && x <= upper {
            Ok(())
        } else {
            Err(Error::OutOfRange { x, upper })
        }
    }

    /// σ(x). Callers are responsible for the validity window.
    pub fn sigma(&self, x: f64) -> f64 {
        match &self.law {
            TensionLaw::Linear { sigma_s, beta } => sigma_s - beta * x,
            TensionLaw::Exponential { sigma_s, beta } => sigma_s * (-beta * x).exp(),
            TensionLaw::Tabulated { .. } => self.spline.as_ref().unwrap().eval(x)[0],
        }
    }

    pub fn sigma_prime(&self, x: f64) -> f64 {
        match &self.law {
            TensionLaw::Linear { beta, .. } => -beta,
            TensionLaw::Exponential { sigma_s, beta } => -beta * sigma_s * (-beta * x).exp(),
            TensionLaw::Tabulated { .. } => self.spline.as_ref().unwrap().eval(x)[1],
        }
    }

    pub fn sigma_second(&self, x: f64) -> f64 {
        match &self.law {
            TensionLaw::Linear { .. } => 0.0,
            TensionLaw::Exponential { sigma_s, beta } => beta * beta * sigma_s * (-beta * x).exp(),
            TensionLaw::Tabulated { .. } => self.spline.as_ref().unwrap().eval(x)[2],
        }
    }

    fn check_pair(&self, r: f64, x: f64) -> Result<()> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("reference concentration must be positive, got {r}")));
        }
        self.check(r)?;
        self.check(x)
    }

    /// ξ_r(x), with ξ_r(0) = σ(0).
    pub fn xi(&self, r: f64, x: f64) -> Result<f64> {
        if let TensionLaw::Linear { beta, .. } = self.law {
            self.check_pair(r, x)?;
            let log_term = if x == 0.0 { 0.0 } else { beta * x * (x / r).ln() };
            return Ok(self.sigma(x) + log_term);
        }
        Ok(self.sigma(r) + self.xi_excess(r, x)?)
    }

    /// ξ_r(x) − σ(r) ≥ 0, evaluated without cancellation near `x = r`.
    pub fn xi_excess(&self, r: f64, x: f64) -> Result<f64> {
        self.check_pair(r, x)?;
        match self.law {
            TensionLaw::Linear { beta, .. } => {
                if x == 0.0 {
                    return Ok(beta * r);
                }
                let d = x - r;
                Ok(beta * (x * (d / r).ln_1p() - d))
            }
            _ => Ok(quad::integrate(
                |z| (x - z) * (-self.sigma_prime(z) / z),
                r,
                x,
                QUAD_TOL,
            )),
        }
    }

    /// ξ_r′(x) = −∫_r^x σ′(z)/z dz.
    pub fn xi_prime(&self, r: f64, x: f64) -> Result<f64> {
        self.check_pair(r, x)?;
        if x == 0.0 {
            return Err(Error::Singular("xi' diverges at x = 0".into()));
        }
        match self.law {
            TensionLaw::Linear { beta, .. } => Ok(beta * (x / r).ln()),
            _ => Ok(-quad::integrate(|z| self.sigma_prime(z) / z, r, x, QUAD_TOL)),
        }
    }

    /// ξ_r″(x) = −σ′(x)/x.
    pub fn xi_second(&self, r: f64, x: f64) -> Result<f64> {
        self.check_pair(r, x)?;
        if x == 0.0 {
            return Err(Error::Singular("xi'' = -sigma'(x)/x is singular at x = 0".into()));
        }
        Ok(-self.sigma_prime(x) / x)
    }
}

fn build_table(x: &[f64], sigma: &[f64]) -> Result<Spline> {
    let bad = |msg: &str| Err(Error::InvalidParameter(format!("tabulated tension: {msg}")));
    if x.len() != sigma.len() || x.len() < 4 {
        return bad("need at least 4 points and matching lengths");
    }
    if x[0] != 0.0 {
        return bad("the table must start at x = 0");
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return bad("x must be strictly increasing");
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return bad("sigma must be positive");
    }
    let spline = Spline::natural(x, sigma);
    // Decreasing everywhere, not only at the knots.
    for w in x.windows(2) {
        for j in 0..=16 {
            let t = w[0] + (w[1] - w[0]) * j as f64 / 16.0;
            if !(spline.eval(t)[1] < 0.0) {
                return bad("the interpolant is not strictly decreasing");
            }
        }
    }
    Ok(spline)
}

/// c₀ = |Σ|⁻¹ ∫_Σ c̃₀ √(1 + |∇_*η₀|²), evaluated on the evaluation grid.
/// A nonzero mean of η₀ is irrelevant here (only ∇η₀ enters) but is logged.
pub fn equilibrium_concentration(eta0: &SurfaceField, ctilde0: &SurfaceField) -> Result<f64> {
    if eta0.mean().abs() > 0.0 {
        log::info!("initial surface has mean {:.3e}; it is shifted to zero", eta0.mean());
    }
    let c = ctilde0.eval();
    let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::InvalidConcentration { min });
    }
    let d1 = eta0.deriv(1, 1)?.eval();
    let d2 = eta0.deriv(2, 1)?.eval();
    let sum: f64 = c
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(c, (a, b))| c * (1.0 + a * a + b * b).sqrt())
        .sum();
    Ok(sum / c.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Grid, GridSpec};
    use std::f64::consts::PI;

    fn linear(sigma_s: f64, beta: f64, c0: f64) -> TensionModel {
        TensionModel::new(TensionLaw::Linear { sigma_s, beta }, c0).unwrap()
    }

    /// Composite Simpson in log-spaced variable z = e^s of the defining integral.
    fn xi_by_definition(m: &TensionModel, r: f64, x: f64) -> f64 {
        let n = 20_000;
        let (a, b) = (r.ln(), x.ln());
        let h = (b - a) / n as f64;
        let g = |s: f64| {
            let z = s.exp();
            m.sigma(z) / (z * z) * z
        };
        let mut acc = g(a) + g(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
        }
        x * (m.sigma(r) / r - acc * h / 3.0)
    }

    #[test]
    fn closed_form_example() {
        let m = linear(1.0, 0.5, 1.0);
        let v = m.xi(1.0, 2.0).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
        assert_eq!(m.xi(1.0, 1.0).unwrap(), m.sigma(1.0));
    }

    #[test]
    fn closed_form_matches_definition() {
        let m = linear(1.0, 0.25, 1.0);
        for i in 0..100 {
            let x = 0.05 + 3.9 * i as f64 / 100.0;
            let a = m.xi(1.0, x).unwrap();
            let b = xi_by_definition(&m, 1.0, x);
            assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn exponential_quadrature_matches_definition() {
        let m = TensionModel::new(TensionLaw::Exponential { sigma_s: 1.0, beta: 1.0 }, 1.0).unwrap();
        for &x in &[0.1, 0.5, 0.99, 1.0, 1.7, 3.0] {
            let a = m.xi(1.0, x).unwrap();
            let b = xi_by_definition(&m, 1.0, x);
            assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
        }
        assert!((m.xi(1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_values() {
        assert_eq!(linear(1.0, 0.5, 1.0).xi_second(1.0, 1.0).unwrap(), 0.5);
        let m = TensionModel::new(TensionLaw::Exponential { sigma_s: 1.0, beta: 1.0 }, 1.0).unwrap();
        assert!((m.xi_second(1.0, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(m.xi_second(1.0, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn window_is_enforced() {
        let m = linear(1.0, 0.25, 1.0);
        assert!(m.xi(1.0, 4.0).is_ok());
        assert!(matches!(m.xi(1.0, 4.01), Err(Error::OutOfRange { .. })));
        assert!(matches!(m.xi(1.0, -0.1), Err(Error::OutOfRange { .. })));
        assert!(TensionModel::new(TensionLaw::Linear { sigma_s: 1.0, beta: 0.25 }, 5.0).is_err());
        assert!(TensionModel::new(TensionLaw::Linear { sigma_s: 1.0, beta: -0.25 }, 1.0).is_err());
    }

    #[test]
    fn excess_is_consistent_with_xi() {
        let m = linear(1.0, 0.25, 1.0);
        for &x in &[0.0, 0.3, 0.999_999, 1.0, 2.5] {
            let a = m.xi(1.0, x).unwrap() - m.sigma(1.0);
            assert!((a - m.xi_excess(1.0, x).unwrap()).abs() < 1e-14);
        }
        // Near the minimum the excess is quadratic: ξ″(r) δ² / 2.
        let d = 1e-6;
        let e = m.xi_excess(1.0, 1.0 + d).unwrap();
        assert!((e / (0.125 * d * d) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn tabulated_law_reproduces_smooth_table() {
        let x: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let s: Vec<f64> = x.iter().map(|v| (-0.5 * v).exp()).collect();
        let m = TensionModel::new(TensionLaw::Tabulated { x, sigma: s }, 1.0).unwrap();
        assert!((m.sigma(1.23) - (-0.615f64).exp()).abs() < 1e-5);
        assert!(m.sigma0_prime() < 0.0);
        assert!(m.check(4.5).is_err());
        let bad = TensionLaw::Tabulated {
            x: vec![0.0, 1.0, 2.0, 3.0],
            sigma: vec![1.0, 0.9, 0.95, 0.5],
        };
        assert!(TensionModel::new(bad, 1.0).is_err());
    }

    #[test]
    fn law_config_round_trip() {
        let law: TensionLaw = serde_json::from_str(r#"{"kind":"exponential","sigma_s":2.0,"beta":0.5}"#).unwrap();
        assert_eq!(law, TensionLaw::Exponential { sigma_s: 2.0, beta: 0.5 });
        assert!(serde_json::from_str::<TensionLaw>(r#"{"kind":"linear","sigma_s":1,"beta":1,"x":2}"#).is_err());
    }

    #[test]
    fn equilibrium_concentration_examples() {
        let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 32, 32, 8)).unwrap();
        let flat = SurfaceField::zeros(&g);
        let c = SurfaceField::constant(&g, 2.0);
        assert!((equilibrium_concentration(&flat, &c).unwrap() - 2.0).abs() < 1e-15);

        let eps = 0.05;
        let k = 2.0 * PI;
        let eta = SurfaceField::from_fn(&g, |x, _| eps * (k * x).sin());
        let one = SurfaceField::constant(&g, 1.0);
        let c0 = equilibrium_concentration(&eta, &one).unwrap();
        let oracle = quad::integrate(|x| (1.0 + (eps * k * (k * x).cos()).powi(2)).sqrt(), 0.0, 1.0, 1e-15);
        assert!(c0 > 1.0);
        assert!((c0 - oracle).abs() < 1e-13, "{c0} vs {oracle}");

        let neg = SurfaceField::from_fn(&g, |x, _| (k * x).sin());
        assert!(matches!(
            equilibrium_concentration(&flat, &neg),
            Err(Error::InvalidConcentration { .. })
        ));
    }
}
