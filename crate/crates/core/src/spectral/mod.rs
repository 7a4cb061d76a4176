//! Discrete function spaces on the strip `Σ × (-b, 0)`.
//!
//! Horizontal directions use a periodic Fourier basis; the vertical direction
//! uses Chebyshev–Gauss–Lobatto collocation. Coefficients are normalized so
//! that `f(x) = Σ_n f̂(n) e^{2πi n·x}` with `f̂(n) = |Σ|⁻¹ ∫_Σ f e^{-2πi n·x}`.
//!
//! Nonlinear expressions are evaluated pointwise on the *evaluation grid*,
//! which is the native grid for the 2/3 rule and a 3/2-padded grid otherwise.

mod cheb;
mod fft;

pub use cheb::Chebyshev;

use crate::error::{Error, Result};
use fft::Fft2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Highest horizontal derivative order accepted by [`SurfaceField::deriv`].
pub const MAX_HORIZONTAL_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DealiasRule {
    /// Evaluate on the native grid, keep modes with |n_i| < N_i / 3.
    #[default]
    TwoThirds,
    /// Evaluate on a 3/2-padded grid, keep every non-Nyquist native mode.
    ThreeHalves,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub b: f64,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    #[serde(rename = "Nz")]
    pub nz: usize,
    #[serde(default)]
    pub dealias_rule: DealiasRule,
}

impl GridSpec {
    pub fn new(l1: f64, l2: f64, b: f64, n1: usize, n2: usize, nz: usize) -> Self {
        Self {
            l1,
            l2,
            b,
            n1,
            n2,
            nz,
            dealias_rule: DealiasRule::TwoThirds,
        }
    }

    pub fn with_dealias(mut self, rule: DealiasRule) -> Self {
        self.dealias_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("L1", self.l1), ("L2", self.l2), ("b", self.b)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, n) in [("N1", self.n1), ("N2", self.n2)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} must be even and >= 8, got {n}")));
            }
        }
        if self.nz < 8 {
            return Err(Error::InvalidGrid(format!("Nz must be >= 8, got {}", self.nz)));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }
}

/// Which horizontal modes survive a projection from the evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    /// The dealiased band the simulation state lives in.
    Retained,
    /// Every non-Nyquist native mode.
    Full,
}

/// A grid with its transforms planned once.
pub struct Grid {
    spec: GridSpec,
    m1: usize,
    m2: usize,
    eval_fft: Fft2,
    native_fft: Option<Fft2>,
    cheb: Chebyshev,
    s1: Vec<i64>,
    s2: Vec<i64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    retained: Vec<bool>,
    full: Vec<bool>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("spec", &self.spec)
            .field("eval", &(self.m1, self.m2))
            .finish()
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn wrap(s: i64, m: usize) -> usize {
    s.rem_euclid(m as i64) as usize
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Self>> {
        spec.validate()?;
        let (m1, m2) = match spec.dealias_rule {
            DealiasRule::TwoThirds => (spec.n1, spec.n2),
            DealiasRule::ThreeHalves => (3 * spec.n1 / 2, 3 * spec.n2 / 2),
        };
        let native_fft = (m1 != spec.n1 || m2 != spec.n2).then(|| Fft2::new(spec.n1, spec.n2));
        let s1: Vec<i64> = (0..spec.n1).map(|i| signed_index(i, spec.n1)).collect();
        let s2: Vec<i64> = (0..spec.n2).map(|i| signed_index(i, spec.n2)).collect();
        let nyq1 = (spec.n1 / 2) as i64;
        let nyq2 = (spec.n2 / 2) as i64;
        let k1 = s1
            .iter()
            .map(|&s| if s == nyq1 { 0.0 } else { 2.0 * PI * s as f64 / spec.l1 })
            .collect();
        let k2 = s2
            .iter()
            .map(|&s| if s == nyq2 { 0.0 } else { 2.0 * PI * s as f64 / spec.l2 })
            .collect();
        let (c1, c2) = match spec.dealias_rule {
            DealiasRule::TwoThirds => (((spec.n1 - 1) / 3) as i64, ((spec.n2 - 1) / 3) as i64),
            DealiasRule::ThreeHalves => (nyq1 - 1, nyq2 - 1),
        };
        let mut retained = vec![false; spec.n1 * spec.n2];
        let mut full = vec![false; spec.n1 * spec.n2];
        for i1 in 0..spec.n1 {
            for i2 in 0..spec.n2 {
                let (a, b) = (s1[i1], s2[i2]);
                full[i1 * spec.n2 + i2] = a != nyq1 && b != nyq2;
                retained[i1 * spec.n2 + i2] = a.abs() <= c1 && b.abs() <= c2;
            }
        }
        Ok(Arc::new(Self {
            cheb: Chebyshev::new(spec.nz, spec.b),
            eval_fft: Fft2::new(m1, m2),
            native_fft,
            m1,
            m2,
            s1,
            s2,
            k1,
            k2,
            retained,
            full,
            spec,
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cheb(&self) -> &Chebyshev {
        &self.cheb
    }

    pub fn n1(&self) -> usize {
        self.spec.n1
    }

    pub fn n2(&self) -> usize {
        self.spec.n2
    }

    pub fn nz(&self) -> usize {
        self.spec.nz
    }

    /// Number of horizontal modes per plane.
    pub fn plane_len(&self) -> usize {
        self.spec.n1 * self.spec.n2
    }

    /// Evaluation grid shape `(m1, m2)`.
    pub fn eval_shape(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    /// Number of evaluation points per horizontal plane.
    pub fn eval_len(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn area(&self) -> f64 {
        self.spec.area()
    }

    /// Signed integer mode of a native index.
    pub fn mode(&self, i1: usize, i2: usize) -> (i64, i64) {
        (self.s1[i1], self.s2[i2])
    }

    /// Wavevector `2π n` of a native flat index (zero on Nyquist lines).
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let n2 = self.spec.n2;
        [self.k1[idx / n2], self.k2[idx % n2]]
    }

    /// Native flat index of a signed mode, if it is representable.
    pub fn index_of(&self, s1: i64, s2: i64) -> Option<usize> {
        let (n1, n2) = (self.spec.n1 as i64, self.spec.n2 as i64);
        if s1.abs() >= n1 / 2 + 1 || s2.abs() >= n2 / 2 + 1 {
            return None;
        }
        Some(wrap(s1, self.spec.n1) * self.spec.n2 + wrap(s2, self.spec.n2))
    }

    /// Flat index of the conjugate partner mode `-n`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (n1, n2) = (self.spec.n1, self.spec.n2);
        let (i1, i2) = (idx / n2, idx % n2);
        ((n1 - i1) % n1) * n2 + (n2 - i2) % n2
    }

    pub fn in_band(&self, idx: usize, band: Band) -> bool {
        match band {
            Band::Retained => self.retained[idx],
            Band::Full => self.full[idx],
        }
    }

    /// Retained modes in the half plane `n1 > 0` or `n1 = 0, n2 >= 0`;
    /// the remaining retained modes are their conjugates.
    pub fn half_plane_modes(&self) -> Vec<usize> {
        (0..self.plane_len())
            .filter(|&idx| {
                let (a, b) = self.mode(idx / self.spec.n2, idx % self.spec.n2);
                self.retained[idx] && (a > 0 || (a == 0 && b >= 0))
            })
            .collect()
    }

    /// Horizontal coordinates of the evaluation grid point `(j1, j2)`.
    pub fn eval_point(&self, j1: usize, j2: usize) -> (f64, f64) {
        (
            self.spec.l1 * j1 as f64 / self.m1 as f64,
            self.spec.l2 * j2 as f64 / self.m2 as f64,
        )
    }

    /// Spectral → evaluation grid for a batch of planes (real data assumed).
    /// Returns the planes' values concatenated.
    pub fn planes_to_eval(&self, planes: &[&[C64]]) -> Vec<f64> {
        self.planes_to_phys(planes, self.m1, self.m2, &self.eval_fft)
    }

    /// Evaluation grid → spectral for a batch of concatenated planes.
    pub fn eval_to_planes(&self, values: &[f64], band: Band) -> Vec<C64> {
        self.phys_to_planes(values, band, self.m1, self.m2, &self.eval_fft)
    }

    fn native(&self) -> (usize, usize, &Fft2) {
        match &self.native_fft {
            Some(f) => (self.spec.n1, self.spec.n2, f),
            None => (self.m1, self.m2, &self.eval_fft),
        }
    }

    fn planes_to_phys(&self, planes: &[&[C64]], m1: usize, m2: usize, fft: &Fft2) -> Vec<f64> {
        let (n1, n2) = (self.spec.n1, self.spec.n2);
        let plen = m1 * m2;
        let mut out = vec![0.0; plen * planes.len()];
        let mut buf = vec![C64::default(); plen];
        let mut scratch = Vec::new();
        let mut rows = Vec::with_capacity(m1);
        for (pair_idx, pair) in planes.chunks(2).enumerate() {
            buf.iter_mut().for_each(|v| *v = C64::default());
            rows.clear();
            for i1 in 0..n1 {
                let r = wrap(self.s1[i1], m1);
                let mut any = false;
                for i2 in 0..n2 {
                    let idx = i1 * n2 + i2;
                    if !self.full[idx] {
                        continue;
                    }
                    let mut v = pair[0][idx];
                    if let Some(b) = pair.get(1) {
                        v += I * b[idx];
                    }
                    if v != C64::default() {
                        any = true;
                        buf[r * m2 + wrap(self.s2[i2], m2)] = v;
                    }
                }
                if any {
                    rows.push(r);
                }
            }
            fft.inverse(&mut buf, &rows, &mut scratch);
            let base = 2 * pair_idx * plen;
            for (o, v) in out[base..base + plen].iter_mut().zip(&buf) {
                *o = v.re;
            }
            if pair.len() == 2 {
                for (o, v) in out[base + plen..base + 2 * plen].iter_mut().zip(&buf) {
                    *o = v.im;
                }
            }
        }
        out
    }

    fn phys_to_planes(&self, values: &[f64], band: Band, m1: usize, m2: usize, fft: &Fft2) -> Vec<C64> {
        let (n1, n2) = (self.spec.n1, self.spec.n2);
        let plen = m1 * m2;
        assert_eq!(values.len() % plen, 0, "value buffer is not a whole number of planes");
        let nplanes = values.len() / plen;
        let nlen = n1 * n2;
        let mut out = vec![C64::default(); nplanes * nlen];
        let mut buf = vec![C64::default(); plen];
        let mut scratch = Vec::new();
        let mask = match band {
            Band::Retained => &self.retained,
            Band::Full => &self.full,
        };
        let mut rows: Vec<usize> = (0..n1)
            .filter(|&i1| (0..n2).any(|i2| mask[i1 * n2 + i2]))
            .map(|i1| wrap(self.s1[i1], m1))
            .collect();
        rows.sort_unstable();
        rows.dedup();
        let norm = 1.0 / plen as f64;
        for p in (0..nplanes).step_by(2) {
            let has_b = p + 1 < nplanes;
            let a = &values[p * plen..(p + 1) * plen];
            if has_b {
                let b = &values[(p + 1) * plen..(p + 2) * plen];
                for ((z, &x), &y) in buf.iter_mut().zip(a).zip(b) {
                    *z = C64::new(x, y);
                }
            } else {
                for (z, &x) in buf.iter_mut().zip(a) {
                    *z = C64::new(x, 0.0);
                }
            }
            fft.forward(&mut buf, &rows, &mut scratch);
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let idx = i1 * n2 + i2;
                    if !mask[idx] {
                        continue;
                    }
                    let (s1, s2) = (self.s1[i1], self.s2[i2]);
                    let z = buf[wrap(s1, m1) * m2 + wrap(s2, m2)] * norm;
                    if has_b {
                        let zm = buf[wrap(-s1, m1) * m2 + wrap(-s2, m2)].conj() * norm;
                        out[p * nlen + idx] = 0.5 * (z + zm);
                        out[(p + 1) * nlen + idx] = -0.5 * I * (z - zm);
                    } else {
                        out[p * nlen + idx] = z;
                    }
                }
            }
        }
        out
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if std::ptr::eq(self, other) || self.spec == other.spec {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn horizontal_multiplier(k: [f64; 2], axis: usize, order: usize) -> C64 {
    let kk = k[axis - 1];
    let mut m = C64::new(1.0, 0.0);
    for _ in 0..order {
        m *= I * kk;
    }
    m
}

fn check_order(axis: usize, order: usize) -> Result<()> {
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidParameter(format!("horizontal axis must be 1 or 2, got {axis}")));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("derivative order must be >= 1".into()));
    }
    if order > MAX_HORIZONTAL_ORDER {
        return Err(Error::OrderTooHigh {
            order,
            max: MAX_HORIZONTAL_ORDER,
        });
    }
    Ok(())
}

/// Real scalar field on the periodic cross-section Σ.
#[derive(Clone, Debug)]
pub struct SurfaceField {
    grid: Arc<Grid>,
    coeffs: Vec<C64>,
}

impl SurfaceField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![C64::default(); grid.plane_len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = C64::new(value, 0.0);
        f
    }

    /// Wraps raw coefficients (native layout, length `N1 * N2`).
    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<C64>) -> Self {
        assert_eq!(coeffs.len(), grid.plane_len());
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Samples `f(x1, x2)` on the native grid and keeps every non-Nyquist mode.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let (n1, n2) = (grid.n1(), grid.n2());
        let mut values = Vec::with_capacity(n1 * n2);
        for j1 in 0..n1 {
            for j2 in 0..n2 {
                values.push(f(grid.spec.l1 * j1 as f64 / n1 as f64, grid.spec.l2 * j2 as f64 / n2 as f64));
            }
        }
        Self::from_values(grid, &values)
    }

    /// Physical values on the native `N1 x N2` grid → coefficients.
    pub fn from_values(grid: &Arc<Grid>, values: &[f64]) -> Self {
        let (m1, m2, fft) = grid.native();
        let coeffs = grid.phys_to_planes(values, Band::Full, m1, m2, fft);
        Self::from_coeffs(grid, coeffs)
    }

    /// Evaluation-grid values → coefficients restricted to `band`.
    pub fn from_eval(grid: &Arc<Grid>, values: &[f64], band: Band) -> Self {
        Self::from_coeffs(grid, grid.eval_to_planes(values, band))
    }

    /// Physical values on the native grid.
    pub fn values(&self) -> Vec<f64> {
        let (m1, m2, fft) = self.grid.native();
        self.grid.planes_to_phys(&[&self.coeffs], m1, m2, fft)
    }

    /// Values on the evaluation grid.
    pub fn eval(&self) -> Vec<f64> {
        self.grid.planes_to_eval(&[&self.coeffs])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Horizontal average.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Spectral derivative: multiplies mode `n` by `(2πi n_axis)^order`.
    pub fn deriv(&self, axis: usize, order: usize) -> Result<Self> {
        check_order(axis, order)?;
        let mut out = self.clone();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            *c *= horizontal_multiplier(self.grid.wavevector(idx), axis, order);
        }
        Ok(out)
    }

    /// Horizontal Laplacian Δ_*.
    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for (idx, c) in out.coeffs.iter_mut().enumerate() {
            let k = self.grid.wavevector(idx);
            *c *= -(k[0] * k[0] + k[1] * k[1]);
        }
        out
    }

    /// Dealiased pointwise product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let v = self.grid.planes_to_eval(&[&self.coeffs, &other.coeffs]);
        let n = self.grid.eval_len();
        let prod: Vec<f64> = v[..n].iter().zip(&v[n..]).map(|(a, b)| a * b).collect();
        Ok(Self::from_eval(&self.grid, &prod, Band::Retained))
    }

    /// ∫_Σ f, exact for band-limited fields.
    pub fn integrate(&self) -> f64 {
        self.grid.area() * self.coeffs[0].re
    }

    /// Fourier-multiplier `H^s(Σ)` norm.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            if !self.grid.full[idx] {
                continue;
            }
            let k = self.grid.wavevector(idx);
            let w = (1.0 + k[0] * k[0] + k[1] * k[1]).powf(s);
            acc += w * c.norm_sqr();
        }
        (acc * self.grid.area()).sqrt()
    }

    /// Zeroes every mode outside the retained band.
    pub fn dealiased(mut self) -> Self {
        for (c, &keep) in self.coeffs.iter_mut().zip(&self.grid.retained) {
            if !keep {
                *c = C64::default();
            }
        }
        self
    }

    /// Whether `f̂(-n) = conj(f̂(n))` holds to `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.coeffs.len()).all(|idx| {
            let j = self.grid.conjugate_index(idx);
            (self.coeffs[idx] - self.coeffs[j].conj()).norm() <= tol
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Real scalar field on Ω: per horizontal mode, values at the vertical nodes.
/// Storage is plane-major: plane `iz` holds all horizontal modes at node `iz`.
#[derive(Clone, Debug)]
pub struct BulkField {
    grid: Arc<Grid>,
    coeffs: Vec<C64>,
}

impl BulkField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![C64::default(); grid.nz() * grid.plane_len()],
        }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<C64>) -> Self {
        assert_eq!(coeffs.len(), grid.nz() * grid.plane_len());
        Self {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Samples `f(x1, x2, x3)` on the native grid and vertical nodes.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let (n1, n2) = (grid.n1(), grid.n2());
        let mut values = Vec::with_capacity(grid.nz() * n1 * n2);
        for &z in grid.cheb.nodes() {
            for j1 in 0..n1 {
                for j2 in 0..n2 {
                    values.push(f(grid.spec.l1 * j1 as f64 / n1 as f64, grid.spec.l2 * j2 as f64 / n2 as f64, z));
                }
            }
        }
        let (m1, m2, fft) = grid.native();
        let coeffs = grid.phys_to_planes(&values, Band::Full, m1, m2, fft);
        Self::from_coeffs(grid, coeffs)
    }

    /// A field depending on x3 only.
    pub fn from_profile(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        let plen = grid.plane_len();
        for (iz, &z) in grid.cheb.nodes().iter().enumerate() {
            out.coeffs[iz * plen] = C64::new(f(z), 0.0);
        }
        out
    }

    /// Evaluation-grid values (plane-major) → coefficients restricted to `band`.
    pub fn from_eval(grid: &Arc<Grid>, values: &[f64], band: Band) -> Self {
        Self::from_coeffs(grid, grid.eval_to_planes(values, band))
    }

    /// Values on the evaluation grid, plane-major.
    pub fn eval(&self) -> Vec<f64> {
        let planes: Vec<&[C64]> = self.coeffs.chunks(self.grid.plane_len()).collect();
        self.grid.planes_to_eval(&planes)
    }

    /// Values on the native grid, plane-major.
    pub fn values(&self) -> Vec<f64> {
        let (m1, m2, fft) = self.grid.native();
        let planes: Vec<&[C64]> = self.coeffs.chunks(self.grid.plane_len()).collect();
        self.grid.planes_to_phys(&planes, m1, m2, fft)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn plane(&self, iz: usize) -> &[C64] {
        let plen = self.grid.plane_len();
        &self.coeffs[iz * plen..(iz + 1) * plen]
    }

    pub fn plane_mut(&mut self, iz: usize) -> &mut [C64] {
        let plen = self.grid.plane_len();
        &mut self.coeffs[iz * plen..(iz + 1) * plen]
    }

    /// Vertical profile of one horizontal mode.
    pub fn profile(&self, idx: usize) -> Vec<C64> {
        let plen = self.grid.plane_len();
        (0..self.grid.nz()).map(|iz| self.coeffs[iz * plen + idx]).collect()
    }

    pub fn set_profile(&mut self, idx: usize, profile: &[C64]) {
        let plen = self.grid.plane_len();
        for (iz, v) in profile.iter().enumerate() {
            self.coeffs[iz * plen + idx] = *v;
        }
    }

    /// Trace on Σ (x3 = 0), the stored top plane.
    pub fn trace_top(&self) -> SurfaceField {
        SurfaceField::from_coeffs(&self.grid, self.plane(0).to_vec())
    }

    /// Trace on Σ_b (x3 = -b), the stored bottom plane.
    pub fn trace_bottom(&self) -> SurfaceField {
        SurfaceField::from_coeffs(&self.grid, self.plane(self.grid.nz() - 1).to_vec())
    }

    pub fn deriv_horizontal(&self, axis: usize, order: usize) -> Result<Self> {
        check_order(axis, order)?;
        let plen = self.grid.plane_len();
        let mult: Vec<C64> = (0..plen)
            .map(|idx| horizontal_multiplier(self.grid.wavevector(idx), axis, order))
            .collect();
        let mut out = self.clone();
        for plane in out.coeffs.chunks_mut(plen) {
            for (c, m) in plane.iter_mut().zip(&mult) {
                *c *= m;
            }
        }
        Ok(out)
    }

    /// Chebyshev differentiation in x3 (order 1 or 2).
    pub fn deriv_vertical(&self, order: usize) -> Result<Self> {
        if order == 0 || order > 2 {
            return Err(Error::InvalidParameter(format!("vertical derivative order must be 1 or 2, got {order}")));
        }
        Ok(self.apply_vertical(self.grid.cheb.matrix(order)))
    }

    pub(crate) fn apply_vertical(&self, matrix: &[f64]) -> Self {
        let nz = self.grid.nz();
        let plen = self.grid.plane_len();
        let active: Vec<usize> = (0..plen)
            .filter(|&idx| (0..nz).any(|iz| self.coeffs[iz * plen + idx] != C64::default()))
            .collect();
        let mut out = vec![C64::default(); nz * plen];
        for i in 0..nz {
            let row = &matrix[i * nz..(i + 1) * nz];
            let dst = &mut out[i * plen..(i + 1) * plen];
            for (j, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let src = &self.coeffs[j * plen..(j + 1) * plen];
                for &idx in &active {
                    dst[idx] += a * src[idx];
                }
            }
        }
        Self::from_coeffs(&self.grid, out)
    }

    /// Dealiased pointwise product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let a = self.eval();
        let b = other.eval();
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Self::from_eval(&self.grid, &prod, Band::Retained))
    }

    /// ∫_Ω f: Clenshaw–Curtis quadrature of the mean mode, times |Σ|.
    pub fn integrate(&self) -> f64 {
        let plen = self.grid.plane_len();
        let w = self.grid.cheb.weights();
        let s: f64 = (0..self.grid.nz()).map(|iz| w[iz] * self.coeffs[iz * plen].re).sum();
        s * self.grid.area()
    }

    /// Integer-order `H^k(Ω)` norm, `k <= 3`: the sum over multi-indices
    /// `|α| <= k` of `‖∂^α f‖²_{L²(Ω)}`. This is equivalent to, not identical
    /// with, the interpolation-space norm.
    pub fn sobolev_norm(&self, k: usize) -> Result<f64> {
        if k > 3 {
            return Err(Error::OrderTooHigh { order: k, max: 3 });
        }
        let nz = self.grid.nz();
        let plen = self.grid.plane_len();
        let w = self.grid.cheb.weights();
        let mut total = 0.0;
        let mut current = self.clone();
        for a3 in 0..=k {
            if a3 > 0 {
                current = current.apply_vertical(self.grid.cheb.matrix(1));
            }
            let rest = (k - a3) as i32;
            for idx in 0..plen {
                if !self.grid.full[idx] && idx != 0 {
                    continue;
                }
                let kv = self.grid.wavevector(idx);
                let (q1, q2) = (kv[0] * kv[0], kv[1] * kv[1]);
                let mut mult = 0.0;
                for a1 in 0..=rest {
                    for a2 in 0..=(rest - a1) {
                        mult += q1.powi(a1) * q2.powi(a2);
                    }
                }
                let s: f64 = (0..nz).map(|iz| w[iz] * current.coeffs[iz * plen + idx].norm_sqr()).sum();
                total += mult * s;
            }
        }
        Ok((total * self.grid.area()).sqrt())
    }

    pub fn dealiased(mut self) -> Self {
        let plen = self.grid.plane_len();
        for plane in self.coeffs.chunks_mut(plen) {
            for (c, &keep) in plane.iter_mut().zip(&self.grid.retained) {
                if !keep {
                    *c = C64::default();
                }
            }
        }
        self
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.grid.nz()).all(|iz| {
            let p = self.plane(iz);
            (0..p.len()).all(|idx| (p[idx] - p[self.grid.conjugate_index(idx)].conj()).norm() <= tol)
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests;
