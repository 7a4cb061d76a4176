//! Harmonic extension of η into the strip and the coefficients of the
//! flattening map Θ(x) = (x₁, x₂, x₃ + η̄(x)(1 + x₃/b)).
//!
//! The extension is known in closed form per mode, so every derivative of
//! η̄ (vertical ones included) is taken analytically rather than by
//! collocation.

use crate::error::{Error, Result};
use crate::spectral::{Band, BulkField, Grid, SurfaceField, C64};
use rayon::prelude::*;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// 𝒫f: mode `n` of `f` extended by `e^{2π|n| x₃}`.
pub fn poisson_extend(f: &SurfaceField) -> BulkField {
    let grid = f.grid();
    let mut out = BulkField::zeros(grid);
    let plen = grid.plane_len();
    let decay: Vec<f64> = (0..plen).map(|idx| modulus(grid.wavevector(idx))).collect();
    for (iz, &z) in grid.cheb().nodes().iter().enumerate() {
        let plane = out.plane_mut(iz);
        for idx in 0..plen {
            plane[idx] = f.coeffs()[idx] * (decay[idx] * z).exp();
        }
    }
    out
}

fn modulus(k: [f64; 2]) -> f64 {
    (k[0] * k[0] + k[1] * k[1]).sqrt()
}

/// Flattening-map coefficients built from one η, held pointwise on the
/// evaluation grid (plane-major, `Nz` planes).
#[derive(Clone, Debug)]
pub struct GeometryPack {
    grid: Arc<Grid>,
    eta_bar: BulkField,
    a: Vec<f64>,
    b: Vec<f64>,
    j: Vec<f64>,
    k: Vec<f64>,
    /// Σ_ij 𝒜_ij ∂_j 𝒜_i3, the first-order coefficient of Δ_𝒜 − Δ.
    first_order: Vec<f64>,
    b_tilde: Vec<f64>,
    min_j: f64,
}

/// Builds A, B, J, K and 𝒜 for the surface `eta`.
pub fn build_geometry_pack(eta: &SurfaceField) -> Result<GeometryPack> {
    let grid = eta.grid().clone();
    let depth = grid.spec().b;
    let plen = grid.plane_len();
    let n = grid.eval_len();
    let nodes = grid.cheb().nodes().to_vec();
    let b_tilde: Vec<f64> = nodes.iter().map(|z| 1.0 + z / depth).collect();
    let eta_bar = poisson_extend(eta);

    let planes: Vec<[Vec<f64>; 5]> = (0..nodes.len())
        .into_par_iter()
        .map(|iz| {
            let base = eta_bar.plane(iz);
            let mut fields = vec![vec![C64::default(); plen]; 8];
            for idx in 0..plen {
                let e = base[idx];
                if e == C64::default() {
                    continue;
                }
                let [k1, k2] = grid.wavevector(idx);
                let m = modulus([k1, k2]);
                fields[0][idx] = e; // η̄
                fields[1][idx] = I * k1 * e; // ∂₁
                fields[2][idx] = I * k2 * e; // ∂₂
                fields[3][idx] = m * e; // ∂₃
                fields[4][idx] = -k1 * k1 * e; // ∂₁₁
                fields[5][idx] = -k2 * k2 * e; // ∂₂₂
                fields[6][idx] = I * k1 * m * e; // ∂₁₃
                fields[7][idx] = I * k2 * m * e; // ∂₂₃
            }
            // ∂₃₃η̄ = −(∂₁₁ + ∂₂₂)η̄ by harmonicity.
            let refs: Vec<&[C64]> = fields.iter().map(|f| f.as_slice()).collect();
            let v = grid.planes_to_eval(&refs);
            let f = |c: usize| &v[c * n..(c + 1) * n];
            let bt = b_tilde[iz];
            let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            for p in 0..n {
                let (e, e1, e2, e3) = (f(0)[p], f(1)[p], f(2)[p], f(3)[p]);
                let (e11, e22, e13, e23) = (f(4)[p], f(5)[p], f(6)[p], f(7)[p]);
                let e33 = -(e11 + e22);
                let a = e1 * bt;
                let b = e2 * bt;
                let j = 1.0 + e / depth + e3 * bt;
                let k = 1.0 / j;
                let d1a = e11 * bt;
                let d2b = e22 * bt;
                let d3a = e13 * bt + e1 / depth;
                let d3b = e23 * bt + e2 / depth;
                let d1j = e1 / depth + e13 * bt;
                let d2j = e2 / depth + e23 * bt;
                let d3j = 2.0 * e3 / depth + e33 * bt;
                let q = 1.0 + a * a + b * b;
                out[0][p] = a;
                out[1][p] = b;
                out[2][p] = j;
                out[3][p] = k;
                out[4][p] = -k * k * k * q * d3j + a * k * k * (d1j + d3a) + b * k * k * (d2j + d3b) - k * (d1a + d2b);
            }
            out
        })
        .collect();

    let mut pack = GeometryPack {
        a: Vec::with_capacity(n * nodes.len()),
        b: Vec::with_capacity(n * nodes.len()),
        j: Vec::with_capacity(n * nodes.len()),
        k: Vec::with_capacity(n * nodes.len()),
        first_order: Vec::with_capacity(n * nodes.len()),
        grid,
        eta_bar,
        b_tilde,
        min_j: f64::INFINITY,
    };
    for [a, b, j, k, fo] in planes {
        pack.a.extend(a);
        pack.b.extend(b);
        pack.j.extend(j);
        pack.k.extend(k);
        pack.first_order.extend(fo);
    }
    pack.min_j = pack.j.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(pack.min_j > 0.0) {
        return Err(Error::DegenerateMap { min_j: pack.min_j });
    }
    Ok(pack)
}

impl GeometryPack {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// η̄ = 𝒫η.
    pub fn eta_bar(&self) -> &BulkField {
        &self.eta_bar
    }

    fn field(&self, v: &[f64]) -> BulkField {
        BulkField::from_eval(&self.grid, v, Band::Full)
    }

    pub fn a(&self) -> BulkField {
        self.field(&self.a)
    }

    pub fn b(&self) -> BulkField {
        self.field(&self.b)
    }

    pub fn j(&self) -> BulkField {
        self.field(&self.j)
    }

    pub fn k(&self) -> BulkField {
        self.field(&self.k)
    }

    /// b̃ = 1 + x₃/b as a bulk field.
    pub fn b_tilde(&self) -> BulkField {
        BulkField::from_profile(&self.grid, |z| 1.0 + z / self.grid.spec().b)
    }

    /// Entry `(row, col)` of 𝒜 (1-based indices).
    pub fn cal_a(&self, row: usize, col: usize) -> BulkField {
        self.field(&self.cal_a_eval(row, col))
    }

    /// Entry `(row, col)` of 𝒜 on the evaluation grid.
    pub fn cal_a_eval(&self, row: usize, col: usize) -> Vec<f64> {
        let len = self.k.len();
        match (row, col) {
            (1, 1) | (2, 2) => vec![1.0; len],
            (1, 3) => self.a.iter().zip(&self.k).map(|(a, k)| -a * k).collect(),
            (2, 3) => self.b.iter().zip(&self.k).map(|(b, k)| -b * k).collect(),
            (3, 3) => self.k.clone(),
            (r, c) if (1..=3).contains(&r) && (1..=3).contains(&c) => vec![0.0; len],
            _ => panic!("matrix index ({row}, {col}) out of range"),
        }
    }

    pub fn a_eval(&self) -> &[f64] {
        &self.a
    }

    pub fn b_eval(&self) -> &[f64] {
        &self.b
    }

    pub fn j_eval(&self) -> &[f64] {
        &self.j
    }

    pub fn k_eval(&self) -> &[f64] {
        &self.k
    }

    /// Coefficient `c` with Δ_𝒜f − Δf = (second-order terms) + c ∂₃f.
    pub fn first_order_eval(&self) -> &[f64] {
        &self.first_order
    }

    /// b̃ at each vertical node.
    pub fn b_tilde_nodes(&self) -> &[f64] {
        &self.b_tilde
    }

    pub fn min_j(&self) -> f64 {
        self.min_j
    }

    /// ‖J − 1‖²_∞ + ‖A‖²_∞ + ‖B‖²_∞ on the evaluation grid.
    pub fn infinity_bound(&self) -> f64 {
        let sup = |v: &[f64], shift: f64| v.iter().map(|x| (x - shift).abs()).fold(0.0, f64::max);
        sup(&self.j, 1.0).powi(2) + sup(&self.a, 0.0).powi(2) + sup(&self.b, 0.0).powi(2)
    }

    /// ∇_𝒜f on the evaluation grid.
    pub fn cal_a_grad_eval(&self, f: &BulkField) -> [Vec<f64>; 3] {
        let d1 = f.deriv_horizontal(1, 1).expect("first derivative");
        let d2 = f.deriv_horizontal(2, 1).expect("first derivative");
        let d3 = f.deriv_vertical(1).expect("first derivative");
        let (mut g1, mut g2, g3) = (d1.eval(), d2.eval(), d3.eval());
        let mut out3 = g3;
        for p in 0..out3.len() {
            let k = self.k[p];
            let d3 = out3[p];
            g1[p] -= self.a[p] * k * d3;
            g2[p] -= self.b[p] * k * d3;
            out3[p] = k * d3;
        }
        [g1, g2, out3]
    }
}

/// (∇_𝒜f)_i = 𝒜_ij ∂_j f, dealiased.
pub fn apply_cal_a_grad(pack: &GeometryPack, f: &BulkField) -> [BulkField; 3] {
    let g = pack.cal_a_grad_eval(f);
    let grid = &pack.grid;
    [
        BulkField::from_eval(grid, &g[0], Band::Retained),
        BulkField::from_eval(grid, &g[1], Band::Retained),
        BulkField::from_eval(grid, &g[2], Band::Retained),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;
    use std::f64::consts::PI;

    fn grid(n: usize, nz: usize) -> Arc<Grid> {
        Grid::new(GridSpec::new(1.0, 1.0, 1.0, n, n, nz)).unwrap()
    }

    #[test]
    fn extension_examples() {
        let g = grid(8, 12);
        let one = poisson_extend(&SurfaceField::constant(&g, 1.0));
        assert!((one.integrate() - 1.0).abs() < 1e-14);
        let k = 2.0 * PI;
        let f = SurfaceField::from_fn(&g, |x, _| (k * x).cos());
        let ext = poisson_extend(&f);
        let expect = BulkField::from_fn(&g, |x, _, z| (k * z).exp() * (k * x).cos());
        for (a, b) in ext.coeffs().iter().zip(expect.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert_eq!(ext.trace_top().coeffs(), f.coeffs());
    }

    #[test]
    fn flat_surface_gives_identity_pack() {
        let g = grid(8, 8);
        let pack = build_geometry_pack(&SurfaceField::zeros(&g)).unwrap();
        assert!(pack.a_eval().iter().all(|&v| v == 0.0));
        assert!(pack.b_eval().iter().all(|&v| v == 0.0));
        assert!(pack.j_eval().iter().all(|&v| v == 1.0));
        assert!(pack.k_eval().iter().all(|&v| v == 1.0));
        assert!(pack.first_order_eval().iter().all(|&v| v == 0.0));
        assert_eq!(pack.infinity_bound(), 0.0);
    }

    #[test]
    fn gradient_of_x3_is_third_column() {
        let g = grid(16, 10);
        let eta = SurfaceField::from_fn(&g, |x, y| 0.02 * (2.0 * PI * x).sin() + 0.01 * (2.0 * PI * (x + y)).cos());
        let pack = build_geometry_pack(&eta).unwrap();
        let x3 = BulkField::from_profile(&g, |z| z);
        let grad = pack.cal_a_grad_eval(&x3);
        for p in 0..grad[0].len() {
            let k = pack.k_eval()[p];
            assert!((grad[0][p] + pack.a_eval()[p] * k).abs() < 1e-13);
            assert!((grad[1][p] + pack.b_eval()[p] * k).abs() < 1e-13);
            assert!((grad[2][p] - k).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let g = grid(8, 8);
        let eta = SurfaceField::from_fn(&g, |x, _| -2.0 * (2.0 * PI * x).cos());
        assert!(matches!(build_geometry_pack(&eta), Err(Error::DegenerateMap { .. })));
    }
}
