use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize, nz: usize, rule: DealiasRule) -> Arc<Grid> {
    Grid::new(GridSpec::new(1.0, 1.3, 0.8, n, n, nz).with_dealias(rule)).unwrap()
}

/// Random real field whose modes satisfy |n_i| <= cutoff.
fn random_surface(g: &Arc<Grid>, cutoff: i64, seed: u64) -> SurfaceField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SurfaceField::zeros(g);
    for idx in 0..g.plane_len() {
        let (a, b) = g.mode(idx / g.n2(), idx % g.n2());
        if a.abs() > cutoff || b.abs() > cutoff {
            continue;
        }
        let j = g.conjugate_index(idx);
        if j < idx {
            continue;
        }
        let v = if j == idx {
            C64::new(rng.gen_range(-1.0..1.0), 0.0)
        } else {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        };
        f.coeffs[idx] = v;
        f.coeffs[j] = v.conj();
    }
    f
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn grid_validation() {
    assert!(Grid::new(GridSpec::new(1.0, 1.0, 1.0, 6, 8, 8)).is_err());
    assert!(Grid::new(GridSpec::new(1.0, 1.0, 1.0, 9, 8, 8)).is_err());
    assert!(Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 7)).is_err());
    assert!(Grid::new(GridSpec::new(0.0, 1.0, 1.0, 8, 8, 8)).is_err());
    assert!(Grid::new(GridSpec::new(1.0, 1.0, -1.0, 8, 8, 8)).is_err());
    assert!(Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 8)).is_ok());
}

#[test]
fn round_trip_physical_spectral() {
    for rule in [DealiasRule::TwoThirds, DealiasRule::ThreeHalves] {
        let g = grid(16, 8, rule);
        let f = random_surface(&g, 7, 1);
        let v = f.values();
        let back = SurfaceField::from_values(&g, &v).values();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max_diff(&v, &back) <= 1e-12 * scale);
    }
}

#[test]
fn derivative_of_single_sine() {
    let g = grid(16, 8, DealiasRule::TwoThirds);
    let l1 = g.spec().l1;
    let k = 2.0 * PI / l1;
    let f = SurfaceField::from_fn(&g, |x, _| (k * x).sin());
    let d = f.deriv(1, 1).unwrap();
    let expect = SurfaceField::from_fn(&g, |x, _| k * (k * x).cos());
    assert!(max_diff(&d.values(), &expect.values()) < 1e-12);

    let c = SurfaceField::constant(&g, 3.5);
    assert_eq!(c.deriv(2, 3).unwrap().max_coeff(), 0.0);
}

#[test]
fn derivative_order_limits() {
    let g = grid(8, 8, DealiasRule::TwoThirds);
    let f = random_surface(&g, 2, 2);
    assert_eq!(f.deriv(1, 5).unwrap_err(), Error::OrderTooHigh { order: 5, max: 4 });
    assert!(f.deriv(3, 1).is_err());
    assert!(f.deriv(1, 4).is_ok());
}

#[test]
fn repeated_derivative_equals_higher_order() {
    let g = grid(16, 8, DealiasRule::TwoThirds);
    let f = random_surface(&g, 5, 3);
    let twice = f.deriv(1, 1).unwrap().deriv(1, 1).unwrap();
    let direct = f.deriv(1, 2).unwrap();
    let scale = direct.max_coeff();
    for (a, b) in twice.coeffs().iter().zip(direct.coeffs()) {
        assert!((a - b).norm() <= 1e-12 * scale);
    }
    let d12 = f.deriv(1, 1).unwrap().deriv(2, 1).unwrap();
    let d21 = f.deriv(2, 1).unwrap().deriv(1, 1).unwrap();
    let scale = d12.max_coeff();
    for (a, b) in d12.coeffs().iter().zip(d21.coeffs()) {
        assert!((a - b).norm() <= 1e-15 * scale);
    }
}

#[test]
fn vertical_derivatives() {
    let g = grid(8, 12, DealiasRule::TwoThirds);
    let f = BulkField::from_profile(&g, |z| z);
    let d = f.deriv_vertical(1).unwrap();
    for iz in 0..12 {
        assert!((d.plane(iz)[0].re - 1.0).abs() < 1e-12);
    }
    let f2 = BulkField::from_profile(&g, |z| z * z);
    let d1 = f2.deriv_vertical(1).unwrap();
    let d2 = f2.deriv_vertical(2).unwrap();
    for (iz, &z) in g.cheb().nodes().iter().enumerate() {
        assert!((d1.plane(iz)[0].re - 2.0 * z).abs() < 1e-12);
        assert!((d2.plane(iz)[0].re - 2.0).abs() < 1e-10);
    }
    assert!(f.deriv_vertical(3).is_err());
}

#[test]
fn vertical_second_derivative_of_cosh() {
    let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 32)).unwrap();
    let k = 2.0 * PI;
    let f = BulkField::from_profile(&g, |z| (k * (z + 1.0)).cosh());
    let d2 = f.deriv_vertical(2).unwrap();
    let err = (0..32)
        .map(|iz| (d2.plane(iz)[0].re - k * k * f.plane(iz)[0].re).abs())
        .fold(0.0, f64::max);
    let scale = k * k * (k).cosh();
    assert!(err / scale < 1e-8, "relative error {}", err / scale);
}

#[test]
fn products() {
    let g = grid(16, 8, DealiasRule::TwoThirds);
    let l1 = g.spec().l1;
    let one = SurfaceField::constant(&g, 1.0);
    let f = random_surface(&g, 5, 4);
    let p = one.product(&f).unwrap();
    assert!(max_diff(&p.values(), &f.values()) < 1e-13);

    let s = SurfaceField::from_fn(&g, |x, _| (2.0 * PI * x / l1).sin());
    let ss = s.product(&s).unwrap();
    let expect = SurfaceField::from_fn(&g, |x, _| 0.5 - 0.5 * (4.0 * PI * x / l1).cos());
    assert!(max_diff(&ss.values(), &expect.values()) < 1e-13);
}

#[test]
fn product_matches_oversampled_oracle() {
    for rule in [DealiasRule::TwoThirds, DealiasRule::ThreeHalves] {
        let g = grid(24, 8, rule);
        let fine = Grid::new(GridSpec::new(1.0, 1.3, 0.8, 64, 64, 8)).unwrap();
        let f = random_surface(&g, 4, 5);
        let h = random_surface(&g, 4, 6);
        let p = f.product(&h).unwrap();
        // Same coefficients embedded on a grid wide enough to hold the exact product.
        let embed = |src: &SurfaceField| {
            let mut out = SurfaceField::zeros(&fine);
            for idx in 0..g.plane_len() {
                let (a, b) = g.mode(idx / g.n2(), idx % g.n2());
                if let Some(j) = fine.index_of(a, b) {
                    out.coeffs[j] = src.coeffs[idx];
                }
            }
            out
        };
        let (ff, hf) = (embed(&f), embed(&h));
        let exact: Vec<f64> = ff.values().iter().zip(hf.values()).map(|(a, b)| a * b).collect();
        let exact = SurfaceField::from_values(&fine, &exact);
        for idx in 0..g.plane_len() {
            let (a, b) = g.mode(idx / g.n2(), idx % g.n2());
            let want = if g.in_band(idx, Band::Retained) {
                exact.coeffs[fine.index_of(a, b).unwrap()]
            } else {
                C64::default()
            };
            assert!((p.coeffs[idx] - want).norm() < 1e-12, "{rule:?} mode ({a},{b})");
        }
    }
}

#[test]
fn product_rejects_grid_mismatch() {
    let a = SurfaceField::zeros(&grid(8, 8, DealiasRule::TwoThirds));
    let b = SurfaceField::zeros(&grid(16, 8, DealiasRule::TwoThirds));
    assert_eq!(a.product(&b).unwrap_err(), Error::GridMismatch);
}

#[test]
fn surface_integrals_and_parseval() {
    let g = grid(16, 8, DealiasRule::TwoThirds);
    let (l1, l2) = (g.spec().l1, g.spec().l2);
    assert!((SurfaceField::constant(&g, 1.0).integrate() - l1 * l2).abs() < 1e-14);
    let s = SurfaceField::from_fn(&g, |x, _| (2.0 * PI * x / l1).sin());
    assert!(s.integrate().abs() < 1e-15);
    let c = SurfaceField::from_fn(&g, |_, y| 2.0 + (2.0 * PI * y / l2).cos());
    assert!((c.integrate() - 2.0 * l1 * l2).abs() < 1e-13);

    let f = random_surface(&g, 5, 7);
    let sq = f.product(&f).unwrap().integrate();
    let parseval: f64 = l1 * l2 * f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>();
    assert!((sq - parseval).abs() <= 1e-12 * parseval);
    assert!((f.sobolev_norm(0.0).powi(2) - sq).abs() <= 1e-12 * sq);
}

#[test]
fn bulk_integrals() {
    let g = grid(8, 10, DealiasRule::TwoThirds);
    let (l1, l2, b) = (g.spec().l1, g.spec().l2, g.spec().b);
    let a = l1 * l2;
    assert!((BulkField::from_profile(&g, |_| 1.0).integrate() - a * b).abs() < 1e-13);
    assert!((BulkField::from_profile(&g, |z| z).integrate() + a * b * b / 2.0).abs() < 1e-13);
    let f = BulkField::from_profile(&g, |z| (z + b).powi(2));
    assert!((f.integrate() - a * b.powi(3) / 3.0).abs() < 1e-13);
    let f = BulkField::from_profile(&g, |z| (z + b).powi(9));
    let exact = a * b.powi(10) / 10.0;
    assert!((f.integrate() - exact).abs() <= 1e-12 * exact);
}

#[test]
fn surface_sobolev_norms() {
    let g = Grid::new(GridSpec::new(1.0, 1.7, 1.0, 8, 8, 8)).unwrap();
    assert_eq!(SurfaceField::zeros(&g).sobolev_norm(1.5), 0.0);
    for s in [-0.5, 0.0, 3.5] {
        let n = SurfaceField::constant(&g, 1.0).sobolev_norm(s);
        assert!((n - 1.7f64.sqrt()).abs() < 1e-14);
    }
    let f = SurfaceField::from_fn(&g, |x, _| (2.0 * PI * x).cos());
    let expect = (1.7 / 2.0f64).sqrt() * (1.0 + 4.0 * PI * PI).sqrt();
    assert!((f.sobolev_norm(1.0) - expect).abs() < 1e-12 * expect);
}

#[test]
fn bulk_sobolev_norms() {
    let g = Grid::new(GridSpec::new(1.0, 1.0, 1.0, 8, 8, 8)).unwrap();
    assert_eq!(BulkField::zeros(&g).sobolev_norm(2).unwrap(), 0.0);
    let one = BulkField::from_profile(&g, |_| 1.0);
    assert!((one.sobolev_norm(0).unwrap() - 1.0).abs() < 1e-14);
    let z = BulkField::from_profile(&g, |z| z);
    let expect = (1.0f64 / 3.0 + 1.0).sqrt();
    assert!((z.sobolev_norm(1).unwrap() - expect).abs() < 1e-12);
    assert!(z.sobolev_norm(4).is_err());

    // Each multi-index counted once: f = cos(2πx1) has ∂1 and ∂1∂1 terms.
    let k = 2.0 * PI;
    let f = BulkField::from_fn(&g, |x, _, _| (k * x).cos());
    let expect = (0.5 * (1.0 + k * k + k.powi(4))).sqrt();
    assert!((f.sobolev_norm(2).unwrap() - expect).abs() < 1e-12 * expect);
}

#[test]
fn traces_are_stored_planes() {
    let g = grid(8, 9, DealiasRule::TwoThirds);
    let f = BulkField::from_fn(&g, |x, y, z| (x + 2.0 * y).sin() * (0.8 + z));
    assert_eq!(f.trace_top().coeffs(), f.plane(0));
    assert_eq!(f.trace_bottom().coeffs(), f.plane(8));
    assert!(f.trace_bottom().max_coeff() < 1e-15);
    assert!(f.is_hermitian(1e-14));
}

#[test]
fn bulk_product_matches_planewise_surface_product() {
    let g = grid(16, 8, DealiasRule::ThreeHalves);
    let f = BulkField::from_fn(&g, |x, y, z| (2.0 * PI * x).sin() * z + (2.0 * PI * y / 1.3).cos());
    let h = BulkField::from_fn(&g, |x, _, z| (4.0 * PI * x).cos() * z * z);
    let p = f.product(&h).unwrap();
    for iz in 0..8 {
        let a = SurfaceField::from_coeffs(&g, f.plane(iz).to_vec());
        let b = SurfaceField::from_coeffs(&g, h.plane(iz).to_vec());
        let q = a.product(&b).unwrap();
        for (x, y) in q.coeffs().iter().zip(p.plane(iz)) {
            assert!((x - y).norm() < 1e-14);
        }
    }
}
