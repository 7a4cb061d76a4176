use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use surfwave_core::diagnostics::{physical_budget_at, surfactant_mass, DEFAULT_TRANSIENT};
use surfwave_core::surface_ops::build_geometry;
use surfwave_core::{
    decay_fit, equilibrium_concentration, mean_c_check, sobolev_functionals, BulkField, DealiasRule, FlowState, Grid,
    GridSpec, History, Physics, SurfaceField, TensionLaw, TensionModel,
};

fn grid(n: usize, nz: usize) -> Arc<Grid> {
    Grid::new(GridSpec::new(2.0 * PI, 2.0 * PI, 1.0, n, n, nz).with_dealias(DealiasRule::ThreeHalves)).unwrap()
}

fn physics(c0: f64) -> Physics {
    let law = TensionLaw::Exponential { sigma_s: 1.2, beta: 0.4 };
    Physics::new(TensionModel::new(law, c0).unwrap(), 0.3).unwrap()
}

fn area(g: &Grid) -> f64 {
    g.spec().area()
}

#[test]
fn equilibrium_budget() {
    let g = grid(16, 10);
    let ph = physics(0.7);
    let s = FlowState::equilibrium(&g, 0.7);
    let b = physical_budget_at(&s, &ph).unwrap();
    assert_eq!(b.e_phys, 0.0);
    assert_eq!(b.d_phys, 0.0);
    assert!((b.mass - 0.7 * area(&g)).abs() < 1e-13 * b.mass);
    assert_eq!(b.eta_mean, 0.0);
}

#[test]
fn concentration_energy_is_entropy_excess() {
    // ∫ ξ(c̃) − σ(c₀)|Σ| by an independent 1-D midpoint rule, using
    // ξ(x) − σ(r) = ∫_r^x (x − z)(−σ′(z)/z) dz.
    let g = grid(32, 8);
    let c0 = 0.7;
    let ph = physics(c0);
    let (sigma_s, beta) = (1.2, 0.4);
    let sigma_p = |z: f64| -sigma_s * beta * (-beta * z).exp();
    let excess = |x: f64| {
        let n = 4000;
        let h = (x - c0) / n as f64;
        (0..n).map(|i| c0 + (i as f64 + 0.5) * h).map(|z| (x - z) * (-sigma_p(z) / z) * h).sum::<f64>()
    };
    for delta in [0.2, 0.02] {
        let mut s = FlowState::equilibrium(&g, c0);
        s.ctilde = SurfaceField::from_fn(&g, |x, _| c0 * (1.0 + delta * x.cos()));
        let e = physical_budget_at(&s, &ph).unwrap().e_phys;
        let m = 2000;
        let oracle = (0..m)
            .map(|i| excess(c0 * (1.0 + delta * (2.0 * PI * i as f64 / m as f64).cos())))
            .sum::<f64>()
            / m as f64
            * area(&g);
        assert!((e - oracle).abs() < 1e-8 * oracle, "delta {delta}: {e} vs {oracle}");
        // Quadratic approximation ξ″(c₀)/2 ∫(c̃ − c₀)².
        let quad = -sigma_p(c0) / c0 / 2.0 * (c0 * delta).powi(2) / 2.0 * area(&g);
        assert!((e - quad).abs() < 2.0 * delta * quad, "delta {delta}: {e} vs {quad}");
    }
}

#[test]
fn shear_dissipation_matches_closed_form() {
    // u₁ = a(x₃ + b) + a cos x₂: |𝔻u|² = 2a²(1 + sin²x₂) on η = 0.
    let g = grid(16, 12);
    let c0 = 0.7;
    let ph = physics(c0);
    let a = 1e-2;
    let mut s = FlowState::equilibrium(&g, c0);
    s.u[0] = BulkField::from_fn(&g, |_, y, z| a * (z + 1.0) + a * y.cos());
    let b = physical_budget_at(&s, &ph).unwrap();
    let oracle = a * a * (1.0 + 0.5) * area(&g) * 1.0;
    assert!((b.d_phys - oracle).abs() < 1e-12, "{} vs {oracle}", b.d_phys);
    // Kinetic part: ½∫(a(z+1) + a cos y)² = a²/2 (1/3 + 1/2)|Σ|.
    let kinetic = a * a / 2.0 * (1.0 / 3.0 + 0.5) * area(&g);
    assert!((b.e_phys - kinetic).abs() < 1e-14, "{} vs {kinetic}", b.e_phys);
}

#[test]
fn budget_is_nonnegative_on_random_states() {
    let g = grid(16, 10);
    let c0 = 0.7;
    let ph = physics(c0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let amp: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut s = FlowState::equilibrium(&g, c0);
        s.u[0] = BulkField::from_fn(&g, |x, y, z| 0.1 * amp[0] * (x + 2.0 * y).sin() * z);
        s.u[2] = BulkField::from_fn(&g, |x, _, z| 0.1 * amp[1] * x.cos() * (z * z + z));
        s.eta = SurfaceField::from_fn(&g, |x, y| 0.05 * (amp[2] * x.cos() + amp[3] * (x - y).sin()));
        s.ctilde = SurfaceField::from_fn(&g, |x, y| c0 * (1.0 + 0.2 * (amp[4] * y.sin() + amp[5] * (x + y).cos())));
        let b = physical_budget_at(&s, &ph).unwrap();
        assert!(b.e_phys >= 0.0 && b.d_phys >= -1e-10, "{b:?}");
    }
}

#[test]
fn sobolev_functionals_examples() {
    let g = grid(16, 10);
    let c0 = 0.7;
    let eq = FlowState::equilibrium(&g, c0);
    let mut hist = History::new();
    hist.push(&eq);
    hist.push(&eq);
    let v = sobolev_functionals(&eq, &hist, 0.01, c0).unwrap();
    assert_eq!((v.energy, v.dissipation, v.complete), (0.0, 0.0, true));

    // η = ε cos 2x₁ held still: 𝓔 = ‖η‖²_{H³} = (1 + 4)³ ε²/2 |Σ|.
    let eps = 1e-2;
    let mut s = eq.clone();
    s.eta = SurfaceField::from_fn(&g, |x, _| eps * (2.0 * x).cos());
    let mut hist = History::new();
    hist.push(&s);
    hist.push(&s);
    let v = sobolev_functionals(&s, &hist, 0.01, c0).unwrap();
    let e = 125.0 * eps * eps / 2.0 * area(&g);
    assert!((v.energy - e).abs() < 1e-12 * e, "{} vs {e}", v.energy);
    let d = 5f64.powf(3.5) * eps * eps / 2.0 * area(&g);
    assert!((v.dissipation - d).abs() < 1e-12 * d);

    // Quadratic homogeneity with a moving history.
    let base = |t: f64| {
        let mut s = eq.clone();
        s.u[1] = BulkField::from_fn(&g, |x, _, z| (1.0 + t) * x.sin() * z * (z + 1.0));
        s.p = BulkField::from_fn(&g, |_, y, z| (1.0 - t) * y.cos() + z);
        s.eta = SurfaceField::from_fn(&g, |x, y| (1.0 + t * t) * (x + y).cos());
        s.ctilde = SurfaceField::from_fn(&g, |x, _| c0 + (1.0 + 2.0 * t) * x.sin());
        s
    };
    let dt = 0.05;
    let value = |eps: f64| {
        let mut h = History::new();
        h.push(&base(0.0).scaled_perturbation(c0, eps));
        h.push(&base(dt).scaled_perturbation(c0, eps));
        let v = sobolev_functionals(&base(2.0 * dt).scaled_perturbation(c0, eps), &h, dt, c0).unwrap();
        (v.energy / (eps * eps), v.dissipation / (eps * eps))
    };
    let (a, b) = (value(1e-2), value(1e-4));
    assert!((a.0 - b.0).abs() < 1e-8 * a.0 && (a.1 - b.1).abs() < 1e-8 * a.1);
}

#[test]
fn sobolev_functionals_flag_missing_history() {
    let g = grid(16, 10);
    let eq = FlowState::equilibrium(&g, 0.7);
    let mut h = History::new();
    assert!(!sobolev_functionals(&eq, &h, 0.1, 0.7).unwrap().complete);
    h.push(&eq);
    assert!(!sobolev_functionals(&eq, &h, 0.1, 0.7).unwrap().complete);
    h.push(&eq);
    h.push(&eq);
    assert_eq!(h.len(), 2);
}

#[test]
fn decay_fit_with_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let series: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let t = i as f64 * 0.025;
            (t, 3.0 * (-2.0 * t).exp() * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let f = decay_fit(&series, DEFAULT_TRANSIENT).unwrap();
    assert!((f.lambda - 2.0).abs() < 0.05, "{f:?}");
    assert!(f.r_squared > 0.99);
}

#[test]
fn mean_concentration_identity() {
    let g = grid(32, 8);
    let eq = FlowState::equilibrium(&g, 0.7);
    let m = mean_c_check(&eq, &build_geometry(&eq.eta).unwrap(), 0.7);
    assert_eq!((m.integral, m.identity), (0.0, 0.0));

    let value = |eps: f64| {
        let mut s = eq.clone();
        s.eta = SurfaceField::from_fn(&g, |x, _| eps * (2.0 * x).cos());
        s.ctilde = SurfaceField::constant(&g, 0.7);
        let c0 = equilibrium_concentration(&s.eta, &s.ctilde).unwrap();
        let geom = build_geometry(&s.eta).unwrap();
        assert!((surfactant_mass(&s, &geom) - c0 * area(&g)).abs() < 1e-13);
        let m = mean_c_check(&s, &geom, c0);
        assert!((m.integral - m.identity).abs() < 1e-9 * m.integral.max(1e-300), "{m:?}");
        m.integral
    };
    let eps = 1e-2;
    let v = value(eps);
    // Small-slope expansion: 0.7 ε² k² |Σ| / 4 with k = 2.
    let approx = 0.7 * eps * eps * 4.0 * area(&g) / 4.0;
    assert!((v - approx).abs() < 1e-3 * approx, "{v} vs {approx}");
    let ratio = v / value(eps / 2.0);
    assert!((ratio - 4.0).abs() < 1e-3, "{ratio}");
}
