use std::f64::consts::PI;
use std::sync::Arc;
use surfwave_core::dynamics::{compatibility_residual, eval_g, forcing_block_norms, step};
use surfwave_core::surface_ops::build_geometry;
use surfwave_core::{
    build_geometry_pack, div_gamma, laplace_gamma, make_initial_data, poisson_extend, Band, BulkField, DealiasRule,
    FlowState, Grid, GridSpec, InitialVelocity, Physics, Scheme, Stepper, SurfaceField, TensionLaw, TensionModel,
};

fn grid(n: usize, nz: usize) -> Arc<Grid> {
    Grid::new(GridSpec::new(2.0 * PI, 2.0 * PI, 1.0, n, n, nz).with_dealias(DealiasRule::ThreeHalves)).unwrap()
}

fn physics(c0: f64) -> Physics {
    let law = TensionLaw::Exponential { sigma_s: 1.2, beta: 0.4 };
    Physics::new(TensionModel::new(law, c0).unwrap(), 0.3).unwrap()
}

/// Smooth non-equilibrium state with amplitude `eps`.
fn sample_state(g: &Arc<Grid>, eps: f64, c0: f64) -> FlowState {
    let u = [
        BulkField::from_fn(g, |x, y, z| eps * (z + 1.0) * (x + 0.3).cos() * (0.5 + y.sin()) * (0.7 * z).exp()),
        BulkField::from_fn(g, |x, y, z| eps * (z + 1.0) * z * (x - y).sin()),
        BulkField::from_fn(g, |x, y, z| eps * (z + 1.0).powi(2) * (y + 2.0 * x).cos() * (1.0 + 0.3 * z)),
    ]
    .map(|f| f.dealiased());
    FlowState {
        u,
        p: BulkField::from_fn(g, |x, y, z| eps * ((x + z).cos() + 0.4 * (2.0 * y).sin())).dealiased(),
        eta: SurfaceField::from_fn(g, |x, y| eps * (x.cos() * y.sin() + 0.5 * (2.0 * x - y).sin())).dealiased(),
        ctilde: SurfaceField::from_fn(g, |x, y| c0 * (1.0 + eps * ((x + y).cos() - 0.5 * (2.0 * y).sin()))).dealiased(),
        t: 0.0,
    }
}

fn full(g: &Arc<Grid>, v: &[f64]) -> BulkField {
    BulkField::from_eval(g, v, Band::Full)
}

fn rel_diff_bulk(a: &BulkField, b: &BulkField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.max_coeff() / a.max_coeff().max(b.max_coeff()).max(1e-300)
}

fn rel_diff_surf(a: &SurfaceField, b: &SurfaceField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.max_coeff() / a.max_coeff().max(b.max_coeff()).max(1e-300)
}

#[test]
fn forcing_equals_linear_minus_geometric_operator() {
    let g = grid(48, 24);
    let c0 = 0.8;
    let ph = physics(c0);
    let s = sample_state(&g, 0.05, c0);
    let pack = build_geometry_pack(&s.eta).unwrap();
    let geom = build_geometry(&s.eta).unwrap();
    let forcing = eval_g(&s, &pack, &geom, &ph).unwrap();
    let e = g.eval_len();
    let nz = g.nz();
    let len = e * nz;

    // ∇_𝒜u_j for each component, pointwise.
    let grads: Vec<[Vec<f64>; 3]> = s.u.iter().map(|f| pack.cal_a_grad_eval(f)).collect();
    let pv = s.p.eval();
    let uv: Vec<Vec<f64>> = s.u.iter().map(|f| f.eval()).collect();

    // S_𝒜 = pI − 𝔻_𝒜u and its 𝒜-divergence.
    let mut div_s = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for i in 0..3 {
        for j in 0..3 {
            let sij: Vec<f64> = (0..len)
                .map(|q| if i == j { pv[q] } else { 0.0 } - grads[j][i][q] - grads[i][j][q])
                .collect();
            let gs = pack.cal_a_grad_eval(&full(&g, &sij));
            for q in 0..len {
                div_s[i][q] += gs[j][q];
            }
        }
    }
    let div_a: Vec<f64> = (0..len).map(|q| grads[0][0][q] + grads[1][1][q] + grads[2][2][q]).collect();
    let grad_div = pack.cal_a_grad_eval(&full(&g, &div_a));

    let [h1, h2] = geom.grad_eta_eval();
    let flux: Vec<f64> = (0..e).map(|q| uv[2][q] - h1[q] * uv[0][q] - h2[q] * uv[1][q]).collect();
    let eta_t_bar = poisson_extend(&SurfaceField::from_eval(&g, &flux, Band::Retained)).eval();
    let k = pack.k_eval();
    let bt = pack.b_tilde_nodes();
    let d3p = s.p.deriv_vertical(1).unwrap().eval();

    for i in 0..3 {
        let lap = {
            let mut l = s.u[i].deriv_horizontal(1, 2).unwrap();
            l.axpy(1.0, &s.u[i].deriv_horizontal(2, 2).unwrap());
            l.axpy(1.0, &s.u[i].deriv_vertical(2).unwrap());
            l.eval()
        };
        let dp = match i {
            0 => s.p.deriv_horizontal(1, 1).unwrap().eval(),
            1 => s.p.deriv_horizontal(2, 1).unwrap().eval(),
            _ => d3p.clone(),
        };
        let d3u = s.u[i].deriv_vertical(1).unwrap().eval();
        let v: Vec<f64> = (0..len)
            .map(|q| {
                let adv = uv[0][q] * grads[i][0][q] + uv[1][q] * grads[i][1][q] + uv[2][q] * grads[i][2][q];
                let dudt = eta_t_bar[q] * bt[q / e] * k[q] * d3u[q] - adv - div_s[i][q];
                dudt - lap[q] + dp[q] - grad_div[i][q]
            })
            .collect();
        let other = BulkField::from_eval(&g, &v, Band::Retained);
        let r = rel_diff_bulk(&forcing.g1[i], &other);
        assert!(r < 1e-9, "G1 component {i}: relative mismatch {r}");
    }

    // div u − div_𝒜u.
    let mut flat_div = s.u[0].deriv_horizontal(1, 1).unwrap();
    flat_div.axpy(1.0, &s.u[1].deriv_horizontal(2, 1).unwrap());
    flat_div.axpy(1.0, &s.u[2].deriv_vertical(1).unwrap());
    let fd = flat_div.eval();
    let g2: Vec<f64> = (0..len).map(|q| fd[q] - div_a[q]).collect();
    let r = rel_diff_bulk(&forcing.g2, &BulkField::from_eval(&g, &g2, Band::Retained));
    assert!(r < 1e-12, "G2 mismatch {r}");

    // Stress balance on Σ (top plane = first e entries).
    let model = &ph.model;
    let c = s.c(c0);
    let dc = [c.deriv(1, 1).unwrap().eval(), c.deriv(2, 1).unwrap().eval()];
    let grad_gamma_c = geom.grad_gamma_eval(&s.ctilde).unwrap();
    let ct = s.ctilde.eval();
    let ev = s.eta.eval();
    let lap_eta = s.eta.laplacian().eval();
    let du: Vec<[Vec<f64>; 3]> = s
        .u
        .iter()
        .map(|f| {
            [
                f.deriv_horizontal(1, 1).unwrap().eval(),
                f.deriv_horizontal(2, 1).unwrap().eval(),
                f.deriv_vertical(1).unwrap().eval(),
            ]
        })
        .collect();
    let q_area = geom.area_eval();
    let curv = geom.curvature_eval();
    let mut g3 = [vec![0.0; e], vec![0.0; e], vec![0.0; e]];
    for q in 0..e {
        let n = [-h1[q], -h2[q], 1.0];
        for i in 0..3 {
            let e3 = if i == 2 { 1.0 } else { 0.0 };
            let flat_stress = if i == 2 { pv[q] } else { 0.0 } - (du[i][2][q] + du[2][i][q]);
            let dc_i = if i < 2 { dc[i][q] } else { 0.0 };
            let linear = flat_stress - ev[q] * e3 + model.sigma0() * lap_eta[q] * e3 + model.sigma0_prime() * dc_i;
            let mut geometric = 0.0;
            for j in 0..3 {
                let sij = if i == j { pv[q] } else { 0.0 } - grads[j][i][q] - grads[i][j][q];
                geometric += sij * n[j];
            }
            geometric += -ev[q] * n[i]
                + model.sigma(ct[q]) * curv[q] * n[i]
                + q_area[q] * model.sigma_prime(ct[q]) * grad_gamma_c[i][q];
            g3[i][q] = linear - geometric;
        }
    }
    for i in 0..3 {
        let r = rel_diff_surf(&forcing.g3[i], &SurfaceField::from_eval(&g, &g3[i], Band::Retained));
        assert!(r < 1e-12, "G3 component {i}: mismatch {r}");
    }

    // ∂_tη − u₃ with ∂_tη = u·𝓝.
    let g4: Vec<f64> = (0..e).map(|q| flux[q] - uv[2][q]).collect();
    let r = rel_diff_surf(&forcing.g4, &SurfaceField::from_eval(&g, &g4, Band::Retained));
    assert!(r < 1e-12, "G4 mismatch {r}");

    // ∂_tc + c₀div_*u − γΔ_*c with ∂_tc from the transport equation.
    let traces: [SurfaceField; 3] = [0, 1, 2].map(|i| s.u[i].trace_top());
    let div_g = div_gamma(&traces, &geom).unwrap().eval();
    let lap_g = laplace_gamma(&c, &geom).unwrap().eval();
    let lap_c = c.laplacian().eval();
    let cv = c.eval();
    let g5: Vec<f64> = (0..e)
        .map(|q| {
            let dcdt = -(uv[0][q] * dc[0][q] + uv[1][q] * dc[1][q]) - (cv[q] + c0) * div_g[q] + ph.gamma * lap_g[q];
            dcdt + c0 * (du[0][0][q] + du[1][1][q]) - ph.gamma * lap_c[q]
        })
        .collect();
    let r = rel_diff_surf(&forcing.g5, &SurfaceField::from_eval(&g, &g5, Band::Retained));
    assert!(r < 1e-10, "G5 mismatch {r}");
}

#[test]
fn forcing_blocks_are_quadratic() {
    let g = grid(16, 12);
    let c0 = 1.0;
    let ph = physics(c0);
    let reference = sample_state(&g, 1.0, c0);
    let a = forcing_block_norms(&reference.scaled_perturbation(c0, 1e-2), &ph).unwrap();
    let b = forcing_block_norms(&reference.scaled_perturbation(c0, 5e-3), &ph).unwrap();
    for ((name, na), (_, nb)) in a.iter().zip(&b) {
        let ratio = na / nb;
        assert!((3.6..=4.4).contains(&ratio), "{name}: ratio {ratio}");
    }
}

#[test]
fn marangoni_mismatch_of_zero_velocity_matches_linearization() {
    let g = grid(16, 12);
    let c0 = 0.8;
    let delta = 0.01;
    let ctilde = SurfaceField::from_fn(&g, |x, _| c0 * (1.0 + delta * x.cos()));
    let law = TensionLaw::Exponential { sigma_s: 1.2, beta: 0.4 };
    let init = make_initial_data(&SurfaceField::zeros(&g), &ctilde, law, 0.3, InitialVelocity::Zero).unwrap();
    let r = compatibility_residual(&init.state, &init.physics).unwrap();
    // ‖σ′(c₀) c₀ δ sin x‖ over the 2π × 2π torus.
    let expected = init.physics.model.sigma0_prime().abs() * c0 * delta * (2.0 * PI * PI).sqrt();
    assert!((r - expected).abs() < 2e-2 * expected, "{r} vs {expected}");
}

#[test]
fn stokes_compatible_velocity_satisfies_compatibility() {
    let g = grid(16, 16);
    let c0 = 0.8;
    let eta = SurfaceField::from_fn(&g, |x, y| 0.02 * (x.cos() + (x + y).sin()));
    let ctilde = SurfaceField::from_fn(&g, |x, y| c0 * (1.0 + 0.01 * (x.cos() + 0.5 * y.sin())));
    let law = TensionLaw::Exponential { sigma_s: 1.2, beta: 0.4 };
    let init = make_initial_data(&eta, &ctilde, law, 0.3, InitialVelocity::StokesCompatible).unwrap();
    assert!(init.iterations > 1 && init.iterations < 50);
    let r = compatibility_residual(&init.state, &init.physics).unwrap();
    assert!(r < 1e-8, "residual {r}");
    assert!(init.state.eta.mean().abs() < 1e-15);
}

#[test]
fn equilibrium_survives_many_steps() {
    let g = grid(8, 8);
    let ph = physics(0.8);
    let mut stepper = Stepper::new(&g, ph.clone(), Scheme::Imex1);
    let mut s = FlowState::equilibrium(&g, 0.8);
    for _ in 0..50 {
        s = stepper.step(&s, 1e-2).unwrap();
    }
    assert!(s.u.iter().all(|f| f.max_coeff() <= 1e-12));
    assert!((s.ctilde.coeffs()[0].re - 0.8).abs() <= 1e-12);
}

fn terminal_state(dt: f64, scheme: Scheme) -> FlowState {
    let g = grid(16, 12);
    let c0 = 0.8;
    let ph = physics(c0);
    let mut s = sample_state(&g, 0.02, c0);
    s.eta.coeffs_mut()[0] = Default::default();
    let mut stepper = Stepper::new(&g, ph, scheme);
    let steps = (0.2 / dt).round() as usize;
    for _ in 0..steps {
        s = stepper.step(&s, dt).unwrap();
        assert!(s.eta.mean().abs() < 1e-14);
    }
    s
}

fn distance(a: &FlowState, b: &FlowState) -> f64 {
    let mut d = 0.0f64;
    for i in 0..3 {
        d = d.max(rel_abs(&a.u[i], &b.u[i]));
    }
    let mut e = a.eta.clone();
    e.axpy(-1.0, &b.eta);
    let mut c = a.ctilde.clone();
    c.axpy(-1.0, &b.ctilde);
    d.max(e.max_coeff()).max(c.max_coeff())
}

fn rel_abs(a: &BulkField, b: &BulkField) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.max_coeff()
}

#[test]
fn time_refinement_converges_at_scheme_order() {
    let s1 = terminal_state(0.02, Scheme::Imex1);
    let s2 = terminal_state(0.01, Scheme::Imex1);
    let s3 = terminal_state(0.005, Scheme::Imex1);
    let ratio = distance(&s1, &s2) / distance(&s2, &s3);
    assert!((ratio - 2.0).abs() < 0.3, "first-order ratio {ratio}");

    let b1 = terminal_state(0.02, Scheme::ImexBdf2);
    let b2 = terminal_state(0.01, Scheme::ImexBdf2);
    let b3 = terminal_state(0.005, Scheme::ImexBdf2);
    let ratio = distance(&b1, &b2) / distance(&b2, &b3);
    assert!(ratio > 3.2, "two-level ratio {ratio}");
}

#[test]
fn single_step_helper_matches_stepper() {
    let g = grid(8, 8);
    let ph = physics(0.8);
    let s = sample_state(&g, 0.01, 0.8);
    let a = step(&s, 1e-2, &ph).unwrap();
    let b = Stepper::new(&g, ph, Scheme::Imex1).step(&s, 1e-2).unwrap();
    assert_eq!(a.eta.coeffs(), b.eta.coeffs());
}
