//! Pseudo-spectral simulation of a viscous fluid layer with a free surface
//! carrying a diffusing surfactant, solved in flattened coordinates on the
//! fixed strip `Σ × (-b, 0)`.

pub mod checks;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linear_core;
mod quad;
pub mod spectral;
pub mod surface_ops;
pub mod tension;

pub use error::{Error, Result};
pub use spectral::{Band, BulkField, Chebyshev, DealiasRule, Grid, GridSpec, SurfaceField, C64};
pub use tension::{equilibrium_concentration, TensionLaw, TensionModel};
pub use surface_ops::{build_geometry, div_gamma, grad_gamma, ibp_residual, laplace_gamma, SurfaceGeometry};
pub use geometry::{apply_cal_a_grad, build_geometry_pack, poisson_extend, GeometryPack};
pub use linear_core::{LinearFields, LinearParams, LinearRhs, LinearSolver, ModeSystem, OperatorKind};
pub use dynamics::{eval_g, make_initial_data, FlowState, ForcingPack, InitialData, InitialVelocity, Physics, Scheme, Stepper};
pub use diagnostics::{budget_residual, decay_fit, mean_c_check, physical_budget, sobolev_functionals, BudgetSample, DecayFit, History, SobolevValues};
