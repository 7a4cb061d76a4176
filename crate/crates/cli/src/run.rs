//! The simulation loop and its outputs.

use crate::config::{ConfigError, Format, RunConfig};
use crate::dump::StateDump;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use surfwave_core::diagnostics::{physical_budget, History};
use surfwave_core::dynamics::{compatibility_residual, geometry_for};
use surfwave_core::{
    budget_residual, decay_fit, make_initial_data, sobolev_functionals, BudgetSample, FlowState, Physics, Stepper,
    TensionModel,
};

/// Fraction of the samples skipped before fitting decay rates.
pub const FIT_TRANSIENT: f64 = 0.2;

/// End-of-run digest written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub error: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub c0: f64,
    /// Fitted decay rate of E_phys; absent when the fit is undefined.
    pub lambda_fit: Option<f64>,
    pub lambda_r_squared: Option<f64>,
    /// Fitted decay rate of the Sobolev energy.
    pub sobolev_lambda_fit: Option<f64>,
    pub max_abs_residual: Option<f64>,
    /// max |mass − mass(0)| / mass(0).
    pub mass_drift: f64,
    pub compat_t0: f64,
    pub max_e_phys: f64,
    pub compat_iterations: usize,
}

/// Everything a run produced, kept in memory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub samples: Vec<BudgetSample>,
    pub summary: Summary,
    /// Last valid state followed by up to two earlier levels.
    pub levels: Vec<FlowState>,
    pub physics: Physics,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load restart dump: {0}")]
    Restart(String),
    /// A numerical failure; the partial run is kept for reporting.
    #[error("numerical failure: {error}")]
    Numerical {
        error: surfwave_core::Error,
        partial: Option<Box<RunOutput>>,
    },
    #[error("cannot write output: {0}")]
    Output(String),
}

impl RunError {
    /// 2 for configuration and I/O problems, 3 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical { .. } => 3,
            _ => 2,
        }
    }
}

fn numerical(error: surfwave_core::Error) -> RunError {
    RunError::Numerical { error, partial: None }
}

struct Start {
    state: FlowState,
    physics: Physics,
    history: Vec<FlowState>,
    iterations: usize,
}

fn start(cfg: &RunConfig) -> Result<Start, RunError> {
    let grid = cfg.build_grid()?;
    if let Some(path) = &cfg.initial.restart_from {
        let dump = StateDump::read(path).map_err(|e| RunError::Restart(e.to_string()))?;
        if dump.levels[0].grid().spec() != grid.spec() {
            return Err(RunError::Restart("dump grid differs from the configured grid".into()));
        }
        // Rebuild the stored fields on the configured grid object.
        let rehome = |s: &FlowState| FlowState {
            u: [0, 1, 2].map(|i| surfwave_core::BulkField::from_coeffs(&grid, s.u[i].coeffs().to_vec())),
            p: surfwave_core::BulkField::from_coeffs(&grid, s.p.coeffs().to_vec()),
            eta: surfwave_core::SurfaceField::from_coeffs(&grid, s.eta.coeffs().to_vec()),
            ctilde: surfwave_core::SurfaceField::from_coeffs(&grid, s.ctilde.coeffs().to_vec()),
            t: s.t,
        };
        let levels: Vec<FlowState> = dump.levels.iter().map(rehome).collect();
        let model = TensionModel::new(cfg.physics.tension.clone(), dump.c0).map_err(numerical)?;
        let physics = Physics::new(model, cfg.physics.gamma).map_err(numerical)?;
        return Ok(Start {
            state: levels[0].clone(),
            physics,
            history: levels[1..].to_vec(),
            iterations: 0,
        });
    }
    let init = make_initial_data(
        &cfg.initial_eta(&grid),
        &cfg.initial_ctilde(&grid),
        cfg.physics.tension.clone(),
        cfg.physics.gamma,
        cfg.initial.velocity,
    )
    .map_err(numerical)?;
    Ok(Start {
        state: init.state,
        physics: init.physics,
        history: vec![],
        iterations: init.iterations,
    })
}

fn sample(state: &FlowState, history: &History, dt: f64, physics: &Physics) -> surfwave_core::Result<BudgetSample> {
    let (pack, geom) = geometry_for(&state.eta)?;
    let mut s = physical_budget(state, &pack, &geom, physics)?;
    let sob = sobolev_functionals(state, history, dt, physics.model.c0())?;
    if sob.complete {
        s.e_sob = sob.energy;
        s.d_sob = sob.dissipation;
    }
    s.compat = compatibility_residual(state, physics)?;
    Ok(s)
}

/// Fills the residual column wherever a sample has equally spaced
/// neighbours.
pub fn fill_residuals(samples: &mut [BudgetSample]) {
    for j in 1..samples.len().saturating_sub(1) {
        samples[j].residual = match budget_residual(&samples[j - 1..=j + 1]) {
            Ok(r) => r[0].1,
            Err(_) => f64::NAN,
        };
    }
}

fn summarize(samples: &[BudgetSample], steps: usize, c0: f64, iterations: usize, error: Option<String>) -> Summary {
    let fit = decay_fit(&samples.iter().map(|s| (s.t, s.e_phys)).collect::<Vec<_>>(), FIT_TRANSIENT).ok();
    let sob: Vec<(f64, f64)> = samples.iter().filter(|s| s.e_sob.is_finite()).map(|s| (s.t, s.e_sob)).collect();
    let sob_fit = decay_fit(&sob, FIT_TRANSIENT).ok();
    let residuals: Vec<f64> = samples.iter().map(|s| s.residual).filter(|r| r.is_finite()).collect();
    let m0 = samples.first().map_or(f64::NAN, |s| s.mass);
    Summary {
        status: if error.is_some() { "aborted".into() } else { "completed".into() },
        error,
        steps,
        t_final: samples.last().map_or(0.0, |s| s.t),
        c0,
        lambda_fit: fit.map(|f| f.lambda),
        lambda_r_squared: fit.map(|f| f.r_squared),
        sobolev_lambda_fit: sob_fit.map(|f| f.lambda),
        max_abs_residual: (!residuals.is_empty()).then(|| residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))),
        mass_drift: samples.iter().map(|s| ((s.mass - m0) / m0).abs()).fold(0.0, f64::max),
        compat_t0: samples.first().map_or(f64::NAN, |s| s.compat),
        max_e_phys: samples.iter().map(|s| s.e_phys).fold(f64::NEG_INFINITY, f64::max),
        compat_iterations: iterations,
    }
}

/// Runs `cfg` in memory. Deterministic given the configuration.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let Start {
        mut state,
        physics,
        history: stored,
        iterations,
    } = start(cfg)?;
    let dt = cfg.stepping.dt;
    let span = cfg.stepping.t_end - state.t;
    let steps = (span / dt).round();
    if !(steps >= 0.0) || (steps * dt - span).abs() > 1e-9 * cfg.stepping.t_end.max(1.0) {
        return Err(ConfigError::Invalid(format!(
            "t_end - t_start = {span} is not a whole number of steps of {dt}"
        ))
        .into());
    }
    let steps = steps as usize;
    let mut stepper = Stepper::new(state.grid(), physics.clone(), cfg.stepping.scheme).with_corrector(cfg.stepping.corrector);
    let mut history = History::new();
    for level in stored.iter().rev() {
        history.push(level);
    }
    if let Some(prev) = stored.first() {
        stepper.set_previous(Some(prev.clone())).map_err(numerical)?;
    }
    let c0 = physics.model.c0();
    let mut samples = vec![];
    let mut failure = None;
    let mut done = 0;
    for i in 0..=steps {
        if i % cfg.stepping.stride == 0 || i == steps {
            match sample(&state, &history, dt, &physics) {
                Ok(s) => samples.push(s),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if i == steps {
            break;
        }
        match stepper.step(&state, dt) {
            Ok(next) => {
                history.push(&state);
                state = next;
                done += 1;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    fill_residuals(&mut samples);
    let mut levels = vec![state];
    levels.extend(history.levels().iter().cloned());
    let summary = summarize(&samples, done, c0, iterations, failure.as_ref().map(|e| e.to_string()));
    let out = RunOutput {
        samples,
        summary,
        levels,
        physics,
    };
    match failure {
        Some(error) => Err(RunError::Numerical {
            error,
            partial: Some(Box::new(out)),
        }),
        None => Ok(out),
    }
}

pub const CSV_HEADER: &str = "t,E_phys,D_phys,mass,E_sob,D_sob,eta_mean,compat,residual";

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

/// One line per sample, 17 significant digits.
pub fn write_csv(samples: &[BudgetSample], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in samples {
        let row = [s.t, s.e_phys, s.d_phys, s.mass, s.e_sob, s.d_sob, s.eta_mean, s.compat, s.residual];
        writeln!(w, "{}", row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","))?;
    }
    Ok(())
}

/// Writes the requested formats of `out` into `dir`.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Output(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    if cfg.output.formats.contains(&Format::Csv) {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("budget.csv")).map_err(io)?);
        write_csv(&out.samples, &mut f).map_err(io)?;
        f.flush().map_err(io)?;
    }
    if cfg.output.formats.contains(&Format::Summary) {
        let text = serde_json::to_string_pretty(&out.summary).map_err(|e| RunError::Output(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), text + "\n").map_err(io)?;
    }
    if cfg.output.formats.contains(&Format::Dump) {
        let dump = StateDump {
            levels: out.levels.clone(),
            c0: out.physics.model.c0(),
            tension: cfg.physics.tension.clone(),
            gamma: cfg.physics.gamma,
            scheme: cfg.stepping.scheme,
        };
        dump.write(&dir.join("state.bin")).map_err(|e| RunError::Output(e.to_string()))?;
    }
    Ok(())
}

/// Loads, runs and writes; returns the process exit code.
pub fn run(config: &Path, output_dir: Option<&Path>) -> i32 {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let dir = output_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.directory.clone());
    match simulate(&cfg) {
        Ok(out) => match write_outputs(&cfg, &out, &dir) {
            Ok(()) => {
                print_summary(&out.summary);
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(RunError::Numerical { error, partial }) => {
            eprintln!("error: numerical failure: {error}");
            if let Some(out) = partial {
                if let Err(e) = write_outputs(&cfg, &out, &dir) {
                    eprintln!("error: {e}");
                }
                eprintln!("last valid state written to {}", dir.join("state.bin").display());
            }
            3
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn print_summary(s: &Summary) {
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.6e}"));
    println!("steps            {}", s.steps);
    println!("t_final          {}", s.t_final);
    println!("lambda_fit       {} (r^2 {})", opt(s.lambda_fit), opt(s.lambda_r_squared));
    println!("max |residual|   {}", opt(s.max_abs_residual));
    println!("mass drift       {:.6e}", s.mass_drift);
    println!("compat at t = 0  {:.6e}", s.compat_t0);
}
