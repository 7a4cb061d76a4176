//! Physical-domain mesh export for external plotting.

use std::io::Write;
use std::path::Path;
use surfwave_core::{poisson_extend, FlowState};

pub const THETA_HEADER: &str = "i1,i2,iz,x1,x2,x3,u1,u2,u3";

/// One row per native grid point and Chebyshev node: the image Θ(x, z)
/// of the flat point and the velocity carried there.
pub fn write_theta(state: &FlowState, w: &mut impl Write) -> std::io::Result<()> {
    let grid = state.grid();
    let spec = grid.spec();
    let (n1, n2) = (grid.n1(), grid.n2());
    let plane = n1 * n2;
    let bar = poisson_extend(&state.eta).values();
    let u: Vec<Vec<f64>> = state.u.iter().map(|f| f.values()).collect();
    writeln!(w, "{THETA_HEADER}")?;
    for (iz, &z) in grid.cheb().nodes().iter().enumerate() {
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let p = iz * plane + i1 * n2 + i2;
                let x1 = i1 as f64 * spec.l1 / n1 as f64;
                let x2 = i2 as f64 * spec.l2 / n2 as f64;
                let x3 = z + bar[p] * (1.0 + z / spec.b);
                writeln!(
                    w,
                    "{i1},{i2},{iz},{x1:.16e},{x2:.16e},{x3:.16e},{:.16e},{:.16e},{:.16e}",
                    u[0][p], u[1][p], u[2][p]
                )?;
            }
        }
    }
    Ok(())
}

/// Reads the current level of a dump and writes its mesh to `output`.
pub fn export_theta(dump: &Path, output: &Path) -> i32 {
    let state = match crate::dump::StateDump::read(dump) {
        Ok(d) => d.levels.into_iter().next().expect("dumps hold at least one level"),
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = std::fs::File::create(output).and_then(|f| {
        let mut w = std::io::BufWriter::new(f);
        write_theta(&state, &mut w)?;
        w.flush()
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", output.display());
            2
        }
    }
}
