//! State dumps: an 8-byte magic, the header length as a little-endian u64,
//! a JSON header, then every array as little-endian 8-byte floats in header
//! order. Complex coefficients are stored as (re, im) pairs.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use surfwave_core::{BulkField, FlowState, Grid, GridSpec, Scheme, SurfaceField, TensionLaw, C64};

pub const MAGIC: &[u8; 8] = b"SURFWAVE";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayInfo {
    pub name: String,
    /// Number of f64 values.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub version: u32,
    pub grid: GridSpec,
    pub tension: TensionLaw,
    pub gamma: f64,
    pub scheme: Scheme,
    /// Levels stored: the current state first, then earlier ones.
    pub levels: usize,
    pub arrays: Vec<ArrayInfo>,
}

/// A state together with up to two earlier levels and the constants needed
/// to continue the run. Times and c₀ travel in the binary section so they
/// round-trip exactly.
#[derive(Clone, Debug)]
pub struct StateDump {
    pub levels: Vec<FlowState>,
    pub c0: f64,
    pub tension: TensionLaw,
    pub gamma: f64,
    pub scheme: Scheme,
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a state dump: {0}")]
    Format(String),
}

const FIELDS: [&str; 6] = ["u1", "u2", "u3", "p", "eta", "ctilde"];

fn push_complex(out: &mut Vec<f64>, c: &[C64]) {
    for z in c {
        out.push(z.re);
        out.push(z.im);
    }
}

impl StateDump {
    pub fn write(&self, path: &Path) -> Result<(), DumpError> {
        let mut arrays = vec![];
        let mut data: Vec<Vec<f64>> = vec![];
        data.push(vec![self.c0]);
        arrays.push(ArrayInfo { name: "c0".into(), len: 1 });
        data.push(self.levels.iter().map(|s| s.t).collect());
        arrays.push(ArrayInfo {
            name: "t".into(),
            len: self.levels.len(),
        });
        for (l, s) in self.levels.iter().enumerate() {
            let parts: [&[C64]; 6] = [
                s.u[0].coeffs(),
                s.u[1].coeffs(),
                s.u[2].coeffs(),
                s.p.coeffs(),
                s.eta.coeffs(),
                s.ctilde.coeffs(),
            ];
            for (name, c) in FIELDS.iter().zip(parts) {
                let mut v = Vec::with_capacity(2 * c.len());
                push_complex(&mut v, c);
                arrays.push(ArrayInfo {
                    name: format!("level{l}.{name}"),
                    len: v.len(),
                });
                data.push(v);
            }
        }
        let header = Header {
            version: VERSION,
            grid: self.levels[0].grid().spec().clone(),
            tension: self.tension.clone(),
            gamma: self.gamma,
            scheme: self.scheme,
            levels: self.levels.len(),
            arrays,
        };
        let json = serde_json::to_vec(&header).map_err(|e| DumpError::Format(e.to_string()))?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in data {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump written by [`StateDump::write`], rebuilding the grid.
    pub fn read(path: &Path) -> Result<Self, DumpError> {
        let mut bytes = vec![];
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let fail = |m: &str| DumpError::Format(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(fail("bad magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| fail("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| DumpError::Format(e.to_string()))?;
        if header.version != VERSION {
            return Err(fail("unsupported version"));
        }
        let grid = Grid::new(header.grid.clone()).map_err(|e| DumpError::Format(e.to_string()))?;
        let mut offset = 16 + hlen;
        let mut arrays = std::collections::HashMap::new();
        for a in &header.arrays {
            let end = offset + 8 * a.len;
            let raw = bytes.get(offset..end).ok_or_else(|| fail("truncated data"))?;
            let v: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            arrays.insert(a.name.clone(), v);
            offset = end;
        }
        if offset != bytes.len() {
            return Err(fail("trailing bytes"));
        }
        let get = |name: &str| arrays.get(name).ok_or_else(|| DumpError::Format(format!("missing array {name}")));
        let c0 = get("c0")?[0];
        let times = get("t")?.clone();
        let mut levels = vec![];
        for (l, &t) in times.iter().enumerate().take(header.levels) {
            let complex = |name: &str, len: usize| -> Result<Vec<C64>, DumpError> {
                let v = get(&format!("level{l}.{name}"))?;
                if v.len() != 2 * len {
                    return Err(DumpError::Format(format!("array {name} has the wrong length")));
                }
                Ok(v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
            };
            let level = level_from(&grid, t, &complex)?;
            levels.push(level);
        }
        if levels.is_empty() {
            return Err(fail("no state stored"));
        }
        Ok(Self {
            levels,
            c0,
            tension: header.tension,
            gamma: header.gamma,
            scheme: header.scheme,
        })
    }
}

fn level_from(
    grid: &Arc<Grid>,
    t: f64,
    complex: &dyn Fn(&str, usize) -> Result<Vec<C64>, DumpError>,
) -> Result<FlowState, DumpError> {
    let bulk = grid.plane_len() * grid.nz();
    let plane = grid.plane_len();
    let b = |n: &str| complex(n, bulk).map(|c| BulkField::from_coeffs(grid, c));
    let s = |n: &str| complex(n, plane).map(|c| SurfaceField::from_coeffs(grid, c));
    Ok(FlowState {
        u: [b("u1")?, b("u2")?, b("u3")?],
        p: b("p")?,
        eta: s("eta")?,
        ctilde: s("ctilde")?,
        t,
    })
}
