//! Snapshot binaries, ledger round trips and trajectory directories.
//!
//! Snapshot layout, little-endian throughout:
//!
//! ```text
//! "HFLW" | version u32 | m u32 | ell u32 | nx u32 | ny u32 | s f64 | t f64 | eps f64 | values f64...
//! ```
//!
//! Values are node-major (`node = h * ny + j`), components contiguous.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extension::TraceHistory;
use crate::flow::{FlowState, LedgerRow, Scheme, Trajectory, LEDGER_HEADER};
use crate::grid::{Field, HalfSpaceGrid};
use crate::manifold::{PenaltyParams, TargetManifold};

pub const MAGIC: &[u8; 4] = b"HFLW";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub m: u32,
    pub ell: u32,
    pub nx: u32,
    pub ny: u32,
    pub s: f64,
    pub t: f64,
    pub epsilon: f64,
}

impl SnapshotHeader {
    pub fn n_values(&self) -> usize {
        (self.nx as usize).pow(self.m) * self.ny as usize * self.ell as usize
    }

    fn check_grid(&self, grid: &HalfSpaceGrid) -> Result<()> {
        let same = self.m as usize == grid.m
            && self.nx as usize == grid.nx
            && self.ny as usize == grid.ny
            && self.s == grid.s;
        if same {
            Ok(())
        } else {
            Err(Error::input(format!(
                "snapshot grid (m = {}, nx = {}, ny = {}, s = {}) does not match (m = {}, nx = {}, ny = {}, s = {})",
                self.m, self.nx, self.ny, self.s, grid.m, grid.nx, grid.ny, grid.s
            )))
        }
    }
}

pub fn encode_snapshot(field: &Field, t: f64, epsilon: f64) -> Vec<u8> {
    let g = &field.grid;
    let mut out = Vec::with_capacity(48 + 8 * field.values.len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, g.m as u32, field.ell as u32, g.nx as u32, g.ny as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [g.s, t, epsilon] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_snapshot(w: &mut impl Write, state: &FlowState) -> Result<()> {
    w.write_all(&encode_snapshot(&state.field, state.t, state.params.epsilon))?;
    Ok(())
}

pub fn read_snapshot(r: &mut impl Read) -> Result<(SnapshotHeader, Vec<f64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(SnapshotHeader, Vec<f64>)> {
    if bytes.len() < 48 || &bytes[..4] != MAGIC {
        return Err(Error::input("not a snapshot file (bad magic)"));
    }
    let u = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap());
    let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let header = SnapshotHeader { version: u(0), m: u(1), ell: u(2), nx: u(3), ny: u(4), s: f(24), t: f(32), epsilon: f(40) };
    if header.version != VERSION {
        return Err(Error::input(format!("unsupported snapshot version {}", header.version)));
    }
    let body = &bytes[48..];
    if body.len() != 8 * header.n_values() {
        return Err(Error::input(format!(
            "snapshot body holds {} bytes, header implies {}",
            body.len(),
            8 * header.n_values()
        )));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, values))
}

pub fn parse_ledger_csv(text: &str) -> Result<Vec<LedgerRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(LEDGER_HEADER) {
        return Err(Error::input("ledger header mismatch"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::input(format!("ledger row {k} has {} columns", cols.len())));
            }
            let num = |i: usize| -> Result<f64> {
                cols[i].trim().parse().map_err(|_| Error::input(format!("ledger row {k}: bad number `{}`", cols[i])))
            };
            let step = cols[0].trim().parse().map_err(|_| Error::input(format!("ledger row {k}: bad step")))?;
            Ok(LedgerRow {
                step,
                t: num(1)?,
                dirichlet: num(2)?,
                potential: num(3)?,
                total: num(4)?,
                dissipation_increment: num(5)?,
                max_abs_u: num(6)?,
                trace_min_abs_u: num(7)?,
            })
        })
        .collect()
}

pub fn snapshot_name(k: usize) -> String {
    format!("snap_{k:05}.hflw")
}

/// Writes `ledger.csv` and `snapshots/snap_*.hflw` under `dir`; returns the
/// paths written.
pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let mut written = Vec::new();
    let ledger = dir.join("ledger.csv");
    fs::write(&ledger, traj.ledger_csv())?;
    written.push(ledger);
    for (k, s) in traj.snapshots.iter().enumerate() {
        let p = snap_dir.join(snapshot_name(k));
        fs::write(&p, encode_snapshot(&s.field, s.t, s.params.epsilon))?;
        written.push(p);
    }
    Ok(written)
}

/// Rebuilds a trajectory from a directory written by [`save_trajectory`].
/// The trace history holds the snapshot traces only.
pub fn load_trajectory(
    dir: &Path,
    grid: &Arc<HalfSpaceGrid>,
    target: &TargetManifold,
    params: &PenaltyParams,
    scheme: Scheme,
) -> Result<Trajectory> {
    let rows = parse_ledger_csv(&fs::read_to_string(dir.join("ledger.csv"))?)?;
    let (initial, ledger) = rows.split_first().ok_or_else(|| Error::input("ledger has no rows"))?;
    let mut names: Vec<PathBuf> = fs::read_dir(dir.join("snapshots"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hflw"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::input(format!("no snapshots under {}", dir.display())));
    }
    let mut snapshots = Vec::new();
    let mut history = TraceHistory::new(grid, target.ell);
    for p in &names {
        let (h, values) = decode_snapshot(&fs::read(p)?)?;
        h.check_grid(grid)?;
        if h.ell as usize != target.ell {
            return Err(Error::input(format!("snapshot {} has ell = {}, target needs {}", p.display(), h.ell, target.ell)));
        }
        let field = Field::from_values(grid, target.ell, values)?;
        history.push(h.t, field.trace().values)?;
        let step_index = (h.t / ledger.first().map_or(1.0, |r| r.t)).round() as usize;
        snapshots.push(FlowState { t: h.t, step_index, field, params: params.with_epsilon(h.epsilon)? });
    }
    let dt = ledger.first().map_or(0.0, |r| r.t);
    Ok(Trajectory {
        target: target.clone(),
        params: *params,
        scheme,
        dt,
        snapshots,
        history,
        initial: *initial,
        ledger: ledger.to_vec(),
        inner_iterations: Vec::new(),
    })
}
