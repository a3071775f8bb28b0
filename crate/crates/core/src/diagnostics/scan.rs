use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::Trajectory;

use super::{renormalized_e, BoundaryPoint, QuadratureOptions, DEFAULT_EPS0_SQ_FRACTION};

#[derive(Clone, Debug)]
pub struct ScanPoint {
    pub z0: BoundaryPoint,
    /// Minimum of `E(U_eps, Z0, R)` over the stored runs.
    pub energy: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct SingularSetReport {
    pub threshold: f64,
    pub radius: f64,
    /// `epsilon` of each run entering the minimum.
    pub eps_set: Vec<f64>,
    pub points: Vec<ScanPoint>,
}

impl SingularSetReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ScanPoint> {
        self.points.iter().filter(|p| p.flagged)
    }

    pub fn is_empty(&self) -> bool {
        self.flagged().next().is_none()
    }
}

/// Flags sample points `Z0 = (x, t)` with `min_eps E(U_eps, Z0, R) >=
/// eps0^2`. The threshold defaults to a fraction of the initial energy of
/// the first run.
pub fn singular_set_scan(
    runs: &[&Trajectory],
    times: &[f64],
    xs: &[Vec<f64>],
    eps0_sq: Option<f64>,
    radius: f64,
    quad: &QuadratureOptions,
) -> Result<SingularSetReport> {
    let first = runs.first().ok_or_else(|| Error::input("singular_set_scan needs at least one run"))?;
    let tmin = times.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(radius > 0.0 && 4.0 * radius * radius < tmin) {
        return Err(Error::input(format!(
            "scan radius {radius} must be below sqrt(t_min)/2 = {}",
            0.5 * tmin.sqrt()
        )));
    }
    let threshold = eps0_sq.unwrap_or(DEFAULT_EPS0_SQ_FRACTION * first.initial.total);
    let samples: Vec<BoundaryPoint> =
        times.iter().flat_map(|&t| xs.iter().map(move |x| BoundaryPoint::new(x, t))).collect();
    let points = samples
        .into_par_iter()
        .map(|z0| {
            let mut e = f64::INFINITY;
            for run in runs {
                e = e.min(renormalized_e(run, &z0, radius, quad)?);
            }
            Ok(ScanPoint { flagged: e >= threshold, energy: e, z0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SingularSetReport {
        threshold,
        radius,
        eps_set: runs.iter().map(|r| r.params.epsilon).collect(),
        points,
    })
}

/// Scan CSV, columns `t0,x0...,R,energy,flagged`.
pub fn scan_csv(report: &SingularSetReport) -> String {
    let m = report.points.first().map_or(1, |p| p.z0.x.len());
    let mut out = String::from("t0");
    for d in 0..m {
        let _ = write!(out, ",x{d}");
    }
    out.push_str(",R,energy,flagged\n");
    for p in &report.points {
        let _ = write!(out, "{:.16e}", p.z0.t);
        for x in &p.z0.x {
            let _ = write!(out, ",{x:.16e}");
        }
        let _ = writeln!(out, ",{:.16e},{:.16e},{}", report.radius, p.energy, u8::from(p.flagged));
    }
    out
}
