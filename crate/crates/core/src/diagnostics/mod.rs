//! A priori quantities evaluated on stored trajectories: energies,
//! Gaussian-renormalized energies, local energy inequality, maximum
//! principle, clearing-out, gradient decay, polar residuals and the
//! singular-set scan.

mod cells;
mod polar;
mod scan;

use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

pub use cells::CellQuadrature;
pub use polar::{polar_residuals, PolarResiduals};
pub use scan::{scan_csv, singular_set_scan, ScanPoint, SingularSetReport};

use crate::error::{Error, Result};
use crate::flow::{energy_parts, EnergyParts, FlowState, Trajectory};
use crate::grid::HalfSpaceGrid;
use crate::manifold::gl_potential_density;
use crate::special::gl_rule;

/// Fraction of the initial energy used as the default `eps0^2`.
pub const DEFAULT_EPS0_SQ_FRACTION: f64 = 0.05;
pub const DEFAULT_DELTA0: f64 = 0.25;
/// Relative size below which the Gaussian weight is dropped.
pub const GAUSSIAN_CUTOFF: f64 = 1e-14;

/// Boundary space-time point `(x0, 0, t0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl BoundaryPoint {
    pub fn new(x: &[f64], t: f64) -> Self {
        Self { x: x.to_vec(), t }
    }
}

/// Resolution of the space-time quadratures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Subdivisions per cell and direction for the weight functions.
    pub sub: usize,
    /// Gauss-Legendre panels over each time window.
    pub time_panels: usize,
    pub gauss_points: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { sub: 2, time_panels: 6, gauss_points: 4 }
    }
}

impl QuadratureOptions {
    /// Doubled resolution in space and time.
    pub fn refined(&self) -> Self {
        Self { sub: 2 * self.sub, time_panels: 2 * self.time_panels, gauss_points: self.gauss_points }
    }

    fn nodes(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let rule = gl_rule(self.gauss_points);
        let h = (hi - lo) / self.time_panels as f64;
        let mut out = Vec::with_capacity(self.time_panels * self.gauss_points);
        for p in 0..self.time_panels {
            let a = lo + h * p as f64;
            for (x, w) in rule.iter() {
                out.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
        }
        out
    }
}

pub fn energy(state: &FlowState, traj: &Trajectory) -> Result<EnergyParts> {
    energy_parts(&state.field, &traj.target, &state.params)
}

/// Time access to a trajectory through its snapshots.
pub(crate) struct Sampler<'a> {
    pub traj: &'a Trajectory,
    pub grid: &'a HalfSpaceGrid,
    times: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        let times = traj.snapshots.iter().map(|s| s.t).collect();
        Self { traj, grid: traj.grid(), times }
    }

    pub fn ell(&self) -> usize {
        self.traj.target.ell
    }

    pub fn require(&self, lo: f64, hi: f64) -> Result<()> {
        let first = self.times[0];
        let last = *self.times.last().unwrap();
        let slack = 1e-12 * last.max(1.0);
        if lo < first - slack || hi > last + slack {
            return Err(Error::History(format!(
                "window [{lo:.6}, {hi:.6}] not covered by stored states on [{first:.6}, {last:.6}]"
            )));
        }
        Ok(())
    }

    fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        (k, (t - self.times[k]) / (self.times[k + 1] - self.times[k]))
    }

    fn lerp(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()
    }

    pub fn field_at(&self, t: f64) -> Vec<f64> {
        let snaps = &self.traj.snapshots;
        if snaps.len() == 1 {
            return snaps[0].field.values.clone();
        }
        let (k, w) = self.bracket(t);
        Self::lerp(&snaps[k].field.values, &snaps[k + 1].field.values, w)
    }

    /// Centered difference at snapshot `k`, one-sided at the ends.
    pub fn dudt_snapshot(&self, k: usize) -> Vec<f64> {
        let snaps = &self.traj.snapshots;
        let n = snaps.len();
        if n < 2 {
            return vec![0.0; snaps[0].field.values.len()];
        }
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k == n - 1 {
            (n - 2, n - 1)
        } else {
            (k - 1, k + 1)
        };
        let dt = snaps[b].t - snaps[a].t;
        snaps[a]
            .field
            .values
            .iter()
            .zip(&snaps[b].field.values)
            .map(|(x, y)| (y - x) / dt)
            .collect()
    }

    pub fn dudt_at(&self, t: f64) -> Vec<f64> {
        if self.times.len() < 2 {
            return self.dudt_snapshot(0);
        }
        let (k, w) = self.bracket(t);
        Self::lerp(&self.dudt_snapshot(k), &self.dudt_snapshot(k + 1), w)
    }

    /// Boundary potential density per horizontal node.
    pub fn potential_density(&self, u: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        let ell = self.ell();
        (0..g.n_h())
            .map(|h| {
                let p = g.node(h, 0) * ell;
                gl_potential_density(&u[p..p + ell], &self.traj.target, &self.traj.params)
            })
            .collect()
    }

    pub fn snapshot_indices(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let slack = 1e-12 * hi.abs().max(1.0);
        (0..self.times.len()).filter(move |&k| self.times[k] >= lo - slack && self.times[k] <= hi + slack)
    }
}

/// Backward Gaussian centred at `(x0, 0, t0)` as a function of `X` at lag
/// `tau = t0 - t`.
struct BackwardGaussian {
    x0: Vec<f64>,
    tau: f64,
    pre: f64,
}

impl BackwardGaussian {
    fn new(x0: &[f64], tau: f64, s: f64) -> Self {
        let m = x0.len() as f64;
        let pre = 1.0 / (gamma(s) * (4.0 * std::f64::consts::PI).powf(m / 2.0) * tau.powf(m / 2.0 + 1.0 - s));
        Self { x0: x0.to_vec(), tau, pre }
    }

    fn eval(&self, x: &[f64], y: f64) -> f64 {
        let r2: f64 = x.iter().zip(&self.x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + y * y;
        self.pre * (-r2 / (4.0 * self.tau)).exp()
    }

    fn cutoff_radius(&self) -> f64 {
        (4.0 * self.tau * (1.0 / GAUSSIAN_CUTOFF).ln()).sqrt()
    }
}

/// Gaussian-weighted bulk and boundary integrals of one time slice:
/// `(1/2 int G y^a |grad U|^2, int G W(u))`.
fn gaussian_slice(s: &Sampler, cq: &CellQuadrature, u: &[f64], gk: &BackwardGaussian) -> Result<(f64, f64)> {
    let rc = gk.cutoff_radius();
    let bulk_w = cq.bulk_weights(|x, y| gk.eval(x, y), &gk.x0, 0.0, rc);
    let bnd_w = cq.boundary_weights(|x| gk.eval(x, 0.0), &gk.x0, rc);
    let grad = cq.cell_grad_sq(u, s.ell());
    let bulk: f64 = bulk_w.iter().zip(&grad).map(|(w, d)| w * d).sum();
    let pot = s.potential_density(u)?;
    let bnd = cq.boundary_cell_avg(&pot);
    let boundary: f64 = bnd_w.iter().zip(&bnd).map(|(w, d)| w * d).sum();
    Ok((0.5 * bulk, boundary))
}

/// `D(U, Z0, R)`, defined for `R < sqrt(t0)`.
pub fn renormalized_d(traj: &Trajectory, z0: &BoundaryPoint, r: f64, quad: &QuadratureOptions) -> Result<f64> {
    check_point(traj, z0)?;
    if !(r > 0.0 && r * r < z0.t) {
        return Err(Error::input(format!("D needs 0 < R < sqrt(t0), got R = {r}, t0 = {}", z0.t)));
    }
    let s = Sampler::new(traj);
    let t = z0.t - r * r;
    s.require(t, t)?;
    let cq = CellQuadrature::new(s.grid, quad.sub);
    let gk = BackwardGaussian::new(&z0.x, r * r, traj.grid().s);
    let (b, p) = gaussian_slice(&s, &cq, &s.field_at(t), &gk)?;
    Ok(r * r * (b + p))
}

/// `E(U, Z0, R)` over the slab `t0 - 4R^2 < t < t0 - R^2`, `R < sqrt(t0)/2`.
pub fn renormalized_e(traj: &Trajectory, z0: &BoundaryPoint, r: f64, quad: &QuadratureOptions) -> Result<f64> {
    check_point(traj, z0)?;
    if !(r > 0.0 && 4.0 * r * r < z0.t) {
        return Err(Error::input(format!("E needs 0 < R < sqrt(t0)/2, got R = {r}, t0 = {}", z0.t)));
    }
    let s = Sampler::new(traj);
    s.require(z0.t - 4.0 * r * r, z0.t - r * r)?;
    let cq = CellQuadrature::new(s.grid, quad.sub);
    let mut acc = 0.0;
    for (tau, w) in quad.nodes(r * r, 4.0 * r * r) {
        let gk = BackwardGaussian::new(&z0.x, tau, traj.grid().s);
        let (b, p) = gaussian_slice(&s, &cq, &s.field_at(z0.t - tau), &gk)?;
        acc += w * (b + p);
    }
    Ok(acc)
}

fn check_point(traj: &Trajectory, z0: &BoundaryPoint) -> Result<()> {
    if z0.x.len() != traj.grid().m {
        return Err(Error::input(format!("point has {} coordinates, grid has m = {}", z0.x.len(), traj.grid().m)));
    }
    if !(z0.t > 0.0) {
        return Err(Error::input("t0 must be positive"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RenormEnergyCurve {
    pub z0: BoundaryPoint,
    pub r_values: Vec<f64>,
    pub d_values: Vec<f64>,
    pub e_values: Vec<f64>,
    /// Radius beyond which the Gaussian weight was dropped, at the widest
    /// time lag `4 R_max^2`.
    pub truncation_radius: f64,
    pub quadrature: QuadratureOptions,
}

impl RenormEnergyCurve {
    /// Largest violation `f(r) - (1 + rel) f(R)` over all `r < R` for the
    /// `E` curve (non-positive when monotone within `rel`).
    pub fn worst_e_violation(&self, rel: f64) -> f64 {
        worst_violation(&self.e_values, rel)
    }

    pub fn worst_d_violation(&self, rel: f64) -> f64 {
        worst_violation(&self.d_values, rel)
    }
}

fn worst_violation(v: &[f64], rel: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            worst = worst.max(v[i] - (1.0 + rel) * v[j]);
        }
    }
    worst
}

pub fn renormalized_energies(
    traj: &Trajectory,
    z0: &BoundaryPoint,
    r_list: &[f64],
    quad: &QuadratureOptions,
) -> Result<RenormEnergyCurve> {
    if r_list.is_empty() || r_list.windows(2).any(|w| w[1] <= w[0]) || r_list[0] <= 0.0 {
        return Err(Error::input("radii must be positive and increasing"));
    }
    let rmax = *r_list.last().unwrap();
    if 4.0 * rmax * rmax >= z0.t {
        return Err(Error::input(format!("radii must stay below sqrt(t0)/2 = {}", 0.5 * z0.t.sqrt())));
    }
    let vals: Vec<(f64, f64)> = r_list
        .par_iter()
        .map(|&r| Ok((renormalized_d(traj, z0, r, quad)?, renormalized_e(traj, z0, r, quad)?)))
        .collect::<Result<_>>()?;
    Ok(RenormEnergyCurve {
        z0: z0.clone(),
        r_values: r_list.to_vec(),
        d_values: vals.iter().map(|v| v.0).collect(),
        e_values: vals.iter().map(|v| v.1).collect(),
        truncation_radius: BackwardGaussian::new(&z0.x, 4.0 * rmax * rmax, traj.grid().s).cutoff_radius(),
        quadrature: *quad,
    })
}

/// Monotonicity CSV, columns `t0,x0...,R,D,E`.
pub fn monotonicity_csv(curves: &[RenormEnergyCurve]) -> String {
    let m = curves.first().map_or(1, |c| c.z0.x.len());
    let mut out = String::from("t0");
    for d in 0..m {
        let _ = write!(out, ",x{d}");
    }
    out.push_str(",R,D,E\n");
    for c in curves {
        for i in 0..c.r_values.len() {
            let _ = write!(out, "{:.16e}", c.z0.t);
            for x in &c.z0.x {
                let _ = write!(out, ",{x:.16e}");
            }
            let _ = writeln!(out, ",{:.16e},{:.16e},{:.16e}", c.r_values[i], c.d_values[i], c.e_values[i]);
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct LocalEnergyReport {
    /// `int_{P_R^+} y^a |d_t U|^2`
    pub lhs: f64,
    /// `R^{-2} (int_{P_2R^+} y^a |grad U|^2 + int_{boundary} W(u))`
    pub rhs: f64,
    /// Empirical constant `lhs / rhs`.
    pub constant: f64,
}

/// Parabolic cylinder integrals `(int y^a |d_t U|^2, int y^a |grad U|^2,
/// int W(u))` over `B_r^+(x0) x [t0 - r^2, t0 + r^2]`.
fn cylinder_integrals(s: &Sampler, cq: &CellQuadrature, z0: &BoundaryPoint, r: f64, quad: &QuadratureOptions, want_dt: bool) -> Result<(f64, f64, f64)> {
    let r2 = r * r;
    let ball = |x: &[f64], y: f64| {
        let d: f64 = x.iter().zip(&z0.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + y * y;
        if d < r2 {
            1.0
        } else {
            0.0
        }
    };
    let bw = cq.bulk_weights(ball, &z0.x, 0.0, r);
    let sw = cq.boundary_weights(|x| ball(x, 0.0), &z0.x, r);
    let mut dt_int = 0.0;
    let mut grad_int = 0.0;
    let mut pot_int = 0.0;
    for (t, w) in quad.nodes(z0.t - r2, z0.t + r2) {
        let u = s.field_at(t);
        let g = cq.cell_grad_sq(&u, s.ell());
        grad_int += w * bw.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let p = cq.boundary_cell_avg(&s.potential_density(&u)?);
        pot_int += w * sw.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
        if want_dt {
            let v = s.dudt_at(t);
            let sq = cq.cell_nodal_sq(&v, s.ell());
            dt_int += w * bw.iter().zip(&sq).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok((dt_int, grad_int, pot_int))
}

pub fn local_energy_inequality_check(
    traj: &Trajectory,
    z0: &BoundaryPoint,
    r: f64,
    quad: &QuadratureOptions,
) -> Result<LocalEnergyReport> {
    check_point(traj, z0)?;
    if !(r > 0.0 && 4.0 * r * r < z0.t) {
        return Err(Error::input(format!("local energy check needs 0 < R < sqrt(t0)/2, got R = {r}")));
    }
    let s = Sampler::new(traj);
    s.require(z0.t - 4.0 * r * r, z0.t + 4.0 * r * r)?;
    let cq = CellQuadrature::new(s.grid, quad.sub);
    let (lhs, _, _) = cylinder_integrals(&s, &cq, z0, r, quad, true)?;
    let (_, grad, pot) = cylinder_integrals(&s, &cq, z0, 2.0 * r, quad, false)?;
    let rhs = (grad + pot) / (r * r);
    let constant = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(LocalEnergyReport { lhs, rhs, constant })
}

/// Largest nodal `|U|` over every stored time level.
pub fn max_principle_check(traj: &Trajectory) -> f64 {
    traj.ledger.iter().map(|r| r.max_abs_u).fold(traj.initial.max_abs_u, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub struct ClearingOutReport {
    /// `min |U| >= 1/2` on `P_{delta R}^+(Z0)`.
    pub holds: bool,
    pub min_abs: f64,
    /// `E(U, Z0, R)` at the reference scale.
    pub energy: f64,
    pub threshold: f64,
    pub delta: f64,
    pub radius: f64,
}

impl ClearingOutReport {
    /// A failure of the conclusion must come with energy above threshold.
    pub fn consistent(&self) -> bool {
        self.holds || self.energy >= self.threshold
    }
}

/// Clearing-out test at scale `r`: measures `E(U, Z0, r)` and the minimum
/// of `|U|` over `P_{delta r}^+(Z0)`.
pub fn clearing_out_check(
    traj: &Trajectory,
    z0: &BoundaryPoint,
    eps0_sq: f64,
    delta: f64,
    r: f64,
    quad: &QuadratureOptions,
) -> Result<ClearingOutReport> {
    let energy = renormalized_e(traj, z0, r, quad)?;
    let s = Sampler::new(traj);
    let rho = delta * r;
    s.require(z0.t - rho * rho, z0.t + rho * rho)?;
    let g = s.grid;
    let ell = s.ell();
    let nodes = ball_nodes(g, &z0.x, rho);
    let mut min_abs = f64::INFINITY;
    let mut visit = |u: &[f64]| {
        for &(h, j) in &nodes {
            let p = g.node(h, j) * ell;
            min_abs = min_abs.min(u[p..p + ell].iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    };
    visit(&s.field_at(z0.t - rho * rho));
    visit(&s.field_at(z0.t + rho * rho));
    for k in s.snapshot_indices(z0.t - rho * rho, z0.t + rho * rho).collect::<Vec<_>>() {
        visit(&traj.snapshots[k].field.values);
    }
    Ok(ClearingOutReport { holds: min_abs >= 0.5, min_abs, energy, threshold: eps0_sq, delta, radius: r })
}

/// Grid nodes `(h, j)` within distance `r` of `(x0, 0)`; the nearest
/// boundary node when the ball holds none.
fn ball_nodes(g: &HalfSpaceGrid, x0: &[f64], r: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for h in 0..g.n_h() {
        let x = g.x_of(h);
        let dx2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
        for j in 0..g.ny {
            if dx2 + g.y_nodes[j] * g.y_nodes[j] <= r * r {
                out.push((h, j));
            }
        }
    }
    if out.is_empty() {
        out.push((g.nearest_h(x0), 0));
    }
    out
}

/// `max_x |grad_x u(x, t)|` of the boundary trace of a nodal field.
pub fn trace_gradient_max(g: &HalfSpaceGrid, ell: usize, u: &[f64]) -> f64 {
    let grad = g.gradient(ell, u);
    let nd = g.m + 1;
    let mut worst: f64 = 0.0;
    for h in 0..g.n_h() {
        let base = g.node(h, 0) * ell * nd;
        let mut acc = 0.0;
        for c in 0..ell {
            for d in 0..g.m {
                acc += grad[base + c * nd + d].powi(2);
            }
        }
        worst = worst.max(acc.sqrt());
    }
    worst
}

#[derive(Clone, Debug)]
pub struct GradientAudit {
    pub z0: BoundaryPoint,
    pub radius: f64,
    pub energy: f64,
    /// `R^2 sup_{P_{delta0 R}^+} |grad U|^2`, audited only below threshold.
    pub grad_bound: Option<f64>,
    /// `R^4 sup |d_t U|^2` on the same cylinder.
    pub time_bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GradientReport {
    /// `(t, sqrt(t) max|grad u(., t)|)` at stored times `t >= T0`.
    pub samples: Vec<(f64, f64)>,
    pub running_sup: f64,
    pub audits: Vec<GradientAudit>,
    pub eps0_sq: f64,
    pub delta0: f64,
}

impl GradientReport {
    /// Value at the stored time nearest `4 T` over the one nearest `T`.
    pub fn dyadic_ratio(&self, t: f64) -> Option<f64> {
        let near = |target: f64| {
            self.samples
                .iter()
                .min_by(|a, b| (a.0 - target).abs().total_cmp(&(b.0 - target).abs()))
                .map(|p| p.1)
        };
        let (a, b) = (near(t)?, near(4.0 * t)?);
        if a > 0.0 {
            Some(b / a)
        } else if b == 0.0 {
            Some(0.0)
        } else {
            None
        }
    }
}

pub fn gradient_estimate_check(
    traj: &Trajectory,
    t_start: f64,
    audits: &[(BoundaryPoint, f64)],
    eps0_sq: f64,
    delta0: f64,
    quad: &QuadratureOptions,
) -> Result<GradientReport> {
    let s = Sampler::new(traj);
    let last = traj.final_state().t;
    if !(t_start > 0.0) || t_start > last {
        return Err(Error::History(format!("trajectory ends at {last}, before T0 = {t_start}")));
    }
    let g = s.grid;
    let ell = s.ell();
    let samples: Vec<(f64, f64)> = traj
        .snapshots
        .par_iter()
        .filter(|st| st.t >= t_start * (1.0 - 1e-12))
        .map(|st| (st.t, st.t.sqrt() * trace_gradient_max(g, ell, &st.field.values)))
        .collect();
    let running_sup = samples.iter().map(|p| p.1).fold(0.0, f64::max);
    let nd = g.m + 1;
    let mut out = Vec::new();
    for (z0, r) in audits {
        let energy = renormalized_e(traj, z0, *r, quad)?;
        let (mut gb, mut tb) = (None, None);
        if energy < eps0_sq {
            let rho = delta0 * r;
            s.require(z0.t - rho * rho, z0.t + rho * rho)?;
            let nodes = ball_nodes(g, &z0.x, rho);
            let mut gmax: f64 = 0.0;
            let mut tmax: f64 = 0.0;
            for k in s.snapshot_indices(z0.t - rho * rho, z0.t + rho * rho).collect::<Vec<_>>() {
                let u = &traj.snapshots[k].field.values;
                let grad = g.gradient(ell, u);
                let du = s.dudt_snapshot(k);
                for &(h, j) in &nodes {
                    let n = g.node(h, j);
                    let gs: f64 = grad[n * ell * nd..(n + 1) * ell * nd].iter().map(|v| v * v).sum();
                    let ts: f64 = du[n * ell..(n + 1) * ell].iter().map(|v| v * v).sum();
                    gmax = gmax.max(gs);
                    tmax = tmax.max(ts);
                }
            }
            gb = Some(r * r * gmax);
            tb = Some(r.powi(4) * tmax);
        }
        out.push(GradientAudit { z0: z0.clone(), radius: *r, energy, grad_bound: gb, time_bound: tb });
    }
    Ok(GradientReport { samples, running_sup, audits: out, eps0_sq, delta0 })
}

#[derive(Clone, Copy, Debug)]
pub struct GaussianComparison {
    /// `E(Z1, R/2)`
    pub near: f64,
    /// `E(Z0, R)`
    pub reference: f64,
    pub initial_energy: f64,
    /// `near / (reference + eps1 E0)`
    pub constant: f64,
}

pub fn gaussian_comparison(
    traj: &Trajectory,
    z0: &BoundaryPoint,
    z1: &BoundaryPoint,
    r: f64,
    eps1: f64,
    quad: &QuadratureOptions,
) -> Result<GaussianComparison> {
    let near = renormalized_e(traj, z1, 0.5 * r, quad)?;
    let reference = renormalized_e(traj, z0, r, quad)?;
    let e0 = traj.initial.total;
    let den = reference + eps1 * e0;
    let constant = if den > 0.0 { near / den } else { 0.0 };
    Ok(GaussianComparison { near, reference, initial_energy: e0, constant })
}

/// `eps0^2` default for a trajectory.
pub fn default_eps0_sq(traj: &Trajectory) -> f64 {
    DEFAULT_EPS0_SQ_FRACTION * traj.initial.total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_flow_from, FlowConfig, Scheme};
    use crate::grid::{Field, GridConfig, HalfSpaceGrid};
    use crate::manifold::{PenaltyParams, TargetManifold};

    fn constant_run() -> Trajectory {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 17, 9, 2.0, 2.0, 0.5)).unwrap();
        let f = Field::from_fn(&g, 2, |_, _, o| {
            o[0] = 0.0;
            o[1] = 1.0;
        });
        let p = PenaltyParams::new(0.5, 0.5).unwrap();
        let cfg = FlowConfig {
            target: TargetManifold::sphere(2).unwrap(),
            params: p,
            scheme: Scheme::explicit_cfl(&g, &p, 0.5),
            t_final: 0.5,
            snapshot_stride: 1,
        };
        run_flow_from(f, &cfg).unwrap()
    }

    #[test]
    fn constant_run_has_zero_renormalized_energies() {
        let t = constant_run();
        let z = BoundaryPoint::new(&[0.0], 0.4);
        let c = renormalized_energies(&t, &z, &[0.1, 0.2, 0.3], &QuadratureOptions::default()).unwrap();
        assert!(c.d_values.iter().chain(&c.e_values).all(|v| *v == 0.0));
        let le = local_energy_inequality_check(&t, &BoundaryPoint::new(&[0.0], 0.2), 0.1, &QuadratureOptions::default()).unwrap();
        assert_eq!(le.lhs, 0.0);
        assert_eq!(max_principle_check(&t), 1.0);
        let co = clearing_out_check(&t, &z, 0.1, 0.25, 0.3, &QuadratureOptions::default()).unwrap();
        assert!(co.holds && co.min_abs == 1.0);
        let gr = gradient_estimate_check(&t, 0.1, &[], 0.1, 0.25, &QuadratureOptions::default()).unwrap();
        assert_eq!(gr.running_sup, 0.0);
    }

    #[test]
    fn radii_are_validated() {
        let t = constant_run();
        let z = BoundaryPoint::new(&[0.0], 0.4);
        let q = QuadratureOptions::default();
        assert!(renormalized_energies(&t, &z, &[0.2, 0.1], &q).is_err());
        assert!(renormalized_energies(&t, &z, &[0.4], &q).is_err());
        assert!(matches!(
            local_energy_inequality_check(&t, &BoundaryPoint::new(&[0.0], 0.45), 0.3, &q),
            Err(Error::History(_))
        ));
    }

    #[test]
    fn gaussian_slice_integrates_to_one() {
        // int_R G(x, 0) dx = tau^{s - 1} / Gamma(s)
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 401, 9, 4.0, 2.0, 0.5)).unwrap();
        let cq = CellQuadrature::new(&g, 2);
        let gk = BackwardGaussian::new(&[0.3], 0.2, 0.5);
        let w = cq.boundary_weights(|x| gk.eval(x, 0.0), &[0.3], gk.cutoff_radius());
        let total: f64 = w.iter().sum();
        let expect = 0.2f64.powf(-0.5) / gamma(0.5);
        assert!((total - expect).abs() < 1e-4 * expect, "{total} vs {expect}");
    }
}
