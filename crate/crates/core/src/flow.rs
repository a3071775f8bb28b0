//! Time integration of the extended Ginzburg-Landau system
//!
//! ```text
//! y^a U_t = div(y^a grad U)            in the box
//! lim y^a U_y = -(penalty force)(u)    on y = 0, u = U(., 0)
//! ```
//!
//! The vertical direction `y` points into the domain; with the outward
//! normal `nu = -e_y` the flux condition reads `y^a dU/dnu = force(u)`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extension::{
    frac_op_via_extension, harmonic_extend_fd, orthogonality_residual, SolveOptions, TraceHistory,
};
use crate::grid::{Field, HalfSpaceGrid, Trace};
use crate::linalg::{dot, pcg, ColumnPreconditioner};
use crate::manifold::{boundary_force_into, gl_potential_density, penalty_hessian_psd, PenaltyParams, TargetManifold};

#[derive(Clone, Copy, Debug)]
pub struct InnerSolverOptions {
    /// Stop once the mass-weighted gradient norm drops below this fraction
    /// of its value at the previous state.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of the linear solves for the search direction.
    pub pcg_rtol: f64,
    /// Radial truncation to the ball of radius `max(1, max|U^{k-1}|)` after
    /// each step (sphere targets only); never increases the functional.
    pub truncate: bool,
}

impl Default for InnerSolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_iter: 5000, pcg_rtol: 1e-6, truncate: true }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Scheme {
    Explicit { dt: f64 },
    MinimizingMovement { tau: f64, inner: InnerSolverOptions },
}

impl Scheme {
    pub fn step_size(&self) -> f64 {
        match *self {
            Scheme::Explicit { dt } => dt,
            Scheme::MinimizingMovement { tau, .. } => tau,
        }
    }

    pub fn implicit(tau: f64) -> Self {
        Scheme::MinimizingMovement { tau, inner: InnerSolverOptions::default() }
    }

    /// Explicit scheme at a fraction of the stability bound.
    pub fn explicit_cfl(grid: &HalfSpaceGrid, params: &PenaltyParams, fraction: f64) -> Self {
        Scheme::Explicit { dt: fraction * cfl_bound(grid, params) }
    }
}

/// Largest explicit step keeping every node update a convex combination:
/// `1 / max_i ((K_ii + P_i) / M_ii)` with `P_i = 2 |w_h| c_s / eps^2` on
/// boundary nodes. Equals `0.25 h^2` for `s = 1/2` on a uniform square grid
/// without penalty.
pub fn cfl_bound(grid: &HalfSpaceGrid, params: &PenaltyParams) -> f64 {
    let kd = grid.stiffness_diag();
    let mass = grid.mass();
    let mut worst: f64 = 0.0;
    for h in 0..grid.n_h() {
        for j in 0..grid.ny {
            let i = grid.node(h, j);
            let p = if j == 0 { 2.0 * grid.wh[h] * params.strength() } else { 0.0 };
            worst = worst.max((kd[i] + p) / mass[i]);
        }
    }
    1.0 / worst
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub target: TargetManifold,
    pub params: PenaltyParams,
    pub scheme: Scheme,
    pub t_final: f64,
    /// Keep every `snapshot_stride`-th state (the first and last always).
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub step_index: usize,
    pub field: Field,
    pub params: PenaltyParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    /// `1/2 int y^a |grad U|^2`
    pub dirichlet: f64,
    /// `int W(u) dx`
    pub potential: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
    /// `(1/2 dt) int y^a |U^k - U^{k-1}|^2`
    pub dissipation_increment: f64,
    pub max_abs_u: f64,
    pub trace_min_abs_u: f64,
}

pub const LEDGER_HEADER: &str = "step,t,dirichlet,potential,total,dissipation_increment,max_abs_U,trace_min_abs_u";

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub target: TargetManifold,
    pub params: PenaltyParams,
    pub scheme: Scheme,
    /// Step size actually used.
    pub dt: f64,
    pub snapshots: Vec<FlowState>,
    /// Boundary traces at every time level, including `t = 0`.
    pub history: TraceHistory,
    /// Row for the initial state.
    pub initial: LedgerRow,
    /// One row per step.
    pub ledger: Vec<LedgerRow>,
    /// Inner iterations per implicit step.
    pub inner_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<HalfSpaceGrid> {
        &self.history.grid
    }

    pub fn final_state(&self) -> &FlowState {
        self.snapshots.last().expect("trajectory has at least one state")
    }

    pub fn steps(&self) -> usize {
        self.ledger.len()
    }

    /// Ledger CSV, header included, initial row first.
    pub fn ledger_csv(&self) -> String {
        let mut out = String::from(LEDGER_HEADER);
        out.push('\n');
        for r in std::iter::once(&self.initial).chain(&self.ledger) {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.step, r.t, r.dirichlet, r.potential, r.total, r.dissipation_increment, r.max_abs_u, r.trace_min_abs_u
            );
        }
        out
    }

    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_near(&self, t: f64) -> &FlowState {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .unwrap()
    }
}

/// Dirichlet and penalty parts of the energy.
pub fn energy_parts(field: &Field, target: &TargetManifold, params: &PenaltyParams) -> Result<EnergyParts> {
    let g = &field.grid;
    let dirichlet = g.dirichlet_form(field.ell, &field.values);
    let mut potential = 0.0;
    for h in 0..g.n_h() {
        potential += g.wh[h] * gl_potential_density(field.at(h, 0), target, params)?;
    }
    Ok(EnergyParts { dirichlet, potential, total: dirichlet + potential })
}

fn boundary_forces(field: &[f64], grid: &HalfSpaceGrid, ell: usize, target: &TargetManifold, params: &PenaltyParams) -> Result<Vec<f64>> {
    let mut f = vec![0.0; grid.n_h() * ell];
    for h in 0..grid.n_h() {
        let p = grid.node(h, 0) * ell;
        boundary_force_into(&field[p..p + ell], target, params, &mut f[h * ell..(h + 1) * ell])?;
    }
    Ok(f)
}

/// Energy gradient `K U - B f(u)`.
fn energy_gradient(u: &[f64], grid: &HalfSpaceGrid, ell: usize, target: &TargetManifold, params: &PenaltyParams, out: &mut [f64]) -> Result<()> {
    grid.apply_stiffness(ell, u, out);
    let f = boundary_forces(u, grid, ell, target, params)?;
    for h in 0..grid.n_h() {
        let p = grid.node(h, 0) * ell;
        for c in 0..ell {
            out[p + c] -= grid.wh[h] * f[h * ell + c];
        }
    }
    Ok(())
}

/// One forward-Euler step `U <- U - dt M^{-1} (K U - B f(u))`.
pub fn explicit_step(state: &FlowState, dt: f64, target: &TargetManifold) -> Result<FlowState> {
    let g = &state.field.grid;
    let bound = cfl_bound(g, &state.params);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::input(format!("explicit step {dt:.3e} violates the stability bound {bound:.3e}")));
    }
    let ell = state.field.ell;
    let mass = g.mass();
    let mut grad = vec![0.0; state.field.values.len()];
    energy_gradient(&state.field.values, g, ell, target, &state.params, &mut grad)?;
    let mut next = state.field.clone();
    for (i, v) in next.values.iter_mut().enumerate() {
        *v -= dt * grad[i] / mass[i / ell];
    }
    Ok(FlowState { t: state.t + dt, step_index: state.step_index + 1, field: next, params: state.params })
}

/// Outcome of one minimizing-movement step.
#[derive(Clone, Debug)]
pub struct MovementStep {
    pub state: FlowState,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

struct Movement<'a> {
    grid: &'a HalfSpaceGrid,
    ell: usize,
    target: &'a TargetManifold,
    params: &'a PenaltyParams,
    prev: &'a [f64],
    mass: Vec<f64>,
    tau: f64,
}

impl Movement<'_> {
    fn objective(&self, u: &[f64]) -> Result<f64> {
        let g = self.grid;
        let ell = self.ell;
        let mut prox = 0.0;
        for (i, (a, b)) in u.iter().zip(self.prev).enumerate() {
            prox += self.mass[i / ell] * (a - b) * (a - b);
        }
        let mut pot = 0.0;
        for h in 0..g.n_h() {
            let p = g.node(h, 0) * ell;
            pot += g.wh[h] * gl_potential_density(&u[p..p + ell], self.target, self.params)?;
        }
        Ok(prox / (2.0 * self.tau) + g.dirichlet_form(ell, u) + pot)
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        energy_gradient(u, self.grid, self.ell, self.target, self.params, out)?;
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.mass[i / self.ell] * (u[i] - self.prev[i]) / self.tau;
        }
        Ok(())
    }

    /// `sqrt(g' M^{-1} g)`
    fn dual_norm(&self, g: &[f64]) -> f64 {
        g.iter()
            .enumerate()
            .map(|(i, v)| v * v / self.mass[i / self.ell])
            .sum::<f64>()
            .sqrt()
    }
}

/// Minimizer of `(1/2 tau) int y^a |U - U^{k-1}|^2 + E(U)` by projected
/// Newton descent with Armijo backtracking, started from `U^{k-1}`.
pub fn minimizing_movement_step(
    state: &FlowState,
    tau: f64,
    target: &TargetManifold,
    opts: &InnerSolverOptions,
) -> Result<MovementStep> {
    if !(tau > 0.0) {
        return Err(Error::input(format!("tau must be positive, got {tau}")));
    }
    let g = &state.field.grid;
    let ell = state.field.ell;
    let n = state.field.values.len();
    let prev = &state.field.values;
    let mv = Movement { grid: g, ell, target, params: &state.params, prev, mass: g.mass(), tau };

    let mut u = prev.clone();
    let mut grad = vec![0.0; n];
    mv.gradient(&u, &mut grad)?;
    let g0 = mv.dual_norm(&grad);
    let mut f_cur = mv.objective(&u)?;
    let mut gn = g0;
    let mut iterations = 0;
    let mut converged = g0 == 0.0;
    let mut trial = vec![0.0; n];
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut blocks = vec![0.0; g.n_h() * ell * ell];
        for h in 0..g.n_h() {
            let p = g.node(h, 0) * ell;
            let b = penalty_hessian_psd(&u[p..p + ell], target, &state.params)?;
            blocks[h * ell * ell..(h + 1) * ell * ell].copy_from_slice(&b);
        }
        let pc = ColumnPreconditioner::new(g, ell, 1.0 / tau, Some(&blocks), false)?;
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let mut dir = vec![0.0; n];
        let solved = pcg(
            |v, out| {
                g.apply_stiffness(ell, v, out);
                for i in 0..n {
                    out[i] += mv.mass[i / ell] * v[i] / tau;
                }
                for h in 0..g.n_h() {
                    let p = g.node(h, 0) * ell;
                    let blk = &blocks[h * ell * ell..(h + 1) * ell * ell];
                    for r in 0..ell {
                        let mut acc = 0.0;
                        for c in 0..ell {
                            acc += blk[r * ell + c] * v[p + c];
                        }
                        out[p + r] += g.wh[h] * acc;
                    }
                }
            },
            |r, z| pc.apply(r, z),
            &rhs,
            &mut dir,
            opts.pcg_rtol,
            2000,
        );
        let mut slope = dot(&grad, &dir);
        if solved.is_err() || !(slope < 0.0) {
            pc.apply(&rhs, &mut dir);
            slope = dot(&grad, &dir);
        }
        // Armijo backtracking on the exact objective; once the predicted
        // decrease sinks below rounding of the objective, a step is taken
        // when it shrinks the gradient without raising the objective beyond
        // rounding
        let flat = -slope <= 1e-12 * f_cur.abs();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            for i in 0..n {
                trial[i] = u[i] + alpha * dir[i];
            }
            let f_trial = mv.objective(&trial)?;
            let mut ok = f_trial <= f_cur + 1e-4 * alpha * slope;
            if !ok && flat && f_trial <= f_cur + 1e-14 * f_cur.abs() {
                let mut g_trial = vec![0.0; n];
                mv.gradient(&trial, &mut g_trial)?;
                ok = mv.dual_norm(&g_trial) < gn;
            }
            if ok {
                std::mem::swap(&mut u, &mut trial);
                f_cur = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        let step_size = dir.iter().fold(0.0f64, |m, v| m.max(v.abs())) * alpha;
        let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        mv.gradient(&u, &mut grad)?;
        gn = mv.dual_norm(&grad);
        if gn <= opts.rel_tol * g0 {
            converged = true;
        } else if !accepted || step_size <= 1e-14 * scale {
            // objective flat to rounding: the iterate is a minimizer to
            // working precision
            if dir.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-10 * scale {
                converged = true;
            } else {
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Solver(format!(
            "minimizing movement stopped after {iterations} iterations with gradient norm {gn:.3e} (initial {g0:.3e})"
        )));
    }
    if opts.truncate && target.is_sphere() {
        let radius = state.field.max_abs().max(1.0);
        let mut changed = false;
        for p in u.chunks_mut(ell) {
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > radius {
                p.iter_mut().for_each(|v| *v *= radius / r);
                changed = true;
            }
        }
        if changed {
            f_cur = mv.objective(&u)?;
        }
    }
    let field = Field::from_values(g, ell, u)?;
    Ok(MovementStep {
        state: FlowState { t: state.t + tau, step_index: state.step_index + 1, field, params: state.params },
        iterations,
        grad_norm: gn,
        objective: f_cur,
    })
}

fn ledger_row(state: &FlowState, prev: Option<&Field>, dt: f64, target: &TargetManifold) -> Result<LedgerRow> {
    let e = energy_parts(&state.field, target, &state.params)?;
    let diss = match prev {
        Some(p) => {
            let g = &state.field.grid;
            let mass = g.mass();
            let ell = state.field.ell;
            let mut acc = 0.0;
            for (i, (a, b)) in state.field.values.iter().zip(&p.values).enumerate() {
                acc += mass[i / ell] * (a - b) * (a - b);
            }
            acc / (2.0 * dt)
        }
        None => 0.0,
    };
    Ok(LedgerRow {
        step: state.step_index,
        t: state.t,
        dirichlet: e.dirichlet,
        potential: e.potential,
        total: e.total,
        dissipation_increment: diss,
        max_abs_u: state.field.max_abs(),
        trace_min_abs_u: state.field.trace().min_abs(),
    })
}

/// Flow from the elliptic extension of `u0`.
pub fn run_flow(u0: &Trace, cfg: &FlowConfig) -> Result<Trajectory> {
    let start = harmonic_extend_fd(u0, &SolveOptions::default())?;
    run_flow_from(start, cfg)
}

/// Flow from an arbitrary initial field.
pub fn run_flow_from(start: Field, cfg: &FlowConfig) -> Result<Trajectory> {
    if start.ell != cfg.target.ell {
        return Err(Error::input(format!(
            "field has {} components, target lives in R^{}",
            start.ell, cfg.target.ell
        )));
    }
    if !(cfg.t_final > 0.0) {
        return Err(Error::config("scheme.t_final", "must be positive"));
    }
    if cfg.snapshot_stride == 0 {
        return Err(Error::config("output.snapshot_stride", "must be >= 1"));
    }
    let h = cfg.scheme.step_size();
    if !(h > 0.0) {
        return Err(Error::config("scheme.dt", "must be positive"));
    }
    let steps = ((cfg.t_final / h) - 1e-9).ceil().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    let grid = start.grid.clone();
    let ell = start.ell;

    let mut state = FlowState { t: 0.0, step_index: 0, field: start, params: cfg.params };
    let initial = ledger_row(&state, None, dt, &cfg.target)?;
    let mut history = TraceHistory::new(&grid, ell);
    history.push(0.0, state.field.trace().values)?;
    let mut traj = Trajectory {
        target: cfg.target.clone(),
        params: cfg.params,
        scheme: cfg.scheme,
        dt,
        snapshots: vec![state.clone()],
        history,
        initial,
        ledger: Vec::with_capacity(steps),
        inner_iterations: Vec::new(),
    };
    for k in 1..=steps {
        let next = match cfg.scheme {
            Scheme::Explicit { .. } => explicit_step(&state, dt, &cfg.target),
            Scheme::MinimizingMovement { inner, .. } => {
                minimizing_movement_step(&state, dt, &cfg.target, &inner).map(|m| {
                    traj.inner_iterations.push(m.iterations);
                    m.state
                })
            }
        };
        let mut next = match next {
            Ok(s) => s,
            Err(e) => {
                return Err(Error::FlowAborted { step: k, message: e.to_string(), partial: Box::new(traj) });
            }
        };
        // pin the time grid to k dt
        next.t = dt * k as f64;
        if next.field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::FlowAborted { step: k, message: "non-finite field".into(), partial: Box::new(traj) });
        }
        let row = ledger_row(&next, Some(&state.field), dt, &cfg.target)?;
        traj.ledger.push(row);
        traj.history.push(next.t, next.field.trace().values)?;
        state = next;
        if k % cfg.snapshot_stride == 0 || k == steps {
            traj.snapshots.push(state.clone());
        }
    }
    Ok(traj)
}

/// Results of a sweep over decreasing `epsilon`.
#[derive(Clone, Debug)]
pub struct ContinuationReport {
    pub eps: Vec<f64>,
    /// Space-time `L^2` distance of traces between consecutive runs.
    pub distances: Vec<f64>,
    /// `int (1 - |u|^2)^2` at the final time per run (sphere), or
    /// `4 int d^2(u, N)` for generic targets.
    pub defect: Vec<f64>,
    /// `(c_s / eps^2)` times the defect.
    pub scaled_defect: Vec<f64>,
    /// Least-squares slope of `log defect` against `log eps`.
    pub slope: f64,
    /// Orthogonality residual of the final state (sphere targets).
    pub orthogonality: Vec<Option<f64>>,
    pub runs: Vec<Trajectory>,
}

/// Boundary defect integral of a trace.
pub fn defect_integral(u: &Trace, target: &TargetManifold) -> Result<f64> {
    let g = &u.grid;
    let mut acc = 0.0;
    for h in 0..g.n_h() {
        let p = u.at(h);
        let d = if target.is_sphere() {
            let q = 1.0 - p.iter().map(|v| v * v).sum::<f64>();
            q * q
        } else {
            4.0 * target.dist_sq(p)?
        };
        acc += g.wh[h] * d;
    }
    Ok(acc)
}

pub fn epsilon_continuation(u0: &Trace, cfg: &FlowConfig, eps_list: &[f64]) -> Result<ContinuationReport> {
    if eps_list.is_empty() {
        return Err(Error::config("penalty.epsilon_list", "must not be empty"));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::config("penalty.epsilon_list", "must be non-increasing"));
    }
    let runs: Vec<Trajectory> = eps_list
        .par_iter()
        .map(|&eps| {
            let mut c = cfg.clone();
            c.params = cfg.params.with_epsilon(eps)?;
            run_flow(u0, &c)
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = u0.grid.clone();
    let mut distances = Vec::new();
    for w in runs.windows(2) {
        let (a, b) = (&w[0].history, &w[1].history);
        let levels = a.times.len().min(b.times.len());
        let mut acc = 0.0;
        for k in 1..levels {
            let dt = a.times[k] - a.times[k - 1];
            let mut s = 0.0;
            for h in 0..grid.n_h() {
                for c in 0..u0.ell {
                    let i = h * u0.ell + c;
                    let d = a.samples[k][i] - b.samples[k][i];
                    s += grid.wh[h] * d * d;
                }
            }
            acc += dt * s;
        }
        distances.push(acc.sqrt());
    }
    let mut defect = Vec::new();
    let mut scaled = Vec::new();
    let mut orth = Vec::new();
    for (run, &eps) in runs.iter().zip(eps_list) {
        let fin = run.final_state();
        let tr = fin.field.trace();
        let d = defect_integral(&tr, &run.target)?;
        defect.push(d);
        scaled.push(run.params.cs / (eps * eps) * d);
        orth.push(if run.target.is_sphere() && grid.ny >= 8 {
            let w = frac_op_via_extension(&fin.field)?;
            orthogonality_residual(&tr, &w).ok()
        } else {
            None
        });
    }
    let slope = log_slope(eps_list, &defect);
    Ok(ContinuationReport { eps: eps_list.to_vec(), distances, defect, scaled_defect: scaled, slope, orthogonality: orth, runs })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Linear heat equation `v_t - Delta v = f` (s = 1/2) with the Robin
/// condition `v_y = rho v` on `y = 0`, i.e. the flow machinery with the
/// quadratic boundary potential `rho |v|^2 / 2`; Crank-Nicolson in time from
/// `v = 0`. Returns the field at each requested time (which must be
/// multiples of the step).
pub fn robin_heat_solve(
    grid: &Arc<HalfSpaceGrid>,
    rho: f64,
    source: &(dyn Fn(&[f64], f64, f64) -> f64 + Sync),
    t_final: f64,
    steps: usize,
    record: &[f64],
) -> Result<Vec<(f64, Field)>> {
    if (grid.s - 0.5).abs() > 1e-14 {
        return Err(Error::input("the Robin heat problem is posed for s = 1/2"));
    }
    if steps == 0 || !(t_final > 0.0) {
        return Err(Error::input("Robin solve needs t_final > 0 and steps >= 1"));
    }
    let dt = t_final / steps as f64;
    let n = grid.n_nodes();
    let mass = grid.mass();
    let blocks = vec![rho; grid.n_h()];
    let pc = ColumnPreconditioner::new(grid, 1, 2.0 / dt, Some(&blocks), false)?;
    let sample = |t: f64| -> Vec<f64> {
        let mut f = vec![0.0; n];
        for h in 0..grid.n_h() {
            let x = grid.x_of(h);
            for j in 0..grid.ny {
                f[grid.node(h, j)] = source(&x, grid.y_nodes[j], t);
            }
        }
        f
    };
    let apply_a = |v: &[f64], out: &mut [f64]| {
        grid.apply_stiffness(1, v, out);
        for h in 0..grid.n_h() {
            out[grid.node(h, 0)] += rho * grid.wh[h] * v[grid.node(h, 0)];
        }
    };
    let mut v = vec![0.0; n];
    let mut f_old = sample(0.0);
    let mut out = Vec::new();
    let mut av = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let tol = 1e-9 * dt;
    for k in 1..=steps {
        let t = dt * k as f64;
        let f_new = sample(t);
        apply_a(&v, &mut av);
        for i in 0..n {
            rhs[i] = mass[i] * v[i] / dt - 0.5 * av[i] + 0.5 * mass[i] * (f_old[i] + f_new[i]);
        }
        let mut next = v.clone();
        pcg(
            |x, o| {
                apply_a(x, o);
                for i in 0..n {
                    o[i] = mass[i] * x[i] / dt + 0.5 * o[i];
                }
            },
            |r, z| {
                pc.apply(r, z);
                z.iter_mut().for_each(|q| *q *= 2.0);
            },
            &rhs,
            &mut next,
            1e-13,
            10_000,
        )?;
        v = next;
        f_old = f_new;
        if record.iter().any(|&r| (r - t).abs() <= tol) {
            out.push((t, Field::from_values(grid, 1, v.clone())?));
        }
    }
    Ok(out)
}
