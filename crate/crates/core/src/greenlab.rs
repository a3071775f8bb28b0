//! Heat equation on the half space `x_{m+1} > 0` with the oblique
//! condition `d_{m+1} u = rho u`, `rho = 3 / (4 eps^2)`: the explicit Green
//! function, its boundary identity, Duhamel solutions and a cross-check
//! against the finite-difference core.
//!
//! ```text
//! G(x, y, t) = Gamma(x - y, t) - Gamma(x - y*, t)
//!              - 2 int_0^inf exp(-rho tau) D_{m+1} Gamma(x - y* + tau e, t) d tau
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{log_slope, robin_heat_solve};
use crate::grid::{GridConfig, HalfSpaceGrid};
use crate::kernels::heat_kernel;
use crate::special::{erfcx, gl_rule, integrate_to_infinity};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObliqueParams {
    pub epsilon: f64,
    /// `3 / (4 eps^2)`
    pub rho: f64,
    pub m: usize,
}

impl ObliqueParams {
    pub fn new(epsilon: f64, m: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
        }
        if m == 0 {
            return Err(Error::input("dimension m must be at least 1"));
        }
        Ok(Self { epsilon, rho: 3.0 / (4.0 * epsilon * epsilon), m })
    }
}

fn check_args(x: &[f64], y: &[f64], t: f64, p: &ObliqueParams) -> Result<()> {
    let n = p.m + 1;
    if x.len() != n || y.len() != n {
        return Err(Error::input(format!("points must have {n} coordinates")));
    }
    if !(t > 0.0) {
        return Err(Error::input(format!("Green function needs t > 0, got {t}")));
    }
    if x[p.m] < 0.0 {
        return Err(Error::input("evaluation point lies below the boundary"));
    }
    if !(y[p.m] > 0.0) {
        return Err(Error::input("source must lie strictly inside the half space"));
    }
    Ok(())
}

fn reflect(y: &[f64]) -> Vec<f64> {
    let mut r = y.to_vec();
    let n = r.len();
    r[n - 1] = -r[n - 1];
    r
}

/// `Gamma(0, t)` in `m + 1` dimensions.
fn peak(m: usize, t: f64) -> f64 {
    (4.0 * PI * t).powf(-((m + 1) as f64) / 2.0)
}

/// `int_0^inf exp(-rho tau) D^k_{m+1} Gamma(z + tau e, t) d tau` for
/// `k = 1, 2`, integrated in `sigma = tau / eps^2`.
fn image_integral(z: &[f64], t: f64, p: &ObliqueParams, order: u8, tol: f64) -> Result<f64> {
    let m = p.m;
    let c = z[m];
    let h2: f64 = z[..m].iter().map(|v| v * v).sum();
    let e2 = p.epsilon * p.epsilon;
    let horiz = (-h2 / (4.0 * t)).exp();
    // integrand normalised by Gamma(0, t)
    let f = |sigma: f64| {
        let w = c + e2 * sigma;
        let g = horiz * (-w * w / (4.0 * t)).exp();
        let d = match order {
            1 => -w / (2.0 * t) * g,
            _ => (w * w / (4.0 * t * t) - 1.0 / (2.0 * t)) * g,
        };
        (-0.75 * sigma).exp() * d * e2
    };
    let scale = (4.0 / 3.0f64).min((c.abs() + 2.0 * t.sqrt()) / e2);
    let v = integrate_to_infinity(f, 0.0, scale, tol)?;
    Ok(v * peak(m, t))
}

/// Green function by quadrature of the image integral; `tol` is relative
/// to `Gamma(0, t)`.
pub fn green_oblique_tol(x: &[f64], y: &[f64], t: f64, p: &ObliqueParams, tol: f64) -> Result<f64> {
    check_args(x, y, t, p)?;
    let ys = reflect(y);
    let dz: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let dzs: Vec<f64> = x.iter().zip(&ys).map(|(a, b)| a - b).collect();
    let i = image_integral(&dzs, t, p, 1, tol)?;
    Ok(heat_kernel(&dz, t) - heat_kernel(&dzs, t) - 2.0 * i)
}

pub fn green_oblique(x: &[f64], y: &[f64], t: f64, p: &ObliqueParams) -> Result<f64> {
    green_oblique_tol(x, y, t, p, 1e-10)
}

/// Closed form `Gamma(x - y) + Gamma(x - y*) (1 - 2 rho sqrt(pi t)
/// erfcx((c + 2 rho t) / (2 sqrt t)))`, `c = x_{m+1} + y_{m+1}`.
pub fn green_oblique_closed(x: &[f64], y: &[f64], t: f64, p: &ObliqueParams) -> f64 {
    let m = p.m;
    let dz: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut dzs = dz.clone();
    dzs[m] = x[m] + y[m];
    heat_kernel(&dz, t) + heat_kernel(&dzs, t) * image_factor(x[m] + y[m], t, p.rho)
}

/// `1 - 2 rho sqrt(pi t) erfcx((c + 2 rho t) / (2 sqrt t))`
fn image_factor(c: f64, t: f64, rho: f64) -> f64 {
    let st = t.sqrt();
    1.0 - 2.0 * rho * (PI * t).sqrt() * erfcx((c + 2.0 * rho * st * st) / (2.0 * st))
}

/// Dirichlet (`eps -> 0`) and Neumann (`eps -> inf`) image kernels.
pub fn dirichlet_image(x: &[f64], y: &[f64], t: f64) -> f64 {
    let dz: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let ys = reflect(y);
    let dzs: Vec<f64> = x.iter().zip(&ys).map(|(a, b)| a - b).collect();
    heat_kernel(&dz, t) - heat_kernel(&dzs, t)
}

pub fn neumann_image(x: &[f64], y: &[f64], t: f64) -> f64 {
    let dz: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let ys = reflect(y);
    let dzs: Vec<f64> = x.iter().zip(&ys).map(|(a, b)| a - b).collect();
    heat_kernel(&dz, t) + heat_kernel(&dzs, t)
}

/// Sample for the boundary identity: boundary point `x`, source `y`, time.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

/// `|d_{m+1} G - rho G| / (|d_{m+1} G| + |rho G| + floor)` at one boundary
/// point; the normal derivative of the image integral is the quadrature of
/// `D^2_{m+1} Gamma`.
pub fn oblique_bc_residual_at(s: &BoundarySample, p: &ObliqueParams, tol: f64) -> Result<f64> {
    check_args(&s.x, &s.y, s.t, p)?;
    if s.x[p.m] != 0.0 {
        return Err(Error::input("residual samples must lie on the boundary"));
    }
    let t = s.t;
    let m = p.m;
    let ys = reflect(&s.y);
    let dz: Vec<f64> = s.x.iter().zip(&s.y).map(|(a, b)| a - b).collect();
    let dzs: Vec<f64> = s.x.iter().zip(&ys).map(|(a, b)| a - b).collect();
    let g0 = heat_kernel(&dz, t);
    let g1 = heat_kernel(&dzs, t);
    let d0 = -dz[m] / (2.0 * t) * g0;
    let d1 = -dzs[m] / (2.0 * t) * g1;
    let i1 = image_integral(&dzs, t, p, 1, tol)?;
    let i2 = image_integral(&dzs, t, p, 2, tol)?;
    let g = g0 - g1 - 2.0 * i1;
    let dg = d0 - d1 - 2.0 * i2;
    let floor = 1e-12 * peak(m, t);
    Ok((dg - p.rho * g).abs() / (dg.abs() + (p.rho * g).abs() + floor))
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub residuals: Vec<f64>,
}

pub fn oblique_bc_residual(samples: &[(BoundarySample, ObliqueParams)], tol: f64) -> Result<ResidualReport> {
    let residuals: Vec<f64> = samples
        .par_iter()
        .map(|(s, p)| oblique_bc_residual_at(s, p, tol))
        .collect::<Result<_>>()?;
    Ok(ResidualReport { max_residual: residuals.iter().cloned().fold(0.0, f64::max), residuals })
}

/// Deterministic boundary samples over `eps` in `[0.05, 2]`, sources in
/// `(0, 1.5]`, times in `[0.05, 2]`.
pub fn random_boundary_samples(m: usize, n: usize, seed: u64) -> Result<Vec<(BoundarySample, ObliqueParams)>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            x.push(0.0);
            let mut y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            y.push(rng.random_range(0.05..1.5));
            let t = rng.random_range(0.05..2.0);
            let eps = (rng.random_range(0.05f64.ln()..2f64.ln())).exp();
            Ok((BoundarySample { x, y, t }, ObliqueParams::new(eps, m)?))
        })
        .collect()
}

/// Quadrature controls for Duhamel integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DuhamelOptions {
    /// Lags below `band` use `f(x, s)` in place of the spatial integral.
    pub band: f64,
    /// Ratio of the geometric panels in the lag variable.
    pub ratio: f64,
    pub time_points: usize,
    pub hermite_points: usize,
    pub vertical_panels: usize,
    pub vertical_points: usize,
}

impl Default for DuhamelOptions {
    fn default() -> Self {
        Self { band: 1e-7, ratio: 1.25, time_points: 6, hermite_points: 24, vertical_panels: 8, vertical_points: 8 }
    }
}

impl DuhamelOptions {
    /// Band ten times narrower and finer panels in every direction.
    pub fn tightened(&self) -> Self {
        Self {
            band: 0.1 * self.band,
            ratio: self.ratio.sqrt(),
            time_points: self.time_points,
            hermite_points: self.hermite_points + 8,
            vertical_panels: 2 * self.vertical_panels,
            vertical_points: self.vertical_points,
        }
    }
}

pub type Source<'a> = dyn Fn(&[f64], f64) -> f64 + Sync + 'a;

/// Duhamel value `int_0^t int G(x, y, t - s) f(y, s) dy ds` at one point.
pub fn duhamel_value(f: &Source<'_>, p: &ObliqueParams, x: &[f64], t: f64, opts: &DuhamelOptions) -> Result<f64> {
    let m = p.m;
    if x.len() != m + 1 || x[m] < 0.0 {
        return Err(Error::input("Duhamel evaluation point must lie in the closed half space"));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let gh = gauss_quad::GaussHermite::new(std::num::NonZeroUsize::new(opts.hermite_points.max(1)).unwrap());
    let gh_nodes: Vec<(f64, f64)> = gh.iter().map(|(a, b)| (*a, *b)).collect();
    let gl_t = gl_rule(opts.time_points);
    let gl_y = gl_rule(opts.vertical_points);
    let band = opts.band.min(t);
    // near-singular band
    let mut total = 0.0;
    for (u, w) in gl_t.iter() {
        let sigma = 0.5 * band * (u + 1.0);
        total += 0.5 * band * w * f(x, t - sigma);
    }
    if band >= t {
        return Ok(total);
    }
    // geometric lag panels on [band, t]
    let mut edges = vec![band];
    while *edges.last().unwrap() < t {
        let next = (edges.last().unwrap() * opts.ratio).min(t);
        edges.push(if t - next < 1e-12 * t { t } else { next });
    }
    let inv_sqrt_pi_m = PI.powf(-(m as f64) / 2.0);
    let mut yv = vec![0.0; m + 1];
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        for (u, w) in gl_t.iter() {
            let sigma = a + 0.5 * (b - a) * (u + 1.0);
            let wt = 0.5 * (b - a) * w;
            let s = t - sigma;
            let ss = sigma.sqrt();
            let x2 = x[m];
            let lo = (x2 - 12.0 * ss).max(0.0);
            let hi = x2 + 12.0 * ss;
            let vert = (4.0 * PI * sigma).sqrt().recip();
            let ph = (hi - lo) / opts.vertical_panels as f64;
            let mut inner = 0.0;
            for pnl in 0..opts.vertical_panels {
                let pa = lo + ph * pnl as f64;
                for (v, wv) in gl_y.iter() {
                    let y2 = pa + 0.5 * ph * (v + 1.0);
                    let wy = 0.5 * ph * wv;
                    let direct = (-(x2 - y2) * (x2 - y2) / (4.0 * sigma)).exp();
                    let image = (-(x2 + y2) * (x2 + y2) / (4.0 * sigma)).exp() * image_factor(x2 + y2, sigma, p.rho);
                    let kv = vert * (direct + image);
                    if kv == 0.0 {
                        continue;
                    }
                    yv[m] = y2;
                    // tensor Gauss-Hermite over the horizontal variables
                    let mut hsum = 0.0;
                    let mut idx = vec![0usize; m];
                    loop {
                        let mut wprod = inv_sqrt_pi_m;
                        for d in 0..m {
                            let (xi, wi) = gh_nodes[idx[d]];
                            yv[d] = x[d] + 2.0 * ss * xi;
                            wprod *= wi;
                        }
                        hsum += wprod * f(&yv, s);
                        let mut d = 0;
                        while d < m {
                            idx[d] += 1;
                            if idx[d] < gh_nodes.len() {
                                break;
                            }
                            idx[d] = 0;
                            d += 1;
                        }
                        if d == m {
                            break;
                        }
                    }
                    inner += wy * kv * hsum;
                }
            }
            total += wt * inner;
        }
    }
    if !total.is_finite() {
        return Err(Error::Quadrature(format!("non-finite Duhamel value at x = {x:?}, t = {t}")));
    }
    Ok(total)
}

/// Duhamel solution at `points x times`, layout `[time][point]`.
pub fn duhamel_solve(
    f: &Source<'_>,
    p: &ObliqueParams,
    points: &[Vec<f64>],
    times: &[f64],
    opts: &DuhamelOptions,
) -> Result<Vec<Vec<f64>>> {
    times
        .iter()
        .map(|&t| points.par_iter().map(|x| duhamel_value(f, p, x, t, opts)).collect())
        .collect()
}

/// Grid ladder for the finite-difference cross-check (`m = 1`, `s = 1/2`,
/// uniform grids on `[-half_width, half_width] x [0, height]`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderOptions {
    pub half_width: f64,
    pub height: f64,
    /// Cells per unit length on the coarsest level.
    pub base_density: usize,
    pub levels: usize,
    /// `dt = dt_per_h * h`
    pub dt_per_h: f64,
    pub times: Vec<f64>,
    /// Comparison window `|x| <= window.0`, `y <= window.1`.
    pub window: (f64, f64),
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            half_width: 6.0,
            height: 6.0,
            base_density: 2,
            levels: 3,
            dt_per_h: 0.5,
            times: vec![0.5, 1.0],
            window: (3.0, 3.0),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderReport {
    pub h: Vec<f64>,
    /// Relative space-time `L^2` error against the Duhamel values.
    pub errors: Vec<f64>,
    pub order: f64,
    pub points: usize,
}

/// Solves the Robin problem by finite differences on a nested ladder and
/// compares with Duhamel values on the coarsest nodes inside the window.
pub fn duhamel_vs_fd(f: &Source<'_>, p: &ObliqueParams, ladder: &LadderOptions, opts: &DuhamelOptions) -> Result<LadderReport> {
    if p.m != 1 {
        return Err(Error::input("the finite-difference cross-check runs with m = 1"));
    }
    if ladder.levels < 2 || ladder.times.is_empty() {
        return Err(Error::input("ladder needs at least two levels and one time"));
    }
    let t_final = ladder.times.iter().cloned().fold(0.0, f64::max);
    let h0 = 1.0 / ladder.base_density as f64;
    let mut pts = Vec::new();
    let nxw = (ladder.window.0 / h0).round() as i64;
    let nyw = (ladder.window.1 / h0).round() as usize;
    for i in -nxw..=nxw {
        for j in 0..=nyw {
            pts.push(vec![i as f64 * h0, j as f64 * h0]);
        }
    }
    let reference = duhamel_solve(f, p, &pts, &ladder.times, opts)?;
    let norm: f64 = reference.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let fxy = |x: &[f64], y: f64, t: f64| f(&[x[0], y], t);
    let mut hs = Vec::new();
    let mut errors = Vec::new();
    for level in 0..ladder.levels {
        let h = h0 / (1 << level) as f64;
        let nx = (2.0 * ladder.half_width / h).round() as usize + 1;
        let ny = (ladder.height / h).round() as usize + 1;
        let grid = HalfSpaceGrid::new(
            &GridConfig::new(1, nx, ny, ladder.half_width, ladder.height, 0.5).with_grading(1.0),
        )?;
        let dt_target = ladder.dt_per_h * h;
        // time step dividing every recorded time
        let base = ladder.times.iter().fold(t_final, |acc, &t| gcd_f(acc, t));
        let steps_per_base = (base / dt_target).ceil().max(1.0) as usize;
        let steps = ((t_final / base).round() as usize) * steps_per_base;
        let fields = robin_heat_solve(&grid, p.rho, &fxy, t_final, steps, &ladder.times)?;
        let mut err = 0.0;
        for (k, (_, field)) in fields.iter().enumerate() {
            for (q, pt) in pts.iter().enumerate() {
                let hidx = grid.nearest_h(&pt[..1]);
                let j = (pt[1] / h).round() as usize;
                let d = field.at(hidx, j)[0] - reference[k][q];
                err += d * d;
            }
        }
        if fields.len() != ladder.times.len() {
            return Err(Error::input("recorded times are not multiples of the time step"));
        }
        hs.push(h);
        errors.push(err.sqrt() / norm.max(1e-300));
    }
    let order = log_slope(&hs, &errors);
    Ok(LadderReport { h: hs, errors, order, points: pts.len() })
}

/// Largest `d` with `a / d` and `b / d` integers, for rational-ish inputs.
fn gcd_f(a: f64, b: f64) -> f64 {
    let (mut x, mut y) = (a.max(b), a.min(b));
    while y > 1e-9 * a.max(b) {
        let r = x % y;
        x = y;
        y = if r < 1e-9 * a.max(b) { 0.0 } else { r };
    }
    x
}

/// `v = t exp(-|x|^2) (1 + rho y) exp(-y^2)` satisfies the Robin condition
/// and vanishes at `t = 0`; returns `(v, (d_t - Delta) v)`.
pub fn manufactured(p: &ObliqueParams) -> (Arc<Source<'static>>, Arc<Source<'static>>) {
    let rho = p.rho;
    let m = p.m;
    let v = move |x: &[f64], t: f64| {
        let r2: f64 = x[..m].iter().map(|a| a * a).sum();
        let y = x[m];
        t * (-r2).exp() * (1.0 + rho * y) * (-y * y).exp()
    };
    let f = move |x: &[f64], t: f64| {
        let r2: f64 = x[..m].iter().map(|a| a * a).sum();
        let y = x[m];
        let g = (-r2).exp();
        let lap_g = (4.0 * r2 - 2.0 * m as f64) * g;
        let e = (-y * y).exp();
        let h = (1.0 + rho * y) * e;
        let hpp = e * (-2.0 - 6.0 * rho * y + 4.0 * y * y + 4.0 * rho * y * y * y);
        g * h - t * (lap_g * h + g * hpp)
    };
    (Arc::new(v), Arc::new(f))
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured < tolerance }
    }

    fn above(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured >= tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub ladder: Option<LadderReport>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub quad_tol: f64,
    pub ladder_epsilon: f64,
    pub ladder: LadderOptions,
    pub duhamel: DuhamelOptions,
    /// Skip the finite-difference ladder.
    pub skip_ladder: bool,
    /// Rerun the ladder with tightened Duhamel quadrature.
    pub tolerance_check: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 50,
            seed: 7,
            quad_tol: 1e-12,
            ladder_epsilon: 0.5,
            ladder: LadderOptions::default(),
            duhamel: DuhamelOptions::default(),
            skip_ladder: false,
            tolerance_check: true,
        }
    }
}

/// Boundary-adjacent points for the image-kernel limits. Away from the
/// boundary `G - G_D ~ Gamma(x - y*) (x_{m+1} + y_{m+1}) / (rho t)`, which at
/// `eps = 1e-3` exceeds `1e-8` once `x_{m+1} + y_{m+1} > 0.1 t^2`.
pub fn limit_samples(m: usize) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut out = Vec::new();
    for &(x2, y2) in &[(0.0, 0.02), (0.01, 0.03), (0.02, 0.04), (0.0, 0.05)] {
        for &t in &[1.0, 1.5, 2.0] {
            for &dx in &[0.0, 0.4, -0.8] {
                let mut x = vec![dx; m];
                x.push(x2);
                let mut y = vec![0.0; m];
                y.push(y2);
                out.push((x, y, t));
            }
        }
    }
    out
}

/// Runs every Green-function check and collects the pass flags.
pub fn green_verify(m: usize, opts: &VerifyOptions) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    let samples = random_boundary_samples(m, opts.samples, opts.seed)?;
    let res = oblique_bc_residual(&samples, opts.quad_tol)?;
    checks.push(Check::below("oblique_bc_residual", res.max_residual, 1e-6));

    let mut quad_vs_closed: f64 = 0.0;
    for (s, p) in &samples {
        let mut x = s.x.clone();
        x[m] = 0.3;
        let q = green_oblique_tol(&x, &s.y, s.t, p, opts.quad_tol)?;
        let c = green_oblique_closed(&x, &s.y, s.t, p);
        quad_vs_closed = quad_vs_closed.max((q - c).abs() / peak(m, s.t));
    }
    checks.push(Check::below("quadrature_vs_closed_form", quad_vs_closed, 1e-9));

    let small = ObliqueParams::new(1e-3, m)?;
    let large = ObliqueParams::new(1e3, m)?;
    let (mut dl, mut nl) = (0.0f64, 0.0f64);
    for (x, y, t) in limit_samples(m) {
        dl = dl.max((green_oblique_tol(&x, &y, t, &small, opts.quad_tol)? - dirichlet_image(&x, &y, t)).abs());
        nl = nl.max((green_oblique_tol(&x, &y, t, &large, opts.quad_tol)? - neumann_image(&x, &y, t)).abs());
    }
    checks.push(Check::below("dirichlet_limit", dl, 1e-8));
    checks.push(Check::below("neumann_limit", nl, 1e-6));

    let mut ladder = None;
    if !opts.skip_ladder && m == 1 {
        let p = ObliqueParams::new(opts.ladder_epsilon, m)?;
        let (v, f) = manufactured(&p);
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![0.5, 0.25], vec![-1.0, 1.0], vec![0.3, 2.0]];
        let du = duhamel_solve(f.as_ref(), &p, &pts, &[1.0], &opts.duhamel)?;
        let mut mms: f64 = 0.0;
        for (x, val) in pts.iter().zip(&du[0]) {
            mms = mms.max((val - v(x, 1.0)).abs());
        }
        checks.push(Check::below("duhamel_manufactured", mms, 1e-5));
        let rep = duhamel_vs_fd(f.as_ref(), &p, &opts.ladder, &opts.duhamel)?;
        checks.push(Check::above("duhamel_vs_fd_order", rep.order, 1.5));
        if opts.tolerance_check {
            let tight = duhamel_vs_fd(f.as_ref(), &p, &opts.ladder, &opts.duhamel.tightened())?;
            let change = rep
                .errors
                .iter()
                .zip(&tight.errors)
                .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
                .fold(0.0, f64::max);
            checks.push(Check::below("duhamel_tolerance_sensitivity", change, 0.2));
        }
        ladder = Some(rep);
    }
    Ok(VerificationReport { checks, ladder })
}
