//! Elliptic and caloric extensions of boundary data and the two routes for
//! evaluating `(d_t - Delta)^s`.

use std::sync::Arc;

use gauss_quad::GaussLegendre;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_li;

use crate::cosine::CosineBasis;
use crate::error::{Error, Result};
use crate::grid::{Field, HalfSpaceGrid, Trace};
use crate::kernels::poisson_normaliser;
use crate::linalg::{pcg, ColumnPreconditioner};
use crate::special::{abs_gamma_neg, cs_constant, gl_rule, upper_gamma_neg};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionMethod {
    FiniteDifference,
    Kernel,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, max_iter: 50_000 }
    }
}

/// Extension of `u0` solving `div(y^a grad U) = 0`, `U(., 0) = u0`,
/// homogeneous Neumann on the artificial faces.
pub fn harmonic_extend(u0: &Trace, method: ExtensionMethod) -> Result<Field> {
    match method {
        ExtensionMethod::FiniteDifference => harmonic_extend_fd(u0, &SolveOptions::default()),
        ExtensionMethod::Kernel => harmonic_extend_kernel(u0),
    }
}

/// Dirichlet solve `K_II U_I = -K_IB u0` by PCG with the column
/// preconditioner, starting from the column-constant extension.
pub fn harmonic_extend_fd(u0: &Trace, opts: &SolveOptions) -> Result<Field> {
    let g = &u0.grid;
    let ell = u0.ell;
    let ny = g.ny;
    let mut field = Field::constant_extension(u0);
    let n = field.values.len();
    let mut rhs = vec![0.0; n];
    g.apply_stiffness(ell, &field.values, &mut rhs);
    let zero_boundary = |v: &mut [f64]| {
        for h in 0..g.n_h() {
            let p = h * ny * ell;
            v[p..p + ell].iter_mut().for_each(|x| *x = 0.0);
        }
    };
    rhs.iter_mut().for_each(|v| *v = -*v);
    zero_boundary(&mut rhs);
    let pc = ColumnPreconditioner::new(g, ell, 0.0, None, true)?;
    let mut w = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    pcg(
        |v, out| {
            tmp.copy_from_slice(v);
            zero_boundary(&mut tmp);
            g.apply_stiffness(ell, &tmp, out);
            zero_boundary(out);
        },
        |r, z| pc.apply(r, z),
        &rhs,
        &mut w,
        opts.rtol,
        opts.max_iter,
    )?;
    zero_boundary(&mut w);
    for (f, d) in field.values.iter_mut().zip(&w) {
        *f += d;
    }
    Ok(field)
}

/// Poisson-kernel convolution with exact cell integrals against the
/// piecewise-linear interpolant of the evenly reflected, periodically
/// continued data (`m = 1` only).
pub fn harmonic_extend_kernel(u0: &Trace) -> Result<Field> {
    let g = &u0.grid;
    if g.m != 1 {
        return Err(Error::input("kernel extension is available for m = 1 only"));
    }
    let ell = u0.ell;
    let s = g.s;
    let nx = g.nx;
    let ny = g.ny;
    let dx = g.dx;
    let norm = poisson_normaliser(1, s)?;
    let period_cells = 2 * (nx - 1);
    let reps = 8usize;
    let half_cells = (reps * period_cells + nx) as i64;

    // node value at any integer position (reflected, periodic), per component
    let node_value = |k: i64, c: usize| -> f64 {
        let p = period_cells as i64;
        let mut r = k.rem_euclid(p) as usize;
        if r >= nx {
            r = period_cells - r;
        }
        u0.values[r * ell + c]
    };
    let mean: Vec<f64> = (0..ell)
        .map(|c| (0..period_cells as i64).map(|k| node_value(k, c)).sum::<f64>() / period_cells as f64)
        .collect();

    let mut field = Field::zeros(g, ell);
    for h in 0..nx {
        let p = g.node(h, 0) * ell;
        field.values[p..p + ell].copy_from_slice(u0.at(h));
    }
    let a = 1.0 - 2.0 * s;
    for j in 1..ny {
        let y = g.y_nodes[j];
        let y2s = y.powf(2.0 * s) / norm;
        // antiderivatives of p and z p at offsets d * dx
        let len = (2 * half_cells + 1) as usize;
        let mut f0 = vec![0.0; len];
        let mut f1 = vec![0.0; len];
        for (idx, d) in (-half_cells..=half_cells).enumerate() {
            let z = d as f64 * dx;
            let w = z * z / (z * z + y * y);
            f0[idx] = 0.5 * z.signum() * beta_reg(0.5, s, w);
            f1[idx] = if (a).abs() < 1e-14 {
                y2s * 0.5 * (z * z + y * y).ln()
            } else {
                y2s * (z * z + y * y).powf(a / 2.0) / a
            };
        }
        for i in 0..nx {
            let mut acc = vec![0.0; ell];
            // cells [k, k+1] in node units relative to the periodic image lattice
            let kmin = i as i64 - half_cells;
            let kmax = i as i64 + half_cells - 1;
            for k in kmin..=kmax {
                let da = (k - i as i64 + half_cells) as usize;
                let i0 = f0[da + 1] - f0[da];
                let i1 = f1[da + 1] - f1[da];
                // data linear on the cell: u_k + (u_{k+1} - u_k) (z - z_k)/dx,
                // with z - x = zeta, z_k - x = (k - i) dx
                let off = (k - i as i64) as f64 * dx;
                for (c, slot) in acc.iter_mut().enumerate() {
                    let uk = node_value(k, c) - mean[c];
                    let uk1 = node_value(k + 1, c) - mean[c];
                    let slope = (uk1 - uk) / dx;
                    *slot += uk * i0 + slope * (i1 - off * i0);
                }
            }
            let p = g.node(i, j) * ell;
            for c in 0..ell {
                field.values[p + c] = mean[c] + acc[c];
            }
        }
    }
    Ok(field)
}

/// `int y^a |grad U|^2` of the discrete field.
pub fn dirichlet_energy(u: &Field) -> f64 {
    u.dirichlet_energy()
}

/// `-(1/c_s) lim y^a dU/dy` from the first two vertical nodes with
/// Richardson elimination of the `y^(1+a)` correction.
pub fn frac_op_via_extension(u: &Field) -> Result<Trace> {
    let g = &u.grid;
    if g.ny < 8 {
        return Err(Error::input(format!("flux extraction needs ny >= 8, got {}", g.ny)));
    }
    let a = g.a;
    let cs = cs_constant(g.s);
    let ell = u.ell;
    let (y1, y2) = (g.y_nodes[1], g.y_nodes[2]);
    let q1 = y1.powf(1.0 - a) / (1.0 - a);
    let q2 = y2.powf(1.0 - a) / (1.0 - a);
    let (p1, p2) = (y1.powf(1.0 + a), y2.powf(1.0 + a));
    let mut out = vec![0.0; g.n_h() * ell];
    for h in 0..g.n_h() {
        let (u0, u1, u2) = (u.at(h, 0), u.at(h, 1), u.at(h, 2));
        for c in 0..ell {
            let f1 = (u1[c] - u0[c]) / q1;
            let f2 = (u2[c] - u0[c]) / q2;
            let flux = (f1 * p2 - f2 * p1) / (p2 - p1);
            out[h * ell + c] = -flux / cs;
        }
    }
    Trace::from_values(g, ell, out)
}

/// Time-indexed boundary samples `u(., t_k)`, linearly interpolated.
#[derive(Clone, Debug)]
pub struct TraceHistory {
    pub grid: Arc<HalfSpaceGrid>,
    pub ell: usize,
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl TraceHistory {
    pub fn new(grid: &Arc<HalfSpaceGrid>, ell: usize) -> Self {
        Self { grid: grid.clone(), ell, times: Vec::new(), samples: Vec::new() }
    }

    pub fn push(&mut self, t: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.grid.n_h() * self.ell {
            return Err(Error::input("history sample does not match the grid"));
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::input(format!("history times must increase ({t} after {last})")));
            }
        }
        self.times.push(t);
        self.samples.push(values);
        Ok(())
    }

    /// Sample `u(., t) = f(x, t)` at the given times.
    pub fn from_fn(
        grid: &Arc<HalfSpaceGrid>,
        ell: usize,
        times: &[f64],
        f: impl Fn(&[f64], f64, &mut [f64]),
    ) -> Result<Self> {
        let mut hist = Self::new(grid, ell);
        for &t in times {
            let tr = Trace::from_fn(grid, ell, |x, o| f(x, t, o));
            hist.push(t, tr.values)?;
        }
        Ok(hist)
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
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, w)
    }

    /// Linear interpolation in time (constant extrapolation).
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let (k, w) = self.bracket(t);
        if self.times.len() == 1 {
            return self.samples[0].clone();
        }
        self.samples[k]
            .iter()
            .zip(&self.samples[k + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }

    /// Left time derivative of the interpolant at `t`.
    pub fn slope(&self, t: f64) -> Vec<f64> {
        if self.times.len() < 2 {
            return vec![0.0; self.samples[0].len()];
        }
        let (mut k, _) = self.bracket(t);
        if k > 0 && (t - self.times[k]).abs() <= 1e-14 * t.abs().max(1.0) {
            k -= 1;
        }
        let dt = self.times[k + 1] - self.times[k];
        self.samples[k]
            .iter()
            .zip(&self.samples[k + 1])
            .map(|(a, b)| (b - a) / dt)
            .collect()
    }

    pub fn trace_at(&self, t: f64) -> Trace {
        Trace { grid: self.grid.clone(), ell: self.ell, values: self.sample(t) }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KernelRouteOptions {
    /// Singular cutoff; `None` uses the squared sampling step at `t`.
    pub tau_min: Option<f64>,
    /// Ratio of the geometric panel grid on `[tau_min, t]`.
    pub ratio: f64,
    /// Gauss points per panel.
    pub gauss_points: usize,
}

impl Default for KernelRouteOptions {
    fn default() -> Self {
        Self { tau_min: None, ratio: 1.05, gauss_points: 4 }
    }
}

#[derive(Clone, Debug)]
pub struct KernelRouteOutput {
    pub value: Trace,
    pub tau_min: f64,
    /// History horizon actually used (the full interval `[0, t]`).
    pub t_hist: f64,
    pub panels: usize,
}

/// `(d_t - Delta)^s u` at time `t` from the singular-integral representation
/// against the fractional heat kernel. Spatial convolution is carried out in
/// the Neumann cosine basis of the grid; the tail `tau > t` uses the initial
/// datum analytically.
pub fn frac_op_via_kernel(history: &TraceHistory, t: f64, opts: &KernelRouteOptions) -> Result<KernelRouteOutput> {
    if history.times.is_empty() {
        return Err(Error::History("empty history".into()));
    }
    if !(t > 0.0) {
        return Err(Error::input(format!("evaluation time must be positive, got {t}")));
    }
    let tol = 1e-12 * t.max(1.0);
    if history.times[0].abs() > tol {
        return Err(Error::History(format!("history starts at {} instead of 0", history.times[0])));
    }
    if *history.times.last().unwrap() < t - tol {
        return Err(Error::History(format!(
            "history ends at {} before t = {t}",
            history.times.last().unwrap()
        )));
    }
    let g = &history.grid;
    let ell = history.ell;
    let s = g.s;
    let nh = g.n_h();
    let basis = CosineBasis::new(g.m, g.nx, g.cfg.lx);
    let lambda = basis.eigenvalues();

    let tau_min = match opts.tau_min {
        Some(v) => v,
        None => {
            let dt = if history.times.len() >= 2 {
                let (k, _) = history.bracket(t);
                let mut k = k;
                if k > 0 && (t - history.times[k]).abs() <= tol {
                    k -= 1;
                }
                history.times[k + 1] - history.times[k]
            } else {
                t
            };
            (dt * dt).min(0.01 * t)
        }
    };
    if !(tau_min > 0.0 && tau_min < t) {
        return Err(Error::input(format!("tau_min must lie in (0, t), got {tau_min}")));
    }

    let comp = |v: &[f64], c: usize| -> Vec<f64> { v.iter().skip(c).step_by(ell).copied().collect() };
    let now = history.sample(t);
    let slope = history.slope(t);
    let first = &history.samples[0];

    let rule: GaussLegendre = gl_rule(opts.gauss_points);
    let nodes: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    let panels = ((t / tau_min).ln() / opts.ratio.ln()).ceil().max(1.0) as usize;
    let q = (t / tau_min).powf(1.0 / panels as f64);

    let mut out = vec![0.0; nh * ell];
    for c in 0..ell {
        let a_now = basis.forward(&comp(&now, c));
        let a_dot = basis.forward(&comp(&slope, c));
        let a_0 = basis.forward(&comp(first, c));
        let mut acc = vec![0.0; a_now.len()];
        for k in 0..a_now.len() {
            let lam = lambda[k];
            // [0, tau_min]: exact integration of the first-order expansion
            let x = lam * tau_min;
            let taylor = if lam > 0.0 {
                let lower = gamma_li(1.0 - s, x);
                a_now[k] * lam.powf(s) * ((-x).exp_m1() * x.powf(-s) / s + lower / s)
                    + a_dot[k] * lam.powf(s - 1.0) * lower
            } else {
                a_dot[k] * tau_min.powf(1.0 - s) / (1.0 - s)
            };
            // u(t) part on [tau_min, inf) and the initial-datum tail
            let tail0 = if lam > 0.0 {
                if lam * t < 700.0 {
                    a_0[k] * lam.powf(s) * upper_gamma_neg(s, lam * t)
                } else {
                    0.0
                }
            } else {
                a_0[k] * t.powf(-s) / s
            };
            acc[k] = taylor + a_now[k] * tau_min.powf(-s) / s - tail0;
        }
        // -int_{tau_min}^{t} e^{-lam tau} a(t - tau) tau^{-1-s}
        let mut lo = tau_min;
        for _ in 0..panels {
            let hi = lo * q;
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for &(xi, wi) in &nodes {
                let tau = mid + half * xi;
                let w = wi * half * tau.powf(-1.0 - s);
                let past = basis.forward(&comp(&history.sample(t - tau), c));
                for k in 0..acc.len() {
                    let e = lambda[k] * tau;
                    if e < 700.0 {
                        acc[k] -= w * (-e).exp() * past[k];
                    }
                }
            }
            lo = hi;
        }
        let scale = 1.0 / abs_gamma_neg(s);
        acc.iter_mut().for_each(|v| *v *= scale);
        let phys = basis.inverse(&acc);
        for h in 0..nh {
            out[h * ell + c] = phys[h];
        }
    }
    Ok(KernelRouteOutput {
        value: Trace::from_values(g, ell, out)?,
        tau_min,
        t_hist: t,
        panels,
    })
}

/// Caloric extension: `y^a U_t = div(y^a grad U)` with boundary values from
/// the history, started from the elliptic extension of `u(., 0)`, BDF2 in
/// time with `steps` steps up to `t`.
pub fn caloric_extend(history: &TraceHistory, t: f64, steps: usize) -> Result<Field> {
    let g = &history.grid;
    let ell = history.ell;
    let ny = g.ny;
    if steps == 0 || !(t > 0.0) {
        return Err(Error::input("caloric extension needs t > 0 and at least one step"));
    }
    let start = harmonic_extend_fd(&history.trace_at(0.0), &SolveOptions::default())?;
    let dt = t / steps as f64;
    let mass = g.mass();
    let n = start.values.len();
    let mut prev = start.values.clone();
    let mut cur = start.values;
    let set_boundary = |v: &mut [f64], tr: &[f64]| {
        for h in 0..g.n_h() {
            let p = h * ny * ell;
            v[p..p + ell].copy_from_slice(&tr[h * ell..(h + 1) * ell]);
        }
    };
    let zero_boundary = |v: &mut [f64]| {
        for h in 0..g.n_h() {
            let p = h * ny * ell;
            v[p..p + ell].iter_mut().for_each(|x| *x = 0.0);
        }
    };
    let mut tmp = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for step in 1..=steps {
        let tn = dt * step as f64;
        let (shift, bdf2) = if step == 1 { (1.0 / dt, false) } else { (1.5 / dt, true) };
        // unknown U^{n+1} = E + W with E carrying the new boundary values
        let mut next = cur.clone();
        set_boundary(&mut next, &history.sample(tn));
        for i in 0..n {
            let node = i / ell;
            let hist = if bdf2 { (2.0 * cur[i] - 0.5 * prev[i]) / dt } else { cur[i] / dt };
            rhs[i] = mass[node] * (hist - shift * next[i]);
        }
        g.apply_stiffness(ell, &next, &mut tmp);
        for i in 0..n {
            rhs[i] -= tmp[i];
        }
        zero_boundary(&mut rhs);
        let pc = ColumnPreconditioner::new(g, ell, shift, None, true)?;
        let mut w = vec![0.0; n];
        let mut buf = vec![0.0; n];
        pcg(
            |v, out| {
                buf.copy_from_slice(v);
                zero_boundary(&mut buf);
                g.apply_stiffness(ell, &buf, out);
                for i in 0..n {
                    out[i] += shift * mass[i / ell] * buf[i];
                }
                zero_boundary(out);
            },
            |r, z| pc.apply(r, z),
            &rhs,
            &mut w,
            1e-12,
            50_000,
        )?;
        zero_boundary(&mut w);
        for i in 0..n {
            next[i] += w[i];
        }
        prev = std::mem::replace(&mut cur, next);
    }
    Field::from_values(g, ell, cur)
}

/// `L^2` norm over the boundary of the part of `w` tangent to the sphere at
/// `u/|u|`.
pub fn orthogonality_residual(u: &Trace, w: &Trace) -> Result<f64> {
    if u.ell != w.ell || u.values.len() != w.values.len() {
        return Err(Error::input("orthogonality_residual: traces do not match"));
    }
    let ell = u.ell;
    let g = &u.grid;
    let mut sum = 0.0;
    for h in 0..g.n_h() {
        let p = u.at(h);
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (r - 1.0).abs() > 0.1 {
            return Err(Error::input(format!("|u| = {r:.4} is not within 0.1 of 1 at node {h}")));
        }
        let q = w.at(h);
        let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / (r * r);
        let tang: f64 = (0..ell).map(|c| (q[c] - dot * p[c]).powi(2)).sum();
        sum += g.wh[h] * tang;
    }
    Ok(sum.sqrt())
}

/// Relative `L^2` distance between two traces over the boundary.
pub fn relative_l2(a: &Trace, b: &Trace) -> f64 {
    let g = &a.grid;
    let ell = a.ell;
    let mut num = 0.0;
    let mut den = 0.0;
    for h in 0..g.n_h() {
        for c in 0..ell {
            let (x, y) = (a.values[h * ell + c], b.values[h * ell + c]);
            num += g.wh[h] * (x - y) * (x - y);
            den += g.wh[h] * y * y;
        }
    }
    (num / den.max(1e-300)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;

    #[test]
    fn constant_data_extends_to_constant() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 16, 12, 2.0, 2.0, 0.3)).unwrap();
        let tr = Trace::from_fn(&g, 2, |_, o| {
            o[0] = 0.6;
            o[1] = -0.8;
        });
        for method in [ExtensionMethod::FiniteDifference, ExtensionMethod::Kernel] {
            let u = harmonic_extend(&tr, method).unwrap();
            for p in u.values.chunks(2) {
                assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] + 0.8).abs() < 1e-12);
            }
            let f = frac_op_via_extension(&u).unwrap();
            assert!(f.values.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn trace_is_preserved_bitwise() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 20, 10, 3.0, 3.0, 0.5)).unwrap();
        let tr = Trace::from_fn(&g, 1, |x, o| o[0] = (-x[0] * x[0]).exp());
        for method in [ExtensionMethod::FiniteDifference, ExtensionMethod::Kernel] {
            let u = harmonic_extend(&tr, method).unwrap();
            assert_eq!(u.trace().values, tr.values);
        }
    }

    #[test]
    fn flux_needs_eight_levels() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 8, 7, 1.0, 1.0, 0.5)).unwrap();
        let u = Field::zeros(&g, 1);
        assert!(frac_op_via_extension(&u).is_err());
    }

    #[test]
    fn orthogonality_residual_examples() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 8, 8, 1.0, 1.0, 0.5)).unwrap();
        let u = Trace::from_fn(&g, 2, |x, o| {
            o[0] = x[0].cos();
            o[1] = x[0].sin();
        });
        let normal = Trace::from_fn(&g, 2, |x, o| {
            o[0] = x[0] * x[0].cos();
            o[1] = x[0] * x[0].sin();
        });
        assert!(orthogonality_residual(&u, &normal).unwrap() < 1e-12);
        let tangent = Trace::from_fn(&g, 2, |x, o| {
            o[0] = -x[0].sin();
            o[1] = x[0].cos();
        });
        let r = orthogonality_residual(&u, &tangent).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let bad = Trace::from_fn(&g, 2, |_, o| {
            o[0] = 0.5;
            o[1] = 0.0;
        });
        assert!(orthogonality_residual(&bad, &tangent).is_err());
    }

    #[test]
    fn kernel_route_rejects_short_history() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 16, 8, 1.0, 1.0, 0.5)).unwrap();
        let h = TraceHistory::from_fn(&g, 1, &[0.0, 0.5], |_, _, o| o[0] = 1.0).unwrap();
        assert!(frac_op_via_kernel(&h, 1.0, &KernelRouteOptions::default()).is_err());
        let h = TraceHistory::from_fn(&g, 1, &[0.1, 1.0], |_, _, o| o[0] = 1.0).unwrap();
        assert!(frac_op_via_kernel(&h, 1.0, &KernelRouteOptions::default()).is_err());
    }

    #[test]
    fn kernel_route_annihilates_constants() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 16, 8, 1.0, 1.0, 0.5)).unwrap();
        let h = TraceHistory::from_fn(&g, 1, &[0.0, 0.5, 1.0], |_, _, o| o[0] = 2.0).unwrap();
        let out = frac_op_via_kernel(&h, 1.0, &KernelRouteOptions::default()).unwrap();
        assert!(out.value.values.iter().all(|v| v.abs() < 1e-10), "{:?}", out.value.values);
    }
}
