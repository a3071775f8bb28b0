//! Graded tensor grid on the truncated upper half space and the weighted
//! finite-difference operator `div(y^a grad)`.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    /// Horizontal dimension, 1 or 2.
    pub m: usize,
    /// Nodes per horizontal axis on `[-lx, lx]`.
    pub nx: usize,
    /// Vertical nodes on `[0, ly]`.
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub s: f64,
    /// Vertical grading exponent; `None` picks `max(1, 2/(1+a))`.
    pub grading: Option<f64>,
}

impl GridConfig {
    pub fn new(m: usize, nx: usize, ny: usize, lx: f64, ly: f64, s: f64) -> Self {
        Self { m, nx, ny, lx, ly, s, grading: None }
    }

    pub fn with_grading(mut self, gamma: f64) -> Self {
        self.grading = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m != 1 && self.m != 2 {
            return Err(Error::config("grid.m", format!("must be 1 or 2, got {}", self.m)));
        }
        if self.nx < 4 {
            return Err(Error::config("grid.nx", format!("must be >= 4, got {}", self.nx)));
        }
        if self.ny < 4 {
            return Err(Error::config("grid.ny", format!("must be >= 4, got {}", self.ny)));
        }
        if !(self.lx > 0.0 && self.lx.is_finite()) {
            return Err(Error::config("grid.lx", "must be positive"));
        }
        if !(self.ly > 0.0 && self.ly.is_finite()) {
            return Err(Error::config("grid.ly", "must be positive"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::config("penalty.s", format!("must lie in (0,1), got {}", self.s)));
        }
        if let Some(g) = self.grading {
            if !(g >= 1.0 && g.is_finite()) {
                return Err(Error::config("grid.grading", format!("must be >= 1, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct HalfSpaceGrid {
    pub cfg: GridConfig,
    pub m: usize,
    pub nx: usize,
    pub ny: usize,
    pub s: f64,
    pub a: f64,
    pub dx: f64,
    pub grading: f64,
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    /// Trapezoid weights along one horizontal axis.
    pub wx: Vec<f64>,
    /// Horizontal node weights (tensor products of `wx`).
    pub wh: Vec<f64>,
    /// Weighted vertical hat moments `int y^a phi_j`.
    pub nu: Vec<f64>,
    /// Unweighted vertical trapezoid weights.
    pub wy_plain: Vec<f64>,
    /// Vertical edge conductances `int_{cell} y^a / h_j^2`.
    pub kappa: Vec<f64>,
    /// Horizontal edges `(h, h', perpendicular weight)`.
    pub h_edges: Vec<(usize, usize, f64)>,
}

impl HalfSpaceGrid {
    pub fn new(cfg: &GridConfig) -> Result<Arc<Self>> {
        cfg.validate()?;
        let a = 1.0 - 2.0 * cfg.s;
        let grading = cfg.grading.unwrap_or_else(|| (2.0 / (1.0 + a)).max(1.0));
        let nx = cfg.nx;
        let ny = cfg.ny;
        let dx = 2.0 * cfg.lx / (nx - 1) as f64;
        let x_nodes: Vec<f64> = (0..nx).map(|i| -cfg.lx + dx * i as f64).collect();
        let mut y_nodes: Vec<f64> = (0..ny)
            .map(|j| cfg.ly * (j as f64 / (ny - 1) as f64).powf(grading))
            .collect();
        y_nodes[0] = 0.0;
        y_nodes[ny - 1] = cfg.ly;

        let mut wx = vec![dx; nx];
        wx[0] = 0.5 * dx;
        wx[nx - 1] = 0.5 * dx;

        let (wh, h_edges) = if cfg.m == 1 {
            let edges = (0..nx - 1).map(|i| (i, i + 1, 1.0)).collect();
            (wx.clone(), edges)
        } else {
            let mut wh = Vec::with_capacity(nx * nx);
            let mut edges = Vec::new();
            for i0 in 0..nx {
                for i1 in 0..nx {
                    wh.push(wx[i0] * wx[i1]);
                    let h = i0 * nx + i1;
                    if i0 + 1 < nx {
                        edges.push((h, h + nx, wx[i1]));
                    }
                    if i1 + 1 < nx {
                        edges.push((h, h + 1, wx[i0]));
                    }
                }
            }
            (wh, edges)
        };

        let mut nu = vec![0.0; ny];
        let mut wy_plain = vec![0.0; ny];
        let mut kappa = vec![0.0; ny - 1];
        for j in 0..ny - 1 {
            let (y0, y1) = (y_nodes[j], y_nodes[j + 1]);
            let h = y1 - y0;
            let p1 = (y1.powf(1.0 + a) - y0.powf(1.0 + a)) / (1.0 + a);
            let p2 = (y1.powf(2.0 + a) - y0.powf(2.0 + a)) / (2.0 + a);
            nu[j] += (y1 * p1 - p2) / h;
            nu[j + 1] += (p2 - y0 * p1) / h;
            wy_plain[j] += 0.5 * h;
            wy_plain[j + 1] += 0.5 * h;
            kappa[j] = p1 / (h * h);
        }

        Ok(Arc::new(Self {
            cfg: cfg.clone(),
            m: cfg.m,
            nx,
            ny,
            s: cfg.s,
            a,
            dx,
            grading,
            x_nodes,
            y_nodes,
            wx,
            wh,
            nu,
            wy_plain,
            kappa,
            h_edges,
        }))
    }

    pub fn n_h(&self) -> usize {
        self.wh.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_h() * self.ny
    }

    #[inline]
    pub fn node(&self, h: usize, j: usize) -> usize {
        h * self.ny + j
    }

    /// Horizontal coordinates of horizontal node `h`.
    pub fn x_of(&self, h: usize) -> Vec<f64> {
        if self.m == 1 {
            vec![self.x_nodes[h]]
        } else {
            vec![self.x_nodes[h / self.nx], self.x_nodes[h % self.nx]]
        }
    }

    /// Horizontal node closest to `x`.
    pub fn nearest_h(&self, x: &[f64]) -> usize {
        let idx = |v: f64| (((v + self.cfg.lx) / self.dx).round().max(0.0) as usize).min(self.nx - 1);
        if self.m == 1 {
            idx(x[0])
        } else {
            idx(x[0]) * self.nx + idx(x[1])
        }
    }

    /// Lumped weighted mass per node.
    pub fn mass(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_nodes());
        for &w in &self.wh {
            for &n in &self.nu {
                out.push(w * n);
            }
        }
        out
    }

    /// `int y^a f` (weighted) or `int f` over the box, `f` scalar per node.
    pub fn integrate_bulk(&self, f: &[f64], weighted: bool) -> f64 {
        let wy = if weighted { &self.nu } else { &self.wy_plain };
        let mut sum = 0.0;
        for (h, &w) in self.wh.iter().enumerate() {
            let col = &f[h * self.ny..(h + 1) * self.ny];
            sum += w * col.iter().zip(wy).map(|(v, q)| v * q).sum::<f64>();
        }
        sum
    }

    /// `int g dx` over the boundary face, `g` scalar per horizontal node.
    pub fn integrate_boundary(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.wh).map(|(v, w)| v * w).sum()
    }

    /// `out = K u` for an `ell`-component nodal vector, `K` the stiffness
    /// matrix of `1/2 int y^a |grad U|^2`.
    pub fn apply_stiffness(&self, ell: usize, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let ny = self.ny;
        let inv_dx = 1.0 / self.dx;
        for &(h1, h2, wp) in &self.h_edges {
            for j in 0..ny {
                let w = self.nu[j] * wp * inv_dx;
                let p1 = (h1 * ny + j) * ell;
                let p2 = (h2 * ny + j) * ell;
                for c in 0..ell {
                    let d = w * (u[p2 + c] - u[p1 + c]);
                    out[p1 + c] -= d;
                    out[p2 + c] += d;
                }
            }
        }
        for (h, &wh) in self.wh.iter().enumerate() {
            for j in 0..ny - 1 {
                let w = wh * self.kappa[j];
                let p1 = (h * ny + j) * ell;
                let p2 = p1 + ell;
                for c in 0..ell {
                    let d = w * (u[p2 + c] - u[p1 + c]);
                    out[p1 + c] -= d;
                    out[p2 + c] += d;
                }
            }
        }
    }

    /// Diagonal of `K` per node.
    pub fn stiffness_diag(&self) -> Vec<f64> {
        let ny = self.ny;
        let mut d = vec![0.0; self.n_nodes()];
        for &(h1, h2, wp) in &self.h_edges {
            for j in 0..ny {
                let w = self.nu[j] * wp / self.dx;
                d[h1 * ny + j] += w;
                d[h2 * ny + j] += w;
            }
        }
        for (h, &wh) in self.wh.iter().enumerate() {
            for j in 0..ny - 1 {
                let w = wh * self.kappa[j];
                d[h * ny + j] += w;
                d[h * ny + j + 1] += w;
            }
        }
        d
    }

    /// Vertical off-diagonal couplings of `K` in column `h` (negated).
    pub fn column_coupling(&self, h: usize) -> impl Iterator<Item = f64> + '_ {
        let wh = self.wh[h];
        self.kappa.iter().map(move |k| wh * k)
    }

    /// Discrete `1/2 int y^a |grad U|^2`, edge by edge.
    pub fn dirichlet_form(&self, ell: usize, u: &[f64]) -> f64 {
        let ny = self.ny;
        let mut sum = 0.0;
        for &(h1, h2, wp) in &self.h_edges {
            for j in 0..ny {
                let w = self.nu[j] * wp / self.dx;
                let p1 = (h1 * ny + j) * ell;
                let p2 = (h2 * ny + j) * ell;
                for c in 0..ell {
                    let d = u[p2 + c] - u[p1 + c];
                    sum += w * d * d;
                }
            }
        }
        for (h, &wh) in self.wh.iter().enumerate() {
            for j in 0..ny - 1 {
                let w = wh * self.kappa[j];
                let p1 = (h * ny + j) * ell;
                for c in 0..ell {
                    let d = u[p1 + ell + c] - u[p1 + c];
                    sum += w * d * d;
                }
            }
        }
        0.5 * sum
    }

    /// Nodal gradient estimate, layout `[node][component][direction]` with
    /// directions `x_1..x_m, y`.
    pub fn gradient(&self, ell: usize, u: &[f64]) -> Vec<f64> {
        let nd = self.m + 1;
        let ny = self.ny;
        let nx = self.nx;
        let mut g = vec![0.0; self.n_nodes() * ell * nd];
        let strides: Vec<usize> = if self.m == 1 { vec![1] } else { vec![nx, 1] };
        for h in 0..self.n_h() {
            let coords: Vec<usize> = if self.m == 1 { vec![h] } else { vec![h / nx, h % nx] };
            for (d, &st) in strides.iter().enumerate() {
                let i = coords[d];
                let (hm, hp, scale, kind) = if i == 0 {
                    (h, h + st, 1.0 / (2.0 * self.dx), 0)
                } else if i == nx - 1 {
                    (h - st, h, 1.0 / (2.0 * self.dx), 2)
                } else {
                    (h - st, h + st, 1.0 / (2.0 * self.dx), 1)
                };
                for j in 0..ny {
                    for c in 0..ell {
                        let v = |hh: usize| u[(hh * ny + j) * ell + c];
                        let val = match kind {
                            0 => (-3.0 * v(h) + 4.0 * v(hp) - v(hp + st)) * scale,
                            2 => (3.0 * v(h) - 4.0 * v(hm) + v(hm - st)) * scale,
                            _ => (v(hp) - v(hm)) * scale,
                        };
                        g[((h * ny + j) * ell + c) * nd + d] = val;
                    }
                }
            }
            for j in 0..ny {
                let (j0, j1, j2) = if j == 0 {
                    (0, 1, 2)
                } else if j == ny - 1 {
                    (ny - 3, ny - 2, ny - 1)
                } else {
                    (j - 1, j, j + 1)
                };
                let w = lagrange_derivative_weights(
                    [self.y_nodes[j0], self.y_nodes[j1], self.y_nodes[j2]],
                    self.y_nodes[j],
                );
                for c in 0..ell {
                    let v = |jj: usize| u[(h * ny + jj) * ell + c];
                    g[((h * ny + j) * ell + c) * nd + self.m] = w[0] * v(j0) + w[1] * v(j1) + w[2] * v(j2);
                }
            }
        }
        g
    }
}

/// Weights of the derivative of the quadratic interpolant through three
/// nodes, evaluated at `x`.
fn lagrange_derivative_weights(p: [f64; 3], x: f64) -> [f64; 3] {
    let [a, b, c] = p;
    [
        ((x - b) + (x - c)) / ((a - b) * (a - c)),
        ((x - a) + (x - c)) / ((b - a) * (b - c)),
        ((x - a) + (x - b)) / ((c - a) * (c - b)),
    ]
}

/// Nodal `ell`-vector field on the half-space grid.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Arc<HalfSpaceGrid>,
    pub ell: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<HalfSpaceGrid>, ell: usize) -> Self {
        Self { grid: grid.clone(), ell, values: vec![0.0; grid.n_nodes() * ell] }
    }

    pub fn from_values(grid: &Arc<HalfSpaceGrid>, ell: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() * ell {
            return Err(Error::input(format!(
                "field needs {} values, got {}",
                grid.n_nodes() * ell,
                values.len()
            )));
        }
        Ok(Self { grid: grid.clone(), ell, values })
    }

    /// Sample `f(x, y, out)` at every node.
    pub fn from_fn(grid: &Arc<HalfSpaceGrid>, ell: usize, f: impl Fn(&[f64], f64, &mut [f64])) -> Self {
        let mut field = Self::zeros(grid, ell);
        for h in 0..grid.n_h() {
            let x = grid.x_of(h);
            for j in 0..grid.ny {
                let p = grid.node(h, j) * ell;
                f(&x, grid.y_nodes[j], &mut field.values[p..p + ell]);
            }
        }
        field
    }

    /// Column-constant field with the given trace.
    pub fn constant_extension(trace: &Trace) -> Self {
        let g = &trace.grid;
        let ell = trace.ell;
        let mut field = Self::zeros(g, ell);
        for h in 0..g.n_h() {
            let src = &trace.values[h * ell..(h + 1) * ell];
            for j in 0..g.ny {
                let p = g.node(h, j) * ell;
                field.values[p..p + ell].copy_from_slice(src);
            }
        }
        field
    }

    #[inline]
    pub fn at(&self, h: usize, j: usize) -> &[f64] {
        let p = (h * self.grid.ny + j) * self.ell;
        &self.values[p..p + self.ell]
    }

    pub fn trace(&self) -> Trace {
        let g = &self.grid;
        let mut values = Vec::with_capacity(g.n_h() * self.ell);
        for h in 0..g.n_h() {
            values.extend_from_slice(self.at(h, 0));
        }
        Trace { grid: g.clone(), ell: self.ell, values }
    }

    /// `max |U|` over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values
            .chunks(self.ell)
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `int y^a |grad U|^2`.
    pub fn dirichlet_energy(&self) -> f64 {
        2.0 * self.grid.dirichlet_form(self.ell, &self.values)
    }
}

/// Boundary values `u(x) = U(x, 0)`.
#[derive(Clone, Debug)]
pub struct Trace {
    pub grid: Arc<HalfSpaceGrid>,
    pub ell: usize,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn from_fn(grid: &Arc<HalfSpaceGrid>, ell: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.n_h() * ell];
        for h in 0..grid.n_h() {
            f(&grid.x_of(h), &mut values[h * ell..(h + 1) * ell]);
        }
        Self { grid: grid.clone(), ell, values }
    }

    pub fn from_values(grid: &Arc<HalfSpaceGrid>, ell: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_h() * ell {
            return Err(Error::input(format!(
                "trace needs {} values, got {}",
                grid.n_h() * ell,
                values.len()
            )));
        }
        Ok(Self { grid: grid.clone(), ell, values })
    }

    #[inline]
    pub fn at(&self, h: usize) -> &[f64] {
        &self.values[h * self.ell..(h + 1) * self.ell]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.ell).copied().collect()
    }

    pub fn min_abs(&self) -> f64 {
        self.values
            .chunks(self.ell)
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(s: f64) -> Arc<HalfSpaceGrid> {
        HalfSpaceGrid::new(&GridConfig::new(1, 9, 7, 2.0, 3.0, s)).unwrap()
    }

    #[test]
    fn rejects_bad_config() {
        let e = HalfSpaceGrid::new(&GridConfig::new(1, 3, 7, 1.0, 1.0, 0.5)).unwrap_err();
        assert!(e.to_string().contains("grid.nx"));
        let e = HalfSpaceGrid::new(&GridConfig::new(3, 8, 7, 1.0, 1.0, 0.5)).unwrap_err();
        assert!(e.to_string().contains("grid.m"));
        let e = HalfSpaceGrid::new(&GridConfig::new(1, 8, 7, 1.0, 1.0, 1.0)).unwrap_err();
        assert!(e.to_string().contains("penalty.s"));
    }

    #[test]
    fn weighted_integral_of_one_is_exact() {
        for &s in &[0.25, 0.5, 0.75] {
            let g = grid(s);
            let a = 1.0 - 2.0 * s;
            let ones = vec![1.0; g.n_nodes()];
            let exact = 4.0 * 3.0f64.powf(1.0 + a) / (1.0 + a);
            assert!((g.integrate_bulk(&ones, true) - exact).abs() < 1e-12 * exact);
            assert!((g.integrate_bulk(&ones, false) - 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_reduce_to_trapezoid() {
        let g = grid(0.5);
        for (n, w) in g.nu.iter().zip(&g.wy_plain) {
            assert!((n - w).abs() < 1e-14);
        }
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let g = HalfSpaceGrid::new(&GridConfig::new(2, 5, 6, 1.0, 1.0, 0.3)).unwrap();
        let n = g.n_nodes();
        let mut out = vec![0.0; n];
        g.apply_stiffness(1, &vec![2.0; n], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        let u: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 13 % 7) as f64).cos()).collect();
        let mut ku = vec![0.0; n];
        let mut kv = vec![0.0; n];
        g.apply_stiffness(1, &u, &mut ku);
        g.apply_stiffness(1, &v, &mut kv);
        let a: f64 = ku.iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = kv.iter().zip(&u).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        let e = g.dirichlet_form(1, &u);
        let q: f64 = ku.iter().zip(&u).map(|(x, y)| x * y).sum();
        assert!((2.0 * e - q).abs() < 1e-10 * q);
    }

    #[test]
    fn energy_of_linear_in_x_field() {
        // U = (x, 0) on [-1,1] x [0,1], s = 1/2: |grad U|^2 = 1 times area 2
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 6, 5, 1.0, 1.0, 0.5)).unwrap();
        let f = Field::from_fn(&g, 2, |x, _y, o| o[0] = x[0]);
        assert!((f.dirichlet_energy() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let g = HalfSpaceGrid::new(&GridConfig::new(2, 6, 7, 1.0, 2.0, 0.25)).unwrap();
        let f = Field::from_fn(&g, 1, |x, y, o| o[0] = x[0] * x[0] + 3.0 * x[1] + y * y - x[1] * y);
        let gr = g.gradient(1, &f.values);
        for h in 0..g.n_h() {
            let x = g.x_of(h);
            for j in 0..g.ny {
                let y = g.y_nodes[j];
                let p = g.node(h, j) * 3;
                assert!((gr[p] - 2.0 * x[0]).abs() < 1e-11);
                assert!((gr[p + 1] - (3.0 - y)).abs() < 1e-11);
                assert!((gr[p + 2] - (2.0 * y - x[1])).abs() < 1e-10);
            }
        }
    }
}
