//! Cell-wise quadrature on the half-space grid: smooth weights are sampled
//! on sub-cells, field densities are cell averages.

use crate::grid::HalfSpaceGrid;

pub struct CellQuadrature<'a> {
    grid: &'a HalfSpaceGrid,
    /// Corner horizontal nodes of each horizontal cell.
    corners: Vec<Vec<usize>>,
    lower: Vec<Vec<f64>>,
    /// Horizontal sub-cell midpoint offsets.
    sub_x: Vec<Vec<f64>>,
    sub_area: f64,
    /// Per vertical cell: sub-interval midpoints and `int y^a` over each.
    sub_y: Vec<Vec<(f64, f64)>>,
}

impl<'a> CellQuadrature<'a> {
    pub fn new(grid: &'a HalfSpaceGrid, sub: usize) -> Self {
        let q = sub.max(1);
        let nx = grid.nx;
        let dx = grid.dx;
        let mut corners = Vec::new();
        let mut lower = Vec::new();
        if grid.m == 1 {
            for i in 0..nx - 1 {
                corners.push(vec![i, i + 1]);
                lower.push(vec![grid.x_nodes[i]]);
            }
        } else {
            for i0 in 0..nx - 1 {
                for i1 in 0..nx - 1 {
                    let h = i0 * nx + i1;
                    corners.push(vec![h, h + 1, h + nx, h + nx + 1]);
                    lower.push(vec![grid.x_nodes[i0], grid.x_nodes[i1]]);
                }
            }
        }
        let mids: Vec<f64> = (0..q).map(|k| (k as f64 + 0.5) * dx / q as f64).collect();
        let sub_x: Vec<Vec<f64>> = if grid.m == 1 {
            mids.iter().map(|&a| vec![a]).collect()
        } else {
            mids.iter().flat_map(|&a| mids.iter().map(move |&b| vec![a, b])).collect()
        };
        let sub_area = (dx / q as f64).powi(grid.m as i32);
        let ap = 1.0 + grid.a;
        let sub_y = (0..grid.ny - 1)
            .map(|j| {
                let (y0, y1) = (grid.y_nodes[j], grid.y_nodes[j + 1]);
                let hy = (y1 - y0) / q as f64;
                (0..q)
                    .map(|k| {
                        let a = y0 + hy * k as f64;
                        let b = a + hy;
                        (0.5 * (a + b), (b.powf(ap) - a.powf(ap)) / ap)
                    })
                    .collect()
            })
            .collect();
        Self { grid, corners, lower, sub_x, sub_area, sub_y }
    }

    pub fn n_cells_h(&self) -> usize {
        self.corners.len()
    }

    fn far(&self, c: usize, centre: &[f64], y_lo: f64, y0: f64, radius: f64) -> bool {
        let dx = self.grid.dx;
        let mut d2 = 0.0;
        for (lo, x) in self.lower[c].iter().zip(centre) {
            let gap = (lo - x).max(x - lo - dx).max(0.0);
            d2 += gap * gap;
        }
        let gy = (y_lo - y0).max(0.0);
        d2 + gy * gy > radius * radius
    }

    /// `int_cell w(X) y^a dX` per bulk cell, index `c * (ny - 1) + j`;
    /// cells farther than `radius` from `(centre, y0)` get zero.
    pub fn bulk_weights(&self, w: impl Fn(&[f64], f64) -> f64, centre: &[f64], y0: f64, radius: f64) -> Vec<f64> {
        let nyc = self.grid.ny - 1;
        let mut out = vec![0.0; self.n_cells_h() * nyc];
        let mut x = vec![0.0; self.grid.m];
        for c in 0..self.n_cells_h() {
            if self.far(c, centre, 0.0, y0, radius) {
                continue;
            }
            for j in 0..nyc {
                if self.far(c, centre, self.grid.y_nodes[j], y0, radius) {
                    break;
                }
                let mut acc = 0.0;
                for off in &self.sub_x {
                    for (d, v) in x.iter_mut().enumerate() {
                        *v = self.lower[c][d] + off[d];
                    }
                    for &(y, wy) in &self.sub_y[j] {
                        acc += w(&x, y) * wy;
                    }
                }
                out[c * nyc + j] = acc * self.sub_area;
            }
        }
        out
    }

    /// `int_cell w(x) dx` per boundary cell.
    pub fn boundary_weights(&self, w: impl Fn(&[f64]) -> f64, centre: &[f64], radius: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cells_h()];
        let mut x = vec![0.0; self.grid.m];
        for (c, o) in out.iter_mut().enumerate() {
            if self.far(c, centre, 0.0, 0.0, radius) {
                continue;
            }
            let mut acc = 0.0;
            for off in &self.sub_x {
                for (d, v) in x.iter_mut().enumerate() {
                    *v = self.lower[c][d] + off[d];
                }
                acc += w(&x);
            }
            *o = acc * self.sub_area;
        }
        out
    }

    /// Cell value of `|grad U|^2` from edge differences, each direction
    /// averaged over the parallel cell edges.
    pub fn cell_grad_sq(&self, u: &[f64], ell: usize) -> Vec<f64> {
        let g = self.grid;
        let ny = g.ny;
        let nyc = ny - 1;
        let inv_dx2 = 1.0 / (g.dx * g.dx);
        let mut out = vec![0.0; self.n_cells_h() * nyc];
        // pairs of corners differing in one horizontal direction
        let pairs: Vec<(usize, usize)> = if g.m == 1 { vec![(0, 1)] } else { vec![(0, 2), (1, 3), (0, 1), (2, 3)] };
        let nc = self.corners[0].len();
        let sq = |a: usize, b: usize| -> f64 {
            (0..ell).map(|k| (u[b * ell + k] - u[a * ell + k]).powi(2)).sum()
        };
        for (c, cor) in self.corners.iter().enumerate() {
            for j in 0..nyc {
                let hy = g.y_nodes[j + 1] - g.y_nodes[j];
                let mut hsum = 0.0;
                for &(p, q) in &pairs {
                    for jj in [j, j + 1] {
                        hsum += sq(cor[p] * ny + jj, cor[q] * ny + jj);
                    }
                }
                let mut vsum = 0.0;
                for &h in cor {
                    vsum += sq(h * ny + j, h * ny + j + 1);
                }
                // each horizontal direction has 2 * nc / 2 parallel edges
                out[c * nyc + j] = hsum * inv_dx2 / nc as f64 + vsum / (hy * hy * nc as f64);
            }
        }
        out
    }

    /// Cell average of the nodal `|v|^2`.
    pub fn cell_nodal_sq(&self, v: &[f64], ell: usize) -> Vec<f64> {
        let g = self.grid;
        let ny = g.ny;
        let nyc = ny - 1;
        let mut out = vec![0.0; self.n_cells_h() * nyc];
        let sq = |n: usize| -> f64 { v[n * ell..(n + 1) * ell].iter().map(|a| a * a).sum() };
        for (c, cor) in self.corners.iter().enumerate() {
            let k = 2.0 * cor.len() as f64;
            for j in 0..nyc {
                out[c * nyc + j] = cor.iter().map(|&h| sq(h * ny + j) + sq(h * ny + j + 1)).sum::<f64>() / k;
            }
        }
        out
    }

    /// Cell average of a scalar per horizontal node.
    pub fn boundary_cell_avg(&self, p: &[f64]) -> Vec<f64> {
        self.corners
            .iter()
            .map(|cor| cor.iter().map(|&h| p[h]).sum::<f64>() / cor.len() as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridConfig};

    #[test]
    fn linear_field_gradient_is_exact() {
        for m in [1, 2] {
            let g = HalfSpaceGrid::new(&GridConfig::new(m, 7, 6, 1.0, 1.5, 0.3)).unwrap();
            let f = Field::from_fn(&g, 1, |x, y, o| o[0] = 2.0 * x[0] - 3.0 * y);
            let cq = CellQuadrature::new(&g, 1);
            for v in cq.cell_grad_sq(&f.values, 1) {
                assert!((v - 13.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unit_weight_recovers_weighted_volume() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 9, 7, 1.0, 2.0, 0.3)).unwrap();
        let cq = CellQuadrature::new(&g, 3);
        let total: f64 = cq.bulk_weights(|_, _| 1.0, &[0.0], 0.0, 1e9).iter().sum();
        let a = g.a;
        let expect = 2.0 * 2f64.powf(1.0 + a) / (1.0 + a);
        assert!((total - expect).abs() < 1e-12 * expect);
        let len: f64 = cq.boundary_weights(|_| 1.0, &[0.0], 1e9).iter().sum();
        assert!((len - 2.0).abs() < 1e-12);
    }
}
