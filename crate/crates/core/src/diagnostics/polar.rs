use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::grid::HalfSpaceGrid;

use super::Sampler;

#[derive(Clone, Copy, Debug)]
pub struct PolarResiduals {
    /// `d_t rho - L rho + |grad w|^2 rho`
    pub rho: f64,
    /// `d_t w - L w - 2 (grad rho / rho) . grad w - |grad w|^2 w`
    pub omega: f64,
    /// `max ||w| - 1|` over the interior.
    pub unit_defect: f64,
}

/// Centered first and second derivative weights at interior node `j` of a
/// nonuniform column.
fn y_stencil(y: &[f64], j: usize) -> ([f64; 3], [f64; 3]) {
    let hm = y[j] - y[j - 1];
    let hp = y[j + 1] - y[j];
    let d1 = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
    let d2 = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
    (d1, d2)
}

/// Discrete residuals of the polar form of the flow at snapshot `k`, with
/// `L = Delta + (a/y) d_y` and `d_t` by centered snapshot differences. The
/// `L^2` norms are `y^a`-weighted over interior nodes.
pub fn polar_residuals(traj: &Trajectory, k: usize) -> Result<PolarResiduals> {
    let n = traj.snapshots.len();
    if n < 3 || k == 0 || k + 1 >= n {
        return Err(Error::History(format!("snapshot {k} has no neighbours on both sides")));
    }
    let s = Sampler::new(traj);
    let g: &HalfSpaceGrid = s.grid;
    let ell = s.ell();
    let (ny, nx, m) = (g.ny, g.nx, g.m);
    let u = &traj.snapshots[k].field.values;
    let polar = |v: &[f64], check: bool| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rho = vec![0.0; g.n_nodes()];
        let mut om = vec![0.0; v.len()];
        for i in 0..g.n_nodes() {
            let p = &v[i * ell..(i + 1) * ell];
            let r = p.iter().map(|a| a * a).sum::<f64>().sqrt();
            if check && r < 0.5 {
                let (h, j) = (i / ny, i % ny);
                return Err(Error::input(format!(
                    "|U| = {r:.4} < 1/2 at node (h = {h}, j = {j}), x = {:?}, y = {:.4}",
                    g.x_of(h),
                    g.y_nodes[j]
                )));
            }
            rho[i] = r;
            for c in 0..ell {
                om[i * ell + c] = p[c] / r;
            }
        }
        Ok((rho, om))
    };
    let (rho, om) = polar(u, true)?;
    let (rho_m, om_m) = polar(&traj.snapshots[k - 1].field.values, true)?;
    let (rho_p, om_p) = polar(&traj.snapshots[k + 1].field.values, true)?;
    let dt = traj.snapshots[k + 1].t - traj.snapshots[k - 1].t;

    let strides: Vec<usize> = if m == 1 { vec![ny] } else { vec![nx * ny, ny] };
    let interior_h = |h: usize| -> bool {
        if m == 1 {
            h > 0 && h + 1 < nx
        } else {
            let (a, b) = (h / nx, h % nx);
            a > 0 && a + 1 < nx && b > 0 && b + 1 < nx
        }
    };
    let inv_dx = 1.0 / g.dx;
    let mass = g.mass();
    let (mut r_acc, mut w_acc, mut unit) = (0.0, 0.0, 0.0f64);
    let mut grad_w = vec![0.0; ell * (m + 1)];
    let mut lap_w = vec![0.0; ell];
    for h in (0..g.n_h()).filter(|&h| interior_h(h)) {
        for j in 1..ny - 1 {
            let i = g.node(h, j);
            let y = g.y_nodes[j];
            let (d1, d2) = y_stencil(&g.y_nodes, j);
            // scalar derivatives of rho
            let mut grad_r = vec![0.0; m + 1];
            let mut lap_r = 0.0;
            for (d, &st) in strides.iter().enumerate() {
                grad_r[d] = 0.5 * (rho[i + st] - rho[i - st]) * inv_dx;
                lap_r += (rho[i + st] - 2.0 * rho[i] + rho[i - st]) * inv_dx * inv_dx;
            }
            let ry = d1[0] * rho[i - 1] + d1[1] * rho[i] + d1[2] * rho[i + 1];
            grad_r[m] = ry;
            lap_r += d2[0] * rho[i - 1] + d2[1] * rho[i] + d2[2] * rho[i + 1] + g.a / y * ry;
            let mut gw2 = 0.0;
            for c in 0..ell {
                let w = |n: usize| om[n * ell + c];
                let mut lap = 0.0;
                for (d, &st) in strides.iter().enumerate() {
                    let v = 0.5 * (w(i + st) - w(i - st)) * inv_dx;
                    grad_w[c * (m + 1) + d] = v;
                    gw2 += v * v;
                    lap += (w(i + st) - 2.0 * w(i) + w(i - st)) * inv_dx * inv_dx;
                }
                let wy = d1[0] * w(i - 1) + d1[1] * w(i) + d1[2] * w(i + 1);
                grad_w[c * (m + 1) + m] = wy;
                gw2 += wy * wy;
                lap += d2[0] * w(i - 1) + d2[1] * w(i) + d2[2] * w(i + 1) + g.a / y * wy;
                lap_w[c] = lap;
            }
            let rt = (rho_p[i] - rho_m[i]) / dt;
            let res_r = rt - lap_r + gw2 * rho[i];
            let mut res_w = 0.0;
            for c in 0..ell {
                let wt = (om_p[i * ell + c] - om_m[i * ell + c]) / dt;
                let adv: f64 = (0..=m).map(|d| grad_r[d] * grad_w[c * (m + 1) + d]).sum::<f64>() / rho[i];
                let r = wt - lap_w[c] - 2.0 * adv - gw2 * om[i * ell + c];
                res_w += r * r;
            }
            r_acc += mass[i] * res_r * res_r;
            w_acc += mass[i] * res_w;
            let norm = om[i * ell..(i + 1) * ell].iter().map(|a| a * a).sum::<f64>().sqrt();
            unit = unit.max((norm - 1.0).abs());
        }
    }
    Ok(PolarResiduals { rho: r_acc.sqrt(), omega: w_acc.sqrt(), unit_defect: unit })
}
