//! DCT-I cosine basis of the horizontal grid: eigenbasis of the Neumann
//! Laplacian on `[-L, L]^m`.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct CosineBasis {
    pub m: usize,
    pub n: usize,
    table: Vec<f64>,
    lambda1: Vec<f64>,
}

impl CosineBasis {
    pub fn new(m: usize, n: usize, half_width: f64) -> Self {
        let mut table = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                table[k * n + i] = (PI * (k * i) as f64 / (n - 1) as f64).cos();
            }
        }
        let lambda1 = (0..n)
            .map(|k| (k as f64 * PI / (2.0 * half_width)).powi(2))
            .collect();
        Self { m, n, table, lambda1 }
    }

    fn w(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5
        } else {
            1.0
        }
    }

    fn transform_1d(&self, src: &[f64], dst: &mut [f64], inverse: bool) {
        let n = self.n;
        let scale = if inverse { 2.0 / (n - 1) as f64 } else { 1.0 };
        for k in 0..n {
            let row = &self.table[k * n..(k + 1) * n];
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.w(i) * src[i] * row[i];
            }
            dst[k] = scale * acc;
        }
    }

    fn transform(&self, v: &[f64], inverse: bool) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; v.len()];
        if self.m == 1 {
            self.transform_1d(v, &mut out, inverse);
            return out;
        }
        let mut tmp = vec![0.0; v.len()];
        for r in 0..n {
            self.transform_1d(&v[r * n..(r + 1) * n], &mut tmp[r * n..(r + 1) * n], inverse);
        }
        let mut col = vec![0.0; n];
        let mut res = vec![0.0; n];
        for c in 0..n {
            for r in 0..n {
                col[r] = tmp[r * n + c];
            }
            self.transform_1d(&col, &mut res, inverse);
            for r in 0..n {
                out[r * n + c] = res[r];
            }
        }
        out
    }

    /// Coefficients of nodal values on the horizontal grid.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        self.transform(v, false)
    }

    pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
        self.transform(c, true)
    }

    /// Neumann eigenvalues `|k pi / 2L|^2` per coefficient.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.m == 1 {
            self.lambda1.clone()
        } else {
            let n = self.n;
            (0..n * n).map(|k| self.lambda1[k / n] + self.lambda1[k % n]).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for m in 1..=2 {
            let b = CosineBasis::new(m, 9, 2.0);
            let len = 9usize.pow(m as u32);
            let v: Vec<f64> = (0..len).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
            let back = b.inverse(&b.forward(&v));
            for (a, c) in v.iter().zip(&back) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_mode_is_eigenvector() {
        let n = 17;
        let l = 3.0;
        let b = CosineBasis::new(1, n, l);
        let k = 4;
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let x = -l + 2.0 * l * i as f64 / (n - 1) as f64;
                (k as f64 * PI * (x + l) / (2.0 * l)).cos()
            })
            .collect();
        let c = b.forward(&v);
        for (j, cj) in c.iter().enumerate() {
            let expect = if j == k { (n - 1) as f64 / 2.0 } else { 0.0 };
            assert!((cj - expect).abs() < 1e-10, "j={j}");
        }
        assert!((b.eigenvalues()[k] - (k as f64 * PI / 6.0).powi(2)).abs() < 1e-14);
    }
}
