//! Closed-form kernels: Poisson kernel of the extension, backward
//! fundamental solution of the weighted heat operator, the fractional heat
//! kernel and the Euclidean heat kernel.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::special::abs_gamma_neg;

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::input(format!("s must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// `B(m,s) = int_{R^m} (1 + |xi|^2)^{-(m+2s)/2} d xi
/// = pi^{m/2} Gamma(s) / Gamma(m/2 + s)`.
pub fn poisson_normaliser(m: usize, s: f64) -> Result<f64> {
    check_s(s)?;
    if m != 1 && m != 2 {
        return Err(Error::input(format!("horizontal dimension must be 1 or 2, got {m}")));
    }
    let h = m as f64 / 2.0;
    Ok(PI.powf(h) * (ln_gamma(s) - ln_gamma(h + s)).exp())
}

/// Poisson kernel `P_s(z, y) = y^{2s} (|z|^2 + y^2)^{-(m+2s)/2} / B(m,s)`.
#[derive(Clone, Copy, Debug)]
pub struct PoissonKernel {
    pub m: usize,
    pub s: f64,
    pub norm: f64,
}

impl PoissonKernel {
    pub fn new(m: usize, s: f64) -> Result<Self> {
        Ok(Self { m, s, norm: poisson_normaliser(m, s)? })
    }

    pub fn eval(&self, z: &[f64], y: f64) -> f64 {
        let z2: f64 = z.iter().map(|v| v * v).sum();
        y.powf(2.0 * self.s) * (z2 + y * y).powf(-(self.m as f64 + 2.0 * self.s) / 2.0) / self.norm
    }
}

pub fn poisson_kernel(z: &[f64], y: f64, s: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::input(format!("Poisson kernel needs y > 0, got {y}")));
    }
    Ok(PoissonKernel::new(z.len(), s)?.eval(z, y))
}

/// Backward fundamental solution of `y^a d_t - div(y^a grad)` at offset
/// `X - X0` (last entry vertical) and time lag `tau = t0 - t > 0`.
pub fn backward_kernel(dx: &[f64], tau: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(tau > 0.0) {
        return Err(Error::input(format!("backward kernel needs t < t0, got lag {tau}")));
    }
    let m = dx.len() as f64 - 1.0;
    let r2: f64 = dx.iter().map(|v| v * v).sum();
    let pre = gamma(s) * (4.0 * PI).powf(m / 2.0) * tau.powf(m / 2.0 + 1.0 - s);
    Ok((-r2 / (4.0 * tau)).exp() / pre)
}

/// Gradient of [`backward_kernel`] with respect to `X`.
pub fn backward_kernel_gradient(dx: &[f64], tau: f64, s: f64) -> Result<Vec<f64>> {
    let g = backward_kernel(dx, tau, s)?;
    Ok(dx.iter().map(|v| -v / (2.0 * tau) * g).collect())
}

/// Kernel of the fractional heat operator,
/// `exp(-|z|^2/4tau) tau^{-(m/2+1+s)} / ((4 pi)^{m/2} |Gamma(-s)|)`.
pub fn fractional_heat_kernel(z: &[f64], tau: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(tau > 0.0) {
        return Err(Error::input(format!("fractional heat kernel needs tau > 0, got {tau}")));
    }
    let m = z.len() as f64;
    let z2: f64 = z.iter().map(|v| v * v).sum();
    Ok((-z2 / (4.0 * tau)).exp() * tau.powf(-(m / 2.0 + 1.0 + s)) / ((4.0 * PI).powf(m / 2.0) * abs_gamma_neg(s)))
}

/// Euclidean heat kernel `(4 pi t)^{-n/2} exp(-|x|^2/4t)` in `n = x.len()`
/// dimensions.
pub fn heat_kernel(x: &[f64], t: f64) -> f64 {
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * PI * t).powf(-n / 2.0) * (-r2 / (4.0 * t)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{integrate, integrate_to_infinity};

    #[test]
    fn normaliser_matches_radial_quadrature() {
        for &s in &[0.25, 0.5, 0.8] {
            for m in 1..=2usize {
                let p = (m as f64 + 2.0 * s) / 2.0;
                // [0,1] directly, [1,inf) through r = 1/w^2
                let near = integrate(|r: f64| r.powi(m as i32 - 1) * (1.0 + r * r).powf(-p), 0.0, 1.0, 1e-12).unwrap();
                let far = integrate(
                    |w: f64| 2.0 * w.powf(4.0 * s - 1.0) * (1.0 + w.powi(4)).powf(-p),
                    0.0,
                    1.0,
                    1e-12,
                )
                .unwrap();
                let radial = near + far;
                let sphere = if m == 1 { 2.0 } else { 2.0 * PI };
                let b = poisson_normaliser(m, s).unwrap();
                assert!((sphere * radial - b).abs() < 1e-8 * b, "m={m} s={s}");
            }
        }
    }

    #[test]
    fn half_poisson_kernel_value() {
        let p = poisson_kernel(&[0.0], 1.0, 0.5).unwrap();
        assert!((p - 1.0 / PI).abs() < 1e-12);
        assert!(poisson_kernel(&[0.0], 0.0, 0.5).is_err());
    }

    #[test]
    fn poisson_kernel_has_unit_mass() {
        for &s in &[0.25, 0.5] {
            for &y in &[0.1, 1.0] {
                let k = PoissonKernel::new(1, s).unwrap();
                let half = integrate_to_infinity(|z| k.eval(&[z], y), 0.0, y, 1e-7).unwrap();
                assert!((2.0 * half - 1.0).abs() < 1e-6, "s={s} y={y}");
                assert_eq!(k.eval(&[0.3], y), k.eval(&[-0.3], y));
            }
        }
    }

    #[test]
    fn backward_kernel_scaling() {
        let s = 0.35;
        let r: f64 = 1.7;
        let x = [0.3, -0.2, 0.5];
        let g1 = backward_kernel(&x, 0.4, s).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| r * v).collect();
        let g2 = backward_kernel(&xs, 0.4 * r * r, s).unwrap();
        let m = 2.0;
        assert!((g2 - r.powf(-m - 2.0 + 2.0 * s) * g1).abs() < 1e-13 * g1);
    }

    #[test]
    fn backward_kernel_half_is_heat_kernel() {
        let x = [0.4, 0.9];
        let tau = 0.3;
        let g = backward_kernel(&x, tau, 0.5).unwrap();
        assert!((g - 2.0 * heat_kernel(&x, tau)).abs() < 1e-14);
    }

    #[test]
    fn backward_kernel_gradient_matches_fd() {
        let x = [0.4, -0.1, 0.9];
        let tau = 0.6;
        let s = 0.7;
        let g = backward_kernel_gradient(&x, tau, s).unwrap();
        for d in 0..3 {
            let h = 1e-6;
            let mut a = x;
            let mut b = x;
            a[d] += h;
            b[d] -= h;
            let fd = (backward_kernel(&a, tau, s).unwrap() - backward_kernel(&b, tau, s).unwrap()) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-8);
        }
    }

    #[test]
    fn fractional_heat_kernel_integrates_against_slice() {
        // int_R K_s(z, tau) dz = tau^{-1-s} / |Gamma(-s)|
        let s = 0.5;
        let tau = 0.8;
        let half = integrate_to_infinity(|z| fractional_heat_kernel(&[z], tau, s).unwrap(), 0.0, 1.0, 1e-13).unwrap();
        let expect = tau.powf(-1.0 - s) / abs_gamma_neg(s);
        assert!((2.0 * half - expect).abs() < 1e-10 * expect);
    }
}
