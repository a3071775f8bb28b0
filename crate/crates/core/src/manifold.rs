//! Target manifolds, projection and the boundary penalty.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::cs_constant;

/// Nearest-point projection onto a closed manifold, valid in a tubular
/// neighbourhood. Returns `None` where the projection is undefined.
pub trait ProjectionOracle: Send + Sync + fmt::Debug {
    fn project(&self, p: &[f64]) -> Option<Vec<f64>>;
    fn name(&self) -> &str;
}

/// `S^1 x S^1` embedded in `R^4` as a product of unit circles.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlatTorus;

impl ProjectionOracle for FlatTorus {
    fn project(&self, p: &[f64]) -> Option<Vec<f64>> {
        if p.len() != 4 {
            return None;
        }
        let r1 = p[0].hypot(p[1]);
        let r2 = p[2].hypot(p[3]);
        if r1 < 1e-300 || r2 < 1e-300 {
            return None;
        }
        Some(vec![p[0] / r1, p[1] / r1, p[2] / r2, p[3] / r2])
    }

    fn name(&self) -> &str {
        "flat-torus"
    }
}

#[derive(Clone, Debug)]
pub enum TargetKind {
    Sphere,
    Generic(Arc<dyn ProjectionOracle>),
}

#[derive(Clone, Debug)]
pub struct TargetManifold {
    pub ell: usize,
    pub kind: TargetKind,
    /// Radius of the tubular neighbourhood where projection is trusted.
    pub tube_radius: f64,
}

impl TargetManifold {
    pub fn sphere(ell: usize) -> Result<Self> {
        if ell < 2 {
            return Err(Error::input(format!("sphere needs ambient dimension >= 2, got {ell}")));
        }
        Ok(Self { ell, kind: TargetKind::Sphere, tube_radius: 1.0 })
    }

    pub fn generic(ell: usize, oracle: Arc<dyn ProjectionOracle>, tube_radius: f64) -> Result<Self> {
        if ell < 2 {
            return Err(Error::input(format!("ambient dimension must be >= 2, got {ell}")));
        }
        if !(tube_radius > 0.0 && tube_radius.is_finite()) {
            return Err(Error::input(format!("tube radius must be positive, got {tube_radius}")));
        }
        Ok(Self { ell, kind: TargetKind::Generic(oracle), tube_radius })
    }

    pub fn flat_torus() -> Self {
        Self { ell: 4, kind: TargetKind::Generic(Arc::new(FlatTorus)), tube_radius: 0.5 }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, TargetKind::Sphere)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            TargetKind::Sphere => format!("sphere-S{}", self.ell - 1),
            TargetKind::Generic(o) => o.name().to_string(),
        }
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.ell {
            return Err(Error::input(format!(
                "point has {} components, target lives in R^{}",
                p.len(),
                self.ell
            )));
        }
        Ok(())
    }

    /// Raw projection without the tube check.
    fn raw_project(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            TargetKind::Sphere => {
                let r = norm(p);
                if r < 1e-300 {
                    return Err(Error::Projection("zero vector has no nearest point on the sphere".into()));
                }
                Ok(p.iter().map(|v| v / r).collect())
            }
            TargetKind::Generic(o) => o
                .project(p)
                .ok_or_else(|| Error::Projection(format!("oracle `{}` cannot project {:?}", o.name(), p))),
        }
    }

    /// Squared distance to the manifold.
    pub fn dist_sq(&self, p: &[f64]) -> Result<f64> {
        self.check_len(p)?;
        if self.is_sphere() {
            let r = norm(p);
            return Ok((r - 1.0) * (r - 1.0));
        }
        let q = self.raw_project(p)?;
        Ok(p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

/// Penalty parameters: `epsilon`, order `s` and the derived constant `c_s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyParams {
    pub epsilon: f64,
    pub s: f64,
    pub cs: f64,
}

impl PenaltyParams {
    pub fn new(s: f64, epsilon: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::input(format!("s must lie in (0,1), got {s}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::input(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { epsilon, s, cs: cs_constant(s) })
    }

    pub fn a(&self) -> f64 {
        1.0 - 2.0 * self.s
    }

    /// `c_s / epsilon^2`
    pub fn strength(&self) -> f64 {
        self.cs / (self.epsilon * self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.s, epsilon)
    }
}

pub fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Nearest point on the target; errors outside the tube or where the oracle
/// cannot project.
pub fn project(p: &[f64], target: &TargetManifold) -> Result<Vec<f64>> {
    target.check_len(p)?;
    let q = target.raw_project(p)?;
    let d: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if d >= target.tube_radius {
        return Err(Error::Projection(format!(
            "distance {d:.3e} not below tube radius {}",
            target.tube_radius
        )));
    }
    Ok(q)
}

fn smoothstep5(z: f64) -> f64 {
    z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
}

fn smoothstep5_int(z: f64) -> f64 {
    // antiderivative of the quintic smoothstep, zero at 0
    z.powi(4) * (2.5 + z * (-3.0 + z))
}

/// Cutoff `chi(t)`: identity on `[0, delta^2]`, C^2 monotone bridge, constant
/// `2.5 delta^2` from `4 delta^2` on. Returns `(value, derivative)`.
pub fn chi_cutoff(t: f64, delta: f64) -> (f64, f64) {
    let d2 = delta * delta;
    if t <= d2 {
        return (t, 1.0);
    }
    let w = 3.0 * d2;
    let z = ((t - d2) / w).min(1.0);
    let value = d2 + w * (z - smoothstep5_int(z));
    let deriv = (1.0 - smoothstep5(z)).clamp(0.0, 1.0);
    (value, deriv)
}

/// Penalty density at a boundary value `u`.
pub fn gl_potential_density(u: &[f64], target: &TargetManifold, params: &PenaltyParams) -> Result<f64> {
    target.check_len(u)?;
    match target.kind {
        TargetKind::Sphere => {
            let q = 1.0 - u.iter().map(|v| v * v).sum::<f64>();
            Ok(params.cs / (4.0 * params.epsilon * params.epsilon) * q * q)
        }
        TargetKind::Generic(_) => {
            let d2 = target.dist_sq(u)?;
            Ok(params.strength() * chi_cutoff(d2, target.tube_radius).0)
        }
    }
}

/// Boundary force, the negative gradient of the penalty density. For the
/// sphere this is `(c_s/eps^2)(1-|u|^2) u`.
pub fn gl_boundary_force(u: &[f64], target: &TargetManifold, params: &PenaltyParams) -> Result<Vec<f64>> {
    let mut out = vec![0.0; u.len()];
    boundary_force_into(u, target, params, &mut out)?;
    Ok(out)
}

pub fn boundary_force_into(
    u: &[f64],
    target: &TargetManifold,
    params: &PenaltyParams,
    out: &mut [f64],
) -> Result<()> {
    target.check_len(u)?;
    let k = params.strength();
    match target.kind {
        TargetKind::Sphere => {
            let q = 1.0 - u.iter().map(|v| v * v).sum::<f64>();
            for (o, v) in out.iter_mut().zip(u) {
                *o = k * q * v;
            }
        }
        TargetKind::Generic(_) => {
            let p = target.raw_project(u)?;
            let d2: f64 = u.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
            let (_, dchi) = chi_cutoff(d2, target.tube_radius);
            for ((o, v), q) in out.iter_mut().zip(u).zip(&p) {
                *o = -k * dchi * 2.0 * (v - q);
            }
        }
    }
    Ok(())
}

/// Positive semidefinite part of the penalty Hessian at `u`, row-major
/// `ell x ell`.
pub fn penalty_hessian_psd(u: &[f64], target: &TargetManifold, params: &PenaltyParams) -> Result<Vec<f64>> {
    let l = u.len();
    let k = params.strength();
    let mut h = vec![0.0; l * l];
    match target.kind {
        TargetKind::Sphere => {
            let r2: f64 = u.iter().map(|v| v * v).sum();
            let lam_perp = (k * (r2 - 1.0)).max(0.0);
            let lam_par = (k * (3.0 * r2 - 1.0)).max(0.0);
            for i in 0..l {
                h[i * l + i] = lam_perp;
            }
            if r2 > 1e-300 {
                for i in 0..l {
                    for j in 0..l {
                        h[i * l + j] += (lam_par - lam_perp) * u[i] * u[j] / r2;
                    }
                }
            }
        }
        TargetKind::Generic(_) => {
            let step = 1e-6;
            let mut m = DMatrix::<f64>::zeros(l, l);
            let mut up = u.to_vec();
            let mut fp = vec![0.0; l];
            let mut fm = vec![0.0; l];
            for j in 0..l {
                up[j] = u[j] + step;
                boundary_force_into(&up, target, params, &mut fp)?;
                up[j] = u[j] - step;
                boundary_force_into(&up, target, params, &mut fm)?;
                up[j] = u[j];
                for i in 0..l {
                    m[(i, j)] = -(fp[i] - fm[i]) / (2.0 * step);
                }
            }
            let sym = (&m + m.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym);
            let vals = eig.eigenvalues.map(|v| v.max(0.0));
            let clamped = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
            for i in 0..l {
                for j in 0..l {
                    h[i * l + j] = clamped[(i, j)];
                }
            }
        }
    }
    Ok(h)
}

/// Component of `v` tangent to the sphere through `u` (`|u|` close to 1).
pub fn tangent_project(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::input("tangent_project: length mismatch"));
    }
    let r2: f64 = u.iter().map(|x| x * x).sum();
    if (r2.sqrt() - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!("tangent_project needs |u| = 1, got {}", r2.sqrt())));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(v.iter().zip(u).map(|(b, a)| b - dot * a / r2).collect())
}
