//! Initial traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{HalfSpaceGrid, Trace};

/// Initial boundary data. Phase profiles map into `S^1` (`ell = 2`), the
/// torus profile into `S^1 x S^1` (`ell = 4`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// The same point everywhere.
    Constant { value: Vec<f64> },
    /// `u = (cos th, sin th)`, `th = amplitude exp(-|x|^2 / width^2)`.
    Bump { amplitude: f64, width: f64 },
    /// `th = turns * pi * (1 + tanh(x_1 / width))`.
    Winding { turns: f64, width: f64 },
    /// `th = 2 arctan(x_1 / width)`: a single turn with algebraic tails.
    Mobius { width: f64 },
    /// `u = cos(k x_1)` in the first component, zero elsewhere.
    Cosine { k: f64 },
    /// Two independent bump phases.
    Torus { amplitude: f64, width: f64 },
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Constant { .. } => "constant",
            Profile::Bump { .. } => "bump",
            Profile::Winding { .. } => "winding",
            Profile::Mobius { .. } => "mobius",
            Profile::Cosine { .. } => "cosine",
            Profile::Torus { .. } => "torus",
        }
    }

    pub fn validate(&self, ell: usize) -> Result<()> {
        let need = |n: usize| {
            if ell == n {
                Ok(())
            } else {
                Err(Error::config("initial.kind", format!("profile `{}` needs ell = {n}, got {ell}", self.name())))
            }
        };
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("initial.{field}"), format!("must be positive, got {v}")))
            }
        };
        match self {
            Profile::Constant { value } => {
                if value.len() != ell {
                    return Err(Error::config("initial.value", format!("needs {ell} components, got {}", value.len())));
                }
                Ok(())
            }
            Profile::Bump { width, .. } => {
                need(2)?;
                positive("width", *width)
            }
            Profile::Winding { width, .. } | Profile::Mobius { width } => {
                need(2)?;
                positive("width", *width)
            }
            Profile::Cosine { .. } => Ok(()),
            Profile::Torus { width, .. } => {
                need(4)?;
                positive("width", *width)
            }
        }
    }

    pub fn value_at(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let phase = |th: f64, o: &mut [f64]| {
            o[0] = th.cos();
            o[1] = th.sin();
        };
        match self {
            Profile::Constant { value } => out.copy_from_slice(value),
            Profile::Bump { amplitude, width } => phase(amplitude * (-r2 / (width * width)).exp(), out),
            Profile::Winding { turns, width } => {
                phase(turns * std::f64::consts::PI * (1.0 + (x[0] / width).tanh()), out)
            }
            Profile::Mobius { width } => phase(2.0 * (x[0] / width).atan(), out),
            Profile::Cosine { k } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = (k * x[0]).cos();
            }
            Profile::Torus { amplitude, width } => {
                let th = amplitude * (-r2 / (width * width)).exp();
                let shifted: f64 = x.iter().enumerate().map(|(i, v)| if i == 0 { (v - width).powi(2) } else { v * v }).sum();
                let ph = -amplitude * (-shifted / (width * width)).exp();
                phase(th, &mut out[..2]);
                phase(ph, &mut out[2..]);
            }
        }
    }

    pub fn trace(&self, grid: &std::sync::Arc<HalfSpaceGrid>, ell: usize) -> Result<Trace> {
        self.validate(ell)?;
        Ok(Trace::from_fn(grid, ell, |x, o| self.value_at(x, o)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;

    #[test]
    fn phase_profiles_are_on_the_circle() {
        let g = HalfSpaceGrid::new(&GridConfig::new(1, 33, 5, 3.0, 1.0, 0.5)).unwrap();
        for p in [
            Profile::Bump { amplitude: 1.0, width: 0.5 },
            Profile::Winding { turns: 1.0, width: 0.3 },
            Profile::Mobius { width: 0.4 },
        ] {
            let t = p.trace(&g, 2).unwrap();
            for h in 0..g.n_h() {
                let r: f64 = t.at(h).iter().map(|v| v * v).sum();
                assert!((r - 1.0).abs() < 1e-14);
            }
        }
        assert!(Profile::Bump { amplitude: 1.0, width: 0.5 }.trace(&g, 3).is_err());
        assert!(Profile::Constant { value: vec![1.0] }.trace(&g, 2).is_err());
    }

    #[test]
    fn profiles_roundtrip_through_toml() {
        let p = Profile::Winding { turns: 1.0, width: 0.25 };
        let s = toml::to_string(&p).unwrap();
        assert!(s.contains("kind = \"winding\""));
        assert_eq!(toml::from_str::<Profile>(&s).unwrap(), p);
    }
}
