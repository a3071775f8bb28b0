//! Experiment configuration: a TOML file with `grid`, `manifold`,
//! `penalty`, `scheme`, `initial`, `extension`, `diagnostics`, `green` and
//! `output` tables. Every key has a default; `--set a.b=v` overrides are
//! applied to the parsed document before validation.
//!
//! ```toml
//! [grid]
//! nx = 129
//! ny = 65
//! grading = 1.0
//!
//! [penalty]
//! s = 0.5
//! epsilon = 0.2
//!
//! [scheme]
//! kind = "explicit"
//! cfl_fraction = 0.5
//! t_final = 1.2
//!
//! [initial]
//! kind = "bump"
//! amplitude = 1.5
//! width = 0.7
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{QuadratureOptions, DEFAULT_DELTA0};
use crate::error::{Error, Result};
use crate::extension::{ExtensionMethod, KernelRouteOptions};
use crate::flow::{cfl_bound, FlowConfig, InnerSolverOptions, Scheme};
use crate::greenlab::{DuhamelOptions, LadderOptions, VerifyOptions};
use crate::grid::{GridConfig, HalfSpaceGrid};
use crate::manifold::{PenaltyParams, TargetManifold};
use crate::profiles::Profile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub m: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Vertical grading exponent; resolved to `max(1, 2/(1+a))` if absent.
    pub grading: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { m: 1, nx: 65, ny: 33, lx: 4.0, ly: 4.0, grading: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Sphere,
    FlatTorus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldSection {
    pub target: TargetKind,
    pub ell: usize,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        Self { target: TargetKind::Sphere, ell: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySection {
    pub s: f64,
    pub epsilon: f64,
    /// Strictly decreasing; used by `eps-sweep` and `singular-scan`.
    pub epsilon_list: Vec<f64>,
}

impl Default for PenaltySection {
    fn default() -> Self {
        Self { s: 0.5, epsilon: 0.2, epsilon_list: vec![0.2, 0.1, 0.05] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Explicit,
    MinimizingMovement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    /// Explicit step; resolved from `cfl_fraction` if absent.
    pub dt: Option<f64>,
    pub cfl_fraction: f64,
    pub tau: f64,
    pub t_final: f64,
    pub inner_rel_tol: f64,
    pub inner_max_iter: usize,
    pub pcg_rtol: f64,
    pub truncate: bool,
}

impl Default for SchemeSection {
    fn default() -> Self {
        let inner = InnerSolverOptions::default();
        Self {
            kind: SchemeKind::Explicit,
            dt: None,
            cfl_fraction: 0.5,
            tau: 0.01,
            t_final: 1.0,
            inner_rel_tol: inner.rel_tol,
            inner_max_iter: inner.max_iter,
            pcg_rtol: inner.pcg_rtol,
            truncate: inner.truncate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionKind {
    Fd,
    Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionSection {
    pub method: ExtensionKind,
    /// Time at which the kernel route is evaluated for a static trace.
    pub kernel_time: f64,
    pub kernel_ratio: f64,
    pub kernel_gauss_points: usize,
    pub kernel_tau_min: Option<f64>,
}

impl Default for ExtensionSection {
    fn default() -> Self {
        let k = KernelRouteOptions::default();
        Self {
            method: ExtensionKind::Fd,
            kernel_time: 1.0,
            kernel_ratio: k.ratio,
            kernel_gauss_points: k.gauss_points,
            kernel_tau_min: k.tau_min,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Directory written by `flow`; when set, diagnostics reuse it.
    pub trajectory: Option<PathBuf>,
    pub t0: Vec<f64>,
    pub x0: Vec<Vec<f64>>,
    /// Increasing radii for the monotonicity curves.
    pub radii: Vec<f64>,
    pub local_radius: f64,
    /// Defaults to a fraction of the initial energy of the run.
    pub eps0_sq: Option<f64>,
    pub delta0: f64,
    pub scan_times: Vec<f64>,
    pub scan_x: Vec<Vec<f64>>,
    pub scan_radius: f64,
    pub quad_sub: usize,
    pub quad_time_panels: usize,
    pub quad_gauss_points: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let q = QuadratureOptions::default();
        Self {
            trajectory: None,
            t0: vec![0.6],
            x0: vec![vec![-0.5], vec![0.0], vec![0.6]],
            radii: vec![0.05, 0.1, 0.15, 0.2, 0.3],
            local_radius: 0.15,
            eps0_sq: None,
            delta0: DEFAULT_DELTA0,
            scan_times: vec![0.6],
            scan_x: vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]],
            scan_radius: 0.2,
            quad_sub: q.sub,
            quad_time_panels: q.time_panels,
            quad_gauss_points: q.gauss_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenSection {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub quad_tol: f64,
    pub ladder_epsilon: f64,
    pub skip_ladder: bool,
    pub tolerance_check: bool,
    pub ladder_levels: usize,
    pub ladder_base_density: usize,
    pub ladder_half_width: f64,
    pub ladder_height: f64,
    pub ladder_dt_per_h: f64,
    pub ladder_times: Vec<f64>,
    pub duhamel_band: f64,
    pub duhamel_ratio: f64,
}

impl Default for GreenSection {
    fn default() -> Self {
        let v = VerifyOptions::default();
        Self {
            m: 1,
            samples: v.samples,
            seed: v.seed,
            quad_tol: v.quad_tol,
            ladder_epsilon: v.ladder_epsilon,
            skip_ladder: v.skip_ladder,
            tolerance_check: v.tolerance_check,
            ladder_levels: v.ladder.levels,
            ladder_base_density: v.ladder.base_density,
            ladder_half_width: v.ladder.half_width,
            ladder_height: v.ladder.height,
            ladder_dt_per_h: v.ladder.dt_per_h,
            ladder_times: v.ladder.times.clone(),
            duhamel_band: v.duhamel.band,
            duhamel_ratio: v.duhamel.ratio,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub snapshot_stride: usize,
    pub write_snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { snapshot_stride: 10, write_snapshots: true }
    }
}

fn default_initial() -> Profile {
    Profile::Bump { amplitude: 1.0, width: 0.5 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub manifold: ManifoldSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default = "default_initial")]
    pub initial: Profile,
    #[serde(default)]
    pub extension: ExtensionSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub green: GreenSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str("").expect("empty config deserialises")
    }
}

/// Applies `key.path=value`; the value is read as a TOML literal and falls
/// back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key.path=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be >= {min}, got {v}")))
    }
}

fn strictly_decreasing(field: &str, v: &[f64]) -> Result<()> {
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(field, "must be strictly decreasing"));
    }
    Ok(())
}

fn points(field: &str, pts: &[Vec<f64>], m: usize) -> Result<()> {
    for (i, p) in pts.iter().enumerate() {
        if p.len() != m {
            return Err(Error::config(format!("{field}[{i}]"), format!("needs {m} coordinates, got {}", p.len())));
        }
    }
    Ok(())
}

impl Config {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = doc.try_into().map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        cfg.resolve()
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Validates every range and fills in derived defaults.
    pub fn resolve(mut self) -> Result<Self> {
        let p = &self.penalty;
        if !(p.s > 0.0 && p.s < 1.0) {
            return Err(Error::config("penalty.s", format!("must lie in (0,1), got {}", p.s)));
        }
        positive("penalty.epsilon", p.epsilon)?;
        if p.epsilon_list.is_empty() {
            return Err(Error::config("penalty.epsilon_list", "must not be empty"));
        }
        for (i, &e) in p.epsilon_list.iter().enumerate() {
            positive(&format!("penalty.epsilon_list[{i}]"), e)?;
        }
        strictly_decreasing("penalty.epsilon_list", &p.epsilon_list)?;

        let gc = self.grid_config();
        gc.validate()?;
        let a = 1.0 - 2.0 * self.penalty.s;
        self.grid.grading.get_or_insert((2.0 / (1.0 + a)).max(1.0));

        match self.manifold.target {
            TargetKind::Sphere => at_least("manifold.ell", self.manifold.ell, 2)?,
            TargetKind::FlatTorus => {
                if self.manifold.ell != 4 {
                    return Err(Error::config("manifold.ell", "flat torus lives in R^4"));
                }
            }
        }
        self.initial.validate(self.manifold.ell)?;

        let sc = &self.scheme;
        positive("scheme.t_final", sc.t_final)?;
        positive("scheme.tau", sc.tau)?;
        if !(sc.cfl_fraction > 0.0 && sc.cfl_fraction <= 1.0) {
            return Err(Error::config("scheme.cfl_fraction", format!("must lie in (0,1], got {}", sc.cfl_fraction)));
        }
        positive("scheme.inner_rel_tol", sc.inner_rel_tol)?;
        positive("scheme.pcg_rtol", sc.pcg_rtol)?;
        at_least("scheme.inner_max_iter", sc.inner_max_iter, 1)?;
        if self.scheme.kind == SchemeKind::Explicit {
            let bound = cfl_bound(&*self.build_grid()?, &self.params()?);
            match self.scheme.dt {
                Some(dt) => {
                    positive("scheme.dt", dt)?;
                    if dt > bound {
                        return Err(Error::config(
                            "scheme.dt",
                            format!("explicit step {dt:e} exceeds the stability bound {bound:e}"),
                        ));
                    }
                }
                None => self.scheme.dt = Some(self.scheme.cfl_fraction * bound),
            }
        }

        let ex = &self.extension;
        positive("extension.kernel_time", ex.kernel_time)?;
        if !(ex.kernel_ratio > 1.0) {
            return Err(Error::config("extension.kernel_ratio", "must exceed 1"));
        }
        at_least("extension.kernel_gauss_points", ex.kernel_gauss_points, 1)?;
        if let Some(t) = ex.kernel_tau_min {
            positive("extension.kernel_tau_min", t)?;
        }

        let m = self.grid.m;
        let d = &self.diagnostics;
        for (i, &t) in d.t0.iter().enumerate() {
            positive(&format!("diagnostics.t0[{i}]"), t)?;
        }
        points("diagnostics.x0", &d.x0, m)?;
        points("diagnostics.scan_x", &d.scan_x, m)?;
        if d.radii.is_empty() || d.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("diagnostics.radii", "must be non-empty and strictly increasing"));
        }
        for (i, &r) in d.radii.iter().enumerate() {
            positive(&format!("diagnostics.radii[{i}]"), r)?;
        }
        positive("diagnostics.local_radius", d.local_radius)?;
        positive("diagnostics.scan_radius", d.scan_radius)?;
        if let Some(e) = d.eps0_sq {
            positive("diagnostics.eps0_sq", e)?;
        }
        if !(d.delta0 > 0.0 && d.delta0 < 1.0) {
            return Err(Error::config("diagnostics.delta0", format!("must lie in (0,1), got {}", d.delta0)));
        }
        at_least("diagnostics.quad_sub", d.quad_sub, 1)?;
        at_least("diagnostics.quad_time_panels", d.quad_time_panels, 1)?;
        at_least("diagnostics.quad_gauss_points", d.quad_gauss_points, 1)?;

        let g = &self.green;
        at_least("green.m", g.m, 1)?;
        at_least("green.samples", g.samples, 1)?;
        positive("green.quad_tol", g.quad_tol)?;
        positive("green.ladder_epsilon", g.ladder_epsilon)?;
        at_least("green.ladder_levels", g.ladder_levels, 2)?;
        at_least("green.ladder_base_density", g.ladder_base_density, 1)?;
        positive("green.ladder_half_width", g.ladder_half_width)?;
        positive("green.ladder_height", g.ladder_height)?;
        positive("green.ladder_dt_per_h", g.ladder_dt_per_h)?;
        positive("green.duhamel_band", g.duhamel_band)?;
        if !(g.duhamel_ratio > 1.0) {
            return Err(Error::config("green.duhamel_ratio", "must exceed 1"));
        }
        if g.ladder_times.is_empty() {
            return Err(Error::config("green.ladder_times", "must not be empty"));
        }
        for (i, &t) in g.ladder_times.iter().enumerate() {
            positive(&format!("green.ladder_times[{i}]"), t)?;
        }
        at_least("output.snapshot_stride", self.output.snapshot_stride, 1)?;
        Ok(self)
    }

    /// Resolved configuration as TOML, every default included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`Config::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn grid_config(&self) -> GridConfig {
        let g = &self.grid;
        GridConfig { m: g.m, nx: g.nx, ny: g.ny, lx: g.lx, ly: g.ly, s: self.penalty.s, grading: g.grading }
    }

    pub fn build_grid(&self) -> Result<Arc<HalfSpaceGrid>> {
        HalfSpaceGrid::new(&self.grid_config())
    }

    pub fn target(&self) -> Result<TargetManifold> {
        match self.manifold.target {
            TargetKind::Sphere => TargetManifold::sphere(self.manifold.ell),
            TargetKind::FlatTorus => Ok(TargetManifold::flat_torus()),
        }
    }

    pub fn params(&self) -> Result<PenaltyParams> {
        PenaltyParams::new(self.penalty.s, self.penalty.epsilon)
    }

    pub fn scheme(&self) -> Scheme {
        let s = &self.scheme;
        match s.kind {
            SchemeKind::Explicit => Scheme::Explicit { dt: s.dt.expect("resolved explicit step") },
            SchemeKind::MinimizingMovement => Scheme::MinimizingMovement {
                tau: s.tau,
                inner: InnerSolverOptions {
                    rel_tol: s.inner_rel_tol,
                    max_iter: s.inner_max_iter,
                    pcg_rtol: s.pcg_rtol,
                    truncate: s.truncate,
                },
            },
        }
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        Ok(FlowConfig {
            target: self.target()?,
            params: self.params()?,
            scheme: self.scheme(),
            t_final: self.scheme.t_final,
            snapshot_stride: self.output.snapshot_stride,
        })
    }

    pub fn extension_method(&self) -> ExtensionMethod {
        match self.extension.method {
            ExtensionKind::Fd => ExtensionMethod::FiniteDifference,
            ExtensionKind::Kernel => ExtensionMethod::Kernel,
        }
    }

    pub fn kernel_route(&self) -> KernelRouteOptions {
        let e = &self.extension;
        KernelRouteOptions { tau_min: e.kernel_tau_min, ratio: e.kernel_ratio, gauss_points: e.kernel_gauss_points }
    }

    pub fn quadrature(&self) -> QuadratureOptions {
        let d = &self.diagnostics;
        QuadratureOptions { sub: d.quad_sub, time_panels: d.quad_time_panels, gauss_points: d.quad_gauss_points }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let g = &self.green;
        VerifyOptions {
            samples: g.samples,
            seed: g.seed,
            quad_tol: g.quad_tol,
            ladder_epsilon: g.ladder_epsilon,
            ladder: LadderOptions {
                half_width: g.ladder_half_width,
                height: g.ladder_height,
                base_density: g.ladder_base_density,
                levels: g.ladder_levels,
                dt_per_h: g.ladder_dt_per_h,
                times: g.ladder_times.clone(),
                window: (0.5 * g.ladder_half_width, 0.5 * g.ladder_height),
            },
            duhamel: DuhamelOptions { band: g.duhamel_band, ratio: g.duhamel_ratio, ..DuhamelOptions::default() },
            skip_ladder: g.skip_ladder,
            tolerance_check: g.tolerance_check,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn empty_config_gets_defaults() {
        let c = Config::parse("", &[]).unwrap();
        assert_eq!(c.grid.nx, 65);
        assert_eq!(c.penalty.s, 0.5);
        assert_eq!(c.grid.grading, Some(2.0));
        assert!(c.scheme.dt.unwrap() > 0.0);
        assert_eq!(c.diagnostics.delta0, 0.25);
        // resolved config parses back to itself
        let again = Config::parse(&c.to_toml(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn s_out_of_range_names_the_field() {
        let e = Config::parse("[penalty]\ns = 1.5\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "penalty.s");
    }

    #[test]
    fn epsilon_list_must_decrease() {
        let e = Config::parse("[penalty]\nepsilon_list = [0.1, 0.2]\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "penalty.epsilon_list");
        let e = Config::parse("[penalty]\nepsilon_list = [0.1, 0.1]\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "penalty.epsilon_list");
    }

    #[test]
    fn explicit_step_above_bound_is_rejected() {
        let e = Config::parse("[scheme]\ndt = 1.0\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "scheme.dt");
    }

    #[test]
    fn overrides_take_precedence() {
        let c = Config::parse("[grid]\nnx = 33\n", &["grid.nx=17".into(), "manifold.ell=3".into(), "initial.kind=constant".into(), "initial.value=[1.0, 0.0, 0.0]".into()]).unwrap();
        assert_eq!(c.grid.nx, 17);
        assert_eq!(c.manifold.ell, 3);
        assert_eq!(c.initial, Profile::Constant { value: vec![1.0, 0.0, 0.0] });
        assert!(Config::parse("", &["nonsense".into()]).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("[grid]\nnz = 3\n", &[]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::parse("", &[]).unwrap();
        let b = Config::parse("", &["penalty.epsilon=0.3".into()]).unwrap();
        assert_eq!(a.hash(), Config::parse("", &[]).unwrap().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
