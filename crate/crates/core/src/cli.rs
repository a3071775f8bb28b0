//! Command-line runner. Every subcommand reads a TOML config, echoes the
//! resolved config into `<out>/resolved_config`, writes its outputs and a
//! `manifest.json` with the config hash and per-file SHA-256 digests.
//!
//! Exit codes: 0 success, 2 usage, 3 config validation, 4 solver or oracle
//! failure (with `error.json` written).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{sha256_hex, Config};
use crate::diagnostics::{
    default_eps0_sq, local_energy_inequality_check, monotonicity_csv, renormalized_energies, scan_csv,
    singular_set_scan, BoundaryPoint,
};
use crate::error::{Error, Result};
use crate::extension::{frac_op_via_extension, frac_op_via_kernel, harmonic_extend, relative_l2, TraceHistory};
use crate::flow::{epsilon_continuation, run_flow, Trajectory};
use crate::greenlab::green_verify;
use crate::grid::Trace;
use crate::io::{encode_snapshot, load_trajectory, save_trajectory};
use crate::profiles::Profile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "halfflow", version, about = "Penalised half-harmonic map heat flow experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a config key, e.g. `--set penalty.epsilon=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extend the initial trace to the half space.
    Extend(Common),
    /// Run the penalised flow; writes the ledger and snapshots.
    Flow(Common),
    /// Apply the fractional operator by both routes.
    Fracop(Common),
    /// Renormalized energies D(R), E(R) per sample point.
    Monotonicity(Common),
    /// Empirical constant of the local energy inequality.
    LocalEnergy(Common),
    /// Flag points where the renormalized energy stays large.
    SingularScan(Common),
    /// Green-function and Duhamel oracle checks.
    GreenVerify(Common),
    /// Runs over a decreasing list of epsilon.
    EpsSweep(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Extend(_) => "extend",
            Command::Flow(_) => "flow",
            Command::Fracop(_) => "fracop",
            Command::Monotonicity(_) => "monotonicity",
            Command::LocalEnergy(_) => "local-energy",
            Command::SingularScan(_) => "singular-scan",
            Command::GreenVerify(_) => "green-verify",
            Command::EpsSweep(_) => "eps-sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Extend(c)
            | Command::Flow(c)
            | Command::Fracop(c)
            | Command::Monotonicity(c)
            | Command::LocalEnergy(c)
            | Command::SingularScan(c)
            | Command::GreenVerify(c)
            | Command::EpsSweep(c) => c,
        }
    }
}

/// Outcome of a subcommand that ran to completion.
struct Outcome {
    files: Vec<PathBuf>,
    /// Oracle verdict; `false` maps to exit code 4.
    passed: bool,
    summary: String,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.bytes(name, body.as_bytes())
    }

    fn bytes(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body)?;
        self.files.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(v).expect("json serialises") + "\n"))
    }

    fn done(self, passed: bool, summary: String) -> Outcome {
        Outcome { files: self.files, passed, summary }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let common = cli.command.common().clone();
    let cfg = match Config::load(&common.config, &common.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = &common.out;
    let resolved = cfg.to_toml();
    let hash = sha256_hex(resolved.as_bytes());
    if let Err(e) = fs::create_dir_all(out).and_then(|_| fs::write(out.join("resolved_config"), &resolved)) {
        eprintln!("error: cannot write to {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    let result = run(&cli.command, &cfg, out);
    match result {
        Ok(outcome) => {
            let mut files = vec![out.join("resolved_config")];
            files.extend(outcome.files);
            if let Err(e) = write_manifest(out, cli.command.name(), &hash, &files) {
                eprintln!("error: {e}");
                return EXIT_SOLVER;
            }
            println!("{}", outcome.summary);
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("error: one or more checks failed; see {}", out.display());
                EXIT_SOLVER
            }
        }
        Err(Error::Config { field, message }) => {
            eprintln!("error: invalid config field `{field}`: {message}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            let _ = write_failure(out, cli.command.name(), &hash, &e);
            EXIT_SOLVER
        }
    }
}

fn write_manifest(out: &Path, command: &str, hash: &str, files: &[PathBuf]) -> Result<()> {
    let mut entries = Vec::new();
    for p in files {
        let rel = p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/");
        entries.push(json!({ "path": rel, "sha256": sha256_hex(&fs::read(p)?) }));
    }
    let v = json!({ "command": command, "config_sha256": hash, "files": entries });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&v).expect("json serialises") + "\n")?;
    Ok(())
}

fn write_failure(out: &Path, command: &str, hash: &str, e: &Error) -> Result<()> {
    let kind = match e {
        Error::InvalidInput(_) => "invalid-input",
        Error::Projection(_) => "projection",
        Error::Solver(_) => "solver",
        Error::FlowAborted { .. } => "flow-aborted",
        Error::Quadrature(_) => "quadrature",
        Error::History(_) => "history",
        Error::Config { .. } => "config",
        Error::Io(_) => "io",
    };
    let mut v = json!({ "command": command, "config_sha256": hash, "kind": kind, "message": e.to_string() });
    if let Error::FlowAborted { step, partial, .. } = e {
        v["step"] = json!(step);
        fs::write(out.join("partial_ledger.csv"), partial.ledger_csv())?;
        v["partial_ledger"] = json!("partial_ledger.csv");
    }
    fs::write(out.join("error.json"), serde_json::to_string_pretty(&v).expect("json serialises") + "\n")?;
    Ok(())
}

fn run(cmd: &Command, cfg: &Config, out: &Path) -> Result<Outcome> {
    match cmd {
        Command::Extend(_) => cmd_extend(cfg, out),
        Command::Flow(_) => cmd_flow(cfg, out),
        Command::Fracop(_) => cmd_fracop(cfg, out),
        Command::Monotonicity(_) => cmd_monotonicity(cfg, out),
        Command::LocalEnergy(_) => cmd_local_energy(cfg, out),
        Command::SingularScan(_) => cmd_singular_scan(cfg, out),
        Command::GreenVerify(_) => cmd_green_verify(cfg, out),
        Command::EpsSweep(_) => cmd_eps_sweep(cfg, out),
    }
}

fn initial_trace(cfg: &Config) -> Result<Trace> {
    cfg.initial.trace(&cfg.build_grid()?, cfg.manifold.ell)
}

fn cmd_extend(cfg: &Config, out: &Path) -> Result<Outcome> {
    let u0 = initial_trace(cfg)?;
    let field = harmonic_extend(&u0, cfg.extension_method())?;
    let energy = field.grid.dirichlet_form(field.ell, &field.values);
    let mut w = Writer::new(out);
    w.bytes("extension.hflw", &encode_snapshot(&field, 0.0, cfg.penalty.epsilon))?;
    w.json(
        "extend.json",
        &json!({
            "method": format!("{:?}", cfg.extension.method).to_lowercase(),
            "profile": cfg.initial.name(),
            "dirichlet_energy": energy,
            "nodes": field.grid.n_nodes(),
        }),
    )?;
    Ok(w.done(true, format!("extend: Dirichlet energy {energy:.6e}")))
}

fn cmd_flow(cfg: &Config, out: &Path) -> Result<Outcome> {
    let traj = run_flow(&initial_trace(cfg)?, &cfg.flow_config()?)?;
    let mut w = Writer::new(out);
    if cfg.output.write_snapshots {
        w.files.extend(save_trajectory(out, &traj)?);
    } else {
        w.text("ledger.csv", &traj.ledger_csv())?;
    }
    let last = traj.ledger.last().unwrap_or(&traj.initial);
    w.json(
        "flow.json",
        &json!({
            "steps": traj.steps(),
            "dt": traj.dt,
            "t_final": last.t,
            "initial_energy": traj.initial.total,
            "final_energy": last.total,
            "max_abs_u": crate::diagnostics::max_principle_check(&traj),
            "snapshots": traj.snapshots.len(),
        }),
    )?;
    Ok(w.done(true, format!("flow: {} steps, energy {:.6e} -> {:.6e}", traj.steps(), traj.initial.total, last.total)))
}

fn cmd_fracop(cfg: &Config, out: &Path) -> Result<Outcome> {
    let u0 = initial_trace(cfg)?;
    let g = u0.grid.clone();
    let field = harmonic_extend(&u0, cfg.extension_method())?;
    let ext = frac_op_via_extension(&field)?;
    let t = cfg.extension.kernel_time;
    let hist = TraceHistory::from_fn(&g, u0.ell, &[0.0, t], |x, _, o| cfg.initial.value_at(x, o))?;
    let kern = frac_op_via_kernel(&hist, t, &cfg.kernel_route())?;
    let mut csv = String::new();
    for d in 0..g.m {
        let _ = write!(csv, "x{d},");
    }
    csv.push_str("component,extension,kernel\n");
    for h in 0..g.n_h() {
        for c in 0..u0.ell {
            for x in g.x_of(h) {
                let _ = write!(csv, "{x:.16e},");
            }
            let _ = writeln!(csv, "{c},{:.16e},{:.16e}", ext.at(h)[c], kern.value.at(h)[c]);
        }
    }
    let diff = relative_l2(&ext, &kern.value);
    let mut report = json!({
        "relative_difference": diff,
        "kernel_tau_min": kern.tau_min,
        "kernel_panels": kern.panels,
    });
    if let Profile::Cosine { k } = cfg.initial {
        let sym = k.abs().powf(2.0 * g.s);
        let exact = Trace::from_fn(&g, u0.ell, |x, o| {
            cfg.initial.value_at(x, o);
            o.iter_mut().for_each(|v| *v *= sym);
        });
        report["extension_error"] = json!(relative_l2(&ext, &exact));
        report["kernel_error"] = json!(relative_l2(&kern.value, &exact));
    }
    let mut w = Writer::new(out);
    w.text("fracop.csv", &csv)?;
    w.json("fracop.json", &report)?;
    Ok(w.done(true, format!("fracop: routes differ by {diff:.3e}")))
}

/// Stored trajectory from `diagnostics.trajectory`, or a fresh run.
fn trajectory(cfg: &Config) -> Result<Trajectory> {
    match &cfg.diagnostics.trajectory {
        Some(dir) => load_trajectory(dir, &cfg.build_grid()?, &cfg.target()?, &cfg.params()?, cfg.scheme()),
        None => run_flow(&initial_trace(cfg)?, &cfg.flow_config()?),
    }
}

fn sample_points(cfg: &Config) -> Vec<BoundaryPoint> {
    let d = &cfg.diagnostics;
    d.t0.iter().flat_map(|&t| d.x0.iter().map(move |x| BoundaryPoint::new(x, t))).collect()
}

fn check_times(field: &str, times: &[f64], pad: f64, horizon: f64) -> Result<()> {
    for (i, &t) in times.iter().enumerate() {
        if t + pad > horizon * (1.0 + 1e-12) {
            return Err(Error::config(format!("{field}[{i}]"), format!("{t} + {pad} exceeds the run length {horizon}")));
        }
    }
    Ok(())
}

fn cmd_monotonicity(cfg: &Config, out: &Path) -> Result<Outcome> {
    let d = &cfg.diagnostics;
    let rmax = *d.radii.last().expect("validated non-empty");
    for (i, &t) in d.t0.iter().enumerate() {
        if 4.0 * rmax * rmax >= t {
            return Err(Error::config(format!("diagnostics.t0[{i}]"), format!("needs t0 > 4 R_max^2 = {}", 4.0 * rmax * rmax)));
        }
    }
    check_times("diagnostics.t0", &d.t0, 0.0, cfg.scheme.t_final)?;
    let traj = trajectory(cfg)?;
    let quad = cfg.quadrature();
    let curves = sample_points(cfg)
        .par_iter()
        .map(|z| renormalized_energies(&traj, z, &d.radii, &quad))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<_> = curves
        .iter()
        .map(|c| {
            json!({
                "t0": c.z0.t,
                "x0": c.z0.x,
                "e_nondecreasing": c.e_values.windows(2).all(|w| w[1] >= w[0]),
                "worst_e_violation": c.worst_e_violation(0.0),
                "worst_d_violation": c.worst_d_violation(0.0),
                "truncation_radius": c.truncation_radius,
            })
        })
        .collect();
    let all = curves.iter().all(|c| c.e_values.windows(2).all(|w| w[1] >= w[0]));
    let mut w = Writer::new(out);
    w.text("monotonicity.csv", &monotonicity_csv(&curves))?;
    w.json(
        "monotonicity.json",
        &json!({
            "curves": rows,
            "eps0_sq": d.eps0_sq.unwrap_or(default_eps0_sq(&traj)),
            "delta0": d.delta0,
        }),
    )?;
    Ok(w.done(true, format!("monotonicity: {} curves, E nondecreasing in all: {all}", curves.len())))
}

fn cmd_local_energy(cfg: &Config, out: &Path) -> Result<Outcome> {
    let d = &cfg.diagnostics;
    let r = d.local_radius;
    for (i, &t) in d.t0.iter().enumerate() {
        if 4.0 * r * r >= t {
            return Err(Error::config(format!("diagnostics.t0[{i}]"), format!("needs t0 > 4 R^2 = {}", 4.0 * r * r)));
        }
    }
    check_times("diagnostics.t0", &d.t0, 4.0 * r * r, cfg.scheme.t_final)?;
    let traj = trajectory(cfg)?;
    let quad = cfg.quadrature();
    let pts = sample_points(cfg);
    let reps = pts
        .par_iter()
        .map(|z| local_energy_inequality_check(&traj, z, r, &quad))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("t0");
    for k in 0..cfg.grid.m {
        let _ = write!(csv, ",x{k}");
    }
    csv.push_str(",R,lhs,rhs,constant\n");
    let mut worst: f64 = 0.0;
    for (z, rep) in pts.iter().zip(&reps) {
        let _ = write!(csv, "{:.16e}", z.t);
        for x in &z.x {
            let _ = write!(csv, ",{x:.16e}");
        }
        let _ = writeln!(csv, ",{r:.16e},{:.16e},{:.16e},{:.16e}", rep.lhs, rep.rhs, rep.constant);
        worst = worst.max(rep.constant);
    }
    let mut w = Writer::new(out);
    w.text("local_energy.csv", &csv)?;
    w.json("local_energy.json", &json!({ "radius": r, "max_constant": worst, "delta0": d.delta0 }))?;
    Ok(w.done(true, format!("local-energy: max constant {worst:.4e}")))
}

fn cmd_singular_scan(cfg: &Config, out: &Path) -> Result<Outcome> {
    let d = &cfg.diagnostics;
    let r = d.scan_radius;
    for (i, &t) in d.scan_times.iter().enumerate() {
        if 4.0 * r * r >= t {
            return Err(Error::config(format!("diagnostics.scan_times[{i}]"), format!("needs t > 4 R^2 = {}", 4.0 * r * r)));
        }
    }
    check_times("diagnostics.scan_times", &d.scan_times, 0.0, cfg.scheme.t_final)?;
    let runs: Vec<Trajectory> = if d.trajectory.is_some() {
        vec![trajectory(cfg)?]
    } else {
        let u0 = initial_trace(cfg)?;
        let base = cfg.flow_config()?;
        cfg.penalty
            .epsilon_list
            .par_iter()
            .map(|&eps| {
                let mut fc = base.clone();
                fc.params = base.params.with_epsilon(eps)?;
                if let crate::flow::Scheme::Explicit { .. } = fc.scheme {
                    fc.scheme = crate::flow::Scheme::explicit_cfl(&u0.grid, &fc.params, cfg.scheme.cfl_fraction);
                }
                run_flow(&u0, &fc)
            })
            .collect::<Result<_>>()?
    };
    let refs: Vec<&Trajectory> = runs.iter().collect();
    let rep = singular_set_scan(&refs, &d.scan_times, &d.scan_x, d.eps0_sq, r, &cfg.quadrature())?;
    let flagged = rep.flagged().count();
    let mut w = Writer::new(out);
    w.text("scan.csv", &scan_csv(&rep))?;
    w.json(
        "scan.json",
        &json!({
            "threshold": rep.threshold,
            "radius": rep.radius,
            "eps_set": rep.eps_set,
            "points": rep.points.len(),
            "flagged": flagged,
            "delta0": d.delta0,
        }),
    )?;
    Ok(w.done(true, format!("singular-scan: {flagged} of {} points flagged", rep.points.len())))
}

fn cmd_green_verify(cfg: &Config, out: &Path) -> Result<Outcome> {
    let rep = green_verify(cfg.green.m, &cfg.verify_options())?;
    let mut w = Writer::new(out);
    w.text("verification.json", &(rep.to_json() + "\n"))?;
    let passed = rep.all_pass();
    let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let summary = if passed {
        format!("green-verify: {} checks passed", rep.checks.len())
    } else {
        format!("green-verify: failed {failed:?}")
    };
    Ok(w.done(passed, summary))
}

fn cmd_eps_sweep(cfg: &Config, out: &Path) -> Result<Outcome> {
    let u0 = initial_trace(cfg)?;
    let mut fc = cfg.flow_config()?;
    if let crate::flow::Scheme::Explicit { .. } = fc.scheme {
        // stable for the smallest epsilon
        let eps_min = *cfg.penalty.epsilon_list.last().expect("validated non-empty");
        let p = fc.params.with_epsilon(eps_min)?;
        fc.scheme = crate::flow::Scheme::explicit_cfl(&u0.grid, &p, cfg.scheme.cfl_fraction);
    }
    let rep = epsilon_continuation(&u0, &fc, &cfg.penalty.epsilon_list)?;
    let mut csv = String::from("eps,defect,scaled_defect,distance_to_next,orthogonality\n");
    for i in 0..rep.eps.len() {
        let dist = rep.distances.get(i).map_or(String::new(), |d| format!("{d:.16e}"));
        let orth = rep.orthogonality[i].map_or(String::new(), |o| format!("{o:.16e}"));
        let _ = writeln!(csv, "{:.16e},{:.16e},{:.16e},{dist},{orth}", rep.eps[i], rep.defect[i], rep.scaled_defect[i]);
    }
    let monotone = rep.distances.windows(2).all(|w| w[1] < w[0]);
    let mut w = Writer::new(out);
    w.text("eps_sweep.csv", &csv)?;
    w.json(
        "eps_sweep.json",
        &json!({
            "slope": rep.slope,
            "scaled_defect_max": rep.scaled_defect.iter().cloned().fold(0.0, f64::max),
            "distances_decreasing": monotone,
        }),
    )?;
    Ok(w.done(true, format!("eps-sweep: defect order {:.3}, distances decreasing: {monotone}", rep.slope)))
}
