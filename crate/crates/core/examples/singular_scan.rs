//! Large-time gradient decay and a singular-set scan for a small-energy run.

use halfflow::diagnostics::{default_eps0_sq, gradient_estimate_check, singular_set_scan, QuadratureOptions};
use halfflow::flow::{run_flow, FlowConfig, Scheme};
use halfflow::profiles::Profile;
use halfflow::{GridConfig, HalfSpaceGrid, PenaltyParams, TargetManifold};

fn main() -> halfflow::Result<()> {
    let g = HalfSpaceGrid::new(&GridConfig::new(1, 97, 49, 4.0, 4.0, 0.5).with_grading(1.0))?;
    let params = PenaltyParams::new(0.5, 0.2)?;
    let cfg = FlowConfig {
        target: TargetManifold::sphere(2)?,
        params,
        scheme: Scheme::explicit_cfl(&g, &params, 0.5),
        t_final: 1.2,
        snapshot_stride: 10,
    };
    let traj = run_flow(&Profile::Bump { amplitude: 0.5, width: 0.7 }.trace(&g, 2)?, &cfg)?;
    let quad = QuadratureOptions::default();
    let t0 = 0.25;
    let grad = gradient_estimate_check(&traj, t0, &[], default_eps0_sq(&traj), 0.25, &quad)?;
    println!("sqrt(t) max|grad u|: ratio over [{t0}, {}] = {:.3}", 4.0 * t0, grad.dyadic_ratio(t0).unwrap_or(f64::NAN));

    let xs: Vec<Vec<f64>> = (0..9).map(|i| vec![-2.0 + 0.5 * i as f64]).collect();
    let scan = singular_set_scan(&[&traj], &[t0, 2.0 * t0, 4.0 * t0], &xs, None, 0.2, &quad)?;
    println!("threshold {:.3e}", scan.threshold);
    for p in &scan.points {
        println!("  t = {:.2} x = {:5.2}  E = {:.3e}{}", p.z0.t, p.z0.x[0], p.energy, if p.flagged { "  flagged" } else { "" });
    }
    Ok(())
}
