//! Empirical constant of the local energy inequality at a few points.

use halfflow::diagnostics::{local_energy_inequality_check, BoundaryPoint, QuadratureOptions};
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
        t_final: 1.0,
        snapshot_stride: 10,
    };
    let traj = run_flow(&Profile::Winding { turns: 0.5, width: 0.5 }.trace(&g, 2)?, &cfg)?;
    for x in [-0.5, 0.0, 0.5] {
        for r in [0.1, 0.15, 0.2] {
            let rep = local_energy_inequality_check(&traj, &BoundaryPoint::new(&[x], 0.6), r, &QuadratureOptions::default())?;
            println!("x0 = {x:5.2}  R = {r:.2}  lhs = {:.3e}  rhs = {:.3e}  C = {:.3e}", rep.lhs, rep.rhs, rep.constant);
        }
    }
    Ok(())
}
