//! Renormalized energies `D(R)` and `E(R)` along an explicit run.

use halfflow::diagnostics::{renormalized_energies, BoundaryPoint, QuadratureOptions};
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
        t_final: 0.8,
        snapshot_stride: 10,
    };
    let traj = run_flow(&Profile::Bump { amplitude: 1.5, width: 0.7 }.trace(&g, 2)?, &cfg)?;
    let radii = [0.05, 0.1, 0.15, 0.2, 0.3];
    for x in [-0.5, 0.0, 0.6] {
        let z0 = BoundaryPoint::new(&[x], 0.6);
        let c = renormalized_energies(&traj, &z0, &radii, &QuadratureOptions::default())?;
        println!("x0 = {x}");
        for i in 0..radii.len() {
            println!("  R = {:.2}  D = {:.6e}  E = {:.6e}", radii[i], c.d_values[i], c.e_values[i]);
        }
    }
    Ok(())
}
