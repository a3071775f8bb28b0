//! Minimizing-movement run from a bump of phase, printing the energy ledger
//! every few steps.

use halfflow::flow::{run_flow, FlowConfig, Scheme};
use halfflow::profiles::Profile;
use halfflow::{GridConfig, HalfSpaceGrid, PenaltyParams, TargetManifold};

fn main() -> halfflow::Result<()> {
    let g = HalfSpaceGrid::new(&GridConfig::new(1, 65, 33, 4.0, 4.0, 0.5).with_grading(1.0))?;
    let u0 = Profile::Bump { amplitude: 2.0, width: 0.6 }.trace(&g, 2)?;
    let cfg = FlowConfig {
        target: TargetManifold::sphere(2)?,
        params: PenaltyParams::new(0.5, 0.1)?,
        scheme: Scheme::implicit(0.01),
        t_final: 1.0,
        snapshot_stride: 10,
    };
    let traj = run_flow(&u0, &cfg)?;
    println!("{:>6} {:>8} {:>12} {:>12} {:>10}", "step", "t", "energy", "dissipated", "max|U|");
    for r in std::iter::once(&traj.initial).chain(traj.ledger.iter().step_by(10)) {
        println!("{:>6} {:>8.3} {:>12.6} {:>12.3e} {:>10.6}", r.step, r.t, r.total, r.dissipation_increment, r.max_abs_u);
    }
    let inner: usize = traj.inner_iterations.iter().sum();
    println!("{} steps, {inner} Newton iterations", traj.steps());
    Ok(())
}
