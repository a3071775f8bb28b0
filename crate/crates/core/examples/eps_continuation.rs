//! Runs over decreasing epsilon: boundary defect, its scaled version and the
//! distances between consecutive traces.

use halfflow::flow::{epsilon_continuation, FlowConfig, Scheme};
use halfflow::profiles::Profile;
use halfflow::{GridConfig, HalfSpaceGrid, PenaltyParams, TargetManifold};

fn main() -> halfflow::Result<()> {
    let g = HalfSpaceGrid::new(&GridConfig::new(1, 65, 33, 4.0, 4.0, 0.5).with_grading(1.0))?;
    let u0 = Profile::Winding { turns: 0.5, width: 0.6 }.trace(&g, 2)?;
    let cfg = FlowConfig {
        target: TargetManifold::sphere(2)?,
        params: PenaltyParams::new(0.5, 0.2)?,
        scheme: Scheme::implicit(0.01),
        t_final: 0.5,
        snapshot_stride: 10,
    };
    let rep = epsilon_continuation(&u0, &cfg, &[0.2, 0.1, 0.05])?;
    for i in 0..rep.eps.len() {
        println!("eps = {:.3}  defect = {:.3e}  scaled = {:.3e}", rep.eps[i], rep.defect[i], rep.scaled_defect[i]);
    }
    println!("order {:.3}, distances {:?}", rep.slope, rep.distances);
    Ok(())
}
