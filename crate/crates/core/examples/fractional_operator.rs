//! Applies the half-Laplacian to `cos(2x)` through the extension and through
//! the nonlocal time kernel, and compares both with `2 cos(2x)`.

use std::f64::consts::PI;

use halfflow::extension::{
    frac_op_via_extension, frac_op_via_kernel, harmonic_extend, relative_l2, ExtensionMethod, KernelRouteOptions,
    TraceHistory,
};
use halfflow::{GridConfig, HalfSpaceGrid, Trace};

fn main() -> halfflow::Result<()> {
    let g = HalfSpaceGrid::new(&GridConfig::new(1, 256, 128, 4.0 * PI, 4.0 * PI, 0.5))?;
    let k = 2.0;
    let u0 = Trace::from_fn(&g, 1, |x, o| o[0] = (k * x[0]).cos());
    let exact = Trace::from_fn(&g, 1, |x, o| o[0] = k * (k * x[0]).cos());

    let ext = harmonic_extend(&u0, ExtensionMethod::FiniteDifference)?;
    println!("Dirichlet energy of the extension: {:.6}", ext.dirichlet_energy());
    let via_ext = frac_op_via_extension(&ext)?;

    let hist = TraceHistory::from_fn(&g, 1, &[0.0, 1.0], |x, _, o| o[0] = (k * x[0]).cos())?;
    let via_kernel = frac_op_via_kernel(&hist, 1.0, &KernelRouteOptions::default())?;

    println!("extension route error: {:.3e}", relative_l2(&via_ext, &exact));
    println!("kernel route error:    {:.3e} ({} panels)", relative_l2(&via_kernel.value, &exact), via_kernel.panels);
    Ok(())
}
