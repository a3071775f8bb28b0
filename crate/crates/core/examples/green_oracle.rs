//! Oblique-derivative Green function: boundary residuals, image limits and
//! a Duhamel solution against finite differences.

use halfflow::greenlab::{green_oblique, green_oblique_closed, green_verify, ObliqueParams, VerifyOptions};

fn main() -> halfflow::Result<()> {
    let p = ObliqueParams::new(0.3, 1)?;
    let (x, y) = ([0.2, 0.4], [0.0, 0.3]);
    for t in [0.1, 0.5, 1.0] {
        let q = green_oblique(&x, &y, t, &p)?;
        let c = green_oblique_closed(&x, &y, t, &p);
        println!("t = {t}: quadrature {q:.12e}, closed form {c:.12e}");
    }
    let opts = VerifyOptions { samples: 20, tolerance_check: false, ..VerifyOptions::default() };
    let rep = green_verify(1, &opts)?;
    println!("{}", rep.to_json());
    Ok(())
}
