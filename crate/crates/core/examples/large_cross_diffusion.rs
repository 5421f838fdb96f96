//! Hypotheses of the large equal cross-diffusion result for preset 3 and the
//! per-mode thresholds it yields.

use skt::linear_analysis::theorem_large_cross;
use skt::model::preset;

fn main() -> skt::Result<()> {
    let p = preset(3).unwrap();
    let check = theorem_large_cross(&p, 4)?;
    println!("b1 b2 < a1 a2:          {}", check.cond_det_j);
    println!("(b1 + b2)^2 > 4 a1 a2:   {}", check.cond_disc);
    println!("r* = {}", check.r_star.as_ref().unwrap());
    println!("alpha + beta at r* = {}", check.alpha_plus_beta.as_ref().unwrap());
    for (k, t) in check.d_cross_threshold.iter().enumerate() {
        println!("mode {}: bifurcation once d12 = d21 exceeds {t:.4}", k + 1);
    }
    Ok(())
}
