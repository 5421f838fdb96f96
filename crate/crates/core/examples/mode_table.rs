//! Bifurcation values of the homogeneous state mode by mode, the d21 value at
//! which the first mode disappears, and the large cross-diffusion limits.

use skt::linear_analysis::{
    d21_disappearance_threshold, d_bif_limit, mode_polynomial, mode_table, render_mode_table, EigenFamily, Varied,
};
use skt::model::preset;

fn main() -> skt::Result<()> {
    let base = preset(1).unwrap().to_f64();
    for d12 in [3.0, 10.0, 100.0] {
        let p = base.clone().with_cross(d12, 0.0);
        let first: Vec<String> = (1..=4)
            .map(|k| {
                let r = mode_polynomial(&p, k, EigenFamily::Continuous).unwrap();
                r.d_bif.map_or("-".into(), |d| format!("{d:.4}"))
            })
            .collect();
        println!("d12 = {d12:>5}: d_bif for k = 1..4: {}", first.join("  "));
    }
    for k in 1..=4 {
        let lim = d_bif_limit(&base, k, EigenFamily::Continuous, Varied::D12)?;
        println!("k = {k}: d_bif -> {:.4} as d12 -> infinity", lim.value);
    }

    let t = d21_disappearance_threshold(&base, 1, EigenFamily::Continuous)?;
    println!(
        "d12 = 3: mode 1 stops bifurcating at d21 = {:.5}; no mode bifurcates beyond d21 = {:.5}",
        t.threshold, t.global_cutoff
    );

    // The full table on a 201-node grid uses the discrete eigenvalues.
    let table = mode_table(&base, 1, 8, EigenFamily::Discrete { nodes: 201 })?;
    print!("{}", render_mode_table(&table));
    Ok(())
}
