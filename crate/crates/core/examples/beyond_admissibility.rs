//! Continuation in the growth rate r1 at d = 0.005. The coexistence state
//! leaves the positive quadrant at r1 = 6, but a stable positive pattern
//! persists beyond it.

use skt::continuation::{continue_in_r1, point_at, DiagramSettings, StopReason};
use skt::model::preset;

fn main() -> skt::Result<()> {
    let p = preset(1).unwrap().to_f64();
    let settings = DiagramSettings {
        nodes: 101,
        max_primary: 3,
        depth: 1,
        ..DiagramSettings::default()
    };
    let d = continue_in_r1(&p, (2.0, 7.6), 0.005, &settings)?;
    if let StopReason::Inadmissible { value } = d.homogeneous.stop {
        println!("homogeneous coexistence state inadmissible from r1 = {value:.4}");
    }
    for b in &d.branches {
        let (lo, hi) = b.param_range();
        if hi < 7.5 {
            continue;
        }
        let pt = point_at(&p.clone().with_d(0.005), b, 7.5, &settings.continuation)?;
        println!(
            "branch {} ({:?}, r1 in [{lo:.3}, {hi:.3}]) at r1 = 7.5: stability index {}, min u = {:.4}, min v = {:.4}",
            b.id, b.provenance, pt.stability_index, pt.min_u, pt.min_v
        );
    }
    Ok(())
}
