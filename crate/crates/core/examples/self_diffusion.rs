//! Self-diffusion in the second species removes primary branch points: the
//! mode polynomial predicts how many remain and the continuation finds them.

use skt::continuation::{continue_homogeneous, ContinuationSettings, EventKind};
use skt::discretization::{ActiveParam, Grid};
use skt::linear_analysis::{mode_table, self_diffusion_mode_bound, EigenFamily};
use skt::model::preset;

fn main() -> skt::Result<()> {
    let grid = Grid::new(201)?;
    for d22 in [0.0, 0.03, 0.05, 0.1] {
        let p = preset(1).unwrap().to_f64().with_self(0.0, d22);
        let predicted = mode_table(&p, 1, 40, EigenFamily::Discrete { nodes: 201 })?
            .iter()
            .filter(|r| r.bifurcates)
            .count();
        let bound = self_diffusion_mode_bound(&p)?;
        let range = (1e-4, 0.05);
        let cs = ContinuationSettings::default().with_range(range.0, range.1);
        let hom = continue_homogeneous(&p, grid, ActiveParam::D, range, &cs);
        let found: Vec<String> = hom
            .events_of(EventKind::BranchPoint)
            .map(|e| format!("k={} d={:.5}", e.mode_hint.unwrap_or(0), e.value))
            .collect();
        println!(
            "d22 = {d22}: lambda bound {bound:.1?}, {predicted} bifurcating modes (k <= 40), found in d >= 1e-4: {}",
            found.join(", ")
        );
    }
    Ok(())
}
