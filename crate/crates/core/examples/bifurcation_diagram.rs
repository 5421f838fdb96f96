//! Bifurcation diagram in d for preset 1: the homogeneous branch, the first
//! three primary branches and the secondary branches found on them. Branch
//! CSVs, the event list and an SVG go to the directory given as the first
//! argument (default `out/diagram`).

use std::path::PathBuf;

use skt::continuation::{compute_diagram, DiagramSettings, EventKind};
use skt::model::preset;
use skt::output::write_diagram;

fn main() -> skt::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/diagram".into()));
    let p = preset(1).unwrap().to_f64();
    let settings = DiagramSettings {
        nodes: 101,
        ..DiagramSettings::default()
    };
    let d = compute_diagram(&p, &settings)?;
    for b in d.all_branches() {
        let (lo, hi) = b.param_range();
        println!(
            "branch {}: {:?}, d in [{lo:.5}, {hi:.5}], {} of {} points stable, stop {:?}",
            b.id,
            b.provenance,
            b.stable_points().count(),
            b.points.len(),
            b.stop
        );
    }
    for e in d.events() {
        let kind = match e.kind {
            EventKind::BranchPoint => "branch point",
            EventKind::Fold => "fold",
            EventKind::Hopf => "Hopf",
        };
        println!("  {kind:<12} d = {:.6} on branch {}", e.value, e.branch_id);
    }
    let files = write_diagram(&d, &out)?;
    println!("{} files in {}", files.len(), out.display());
    Ok(())
}
