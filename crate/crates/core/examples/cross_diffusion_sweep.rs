//! How the first branch of preset 2 changes with d21: the fold moves to
//! smaller d and then back out. Writes an overlay SVG.

use std::path::PathBuf;

use skt::continuation::{sweep, DiagramSettings, EventKind, Provenance};
use skt::discretization::ActiveParam;
use skt::model::preset;
use skt::output::{branch_rows, overlay_svg, Series};

fn main() -> skt::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/sweep".into()));
    let p = preset(2).unwrap().to_f64();
    let settings = DiagramSettings {
        nodes: 101,
        range: (0.0005, 0.3),
        max_primary: 1,
        depth: 1,
        ..DiagramSettings::default()
    };
    let values = [0.0, 3.0, 6.0, 20.0, 100.0];
    let mut layers = Vec::new();
    for r in sweep(&p, ActiveParam::D21, &values, &settings) {
        let d = r.diagram?;
        let first = d
            .branches
            .iter()
            .find(|b| matches!(b.provenance, Provenance::Primary { mode: Some(1), .. }));
        let fold = first
            .and_then(|b| b.events_of(EventKind::Fold).map(|e| e.value).reduce(f64::max))
            .map_or("none".into(), |v| format!("{v:.5}"));
        let bp = d.homogeneous.events.iter().find(|e| e.mode_hint == Some(1)).map(|e| e.value);
        println!("d21 = {:>5}: first branch point {bp:.6?}, fold at d = {fold}", r.value);
        let series = d.all_branches().map(|b| Series { id: b.id, rows: branch_rows(b) }).collect();
        layers.push((format!("d21 = {}", r.value), series));
    }
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("overlay.svg"), overlay_svg(&layers, "d"))?;
    Ok(())
}
