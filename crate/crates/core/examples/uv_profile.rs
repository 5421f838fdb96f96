//! At large d12 the product uv is nearly constant along the first branch.
//! Renders u, v and uv for one point and reports the spread of uv.

use skt::continuation::{compute_diagram, DiagramSettings, Provenance};
use skt::model::preset;
use skt::output::{profile_svg, uv_spread};

fn main() -> skt::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/profile".into()));
    for d12 in [3.0, 100.0] {
        let p = preset(1).unwrap().to_f64().with_cross(d12, 0.0);
        let settings = DiagramSettings {
            nodes: 101,
            range: (0.005, 0.15),
            max_primary: 1,
            depth: 1,
            ..DiagramSettings::default()
        };
        let d = compute_diagram(&p, &settings)?;
        let b = d
            .branches
            .iter()
            .find(|b| matches!(b.provenance, Provenance::Primary { mode: Some(1), .. }))
            .expect("first branch");
        // The point with the largest u variation.
        let pt = b
            .points
            .iter()
            .max_by(|a, b| (a.state.sup_norm() - a.min_u).total_cmp(&(b.state.sup_norm() - b.min_u)))
            .unwrap();
        let spread = uv_spread(&pt.state);
        let range = pt.state.sup_norm() - pt.min_u;
        println!("d12 = {d12}: d = {:.5}, u range {range:.4}, uv spread {spread:.4e}", pt.value());
        std::fs::create_dir_all(&out)?;
        let caption = format!("d12 = {d12}, d = {:.5}", pt.value());
        std::fs::write(out.join(format!("d12_{d12}.svg")), profile_svg(&pt.state, true, &caption))?;
    }
    Ok(())
}
