//! Spectrum of the discrete linearization at the homogeneous state, checked
//! against the 2x2 blocks of the cosine modes.

use skt::discretization::{ActiveParam, Grid, StateVector};
use skt::linear_analysis::discrete_eigenvalue;
use skt::model::{preset, reaction_jacobian};
use skt::stability::{spectrum, write_spectrum_csv};

fn main() -> skt::Result<()> {
    let p = preset(1).unwrap().to_f64().with_d(0.025);
    let grid = Grid::new(101)?;
    let s = StateVector::constant(grid, 13.0 / 8.0, 1.0 / 8.0, ActiveParam::D, 0.025);
    let sp = spectrum(&p, &s, true)?;
    println!("unstable eigenvalues: {}, rightmost {:.6}", sp.unstable, sp.rightmost);

    // Mode k block: J* - lambda_k A(u*, v*).
    let j = reaction_jacobian(&p, 13.0 / 8.0, 1.0 / 8.0);
    let a = skt::discretization::diffusion_matrix(&p, 13.0 / 8.0, 1.0 / 8.0);
    for k in 0..5 {
        let lam = discrete_eigenvalue(k, grid.h());
        let m = [[j[0][0] - lam * a[0][0], j[0][1] - lam * a[0][1]], [j[1][0] - lam * a[1][0], j[1][1] - lam * a[1][1]]];
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = tr * tr - 4.0 * det;
        let top = if disc >= 0.0 { 0.5 * (tr + disc.sqrt()) } else { 0.5 * tr };
        println!("mode {k}: largest block eigenvalue real part {top:+.6}");
    }
    let out = std::env::temp_dir().join("skt_spectrum.csv");
    write_spectrum_csv(sp.eigenvalues.as_deref().unwrap(), &out)?;
    println!("spectrum written to {}", out.display());
    Ok(())
}
