//! Backward Euler from a small first-mode perturbation of the homogeneous
//! state at d = 0.03, where that state is unstable. The solution settles on
//! the half-bump pattern of the first branch.

use std::f64::consts::PI;

use skt::discretization::{ActiveParam, Grid, StateVector};
use skt::evolve::{integrate_to_steady, EvolveSettings};
use skt::model::preset;
use skt::stability::spectrum;

fn main() -> skt::Result<()> {
    let p = preset(1).unwrap().to_f64().with_d(0.03);
    let grid = Grid::new(101)?;
    let s0 = StateVector::from_fn(grid, ActiveParam::D, 0.03, |x| {
        let c = 0.01 * (PI * x).cos();
        (13.0 / 8.0 * (1.0 + c), 1.0 / 8.0 * (1.0 - c))
    });
    let out = integrate_to_steady(&p, &s0, &EvolveSettings::default());
    for s in out.trajectory.iter().step_by((out.trajectory.len() / 12).max(1)) {
        println!("t = {:>10.3}: |u| = {:.8}, |v| = {:.8}", s.t, s.norm_u, s.norm_v);
    }
    let sp = spectrum(&p, &out.state, false)?;
    println!(
        "steady = {} after {} steps; u(0) = {:.5}, u(1) = {:.5}; unstable eigenvalues {}",
        out.converged,
        out.steps,
        out.state.u(0),
        out.state.u(grid.nodes() - 1),
        sp.unstable
    );
    Ok(())
}
