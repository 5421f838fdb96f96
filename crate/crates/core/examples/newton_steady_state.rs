//! Damped Newton on the banded discretization, started from a perturbed
//! homogeneous state.

use std::f64::consts::PI;

use skt::discretization::{residual, sup_norm, ActiveParam, Grid, StateVector};
use skt::model::preset;
use skt::newton::{solve, NewtonSettings};

fn main() -> skt::Result<()> {
    let p = preset(1).unwrap().to_f64().with_d(0.04);
    let grid = Grid::new(201)?;
    let s0 = StateVector::from_fn(grid, ActiveParam::D, 0.04, |x| {
        let c = 0.05 * (PI * x).cos();
        (13.0 / 8.0 + c, 1.0 / 8.0 - 0.1 * c)
    });
    println!("initial residual {:.3e}", sup_norm(&residual(&p, &s0)));
    let out = solve(&p, &s0, &NewtonSettings::default())?;
    for (i, r) in out.history.iter().enumerate() {
        println!("iteration {i:>2}: residual {r:.3e}");
    }
    let (nu, nv) = out.state.l2_norms();
    println!("converged in {} iterations: |u| = {nu:.10}, |v| = {nv:.10}", out.iterations);
    Ok(())
}
