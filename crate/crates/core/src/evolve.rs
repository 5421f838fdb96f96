//! Backward-Euler time integration of the full system.
//!
//! Used as an independent check of the stability flags computed from spectra
//! and as a source of initial guesses for Newton.

use std::io::Write;
use std::path::Path;

use log::debug;

use crate::discretization::{jacobian, residual, sup_norm, StateVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::newton::{self, NewtonSettings};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveSettings {
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_steps: usize,
    /// Steady once `‖s_{n+1} − s_n‖∞ / Δt` drops below this.
    pub steady_tol: f64,
    /// Newton for each implicit step and for the final polish.
    pub newton: NewtonSettings,
    pub polish: bool,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        EvolveSettings {
            dt0: 1e-3,
            dt_min: 1e-8,
            dt_max: 1.0,
            max_steps: 20_000,
            steady_tol: 1e-9,
            newton: NewtonSettings::default(),
            polish: true,
        }
    }
}

/// One step `(y − s)/Δt = F(y)`, solved by Newton from `y = s` with the
/// Jacobian `I/Δt − J`.
pub fn step(p: &ModelParams, s: &StateVector, dt: f64, settings: &NewtonSettings) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::domain("time step must be positive"));
    }
    let inv_dt = 1.0 / dt;
    let implicit = |y: &StateVector| -> Vec<f64> {
        residual(p, y)
            .iter()
            .zip(y.values.iter().zip(&s.values))
            .map(|(f, (a, b))| (a - b) * inv_dt - f)
            .collect()
    };
    let mut y = s.clone();
    let mut g = implicit(&y);
    let mut norm = sup_norm(&g);
    let mut history = vec![norm];
    for _ in 0..settings.max_iter {
        if norm <= settings.tol_residual {
            return Ok(y);
        }
        let mut m = jacobian(p, &y);
        m.scale(-1.0);
        m.shift_diagonal(inv_dt);
        let lu = m.lu().ok_or(Error::StepRejected { dt })?;
        lu.solve_in_place(&mut g);
        y.values.iter_mut().zip(&g).for_each(|(x, d)| *x -= d);
        g = implicit(&y);
        norm = sup_norm(&g);
        if !norm.is_finite() {
            break;
        }
        history.push(norm);
        // Same floating-point floor rule as the stationary solver.
        let n = history.len();
        if n >= 3
            && norm <= 1e3 * settings.tol_residual
            && history[n - 1] > 0.5 * history[n - 2]
            && history[n - 2] > 0.5 * history[n - 3]
        {
            return Ok(y);
        }
    }
    if norm <= settings.tol_residual {
        return Ok(y);
    }
    Err(Error::StepRejected { dt })
}

/// One accepted step of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub norm_u: f64,
    pub norm_v: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveOutcome {
    pub state: StateVector,
    pub converged: bool,
    pub time: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Set when the observer ended the run.
    pub stopped: bool,
    pub trajectory: Vec<Sample>,
}

fn sample(t: f64, s: &StateVector) -> Sample {
    let (norm_u, norm_v) = s.l2_norms();
    Sample { t, norm_u, norm_v }
}

/// Integrates until the state is steady or the budget runs out; see
/// [`integrate_with`].
pub fn integrate_to_steady(p: &ModelParams, s0: &StateVector, settings: &EvolveSettings) -> EvolveOutcome {
    integrate_with(p, s0, settings, |_, _| true)
}

/// Adaptive backward Euler: Δt doubles after each accepted step (up to
/// `dt_max`) and halves on rejection. `observer(t, state)` sees every accepted
/// state and ends the run by returning `false`. A steady end state is polished
/// by a direct Newton solve.
pub fn integrate_with(
    p: &ModelParams,
    s0: &StateVector,
    settings: &EvolveSettings,
    mut observer: impl FnMut(f64, &StateVector) -> bool,
) -> EvolveOutcome {
    let mut s = s0.clone();
    let mut t = 0.0;
    let mut dt = settings.dt0.clamp(settings.dt_min, settings.dt_max);
    let mut trajectory = vec![sample(0.0, &s)];
    let (mut steps, mut rejected) = (0, 0);
    let mut steady = false;
    let mut stopped = false;
    while steps < settings.max_steps {
        let next = match step(p, &s, dt, &settings.newton) {
            Ok(next) => next,
            Err(_) => {
                rejected += 1;
                dt *= 0.5;
                if dt < settings.dt_min {
                    debug!("time step underflow at t = {t}");
                    break;
                }
                continue;
            }
        };
        let change = sup_norm(&next.values.iter().zip(&s.values).map(|(a, b)| a - b).collect::<Vec<_>>());
        s = next;
        t += dt;
        steps += 1;
        trajectory.push(sample(t, &s));
        if !observer(t, &s) {
            stopped = true;
            break;
        }
        if change / dt < settings.steady_tol {
            steady = true;
            break;
        }
        dt = (2.0 * dt).min(settings.dt_max);
    }
    let mut converged = steady;
    if steady && settings.polish {
        match newton::solve(p, &s, &settings.newton) {
            Ok(out) => s = out.state,
            Err(e) => {
                debug!("polish failed: {e}");
                converged = false;
            }
        }
    }
    EvolveOutcome {
        state: s,
        converged,
        time: t,
        steps,
        rejected,
        stopped,
        trajectory,
    }
}

/// Writes `t,norm_u,norm_v` rows.
pub fn write_trajectory_csv(trajectory: &[Sample], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "t,norm_u,norm_v")?;
    for x in trajectory {
        writeln!(w, "{:e},{:e},{:e}", x.t, x.norm_u, x.norm_v)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{ActiveParam, Grid};
    use crate::linear_analysis::discrete_eigenvalue;
    use crate::model::preset;
    use crate::newton::solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn preset_one(d: f64) -> ModelParams {
        preset(1).unwrap().to_f64().with_d(d)
    }

    fn homogeneous(g: Grid, d: f64) -> StateVector {
        StateVector::constant(g, 13.0 / 8.0, 1.0 / 8.0, ActiveParam::D, d)
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let p = preset_one(0.03);
        let s = homogeneous(Grid::new(41).unwrap(), 0.03);
        let next = step(&p, &s, 0.1, &NewtonSettings::default()).unwrap();
        assert!(sup_norm(&next.values.iter().zip(&s.values).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-12);
        let out = integrate_to_steady(&p, &s, &EvolveSettings::default());
        assert!(out.converged);
        assert_eq!(out.steps, 1);
    }

    #[test]
    fn random_nonnegative_data_stays_nonnegative() {
        let g = Grid::new(41).unwrap();
        let p = preset_one(0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let settings = EvolveSettings {
            max_steps: 40,
            ..EvolveSettings::default()
        };
        let mut violations = 0;
        for _ in 0..100 {
            let s0 = StateVector::from_fn(g, ActiveParam::D, 0.03, |_| (rng.gen_range(0.0..3.0), rng.gen_range(0.0..1.0)));
            let out = integrate_with(&p, &s0, &settings, |_, s| {
                if s.min_u() < -1e-12 || s.min_v() < -1e-12 {
                    violations += 1;
                    return false;
                }
                true
            });
            assert!(out.steps > 0);
        }
        assert_eq!(violations, 0, "{violations} of 100 runs went negative");
    }

    #[test]
    fn linear_growth_matches_block_eigenvalue() {
        let g = Grid::new(101).unwrap();
        for d in [0.025, 0.04] {
            let p = preset_one(d);
            let (u, v) = (13.0 / 8.0, 1.0 / 8.0);
            // Dominant eigenvalue of J* − λ1 D* for the k = 1 block.
            let l = discrete_eigenvalue(1, g.h());
            let j = crate::model::reaction_jacobian(&p, u, v);
            let dm = crate::discretization::diffusion_matrix(&p, u, v);
            let m = [
                [j[0][0] - l * dm[0][0], j[0][1] - l * dm[0][1]],
                [j[1][0] - l * dm[1][0], j[1][1] - l * dm[1][1]],
            ];
            let (tr, det) = (m[0][0] + m[1][1], m[0][0] * m[1][1] - m[0][1] * m[1][0]);
            let mu = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
            // Start on the block eigenvector so the other block mode stays silent.
            let (eu, ev) = (m[0][1], mu - m[0][0]);
            let eps = 1e-7 / eu.abs().max(ev.abs());
            let s0 = StateVector::from_fn(g, ActiveParam::D, d, |x| {
                let c = (std::f64::consts::PI * x).cos();
                (u + eps * eu * c, v + eps * ev * c)
            });
            let amplitude = |s: &StateVector| s.u(0) - s.u(g.nodes() - 1);
            let dt = 0.002 / mu.abs();
            let mut s = s0.clone();
            for _ in 0..50 {
                s = step(&p, &s, dt, &NewtonSettings::default().with_tol(1e-14)).unwrap();
            }
            // Backward Euler multiplies a mode by 1/(1 − Δt μ) per step.
            let ratio = amplitude(&s) / amplitude(&s0);
            let measured = (1.0 - ratio.powf(-1.0 / 50.0)) / dt;
            assert!((measured - mu).abs() < 0.05 * mu.abs(), "d = {d}: {measured} vs {mu}");
            assert_eq!(ratio > 1.0, mu > 0.0);
        }
    }

    #[test]
    fn converges_to_half_bump_on_first_branch() {
        let g = Grid::new(101).unwrap();
        let p = preset_one(0.03);
        let s0 = StateVector::from_fn(g, ActiveParam::D, 0.03, |x| {
            (13.0 / 8.0 + 0.1 * (std::f64::consts::PI * x).cos(), 1.0 / 8.0)
        });
        let out = integrate_to_steady(&p, &s0, &EvolveSettings::default());
        assert!(out.converged);
        let s = &out.state;
        let u = s.u_values();
        assert!(u.windows(2).all(|w| w[1] <= w[0] + 1e-12) || u.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(crate::continuation::spatial_variation(s) > 0.1);
        assert!(sup_norm(&residual(&p, s)) <= 1e-10);
        // The stationary solver started from the same data lands on the same state.
        let direct = solve(&p, s, &NewtonSettings::default()).unwrap();
        assert!((direct.state.l2_norms().0 - s.l2_norms().0).abs() < 1e-10);
    }

    #[test]
    fn strong_competition_without_cross_diffusion_excludes() {
        let g = Grid::new(41).unwrap();
        let mut p = preset(2).unwrap().to_f64().with_cross(0.0, 0.0).with_d(0.05);
        p.d11 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let s0 = StateVector::from_fn(g, ActiveParam::D, 0.05, |_| (rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5)));
            let out = integrate_to_steady(&p, &s0, &EvolveSettings { max_steps: 5000, ..Default::default() });
            assert!(out.converged);
            let s = &out.state;
            let extinct_v = s.v_values().iter().all(|v| v.abs() < 1e-6);
            let extinct_u = s.u_values().iter().all(|u| u.abs() < 1e-6);
            assert!(extinct_u != extinct_v, "no exclusion: u0 = {}, v0 = {}", s.u(0), s.v(0));
        }
    }
}
