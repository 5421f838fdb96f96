//! Damped Newton for the stationary system, plain and with an arclength border.

use nalgebra::{DMatrix, DVector};

use crate::banded::{BandLu, BandMatrix};
use crate::discretization::{jacobian, parameter_derivative, residual, sup_norm, StateVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;

const FLOOR_FACTOR: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Sup-norm tolerance on the residual.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Smallest damping factor tried; halving starts from 1.
    pub min_damping: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_residual: 1e-10,
            max_iter: 25,
            min_damping: 1.0 / 256.0,
        }
    }
}

impl NewtonSettings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    /// Converged: the residual is below tolerance, or it has stopped
    /// decreasing on its floating-point floor (at most `FLOOR_FACTOR` times the
    /// tolerance). Large cross-diffusion lifts that floor above `tol_residual`
    /// on fine grids.
    fn converged(&self, history: &[f64]) -> bool {
        let norm = *history.last().expect("nonempty history");
        if norm <= self.tol_residual {
            return true;
        }
        let n = history.len();
        norm <= FLOOR_FACTOR * self.tol_residual
            && n >= 3
            && history[n - 1] > 0.5 * history[n - 2]
            && history[n - 2] > 0.5 * history[n - 3]
    }

    fn check(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || self.max_iter == 0 {
            return Err(Error::domain("Newton needs tol_residual > 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: StateVector,
    pub iterations: usize,
    pub residual: f64,
    /// Residual sup norm before each iteration, then the final one.
    pub history: Vec<f64>,
}

/// Scaled inner product on `(state, parameter)` pairs: weight 1 on the
/// parameter and `1/(2N)` on each state component.
pub fn scaled_dot(x: &[f64], px: f64, y: &[f64], py: f64) -> f64 {
    let w = 1.0 / x.len() as f64;
    px * py + w * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
}

pub fn scaled_norm(x: &[f64], px: f64) -> f64 {
    scaled_dot(x, px, x, px).sqrt()
}

/// Newton at fixed parameter.
pub fn solve(p: &ModelParams, s0: &StateVector, settings: &NewtonSettings) -> Result<NewtonOutcome> {
    settings.check()?;
    let mut s = s0.clone();
    let mut f = residual(p, &s);
    let mut norm = sup_norm(&f);
    let mut history = vec![norm];
    let mut best = (norm, s.clone());
    for it in 0..settings.max_iter {
        if settings.converged(&history) {
            return Ok(NewtonOutcome {
                state: s,
                iterations: it,
                residual: norm,
                history,
            });
        }
        let lu = jacobian(p, &s).lu().ok_or_else(|| Error::SingularJacobian {
            iterations: it,
            best: Box::new(best.1.clone()),
        })?;
        let mut step = f.clone();
        lu.solve_in_place(&mut step);
        let (next, next_f, next_norm) = damped(&s, &step, norm, settings, |trial| {
            let r = residual(p, trial);
            let n = sup_norm(&r);
            (r, n)
        });
        s = next;
        f = next_f;
        norm = next_norm;
        history.push(norm);
        if norm < best.0 {
            best = (norm, s.clone());
        }
    }
    if settings.converged(&history) {
        return Ok(NewtonOutcome {
            state: s,
            iterations: settings.max_iter,
            residual: norm,
            history,
        });
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        residual: best.0,
        best: Box::new(best.1),
    })
}

/// Backtracks `s − t·step` for `t = 1, 1/2, ...` and takes the first trial that
/// lowers the residual norm; without one, the full step is taken.
fn damped(
    s: &StateVector,
    step: &[f64],
    norm: f64,
    settings: &NewtonSettings,
    eval: impl Fn(&StateVector) -> (Vec<f64>, f64),
) -> (StateVector, Vec<f64>, f64) {
    let trial_at = |t: f64| {
        let mut trial = s.clone();
        for (x, d) in trial.values.iter_mut().zip(step) {
            *x -= t * d;
        }
        trial
    };
    let mut t = 1.0;
    let mut first = None;
    while t >= settings.min_damping {
        let trial = trial_at(t);
        let (r, n) = eval(&trial);
        if n < norm {
            return (trial, r, n);
        }
        if first.is_none() {
            first = Some((trial, r, n));
        }
        t *= 0.5;
    }
    first.expect("at least one trial")
}

/// Arclength constraint `⟨t, (s − s_anchor, p − p_anchor)⟩ = offset` in the
/// scaled inner product.
#[derive(Clone, Debug)]
pub struct Arclength<'a> {
    pub tangent: &'a [f64],
    pub tangent_param: f64,
    pub anchor: &'a StateVector,
    pub offset: f64,
}

impl Arclength<'_> {
    fn value(&self, s: &StateVector) -> f64 {
        let dx: Vec<f64> = s.values.iter().zip(&self.anchor.values).map(|(a, b)| a - b).collect();
        scaled_dot(self.tangent, self.tangent_param, &dx, s.value - self.anchor.value) - self.offset
    }
}

/// Solves `[J Fp; c^T c_p] [x; xp] = [r; rp]` for banded `J` by block
/// elimination with one refinement sweep, falling back to a dense LU of the
/// full bordered matrix when `J` itself is singular.
pub struct BorderedSystem<'a> {
    jac: &'a BandMatrix,
    lu: Option<BandLu>,
    fp: &'a [f64],
    c: Vec<f64>,
    cp: f64,
    /// `J⁻¹ Fp`, when the banded factorization exists.
    a: Option<Vec<f64>>,
    dense: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> BorderedSystem<'a> {
    /// Border row `c` is given unscaled; the scaled inner-product weight is applied here.
    pub fn new(jac: &'a BandMatrix, fp: &'a [f64], c_raw: &[f64], cp: f64) -> Self {
        let w = 1.0 / c_raw.len() as f64;
        let c: Vec<f64> = c_raw.iter().map(|x| w * x).collect();
        let lu = jac.clone().lu();
        let a = lu.as_ref().map(|lu| lu.solve(fp));
        BorderedSystem {
            jac,
            lu,
            fp,
            c,
            cp,
            a,
            dense: None,
        }
    }

    pub fn det_sign_of_core(&self) -> Option<f64> {
        self.lu.as_ref().map(BandLu::det_sign)
    }

    fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.jac.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.jac.to_dense());
        for i in 0..n {
            m[(i, n)] = self.fp[i];
            m[(n, i)] = self.c[i];
        }
        m[(n, n)] = self.cp;
        m
    }

    fn block_solve(&self, lu: &BandLu, a: &[f64], r: &[f64], rp: f64) -> Option<(Vec<f64>, f64)> {
        let b = lu.solve(r);
        let denom = self.cp - dot(&self.c, a);
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let xp = (rp - dot(&self.c, &b)) / denom;
        let x: Vec<f64> = b.iter().zip(a).map(|(bi, ai)| bi - ai * xp).collect();
        Some((x, xp))
    }

    pub fn solve(&mut self, r: &[f64], rp: f64) -> Option<(Vec<f64>, f64)> {
        if let (Some(lu), Some(a)) = (&self.lu, &self.a) {
            if let Some((mut x, mut xp)) = self.block_solve(lu, a, r, rp) {
                // One sweep of iterative refinement on the full bordered system.
                let jx = self.jac.mul_vec(&x);
                let res: Vec<f64> = (0..r.len())
                    .map(|i| r[i] - jx[i] - self.fp[i] * xp)
                    .collect();
                let res_p = rp - dot(&self.c, &x) - self.cp * xp;
                if let Some((dx, dxp)) = self.block_solve(lu, a, &res, res_p) {
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                    xp += dxp;
                }
                if x.iter().all(|v| v.is_finite()) && xp.is_finite() {
                    return Some((x, xp));
                }
            }
        }
        if self.dense.is_none() {
            self.dense = Some(self.dense_matrix().lu());
        }
        let mut rhs = DVector::from_column_slice(r).push(rp);
        let ok = self.dense.as_ref().unwrap().solve_mut(&mut rhs);
        if !ok {
            return None;
        }
        let n = r.len();
        Some((rhs.rows(0, n).iter().copied().collect(), rhs[n]))
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Newton on `{F(s, p) = 0, arclength(s, p) = 0}`; both state and parameter move.
pub fn solve_bordered(
    p: &ModelParams,
    s0: &StateVector,
    constraint: &Arclength<'_>,
    settings: &NewtonSettings,
) -> Result<NewtonOutcome> {
    settings.check()?;
    let eval = |s: &StateVector| {
        let f = residual(p, s);
        let g = constraint.value(s);
        let n = sup_norm(&f).max(g.abs());
        (f, g, n)
    };
    let mut s = s0.clone();
    let (mut f, mut g, mut norm) = eval(&s);
    let mut history = vec![norm];
    let mut best = (norm, s.clone());
    for it in 0..settings.max_iter {
        if settings.converged(&history) {
            return Ok(NewtonOutcome {
                state: s,
                iterations: it,
                residual: norm,
                history,
            });
        }
        let jac = jacobian(p, &s);
        let fp = parameter_derivative(p, &s);
        let mut system = BorderedSystem::new(&jac, &fp, constraint.tangent, constraint.tangent_param);
        let (dx, dp) = system.solve(&f, g).ok_or_else(|| Error::SingularJacobian {
            iterations: it,
            best: Box::new(best.1.clone()),
        })?;
        let mut accepted = None;
        let mut first = None;
        let mut t = 1.0;
        while t >= settings.min_damping {
            let mut trial = s.clone();
            trial.values.iter_mut().zip(&dx).for_each(|(x, d)| *x -= t * d);
            trial.value -= t * dp;
            let (tf, tg, tn) = eval(&trial);
            if tn < norm {
                accepted = Some((trial, tf, tg, tn));
                break;
            }
            if first.is_none() {
                first = Some((trial, tf, tg, tn));
            }
            t *= 0.5;
        }
        let (ns, nf, ng, nn) = accepted.or(first).expect("at least one trial");
        s = ns;
        f = nf;
        g = ng;
        norm = nn;
        history.push(norm);
        if !norm.is_finite() {
            break;
        }
        if norm < best.0 {
            best = (norm, s.clone());
        }
    }
    if settings.converged(&history) {
        return Ok(NewtonOutcome {
            state: s,
            iterations: settings.max_iter,
            residual: norm,
            history,
        });
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        residual: best.0,
        best: Box::new(best.1),
    })
}

/// Unit tangent to the solution curve at `s`, oriented to have a positive
/// scaled inner product with `(prev, prev_param)`.
pub fn tangent(
    p: &ModelParams,
    s: &StateVector,
    prev: &[f64],
    prev_param: f64,
) -> Result<(Vec<f64>, f64)> {
    let jac = jacobian(p, s);
    let fp = parameter_derivative(p, s);
    let mut system = BorderedSystem::new(&jac, &fp, prev, prev_param);
    let zeros = vec![0.0; fp.len()];
    let (z, zp) = system.solve(&zeros, 1.0).ok_or_else(|| Error::SingularJacobian {
        iterations: 0,
        best: Box::new(s.clone()),
    })?;
    let norm = scaled_norm(&z, zp);
    let sign = if scaled_dot(&z, zp, prev, prev_param) < 0.0 { -1.0 } else { 1.0 };
    Ok((z.iter().map(|x| sign * x / norm).collect(), sign * zp / norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{ActiveParam, Grid};
    use crate::model::preset;
    use std::f64::consts::PI;

    fn row1() -> ModelParams {
        preset(1).unwrap().to_f64()
    }

    fn homogeneous(grid: Grid, d: f64) -> StateVector {
        StateVector::constant(grid, 13.0 / 8.0, 1.0 / 8.0, ActiveParam::D, d)
    }

    fn perturbed(grid: Grid, d: f64, amp: f64) -> StateVector {
        StateVector::from_fn(grid, ActiveParam::D, d, |x| {
            (13.0 / 8.0 + amp * (PI * x).cos(), 1.0 / 8.0 - 0.18 * amp * (PI * x).cos())
        })
    }

    #[test]
    fn homogeneous_state_is_a_fixed_point() {
        let g = Grid::new(41).unwrap();
        let s = homogeneous(g, 0.04);
        let out = solve(&row1(), &s, &NewtonSettings::default()).unwrap();
        assert!(out.iterations <= 1);
        assert!(out.state.values.iter().zip(&s.values).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn small_perturbation_returns_above_first_bifurcation() {
        let g = Grid::new(101).unwrap();
        let out = solve(&row1(), &perturbed(g, 0.04, 1e-3), &NewtonSettings::default()).unwrap();
        let h = homogeneous(g, 0.04);
        let dist = sup_norm(
            &out.state.values.iter().zip(&h.values).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        assert!(dist < 1e-9, "{dist}");
        assert!(out.residual <= 1e-10);
    }

    #[test]
    fn large_perturbation_finds_a_pattern() {
        let g = Grid::new(101).unwrap();
        let out = solve(&row1(), &perturbed(g, 0.03, 0.3), &NewtonSettings::default()).unwrap();
        let (nu, _) = out.state.l2_norms();
        assert!((nu - 13.0 / 8.0).abs() > 1e-3, "{nu}");
        assert!(out.residual <= 1e-10);
        let u = out.state.u_values();
        assert!(u.windows(2).all(|w| w[1] <= w[0]) || u.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn reflected_guess_gives_reflected_solution() {
        let g = Grid::new(101).unwrap();
        let s0 = perturbed(g, 0.03, 0.3);
        let a = solve(&row1(), &s0, &NewtonSettings::default()).unwrap();
        let b = solve(&row1(), &s0.reflected(), &NewtonSettings::default()).unwrap();
        // Elimination runs left to right, so agreement is to roundoff, not bitwise.
        let gap = a.state.reflected().values.iter().zip(&b.state.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{gap}");
        assert!((a.state.l2_norms().0 - 13.0 / 8.0).abs() > 1e-3);
    }

    #[test]
    fn bordered_along_parameter_axis_is_natural_continuation() {
        let g = Grid::new(41).unwrap();
        let s = homogeneous(g, 0.04);
        let zeros = vec![0.0; g.unknowns()];
        let step = 0.002;
        let arc = Arclength {
            tangent: &zeros,
            tangent_param: 1.0,
            anchor: &s,
            offset: step,
        };
        let mut guess = s.clone();
        guess.value += 0.0015;
        let out = solve_bordered(&row1(), &guess, &arc, &NewtonSettings::default()).unwrap();
        assert!((out.state.value - 0.042).abs() < 1e-14);
        assert!(out.state.values.iter().all(|u| (u - 13.0 / 8.0).abs() < 1e-12 || (u - 0.125).abs() < 1e-12));
    }

    #[test]
    fn bordered_corrector_converges_quadratically() {
        let g = Grid::new(101).unwrap();
        let p = row1();
        let base = solve(&p, &perturbed(g, 0.03, 0.3), &NewtonSettings::default()).unwrap().state;
        let zeros = vec![0.0; g.unknowns()];
        let (t, tp) = tangent(&p, &base, &zeros, -1.0).unwrap();
        let ds = 0.05;
        let mut guess = base.clone();
        guess.values.iter_mut().zip(&t).for_each(|(x, d)| *x += ds * d);
        guess.value += ds * tp;
        let arc = Arclength {
            tangent: &t,
            tangent_param: tp,
            anchor: &base,
            offset: ds,
        };
        let out = solve_bordered(&p, &guess, &arc, &NewtonSettings::default()).unwrap();
        let h = &out.history;
        assert!(out.residual <= 1e-10);
        // Order estimate from the last three residuals clear of the roundoff floor.
        let logs: Vec<f64> = h.iter().take_while(|r| **r > 1e-11).map(|r| r.ln()).collect();
        assert!(logs.len() >= 3, "{h:?}");
        let k = logs.len();
        let order = (logs[k - 1] - logs[k - 2]) / (logs[k - 2] - logs[k - 3]);
        assert!(order >= 1.8, "order {order}: {h:?}");
    }

    #[test]
    fn singular_core_falls_back_to_dense() {
        let mut jac = BandMatrix::zeros(2, 1, 1);
        jac.set(0, 0, 1.0);
        jac.set(0, 1, 1.0);
        jac.set(1, 0, 1.0);
        jac.set(1, 1, 1.0);
        let fp = [1.0, 0.0];
        let c = [2.0, -2.0];
        let mut system = BorderedSystem::new(&jac, &fp, &c, 0.0);
        assert!(system.det_sign_of_core().is_none());
        let (x, xp) = system.solve(&[1.0, 1.0], 1.0).unwrap();
        // Rows: x0 + x1 + xp = 1, x0 + x1 = 1, x0 − x1 = 1.
        assert!((x[0] - 1.0).abs() < 1e-14 && x[1].abs() < 1e-14 && xp.abs() < 1e-14);
    }
}
