use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::extend::{extend, make_point};
use super::{spatial_variation, Branch, BranchPoint, ContinuationSettings, Event, EventKind, Provenance, StopReason};
use crate::discretization::{jacobian, StateVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::newton::{scaled_dot, scaled_norm, solve_bordered, Arclength};
use crate::stability::spectrum;

const INVERSE_ITERATIONS: usize = 8;
const KERNEL_SEED: u64 = 0x5eed;

/// Approximate null vector of `J` at `state`, unit length in the scaled norm,
/// by inverse iteration from a fixed pseudo-random start.
pub fn kernel_vector(p: &ModelParams, state: &StateVector) -> Result<Vec<f64>> {
    let jac = jacobian(p, state);
    let scale = jac.max_abs().max(1.0);
    let lu = jac
        .clone()
        .lu()
        .or_else(|| {
            let mut shifted = jac;
            shifted.shift_diagonal(1e-10 * scale);
            shifted.lu()
        })
        .ok_or_else(|| Error::SingularJacobian {
            iterations: 0,
            best: Box::new(state.clone()),
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(KERNEL_SEED);
    let mut x: Vec<f64> = (0..lu.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..INVERSE_ITERATIONS {
        lu.solve_in_place(&mut x);
        let n = scaled_norm(&x, 0.0);
        if !n.is_finite() || n == 0.0 {
            return Err(Error::SingularJacobian {
                iterations: 0,
                best: Box::new(state.clone()),
            });
        }
        x.iter_mut().for_each(|v| *v /= n);
    }
    // Fix the sign so repeated runs agree.
    let lead = x.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
    if lead < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(x)
}

/// First point on the crossing branch: the kernel direction made orthogonal
/// to the parent tangent, pushed off by `ε · RMS(state)` and corrected on the
/// hyperplane at that distance.
pub(crate) fn switch_start(
    p: &ModelParams,
    parent: &Branch,
    event: &Event,
    sign: f64,
    settings: &ContinuationSettings,
) -> Result<(BranchPoint, BranchPoint)> {
    if event.kind != EventKind::BranchPoint {
        return Err(Error::Domain(format!("cannot switch branches at a {}", event.kind)));
    }
    let sc = &event.state;
    let phi = kernel_vector(p, sc)?;
    let (t, tp) = (&event.tangent.0, event.tangent.1);
    let proj = scaled_dot(&phi, 0.0, t, tp);
    let mut w: Vec<f64> = phi.iter().zip(t).map(|(a, b)| a - proj * b).collect();
    let mut wp = -proj * tp;
    let n = scaled_norm(&w, wp);
    if n < 1e-8 {
        return Err(Error::SwitchFailed("kernel direction is parallel to the branch tangent".into()));
    }
    w.iter_mut().for_each(|x| *x *= sign / n);
    wp *= sign / n;

    let rms = scaled_norm(&sc.values, 0.0);
    let eps = settings.switch_epsilon * rms.max(1e-3);
    let mut guess = sc.clone();
    guess.values.iter_mut().zip(&w).for_each(|(x, d)| *x += eps * d);
    guess.value += eps * wp;
    let arc = Arclength {
        tangent: &w,
        tangent_param: wp,
        anchor: sc,
        offset: eps,
    };
    let out = solve_bordered(p, &guess, &arc, &settings.newton)
        .map_err(|e| Error::SwitchFailed(format!("corrector at the branch point: {e}")))?;

    let jump = |s: &StateVector| scaled_norm(&s.values.iter().zip(&sc.values).map(|(a, b)| a - b).collect::<Vec<_>>(), s.value - sc.value);
    if jump(&out.state) > 10.0 * eps {
        return Err(Error::SwitchFailed("corrector left the neighbourhood of the branch point".into()));
    }
    if parent.provenance == Provenance::Homogeneous && spatial_variation(&out.state) < 1e-3 * eps {
        return Err(Error::SwitchFailed("corrector fell back onto the homogeneous branch".into()));
    }

    let sp = spectrum(p, sc, false)?;
    let det = jacobian(p, sc).lu().map_or(0.0, |lu| lu.det_sign());
    let mut critical = BranchPoint::from_spectrum(sc.clone(), &sp, 0.0, 0.0, (w.clone(), wp), det);
    critical.event = Some(EventKind::BranchPoint);
    let first = make_point(p, out.state, out.residual, eps, (&w, wp))?;
    Ok((critical, first))
}

/// Follows the crossing branch at `event` in the direction `sign = ±1`.
pub fn switch_branch_signed(
    p: &ModelParams,
    parent: &Branch,
    event: &Event,
    sign: f64,
    new_id: usize,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let (critical, first) = switch_start(p, parent, event, sign, settings)?;
    Ok(grow_from(p, parent, event, critical, first, new_id, settings))
}

pub(crate) fn grow_from(
    p: &ModelParams,
    parent: &Branch,
    event: &Event,
    critical: BranchPoint,
    first: BranchPoint,
    new_id: usize,
    settings: &ContinuationSettings,
) -> Branch {
    let provenance = match parent.provenance {
        Provenance::Homogeneous => Provenance::Primary {
            value: event.value,
            mode: event.mode_hint,
        },
        _ => Provenance::Secondary {
            parent: parent.id,
            value: event.value,
        },
    };
    let branch = Branch {
        id: new_id,
        param: parent.param,
        provenance,
        points: vec![critical, first],
        events: Vec::new(),
        stop: StopReason::Completed,
    };
    let outcome = extend(p, branch, settings);
    if let Some(e) = &outcome.error {
        debug!("branch {new_id}: {e}");
    }
    let b = outcome.branch;
    info!(
        "branch {new_id} from {} = {:.6}: {} points, {} events, stop {:?}",
        parent.param,
        event.value,
        b.points.len(),
        b.events.len(),
        b.stop
    );
    b
}

/// Switches at `event`, trying the `+` kernel direction first.
pub fn switch_branch(
    p: &ModelParams,
    parent: &Branch,
    event: &Event,
    new_id: usize,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    match switch_branch_signed(p, parent, event, 1.0, new_id, settings) {
        Ok(b) => Ok(b),
        Err(first) => switch_branch_signed(p, parent, event, -1.0, new_id, settings)
            .map_err(|second| Error::SwitchFailed(format!("+ side: {first}; - side: {second}"))),
    }
}
