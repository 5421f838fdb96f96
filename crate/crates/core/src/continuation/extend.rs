use log::{debug, warn};

use super::{
    spatial_variation, Branch, BranchPoint, ContinuationSettings, Event, EventKind, Provenance,
    StopReason,
};
use crate::discretization::{is_elliptic, jacobian, ActiveParam, StateVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::newton::{scaled_dot, scaled_norm, solve_bordered, tangent, Arclength};
use crate::stability::spectrum;

/// Consecutive tangents must agree at least this well for a step to count.
const MIN_TANGENT_COSINE: f64 = 0.8;
/// Spatial variation below which a state counts as homogeneous.
const HOMOGENEOUS_VARIATION: f64 = 1e-7;

/// Result of [`extend`]: the branch as far as it got, plus the stall error if
/// the step size underflowed.
#[derive(Debug)]
pub struct ExtendOutcome {
    pub branch: Branch,
    pub error: Option<Error>,
}

fn det_sign(p: &ModelParams, s: &StateVector) -> f64 {
    jacobian(p, s).lu().map_or(0.0, |lu| lu.det_sign())
}

fn sign_of(x: f64, threshold: f64) -> i8 {
    if x > threshold {
        1
    } else if x < -threshold {
        -1
    } else {
        0
    }
}

/// Corrects onto the curve at arclength `sigma` past `anchor`.
fn correct_at(
    p: &ModelParams,
    anchor: &BranchPoint,
    sigma: f64,
    settings: &ContinuationSettings,
) -> Result<(StateVector, f64)> {
    let mut guess = anchor.state.clone();
    guess
        .values
        .iter_mut()
        .zip(&anchor.tangent)
        .for_each(|(x, t)| *x += sigma * t);
    guess.value += sigma * anchor.tangent_param;
    let arc = Arclength {
        tangent: &anchor.tangent,
        tangent_param: anchor.tangent_param,
        anchor: &anchor.state,
        offset: sigma,
    };
    let out = solve_bordered(p, &guess, &arc, &settings.newton)?;
    Ok((out.state, out.residual))
}

/// Bisects on the arclength offset in `(0, ds)` until the parameter bracket
/// shrinks below `tol`. `same_side` reports whether a state falls on the
/// anchor's side of the event.
fn locate(
    p: &ModelParams,
    anchor: &BranchPoint,
    end_value: f64,
    ds: f64,
    tol: f64,
    max_iter: usize,
    settings: &ContinuationSettings,
    same_side: impl Fn(&StateVector) -> Option<bool>,
) -> Option<(f64, StateVector, f64)> {
    let (mut lo, mut hi) = (0.0, ds);
    let (mut p_lo, mut p_hi) = (anchor.value(), end_value);
    let mut best = None;
    for _ in 0..max_iter {
        if (p_hi - p_lo).abs() <= tol || hi - lo <= 1e-13 * ds.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (state, res) = match correct_at(p, anchor, mid, settings) {
            Ok(x) => x,
            Err(_) => break,
        };
        let v = state.value;
        match same_side(&state) {
            Some(true) => {
                lo = mid;
                p_lo = v;
            }
            Some(false) => {
                hi = mid;
                p_hi = v;
            }
            None => {
                best = Some((mid, state, res));
                break;
            }
        }
        best = Some((mid, state, res));
    }
    best.or_else(|| {
        let mid = 0.5 * (lo + hi);
        correct_at(p, anchor, mid, settings)
            .ok()
            .map(|(s, r)| (mid, s, r))
    })
}

/// Fresh point with spectrum, determinant sign and tangent.
pub(crate) fn make_point(
    p: &ModelParams,
    state: StateVector,
    res: f64,
    arclength: f64,
    prev_tangent: (&[f64], f64),
) -> Result<BranchPoint> {
    let t = tangent(p, &state, prev_tangent.0, prev_tangent.1)?;
    let sp = spectrum(p, &state, false)?;
    let det = det_sign(p, &state);
    Ok(BranchPoint::from_spectrum(state, &sp, res, arclength, t, det))
}

/// Classifies and refines the event (if any) between two consecutive points.
fn detect(
    p: &ModelParams,
    a: &BranchPoint,
    b: &BranchPoint,
    ds: f64,
    branch_id: usize,
    settings: &ContinuationSettings,
) -> Option<(Event, BranchPoint)> {
    let kind = if a.det_sign != 0.0 && b.det_sign != 0.0 && a.det_sign != b.det_sign {
        let (sa, sb) = (
            sign_of(a.tangent_param, settings.fold_threshold),
            sign_of(b.tangent_param, settings.fold_threshold),
        );
        if sa != sb || sa == 0 {
            EventKind::Fold
        } else {
            EventKind::BranchPoint
        }
    } else {
        let du = b.stability_index as i64 - a.stability_index as i64;
        let dc = b.unstable_complex as i64 - a.unstable_complex as i64;
        if settings.detect_hopf && du == dc && du != 0 && du % 2 == 0 {
            EventKind::Hopf
        } else {
            return None;
        }
    };
    let located = match kind {
        EventKind::BranchPoint => locate(p, a, b.value(), ds, settings.event_tol, 80, settings, |s| {
            let d = det_sign(p, s);
            (d != 0.0).then_some(d == a.det_sign)
        }),
        EventKind::Fold => {
            let sa = a.tangent_param.signum();
            locate(p, a, b.value(), ds, settings.event_tol, 80, settings, |s| {
                tangent(p, s, &a.tangent, a.tangent_param)
                    .ok()
                    .map(|t| t.1.signum() == sa)
            })
        }
        EventKind::Hopf => locate(p, a, b.value(), ds, settings.hopf_tol, 30, settings, |s| {
            spectrum(p, s, false)
                .ok()
                .map(|sp| sp.unstable_complex == a.unstable_complex)
        }),
    };
    let (sigma, state, res) = located?;
    let mut pt = make_point(p, state, res, a.arclength + sigma, (&a.tangent, a.tangent_param)).ok()?;
    pt.event = Some(kind);
    if kind == EventKind::BranchPoint {
        // Two curves cross here, so the tangent solve is ill-posed; interpolate
        // the parent direction from the bracketing points instead.
        let w = if ds > 0.0 { sigma / ds } else { 0.5 };
        let mut t: Vec<f64> = a.tangent.iter().zip(&b.tangent).map(|(x, y)| (1.0 - w) * x + w * y).collect();
        let mut tp = (1.0 - w) * a.tangent_param + w * b.tangent_param;
        let n = scaled_norm(&t, tp);
        t.iter_mut().for_each(|x| *x /= n);
        tp /= n;
        pt.tangent = t;
        pt.tangent_param = tp;
    }
    let event = Event {
        kind,
        value: pt.value(),
        branch_id,
        mode_hint: None,
        arclength_bracket: (a.arclength, b.arclength),
        param_bracket: (a.value(), b.value()),
        state: pt.state.clone(),
        tangent: (pt.tangent.clone(), pt.tangent_param),
    };
    debug!("{kind} at {} = {} on branch {branch_id}", event.state.param, event.value);
    Some((event, pt))
}

fn step_guard(
    p: &ModelParams,
    branch: &Branch,
    point: &BranchPoint,
    settings: &ContinuationSettings,
) -> Option<StopReason> {
    let value = point.value();
    if branch.param == ActiveParam::D && value <= 0.0 {
        if !settings.allow_negative_d {
            return Some(StopReason::NegativeD);
        }
        if !is_elliptic(p, &point.state) {
            return Some(StopReason::LostEllipticity);
        }
    }
    if !settings.in_range(value) {
        return Some(StopReason::LeftRange);
    }
    let variation = spatial_variation(&point.state);
    if branch.provenance != Provenance::Homogeneous
        && variation < HOMOGENEOUS_VARIATION * (1.0 + point.state.sup_norm())
    {
        return Some(StopReason::Reconnected);
    }
    if let Some(first) = branch.points.get(1) {
        let travelled = point.arclength - first.arclength;
        let gap = |s: &StateVector| {
            let d: Vec<f64> = s.values.iter().zip(&first.state.values).map(|(a, b)| a - b).collect();
            scaled_norm(&d, s.value - first.value())
        };
        if travelled > 20.0 * settings.ds_max
            && gap(&point.state).min(gap(&point.state.reflected())) < 0.5 * settings.ds_max
        {
            return Some(StopReason::ClosedLoop);
        }
    }
    // A primary branch that comes back as close to the homogeneous state as its
    // first point has returned to a branch point, possibly stepping over it.
    if let (Provenance::Primary { .. }, Some(first)) = (&branch.provenance, branch.points.get(1)) {
        let travelled = point.arclength - first.arclength;
        if travelled > 10.0 * first.arclength && variation <= 1.5 * spatial_variation(&first.state) {
            return Some(StopReason::Reconnected);
        }
    }
    None
}

/// Continues `branch` from its last point: tangent predictor, bordered Newton
/// corrector, adaptive steps and event detection between accepted points.
pub fn extend(p: &ModelParams, mut branch: Branch, settings: &ContinuationSettings) -> ExtendOutcome {
    let mut ds = settings.ds0.clamp(settings.ds_min, settings.ds_max);
    let mut streak = 0;
    for _ in 0..settings.max_steps {
        let last = branch.last().clone();
        let attempt = correct_at(p, &last, ds, settings).and_then(|(state, res)| {
            make_point(p, state, res, last.arclength + ds, (&last.tangent, last.tangent_param))
        });
        let accepted = match attempt {
            Ok(pt) => {
                let cos = scaled_dot(&last.tangent, last.tangent_param, &pt.tangent, pt.tangent_param);
                (cos >= MIN_TANGENT_COSINE || ds <= 2.0 * settings.ds_min).then_some(pt)
            }
            Err(e) => {
                debug!("corrector failed at ds = {ds:.3e}: {e}");
                None
            }
        };
        let Some(point) = accepted else {
            ds *= 0.5;
            streak = 0;
            if ds < settings.ds_min {
                warn!(
                    "branch {} stalled at {} = {}",
                    branch.id,
                    branch.param,
                    last.value()
                );
                branch.stop = StopReason::Stalled {
                    ds_min: settings.ds_min,
                    value: last.value(),
                };
                let error = Error::BranchStalled {
                    ds_min: settings.ds_min,
                    value: last.value(),
                };
                return ExtendOutcome {
                    branch,
                    error: Some(error),
                };
            }
            continue;
        };

        let mut reconnected = false;
        if let Some((event, ev_point)) = detect(p, &last, &point, ds, branch.id, settings) {
            reconnected = branch.provenance != Provenance::Homogeneous
                && event.kind == EventKind::BranchPoint
                && spatial_variation(&event.state) < 1e-6 * (1.0 + event.state.sup_norm());
            branch.events.push(event);
            branch.points.push(ev_point);
        }
        let stop = step_guard(p, &branch, &point, settings);
        // Points past d = 0 are never reported without the explicit flag.
        if stop != Some(StopReason::NegativeD) {
            branch.points.push(point);
        }
        if reconnected {
            branch.stop = StopReason::Reconnected;
            return ExtendOutcome { branch, error: None };
        }
        if let Some(reason) = stop {
            branch.stop = reason;
            return ExtendOutcome { branch, error: None };
        }
        streak += 1;
        if streak >= settings.grow_after {
            ds = (ds * settings.grow).min(settings.ds_max);
            streak = 0;
        }
    }
    branch.stop = StopReason::MaxSteps;
    ExtendOutcome { branch, error: None }
}

/// The branch state at exactly `value` of the active parameter: linear
/// interpolation between the first bracketing pair of points, corrected by
/// Newton at fixed parameter.
pub fn point_at(p: &ModelParams, branch: &Branch, value: f64, settings: &ContinuationSettings) -> Result<BranchPoint> {
    let (a, b) = branch
        .points
        .windows(2)
        .map(|w| (&w[0], &w[1]))
        .find(|(a, b)| (a.value() - value) * (b.value() - value) <= 0.0 && a.value() != b.value())
        .ok_or_else(|| Error::domain(format!("branch {} does not reach {} = {value}", branch.id, branch.param)))?;
    let w = (value - a.value()) / (b.value() - a.value());
    let mut guess = a.state.clone();
    guess
        .values
        .iter_mut()
        .zip(&b.state.values)
        .for_each(|(x, y)| *x = (1.0 - w) * *x + w * y);
    guess.value = value;
    let out = crate::newton::solve(p, &guess, &settings.newton)?;
    let arclength = a.arclength + w * (b.arclength - a.arclength);
    make_point(p, out.state, out.residual, arclength, (&a.tangent, a.tangent_param))
}
