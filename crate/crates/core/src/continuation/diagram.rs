use log::{info, warn};
use rayon::prelude::*;

use super::homogeneous::continue_homogeneous;
use super::switch::{grow_from, switch_start};
use super::{Branch, BranchPoint, ContinuationSettings, Event, EventKind};
use crate::discretization::{sup_norm, ActiveParam, Grid, StateVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Settings for a full bifurcation diagram in one parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagramSettings {
    pub nodes: usize,
    pub param: ActiveParam,
    pub range: (f64, f64),
    pub continuation: ContinuationSettings,
    /// Primary branch points (lowest modes first) to switch at.
    pub max_primary: usize,
    /// `1` follows primary branches only, `2` also switches at their branch points.
    pub depth: usize,
    pub max_secondary_per_branch: usize,
}

impl Default for DiagramSettings {
    fn default() -> Self {
        DiagramSettings {
            nodes: 201,
            param: ActiveParam::D,
            range: (0.005, 0.05),
            continuation: ContinuationSettings::default(),
            max_primary: 3,
            depth: 2,
            max_secondary_per_branch: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Diagram {
    pub base: ModelParams,
    pub param: ActiveParam,
    /// Branch `0`.
    pub homogeneous: Branch,
    /// Nontrivial branches in discovery order, ids `1, 2, ...`.
    pub branches: Vec<Branch>,
    /// Switching attempts that produced no branch.
    pub failures: Vec<String>,
}

impl Diagram {
    /// The homogeneous branch followed by the rest in discovery order.
    pub fn all_branches(&self) -> impl Iterator<Item = &Branch> {
        std::iter::once(&self.homogeneous).chain(&self.branches)
    }

    /// Every event, ordered by parameter value and then branch id.
    pub fn events(&self) -> Vec<&Event> {
        let mut all: Vec<&Event> = self.all_branches().flat_map(|b| &b.events).collect();
        all.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.branch_id.cmp(&b.branch_id)));
        all
    }

    pub fn branch(&self, id: usize) -> Option<&Branch> {
        self.all_branches().find(|b| b.id == id)
    }

    /// Stable points with positive components on nontrivial branches.
    pub fn stable_patterns(&self) -> impl Iterator<Item = (&Branch, &BranchPoint)> {
        self.branches
            .iter()
            .flat_map(|b| b.stable_points().filter(|p| p.is_positive()).map(move |p| (b, p)))
    }
}

fn distance(a: &StateVector, b: &StateVector) -> f64 {
    sup_norm(&a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Same state as `b` or its mirror image.
fn same_up_to_reflection(a: &StateVector, b: &StateVector, tol: f64) -> bool {
    distance(a, b) <= tol || distance(&a.reflected(), b) <= tol
}

/// Does some branch other than `skip` already carry a branch point at this state?
fn known_crossing(branches: &[Branch], skip: usize, state: &StateVector) -> bool {
    let tol = 1e-2 * (1.0 + state.sup_norm());
    branches.iter().filter(|b| b.id != skip).any(|b| {
        b.events_of(EventKind::BranchPoint).any(|e| {
            (e.value - state.value).abs() <= 1e-5 * (1.0 + state.value.abs())
                && same_up_to_reflection(&e.state, state, tol)
        })
    })
}

/// Switches at `event` in both kernel directions. The `−` side is skipped when
/// its first point mirrors the `+` side, since the branch would just be the
/// reflection. Branch ids are assigned by the caller.
fn switch_both(
    p: &ModelParams,
    parent: &Branch,
    event: &Event,
    settings: &ContinuationSettings,
) -> (Vec<Branch>, Vec<String>) {
    let plus = switch_start(p, parent, event, 1.0, settings);
    let minus = switch_start(p, parent, event, -1.0, settings);
    let mirrored = match (&plus, &minus) {
        (Ok((_, a)), Ok((_, b))) => {
            let tol = 1e-3 * settings.switch_epsilon * (1.0 + a.state.sup_norm());
            distance(&a.state.reflected(), &b.state) <= tol
        }
        _ => false,
    };
    let mut found = Vec::new();
    let mut failures = Vec::new();
    for (side, start) in [("+", plus), ("-", minus)] {
        match start {
            Ok(_) if side == "-" && mirrored => {
                info!("{} = {:.6}: - side mirrors the + side", parent.param, event.value);
            }
            Ok((critical, first)) => found.push(grow_from(p, parent, event, critical, first, 0, settings)),
            Err(e) => failures.push(format!(
                "branch {} at {} = {}, {side} side: {e}",
                parent.id, parent.param, event.value
            )),
        }
    }
    if found.is_empty() {
        warn!("no branch found at {} = {}", parent.param, event.value);
    }
    (found, failures)
}

fn set_id(b: &mut Branch, id: usize) {
    b.id = id;
    b.events.iter_mut().for_each(|e| e.branch_id = id);
}

/// Does `b` start on one of `others` (up to reflection)?
fn retraces(b: &Branch, others: &[Branch], skip: usize, tol: f64) -> bool {
    let Some(first) = b.points.get(1) else {
        return false;
    };
    others.iter().filter(|o| o.id != skip).any(|other| {
        other.points.iter().any(|q| {
            (q.value() - first.value()).abs() <= tol && same_up_to_reflection(&q.state, &first.state, tol)
        })
    })
}

/// Homogeneous branch, primary branches at its first `max_primary` branch
/// points (by mode), and optionally secondary branches. Switches run in
/// parallel; ids follow the event order, so the result is deterministic.
pub fn compute_diagram(p: &ModelParams, settings: &DiagramSettings) -> Result<Diagram> {
    let base = settings.param.apply(p, settings.range.0);
    base.validate(settings.continuation.allow_negative_d)?;
    let grid = Grid::new(settings.nodes)?;
    let (lo, hi) = (settings.range.0.min(settings.range.1), settings.range.0.max(settings.range.1));
    if settings.param == ActiveParam::D && lo <= 0.0 && !settings.continuation.allow_negative_d {
        return Err(Error::domain("d range reaches zero; negative d needs the explicit flag"));
    }
    let cs = settings.continuation.with_range(lo, hi);
    let homogeneous = continue_homogeneous(p, grid, settings.param, (lo, hi), &cs);
    if homogeneous.points.is_empty() {
        return Err(Error::domain("no admissible coexistence state in the range"));
    }

    let mut primary: Vec<&Event> = homogeneous.events_of(EventKind::BranchPoint).collect();
    primary.sort_by_key(|e| e.mode_hint.unwrap_or(usize::MAX));
    primary.truncate(settings.max_primary);

    let mut branches: Vec<Branch> = Vec::new();
    let mut failures = Vec::new();
    let results: Vec<_> = primary.par_iter().map(|e| switch_both(p, &homogeneous, e, &cs)).collect();
    for (found, failed) in results {
        failures.extend(failed);
        for mut b in found {
            set_id(&mut b, branches.len() + 1);
            branches.push(b);
        }
    }

    if settings.depth >= 2 {
        let jobs: Vec<(usize, Event)> = branches
            .iter()
            .flat_map(|parent| {
                parent
                    .events_of(EventKind::BranchPoint)
                    .filter(|e| cs.in_range(e.value) && !known_crossing(&branches, parent.id, &e.state))
                    .take(settings.max_secondary_per_branch)
                    .map(|e| (parent.id, e.clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        let results: Vec<_> = jobs
            .par_iter()
            .map(|(pid, e)| (*pid, switch_both(p, &branches[pid - 1], e, &cs)))
            .collect();
        for (pid, (found, failed)) in results {
            failures.extend(failed);
            for mut b in found {
                // A secondary start that lies on a branch we already have
                // (other than its parent) retraces it.
                if retraces(&b, &branches, pid, 0.5 * cs.ds_max)
                    || known_crossing(&branches, pid, &b.points[0].state)
                {
                    info!("secondary branch from {pid} at {} retraces a known branch", b.points[0].value());
                    continue;
                }
                set_id(&mut b, branches.len() + 1);
                branches.push(b);
            }
        }
    }

    Ok(Diagram {
        base: p.clone(),
        param: settings.param,
        homogeneous,
        branches,
        failures,
    })
}

#[derive(Debug)]
pub struct SweepResult {
    pub value: f64,
    pub diagram: Result<Diagram>,
}

/// One diagram per value of `sweep_param`, computed in parallel; the result
/// order follows `values`.
pub fn sweep(
    p: &ModelParams,
    sweep_param: ActiveParam,
    values: &[f64],
    settings: &DiagramSettings,
) -> Vec<SweepResult> {
    values
        .par_iter()
        .map(|&value| {
            let q = sweep_param.apply(p, value);
            let diagram = compute_diagram(&q, settings);
            if let Err(e) = &diagram {
                warn!("{sweep_param} = {value}: {e}");
            }
            SweepResult { value, diagram }
        })
        .collect()
}

/// Diagram in the growth rate `r1` at fixed `d`.
pub fn continue_in_r1(
    p: &ModelParams,
    r1_range: (f64, f64),
    d_fixed: f64,
    settings: &DiagramSettings,
) -> Result<Diagram> {
    let q = p.clone().with_d(d_fixed);
    let s = DiagramSettings {
        param: ActiveParam::R1,
        range: r1_range,
        ..*settings
    };
    compute_diagram(&q, &s)
}
