//! Pseudo-arclength continuation of steady states with event detection and
//! branch switching.
//!
//! The homogeneous (coexistence) branch is known in closed form, so it is
//! traced analytically and its events come from sign changes of the 2×2 mode
//! determinants. Every other branch is followed numerically by
//! [`extend`], starting from a [`switch_branch`] at an event.

mod diagram;
mod extend;
mod homogeneous;
mod switch;

use std::fmt;

use crate::discretization::{l2_norm, ActiveParam, StateVector};
use crate::newton::NewtonSettings;
use crate::stability::SpectrumSummary;

pub use diagram::{compute_diagram, continue_in_r1, sweep, Diagram, DiagramSettings, SweepResult};
pub use extend::{extend, point_at, ExtendOutcome};
pub use homogeneous::{continue_homogeneous, homogeneous_stability_index};
pub use switch::{kernel_vector, switch_branch, switch_branch_signed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    BranchPoint,
    Fold,
    Hopf,
}

impl EventKind {
    /// Short tag used in the branch CSV `event_flag` column.
    pub fn code(self) -> &'static str {
        match self {
            EventKind::BranchPoint => "BP",
            EventKind::Fold => "FP",
            EventKind::Hopf => "HB",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        [EventKind::BranchPoint, EventKind::Fold, EventKind::Hopf]
            .into_iter()
            .find(|k| k.code() == s || k.to_string() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::BranchPoint => "BranchPoint",
            EventKind::Fold => "Fold",
            EventKind::Hopf => "Hopf",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Event {
    pub kind: EventKind,
    /// Localized value of the active parameter.
    pub value: f64,
    pub branch_id: usize,
    /// Mode `k` for primary branch points on the homogeneous branch.
    pub mode_hint: Option<usize>,
    /// Arclength stations bracketing the event.
    pub arclength_bracket: (f64, f64),
    /// Parameter values at those stations.
    pub param_bracket: (f64, f64),
    pub state: StateVector,
    /// Branch tangent at the event state, `(state, parameter)` parts.
    pub tangent: (Vec<f64>, f64),
}

/// One accepted continuation point.
#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub state: StateVector,
    pub norm_u: f64,
    pub norm_v: f64,
    pub u0: f64,
    pub v0: f64,
    pub stability_index: usize,
    /// Unstable eigenvalues with nonzero imaginary part.
    pub unstable_complex: usize,
    pub min_u: f64,
    pub min_v: f64,
    pub residual: f64,
    pub arclength: f64,
    pub tangent: Vec<f64>,
    pub tangent_param: f64,
    /// Sign of `det J` at the point, `0` when the factorization was singular.
    pub det_sign: f64,
    pub event: Option<EventKind>,
}

/// Positivity cutoff for the `positive` diagnostic.
pub const POSITIVITY_TOL: f64 = -1e-10;

impl BranchPoint {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        state: StateVector,
        stability_index: usize,
        unstable_complex: usize,
        residual: f64,
        arclength: f64,
        tangent: (Vec<f64>, f64),
        det_sign: f64,
    ) -> Self {
        let (norm_u, norm_v) = l2_norm(&state);
        BranchPoint {
            norm_u,
            norm_v,
            u0: state.u(0),
            v0: state.v(0),
            min_u: state.min_u(),
            min_v: state.min_v(),
            stability_index,
            unstable_complex,
            residual,
            arclength,
            tangent: tangent.0,
            tangent_param: tangent.1,
            det_sign,
            event: None,
            state,
        }
    }

    pub(crate) fn from_spectrum(
        state: StateVector,
        spectrum: &SpectrumSummary,
        residual: f64,
        arclength: f64,
        tangent: (Vec<f64>, f64),
        det_sign: f64,
    ) -> Self {
        Self::new(
            state,
            spectrum.unstable,
            spectrum.unstable_complex,
            residual,
            arclength,
            tangent,
            det_sign,
        )
    }

    pub fn value(&self) -> f64 {
        self.state.value
    }

    pub fn is_stable(&self) -> bool {
        self.stability_index == 0
    }

    /// `min u, min v ≥ −1e-10`.
    pub fn is_positive(&self) -> bool {
        self.min_u >= POSITIVITY_TOL && self.min_v >= POSITIVITY_TOL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Homogeneous,
    /// Switched at a branch point of the homogeneous branch.
    Primary { value: f64, mode: Option<usize> },
    /// Switched at an event of another nontrivial branch.
    Secondary { parent: usize, value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    /// Left the requested parameter range.
    LeftRange,
    MaxSteps,
    Stalled { ds_min: f64, value: f64 },
    /// Returned onto a spatially homogeneous state.
    Reconnected,
    /// Came back to its own first point (or its mirror image).
    ClosedLoop,
    /// Negative `d` without the explicit flag, or loss of ellipticity.
    NegativeD,
    LostEllipticity,
    /// Homogeneous branch stopped where the coexistence state stops being admissible.
    Inadmissible { value: f64 },
    Completed,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub id: usize,
    pub param: ActiveParam,
    pub provenance: Provenance,
    pub points: Vec<BranchPoint>,
    pub events: Vec<Event>,
    pub stop: StopReason,
}

impl Branch {
    pub fn last(&self) -> &BranchPoint {
        self.points.last().expect("branch has points")
    }

    pub fn stable_points(&self) -> impl Iterator<Item = &BranchPoint> {
        self.points.iter().filter(|p| p.is_stable())
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn param_range(&self) -> (f64, f64) {
        self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.value()), hi.max(p.value()))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationSettings {
    pub newton: NewtonSettings,
    /// Initial, minimum and maximum scaled arclength step.
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub grow: f64,
    /// Consecutive successes before the step grows.
    pub grow_after: usize,
    pub max_steps: usize,
    /// Continuation stops once the active parameter leaves this interval.
    pub param_min: f64,
    pub param_max: f64,
    /// Tangent parameter components below this count as zero for fold tests.
    pub fold_threshold: f64,
    /// Bisection tolerance on the parameter for branch points and folds.
    pub event_tol: f64,
    /// Bisection tolerance for Hopf points, which need a spectrum per step.
    pub hopf_tol: f64,
    pub detect_hopf: bool,
    pub allow_negative_d: bool,
    /// Switching offset relative to the RMS size of the critical state.
    pub switch_epsilon: f64,
    /// Stations for the analytic homogeneous branch.
    pub homogeneous_stations: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            newton: NewtonSettings::default(),
            ds0: 1e-2,
            ds_min: 1e-5,
            ds_max: 5e-2,
            grow: 1.3,
            grow_after: 3,
            max_steps: 600,
            param_min: f64::NEG_INFINITY,
            param_max: f64::INFINITY,
            fold_threshold: 1e-6,
            event_tol: 1e-10,
            hopf_tol: 1e-7,
            detect_hopf: true,
            allow_negative_d: false,
            switch_epsilon: 1e-2,
            homogeneous_stations: 400,
        }
    }
}

impl ContinuationSettings {
    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.param_min = lo;
        self.param_max = hi;
        self
    }

    pub(crate) fn in_range(&self, value: f64) -> bool {
        value >= self.param_min && value <= self.param_max
    }
}

/// `max_i |u_i − u_0| + |v_i − v_0|`.
pub fn spatial_variation(s: &StateVector) -> f64 {
    let (u0, v0) = (s.u(0), s.v(0));
    (0..s.nodes())
        .map(|i| (s.u(i) - u0).abs() + (s.v(i) - v0).abs())
        .fold(0.0, f64::max)
}
