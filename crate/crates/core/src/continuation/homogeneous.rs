use log::warn;

use super::{Branch, BranchPoint, ContinuationSettings, Event, EventKind, Provenance, StopReason};
use crate::discretization::{diffusion_matrix, ActiveParam, Grid, StateVector};
use crate::linear_analysis::discrete_eigenvalue;
use crate::model::{coexistence_state, reaction_jacobian, ModelParams};
use crate::newton::scaled_norm;
use crate::stability::ZERO_THRESHOLD;

/// `J − λ D` at a homogeneous state, row-major.
fn mode_matrix(q: &ModelParams, u: f64, v: f64, lambda: f64) -> [[f64; 2]; 2] {
    let j = reaction_jacobian(q, u, v);
    let d = diffusion_matrix(q, u, v);
    let mut m = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = j[r][c] - lambda * d[r][c];
        }
    }
    m
}

fn det(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn trace(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] + m[1][1]
}

/// `(unstable, unstable complex)` eigenvalue counts of a 2×2 block.
fn block_counts(m: &[[f64; 2]; 2]) -> (usize, usize) {
    let (t, d) = (trace(m), det(m));
    let disc = t * t - 4.0 * d;
    if disc < 0.0 {
        if 0.5 * t > ZERO_THRESHOLD {
            (2, 2)
        } else {
            (0, 0)
        }
    } else {
        let s = disc.sqrt();
        let hi = 0.5 * (t + s);
        let lo = if hi != 0.0 { d / hi } else { 0.5 * (t - s) };
        let n = [hi, lo].iter().filter(|x| **x > ZERO_THRESHOLD).count();
        (n, 0)
    }
}

/// Unstable eigenvalue counts of the discrete linearization at the homogeneous
/// state `(u, v)`, from its block diagonalization over the cosine modes.
pub fn homogeneous_stability_index(q: &ModelParams, u: f64, v: f64, grid: Grid) -> (usize, usize) {
    (0..grid.nodes()).fold((0, 0), |(a, b), k| {
        let (x, y) = block_counts(&mode_matrix(q, u, v, discrete_eigenvalue(k, grid.h())));
        (a + x, b + y)
    })
}

fn coexistence_at(p: &ModelParams, param: ActiveParam, value: f64) -> Option<(f64, f64)> {
    let q = param.apply(p, value);
    coexistence_state(&q).admissible().map(|e| (e.u, e.v))
}

/// Unit tangent of the homogeneous branch in the scaled inner product.
fn analytic_tangent(p: &ModelParams, param: ActiveParam, value: f64, grid: Grid) -> (Vec<f64>, f64) {
    let h = 1e-6 * (1.0 + value.abs());
    let (du, dv) = match (coexistence_at(p, param, value + h), coexistence_at(p, param, value - h)) {
        (Some(a), Some(b)) => ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h)),
        _ => (0.0, 0.0),
    };
    let raw: Vec<f64> = (0..grid.nodes()).flat_map(|_| [du, dv]).collect();
    let n = scaled_norm(&raw, 1.0);
    (raw.iter().map(|x| x / n).collect(), 1.0 / n)
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The coexistence branch over `range`, with branch points where a mode
/// determinant changes sign and Hopf points where a mode trace does (with
/// positive determinant). Stations are equally spaced; events are bisected to
/// `settings.event_tol`.
pub fn continue_homogeneous(
    p: &ModelParams,
    grid: Grid,
    param: ActiveParam,
    range: (f64, f64),
    settings: &ContinuationSettings,
) -> Branch {
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let stations = settings.homogeneous_stations.max(2);
    let mut values: Vec<f64> = (0..=stations)
        .map(|j| lo + (hi - lo) * j as f64 / stations as f64)
        .collect();
    values.dedup();

    // Longest admissible prefix after skipping an inadmissible start.
    let mut admissible = Vec::new();
    let mut stop = StopReason::Completed;
    for &x in &values {
        match coexistence_at(p, param, x) {
            Some(_) => admissible.push(x),
            None if admissible.is_empty() => continue,
            None => {
                warn!("coexistence state inadmissible at {param} = {x}; homogeneous branch truncated");
                stop = StopReason::Inadmissible { value: x };
                break;
            }
        }
    }
    if admissible.is_empty() {
        warn!("coexistence state inadmissible on the whole range");
        return Branch {
            id: 0,
            param,
            provenance: Provenance::Homogeneous,
            points: Vec::new(),
            events: Vec::new(),
            stop: StopReason::Inadmissible { value: lo },
        };
    }

    let lambdas: Vec<f64> = (0..grid.nodes()).map(|k| discrete_eigenvalue(k, grid.h())).collect();
    let mode_at = |x: f64, k: usize| {
        let q = param.apply(p, x);
        let (u, v) = coexistence_at(p, param, x).unwrap_or((f64::NAN, f64::NAN));
        mode_matrix(&q, u, v, lambdas[k])
    };

    let mut found: Vec<(f64, EventKind, usize, (f64, f64))> = Vec::new();
    for pair in admissible.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for k in 1..grid.nodes() {
            let (ma, mb) = (mode_at(a, k), mode_at(b, k));
            if det(&ma) * det(&mb) < 0.0 {
                let x = bisect(a, b, settings.event_tol, |x| det(&mode_at(x, k)));
                found.push((x, EventKind::BranchPoint, k, (a, b)));
            } else if det(&ma) > 0.0 && det(&mb) > 0.0 && trace(&ma) * trace(&mb) < 0.0 {
                let x = bisect(a, b, settings.event_tol, |x| trace(&mode_at(x, k)));
                found.push((x, EventKind::Hopf, k, (a, b)));
            }
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));

    let point_at = |x: f64| {
        let (u, v) = coexistence_at(p, param, x).expect("admissible station");
        let q = param.apply(p, x);
        let state = StateVector::constant(grid, u, v, param, x);
        let (unstable, complex) = homogeneous_stability_index(&q, u, v, grid);
        let det_sign = lambdas.iter().fold(1.0, |s, &l| s * det(&mode_matrix(&q, u, v, l)).signum());
        BranchPoint::new(state, unstable, complex, 0.0, 0.0, analytic_tangent(p, param, x, grid), det_sign)
    };

    let mut points: Vec<BranchPoint> = admissible.iter().map(|&x| point_at(x)).collect();
    let mut events = Vec::new();
    for &(x, kind, k, bracket) in &found {
        let mut pt = point_at(x);
        pt.event = Some(kind);
        events.push(Event {
            kind,
            value: x,
            branch_id: 0,
            mode_hint: Some(k),
            arclength_bracket: (0.0, 0.0),
            param_bracket: bracket,
            state: pt.state.clone(),
            tangent: (pt.tangent.clone(), pt.tangent_param),
        });
        points.push(pt);
    }
    points.sort_by(|a, b| a.value().total_cmp(&b.value()));

    // Scaled arclength: every node moves by the same (du, dv).
    let mut s = 0.0;
    for i in 1..points.len() {
        let dp = points[i].value() - points[i - 1].value();
        let du = points[i].state.u(0) - points[i - 1].state.u(0);
        let dv = points[i].state.v(0) - points[i - 1].state.v(0);
        s += (dp * dp + 0.5 * (du * du + dv * dv)).sqrt();
        points[i].arclength = s;
    }
    for e in &mut events {
        let at = |x: f64| {
            points
                .iter()
                .find(|p| p.value() >= x)
                .map_or(s, |p| p.arclength)
        };
        e.arclength_bracket = (at(e.param_bracket.0), at(e.param_bracket.1));
    }

    Branch {
        id: 0,
        param,
        provenance: Provenance::Homogeneous,
        points,
        events,
        stop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_analysis::{self_diffusion_polynomial, EigenFamily};
    use crate::model::preset;

    #[test]
    fn events_of_preset_one_match_discrete_roots() {
        let p = preset(1).unwrap().to_f64();
        let g = Grid::new(201).unwrap();
        let b = continue_homogeneous(&p, g, ActiveParam::D, (0.005, 0.05), &ContinuationSettings::default());
        let bps: Vec<&Event> = b.events_of(EventKind::BranchPoint).collect();
        assert_eq!(bps.len(), 4);
        let expected = [0.0070, 0.0113, 0.0205, 0.0328];
        for (e, want) in bps.iter().zip(expected) {
            assert!((e.value - want).abs() < 2e-4, "{} vs {want}", e.value);
            let k = e.mode_hint.unwrap();
            let r = self_diffusion_polynomial(&p.clone().with_d(e.value), k, EigenFamily::Discrete { nodes: 201 })
                .unwrap();
            assert!((r.d_bif.unwrap() - e.value).abs() < 1e-8);
        }
        assert_eq!(b.points.first().unwrap().stability_index, 4);
        assert_eq!(b.last().stability_index, 0);
    }

    #[test]
    fn zero_beta_keeps_the_modes_but_moves_the_values() {
        let g = Grid::new(101).unwrap();
        let events = |d21: f64| {
            let mut p = preset(2).unwrap().to_f64();
            p.d21 = d21;
            let b = continue_homogeneous(&p, g, ActiveParam::D, (1e-6, 1.0), &ContinuationSettings::default());
            b.events_of(EventKind::BranchPoint).map(|e| (e.mode_hint.unwrap(), e.value)).collect::<Vec<_>>()
        };
        let base = events(0.0);
        assert!(!base.is_empty());
        for d21 in [3.0, 6.0] {
            let other = events(d21);
            let modes = |v: &[(usize, f64)]| {
                let mut m: Vec<usize> = v.iter().map(|e| e.0).collect();
                m.sort();
                m
            };
            assert_eq!(modes(&base), modes(&other));
            let k1 = |v: &[(usize, f64)]| v.iter().find(|e| e.0 == 1).unwrap().1;
            assert!(k1(&other) < k1(&base));
        }
    }

    #[test]
    fn case_2w_has_no_events() {
        // r1/r2 between the harmonic and arithmetic means of b1/a2 and a1/b2.
        let mut p = preset(1).unwrap().to_f64();
        p.r1 = 2.0;
        p.r2 = 2.0;
        let g = Grid::new(101).unwrap();
        let b = continue_homogeneous(&p, g, ActiveParam::D, (0.001, 0.1), &ContinuationSettings::default());
        assert!(b.events.is_empty());
        assert!(b.points.iter().all(|pt| pt.stability_index == 0));
    }

    #[test]
    fn r1_branch_is_truncated_at_admissibility() {
        let p = preset(1).unwrap().to_f64().with_d(0.005);
        let g = Grid::new(51).unwrap();
        let b = continue_homogeneous(&p, g, ActiveParam::R1, (2.0, 7.5), &ContinuationSettings::default());
        assert!(matches!(b.stop, StopReason::Inadmissible { value } if value > 6.0 && value < 6.02));
        assert!(b.last().value() < 6.0);
    }
}
