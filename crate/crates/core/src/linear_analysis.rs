//! Mode-by-mode linearization around the coexistence state.
//!
//! For the Neumann Laplacian eigenvalue `λ_k` the characteristic matrix
//! `J* − λ_k J_Δ*` has determinant `P_k(d) = A_k d² + B_k d + C_k` when
//! `d1 = d2 = d`. Since the trace is negative in both competition regimes, the
//! k-th mode destabilizes exactly where `P_k` changes sign.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{coexistence_data, CoexistenceData, ModelParams, Params, Scalar};

/// Which Laplacian spectrum `λ_k` is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenFamily {
    /// `(kπ)²` on the unit interval.
    Continuous,
    /// `(2/h²)(1 − cos(kπh))`, the mirrored-ghost finite-difference Laplacian on
    /// `nodes` points.
    Discrete { nodes: usize },
}

pub fn eigenvalue(k: usize, family: EigenFamily) -> Result<f64> {
    match family {
        EigenFamily::Continuous => Ok((k as f64 * PI).powi(2)),
        EigenFamily::Discrete { nodes } => {
            if nodes < 3 {
                return Err(Error::Grid(format!("need at least 3 nodes, got {nodes}")));
            }
            if k > nodes - 1 {
                return Err(Error::domain(format!(
                    "mode {k} exceeds the {} modes of a {nodes}-node grid",
                    nodes
                )));
            }
            let h = 1.0 / (nodes - 1) as f64;
            Ok(discrete_eigenvalue(k, h))
        }
    }
}

/// `(2/h²)(1 − cos(kπh))`, written as `(4/h²) sin²(kπh/2)` to avoid cancellation.
pub fn discrete_eigenvalue(k: usize, h: f64) -> f64 {
    let s = (0.5 * k as f64 * PI * h).sin();
    4.0 * s * s / (h * h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeReport {
    pub k: usize,
    pub family: EigenFamily,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub bifurcates: bool,
    pub d_bif: Option<f64>,
    pub d_bif_limit: Option<f64>,
}

impl ModeReport {
    pub fn eval(&self, d: f64) -> f64 {
        (self.a * d + self.b) * d + self.c
    }

    /// Real roots of the mode polynomial in ascending order.
    pub fn roots(&self) -> Vec<f64> {
        quadratic_roots(self.a, self.b, self.c)
    }
}

/// Real roots of `a x² + b x + c`, ascending. The larger-magnitude root is
/// formed first and the other recovered from the product `c/a`.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    let mut r = vec![q / a, c / q];
    r.sort_by(f64::total_cmp);
    r
}

fn positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    quadratic_roots(a, b, c).into_iter().rev().find(|&r| r > 0.0)
}

fn report_from(k: usize, family: EigenFamily, lambda: f64, a: f64, b: f64, c: f64) -> ModeReport {
    let bifurcates = k >= 1 && c < 0.0;
    ModeReport {
        k,
        family,
        lambda,
        a,
        b,
        c,
        bifurcates,
        d_bif: if bifurcates { positive_root(a, b, c) } else { None },
        d_bif_limit: None,
    }
}

/// Mode polynomial without self-diffusion (`d11`, `d22` are ignored).
pub fn mode_polynomial(p: &ModelParams, k: usize, family: EigenFamily) -> Result<ModeReport> {
    let data = coexistence_data(p)?;
    let lambda = eigenvalue(k, family)?;
    if k == 0 {
        return Ok(report_from(0, family, 0.0, 0.0, 0.0, data.det_j));
    }
    let a = lambda * lambda;
    let b = (p.d12 * data.v + p.d21 * data.u) * lambda * lambda - data.tr_j * lambda;
    let c = -p.d12 * data.alpha * lambda - p.d21 * data.beta * lambda + data.det_j;
    Ok(report_from(k, family, lambda, a, b, c))
}

/// Mode polynomial including the self-diffusion terms.
pub fn self_diffusion_polynomial(
    p: &ModelParams,
    k: usize,
    family: EigenFamily,
) -> Result<ModeReport> {
    let data = coexistence_data(p)?;
    let lambda = eigenvalue(k, family)?;
    if k == 0 {
        return Ok(report_from(0, family, 0.0, 0.0, 0.0, data.det_j));
    }
    Ok(self_diffusion_report(p, &data, k, family, lambda))
}

fn self_diffusion_report(
    p: &ModelParams,
    data: &CoexistenceData<f64>,
    k: usize,
    family: EigenFamily,
    lambda: f64,
) -> ModeReport {
    let (u, v) = (data.u, data.v);
    let l2 = lambda * lambda;
    let a = l2;
    let b = 2.0 * (p.d11 * u + p.d22 * v) * l2 + (p.d12 * v + p.d21 * u) * l2 - data.tr_j * lambda;
    let c = -p.d12 * (data.alpha - 2.0 * p.d22 * v * v * lambda) * lambda
        - p.d21 * (data.beta - 2.0 * p.d11 * u * u * lambda) * lambda
        + 2.0 * u * v * lambda * ((p.d11 * p.a2 + p.d22 * p.a1) + 2.0 * p.d11 * p.d22 * lambda)
        + data.det_j;
    report_from(k, family, lambda, a, b, c)
}

/// Mode reports for `k_min..=k_max` including self-diffusion.
pub fn mode_table(
    p: &ModelParams,
    k_min: usize,
    k_max: usize,
    family: EigenFamily,
) -> Result<Vec<ModeReport>> {
    (k_min..=k_max)
        .map(|k| self_diffusion_polynomial(p, k, family))
        .collect()
}

/// Threshold in `d21` beyond which mode `k` no longer bifurcates (β < 0).
#[derive(Clone, Debug, PartialEq)]
pub struct D21Threshold {
    pub k: usize,
    pub threshold: f64,
    /// `α d12 / |β|`: no mode bifurcates beyond this value.
    pub global_cutoff: f64,
}

pub fn d21_disappearance_threshold(
    p: &ModelParams,
    k: usize,
    family: EigenFamily,
) -> Result<D21Threshold> {
    let data = coexistence_data(p)?;
    if data.beta >= 0.0 {
        return Err(Error::domain(format!(
            "d21 threshold needs beta < 0, got {}",
            data.beta
        )));
    }
    if k == 0 {
        return Err(Error::domain("mode 0 never bifurcates"));
    }
    let lambda = eigenvalue(k, family)?;
    let drive = data.alpha * p.d12;
    if drive <= data.det_j / lambda {
        return Err(Error::domain(format!(
            "mode {k} does not bifurcate even at d21 = 0 (alpha d12 = {drive} <= det J/lambda = {})",
            data.det_j / lambda
        )));
    }
    let inv_beta = 1.0 / data.beta.abs();
    Ok(D21Threshold {
        k,
        threshold: inv_beta * (drive - data.det_j / lambda),
        global_cutoff: inv_beta * drive,
    })
}

/// Which cross-diffusion coefficient is sent to infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Varied {
    D12,
    D21,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitValue {
    pub value: f64,
    /// The governing quantity vanishes: all bifurcation points collapse to 0.
    pub collapses: bool,
}

pub fn d_bif_limit(
    p: &ModelParams,
    k: usize,
    family: EigenFamily,
    varied: Varied,
) -> Result<LimitValue> {
    let data = coexistence_data(p)?;
    if k == 0 {
        return Err(Error::domain("mode 0 never bifurcates"));
    }
    let lambda = eigenvalue(k, family)?;
    let (quantity, density, name) = match varied {
        Varied::D21 => (data.beta, data.u, "beta"),
        Varied::D12 => (data.alpha, data.v, "alpha"),
    };
    if quantity == 0.0 {
        return Ok(LimitValue {
            value: 0.0,
            collapses: true,
        });
    }
    if quantity < 0.0 {
        return Err(Error::domain(format!(
            "limit needs {name} > 0, got {quantity}"
        )));
    }
    Ok(LimitValue {
        value: quantity / (density * lambda),
        collapses: false,
    })
}

/// Hypotheses and consequences of the large-equal-cross-diffusion result.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremCheck<T> {
    /// `b1 b2 < a1 a2`.
    pub cond_det_j: bool,
    /// `(b1 + b2)² > 4 a1 a2`.
    pub cond_disc: bool,
    /// The prescribed ratio `r1/r2`, where the quadratic `Q` peaks.
    pub r_star: Option<T>,
    pub q_at_rstar: Option<T>,
    /// `α + β` with `r1 = r_star · r2` (r2 taken from the input).
    pub alpha_plus_beta: Option<T>,
    /// `det J* / (α + β)`; dividing by `λ_k` gives the per-mode threshold.
    pub threshold_times_lambda: Option<T>,
    /// `det J* / ((α + β) λ_k)` for the continuous `λ_k`, `k = 1..`.
    pub d_cross_threshold: Vec<f64>,
}

/// The quadratic `Q(r)` whose sign is that of `α + β` at `r1/r2 = r`.
pub fn large_cross_quadratic<T: Scalar>(p: &Params<T>, r: &T) -> T {
    let a = p.a1.clone() * p.a2.clone();
    let b = p.b1.clone() * p.b2.clone();
    let two = T::one() + T::one();
    let three = two.clone() + T::one();
    let lead = p.a2.clone() * (a.clone() + b.clone() + two.clone() * p.b2.clone() * p.b2.clone());
    let mid = (p.b1.clone() + p.b2.clone()) * (three * a.clone() + b.clone());
    let tail = p.a1.clone() * (a + b + two * p.b1.clone() * p.b1.clone());
    -(lead * r.clone() * r.clone()) + mid * r.clone() - tail
}

pub fn theorem_large_cross<T: Scalar>(p: &Params<T>, modes: usize) -> Result<TheoremCheck<T>> {
    let positive = [&p.a1, &p.a2, &p.b1, &p.b2];
    if positive.iter().any(|x| !x.is_positive()) {
        return Err(Error::domain("a_i and b_i must be positive"));
    }
    let two = T::one() + T::one();
    let three = two.clone() + T::one();
    let four = two.clone() + two.clone();
    let a = p.a1.clone() * p.a2.clone();
    let b = p.b1.clone() * p.b2.clone();
    let bsum = p.b1.clone() + p.b2.clone();
    let cond_det_j = b.compare(&a).is_lt();
    let cond_disc = (bsum.clone() * bsum.clone()).compare(&(four * a.clone())).is_gt();

    let denom = two * p.a2.clone() * (a.clone() + b.clone() + (p.b2.clone() * p.b2.clone() * (T::one() + T::one())));
    let r_star = bsum * (three * a + b) / denom;
    let q = large_cross_quadratic(p, &r_star);

    let mut at_star = p.clone();
    at_star.r1 = r_star.clone() * p.r2.clone();
    let data = coexistence_data(&at_star).ok();
    let alpha_plus_beta = data.as_ref().map(|d| d.alpha.clone() + d.beta.clone());

    let mut check = TheoremCheck {
        cond_det_j,
        cond_disc,
        r_star: Some(r_star),
        q_at_rstar: Some(q),
        alpha_plus_beta: alpha_plus_beta.clone(),
        threshold_times_lambda: None,
        d_cross_threshold: Vec::new(),
    };
    if cond_det_j && cond_disc {
        if let (Some(d), Some(apb)) = (data, alpha_plus_beta) {
            if apb.is_positive() {
                let scaled = d.det_j / apb;
                let s = scaled.to_f64();
                check.d_cross_threshold = (1..=modes)
                    .map(|k| s / eigenvalue(k, EigenFamily::Continuous).unwrap())
                    .collect();
                check.threshold_times_lambda = Some(scaled);
            }
        }
    }
    Ok(check)
}

/// `λ_k` beyond which no mode bifurcates once self-diffusion is present, or
/// `None` when the bound is infinite.
pub fn self_diffusion_mode_bound(p: &ModelParams) -> Result<Option<f64>> {
    let data = coexistence_data(p)?;
    let term = |quantity: f64, coef: f64, density: f64| {
        if coef > 0.0 {
            quantity / (2.0 * coef * density * density)
        } else if quantity <= 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    };
    let bound = term(data.beta, p.d11, data.u).max(term(data.alpha, p.d22, data.v));
    Ok(bound.is_finite().then_some(bound))
}

/// `(d_s, p_s)` with `P̃_k(d) = P_k(d − d_s) + p_s` for every `d`.
pub fn shifted_polynomial_decomposition(
    p: &ModelParams,
    k: usize,
    family: EigenFamily,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Ok((0.0, 0.0));
    }
    let plain = mode_polynomial(p, k, family)?;
    let full = self_diffusion_polynomial(p, k, family)?;
    let shift = (plain.b - full.b) / (2.0 * plain.a);
    let offset = full.c - plain.eval(-shift);
    Ok((shift, offset))
}

/// Plain-text rendering of a mode table.
pub fn render_mode_table(reports: &[ModeReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>14} {:>14} {:>14} {:>14} {:>4} {:>12} {:>12}",
        "k", "lambda", "A", "B", "C", "bif", "d_bif", "d_bif_limit"
    );
    let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    for r in reports {
        let _ = writeln!(
            out,
            "{:>4} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>4} {:>12} {:>12}",
            r.k,
            r.lambda,
            r.a,
            r.b,
            r.c,
            if r.bifurcates { "yes" } else { "no" },
            opt(r.d_bif),
            opt(r.d_bif_limit)
        );
    }
    out
}

/// CSV rendering; columns `k,lambda,A,B,C,bifurcates,d_bif,d_bif_limit`.
pub fn mode_table_csv(reports: &[ModeReport]) -> String {
    let mut out = String::from("k,lambda,A,B,C,bifurcates,d_bif,d_bif_limit\n");
    let opt = |x: Option<f64>| x.map_or_else(String::new, |x| x.to_string());
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.lambda,
            r.a,
            r.b,
            r.c,
            r.bifurcates,
            opt(r.d_bif),
            opt(r.d_bif_limit)
        );
    }
    out
}
