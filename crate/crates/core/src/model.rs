//! SKT competition parameters, homogeneous equilibria and regime classification.
//!
//! Everything here is generic over [`Scalar`], so the same formulas run either in
//! floating point (with a relative comparison tolerance of `1e-12`) or in exact
//! rational arithmetic through [`ExactParams`]. Case boundaries are sharp, so the
//! presets are defined as rationals and classified exactly.

use std::cmp::Ordering;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Relative tolerance used by floating-point comparisons.
pub const FLOAT_REL_TOL: f64 = 1e-12;

/// Number type the model formulas are written against.
pub trait Scalar: Clone + PartialOrd + Num + Signed + fmt::Debug + fmt::Display {
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Three-way comparison; approximate for floats, exact for rationals.
    fn compare(&self, other: &Self) -> Ordering;

    fn sign(&self) -> Ordering {
        self.compare(&Self::zero())
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn compare(&self, other: &Self) -> Ordering {
        let scale = self.abs().max(other.abs());
        if (self - other).abs() <= FLOAT_REL_TOL * scale {
            Ordering::Equal
        } else if self < other {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn compare(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

/// Builds the exact rational `num/den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// The twelve coefficients of the SKT system.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub r1: T,
    pub r2: T,
    pub a1: T,
    pub a2: T,
    pub b1: T,
    pub b2: T,
    pub d1: T,
    pub d2: T,
    pub d11: T,
    pub d22: T,
    pub d12: T,
    pub d21: T,
}

pub type ModelParams = Params<f64>;
pub type ExactParams = Params<BigRational>;

impl<T: Scalar> Params<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Params<U> {
        Params {
            r1: f(&self.r1),
            r2: f(&self.r2),
            a1: f(&self.a1),
            a2: f(&self.a2),
            b1: f(&self.b1),
            b2: f(&self.b2),
            d1: f(&self.d1),
            d2: f(&self.d2),
            d11: f(&self.d11),
            d22: f(&self.d22),
            d12: f(&self.d12),
            d21: f(&self.d21),
        }
    }

    pub fn to_f64(&self) -> ModelParams {
        self.map(Scalar::to_f64)
    }

    /// Sets `d1 = d2 = d`.
    pub fn with_d(mut self, d: T) -> Self {
        self.d1 = d.clone();
        self.d2 = d;
        self
    }

    pub fn with_cross(mut self, d12: T, d21: T) -> Self {
        self.d12 = d12;
        self.d21 = d21;
        self
    }

    pub fn with_self(mut self, d11: T, d22: T) -> Self {
        self.d11 = d11;
        self.d22 = d22;
        self
    }

    /// Checks the sign constraints. `allow_negative_d` lifts `d1, d2 > 0`.
    pub fn validate(&self, allow_negative_d: bool) -> Result<()> {
        let nonneg = [
            ("r1", &self.r1),
            ("r2", &self.r2),
            ("a1", &self.a1),
            ("a2", &self.a2),
            ("b1", &self.b1),
            ("b2", &self.b2),
            ("d11", &self.d11),
            ("d22", &self.d22),
            ("d12", &self.d12),
            ("d21", &self.d21),
        ];
        for (name, value) in nonneg {
            if value.is_negative() {
                return Err(Error::domain(format!("{name} must be non-negative, got {value}")));
            }
        }
        if !allow_negative_d {
            for (name, value) in [("d1", &self.d1), ("d2", &self.d2)] {
                if !value.is_positive() {
                    return Err(Error::domain(format!(
                        "{name} must be positive (use the negative-d flag to override), got {value}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl ModelParams {
    pub fn to_exact(&self) -> ExactParams {
        self.map(|x| <BigRational as Scalar>::from_f64(*x))
    }
}

/// Bundled reaction parameter sets; index 1..=4.
///
/// Diffusion coefficients default to `d = 0.05`, no self-diffusion, and the
/// cross-diffusion values used with each set in the bifurcation studies.
pub fn preset(index: u8) -> Option<ExactParams> {
    let int = |x: i64| ratio(x, 1);
    let zero = || BigRational::zero();
    let base = |r1, r2, a1, a2, b1, b2, d12, d21| Params {
        r1,
        r2,
        a1,
        a2,
        b1,
        b2,
        d1: ratio(1, 20),
        d2: ratio(1, 20),
        d11: zero(),
        d22: zero(),
        d12,
        d21,
    };
    Some(match index {
        1 => base(int(5), int(2), int(3), int(3), int(1), int(1), int(3), zero()),
        2 => base(int(2), int(5), int(1), int(1), ratio(1, 2), int(3), int(3), zero()),
        3 => base(ratio(15, 2), ratio(16, 7), int(4), int(2), int(6), int(1), int(100), int(100)),
        4 => base(int(5), int(5), int(2), int(3), int(5), int(4), int(3), zero()),
        _ => return None,
    })
}

/// A homogeneous state `(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium<T> {
    pub u: T,
    pub v: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coexistence<T> {
    /// `a1 a2 = b1 b2`: the linear system for the coexistence state is singular.
    Undefined,
    Defined { state: Equilibrium<T>, admissible: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousEquilibria<T> {
    pub extinction: Equilibrium<T>,
    pub exclusion_u: Equilibrium<T>,
    pub exclusion_v: Equilibrium<T>,
    pub coexistence: Coexistence<T>,
}

impl<T: Scalar> HomogeneousEquilibria<T> {
    /// The coexistence state when it is both defined and strictly positive.
    pub fn admissible(&self) -> Option<&Equilibrium<T>> {
        match &self.coexistence {
            Coexistence::Defined { state, admissible: true } => Some(state),
            _ => None,
        }
    }
}

fn safe_div<T: Scalar>(num: T, den: &T) -> T {
    if den.is_zero() {
        T::zero()
    } else {
        num / den.clone()
    }
}

pub fn coexistence_state<T: Scalar>(p: &Params<T>) -> HomogeneousEquilibria<T> {
    let intra = p.a1.clone() * p.a2.clone();
    let cross = p.b1.clone() * p.b2.clone();
    let coexistence = if intra.compare(&cross) == Ordering::Equal {
        Coexistence::Undefined
    } else {
        let det = intra - cross;
        let u = (p.r1.clone() * p.a2.clone() - p.r2.clone() * p.b1.clone()) / det.clone();
        let v = (p.r2.clone() * p.a1.clone() - p.r1.clone() * p.b2.clone()) / det;
        // Sign tests go through the products so that boundary hits stay exact.
        let u_sign = (p.r1.clone() * p.a2.clone()).compare(&(p.r2.clone() * p.b1.clone()));
        let v_sign = (p.r2.clone() * p.a1.clone()).compare(&(p.r1.clone() * p.b2.clone()));
        let det_sign = (p.a1.clone() * p.a2.clone()).compare(&(p.b1.clone() * p.b2.clone()));
        let admissible = u_sign != Ordering::Equal
            && v_sign != Ordering::Equal
            && u_sign == det_sign
            && v_sign == det_sign;
        Coexistence::Defined {
            state: Equilibrium { u, v },
            admissible,
        }
    };
    HomogeneousEquilibria {
        extinction: Equilibrium {
            u: T::zero(),
            v: T::zero(),
        },
        exclusion_u: Equilibrium {
            u: safe_div(p.r1.clone(), &p.a1),
            v: T::zero(),
        },
        exclusion_v: Equilibrium {
            u: T::zero(),
            v: safe_div(p.r2.clone(), &p.a2),
        },
        coexistence,
    }
}

/// Reaction Jacobian `J*`, its trace/determinant and the quantities α, β at the
/// coexistence state.
#[derive(Clone, Debug, PartialEq)]
pub struct CoexistenceData<T> {
    pub u: T,
    pub v: T,
    pub alpha: T,
    pub beta: T,
    pub det_j: T,
    pub tr_j: T,
}

fn coexistence_data_at<T: Scalar>(p: &Params<T>, u: T, v: T) -> CoexistenceData<T> {
    let alpha = (p.b2.clone() * u.clone() - p.a2.clone() * v.clone()) * v.clone();
    let beta = (p.b1.clone() * v.clone() - p.a1.clone() * u.clone()) * u.clone();
    let det_j =
        (p.a1.clone() * p.a2.clone() - p.b1.clone() * p.b2.clone()) * u.clone() * v.clone();
    let tr_j = -(p.a1.clone() * u.clone()) - p.a2.clone() * v.clone();
    CoexistenceData {
        u,
        v,
        alpha,
        beta,
        det_j,
        tr_j,
    }
}

/// α, β and `J*` data; refuses when the coexistence state is not admissible.
pub fn coexistence_data<T: Scalar>(p: &Params<T>) -> Result<CoexistenceData<T>> {
    let eq = coexistence_state(p);
    let state = eq
        .admissible()
        .ok_or_else(|| Error::domain("coexistence state is not admissible"))?;
    Ok(coexistence_data_at(p, state.u.clone(), state.v.clone()))
}

pub fn alpha_beta<T: Scalar>(p: &Params<T>) -> Result<(T, T)> {
    let data = coexistence_data(p)?;
    Ok((data.alpha, data.beta))
}

/// Reaction Jacobian at an arbitrary homogeneous state, row-major.
pub fn reaction_jacobian(p: &ModelParams, u: f64, v: f64) -> [[f64; 2]; 2] {
    [
        [p.r1 - 2.0 * p.a1 * u - p.b1 * v, -p.b1 * u],
        [-p.b2 * v, p.r2 - p.b2 * u - 2.0 * p.a2 * v],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Weak,
    Strong,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseTag {
    W1,
    W2,
    W3,
    S1,
    S2,
    S3,
    Boundary,
    NotApplicable,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Weak => "weak",
            Regime::Strong => "strong",
            Regime::None => "none",
        })
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseTag::W1 => "1w",
            CaseTag::W2 => "2w",
            CaseTag::W3 => "3w",
            CaseTag::S1 => "1s",
            CaseTag::S2 => "2s",
            CaseTag::S3 => "3s",
            CaseTag::Boundary => "boundary",
            CaseTag::NotApplicable => "n/a",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeReport<T> {
    pub regime: Regime,
    pub case: CaseTag,
    /// Present whenever the coexistence state is defined (admissible or not).
    pub alpha: Option<T>,
    pub beta: Option<T>,
    pub det_j: Option<T>,
    pub tr_j: Option<T>,
}

/// Places `r1/r2` against `b1/a2`, the harmonic and arithmetic means of
/// `b1/a2` and `a1/b2`, and `a1/b2`. All comparisons are cross-multiplied, so
/// no division by a vanishing coefficient can occur.
pub fn classify_regime<T: Scalar>(p: &Params<T>) -> RegimeReport<T> {
    let eq = coexistence_state(p);
    let data = match &eq.coexistence {
        Coexistence::Defined { state, .. } => {
            Some(coexistence_data_at(p, state.u.clone(), state.v.clone()))
        }
        Coexistence::Undefined => None,
    };
    let (alpha, beta, det_j, tr_j) = match data {
        Some(d) => (Some(d.alpha), Some(d.beta), Some(d.det_j), Some(d.tr_j)),
        None => (None, None, None, None),
    };
    let report = |regime, case| RegimeReport {
        regime,
        case,
        alpha: alpha.clone(),
        beta: beta.clone(),
        det_j: det_j.clone(),
        tr_j: tr_j.clone(),
    };
    if !p.r2.is_positive() || matches!(eq.coexistence, Coexistence::Undefined) {
        return report(Regime::None, CaseTag::NotApplicable);
    }
    let two = T::one() + T::one();
    let a = p.a1.clone() * p.a2.clone();
    let b = p.b1.clone() * p.b2.clone();
    // r1/r2 against b1/a2 and a1/b2.
    let vs_low = (p.r1.clone() * p.a2.clone()).compare(&(p.r2.clone() * p.b1.clone()));
    let vs_high = (p.r1.clone() * p.b2.clone()).compare(&(p.r2.clone() * p.a1.clone()));
    // Harmonic mean 2 a1 b1 / (a + b), arithmetic mean (a + b) / (2 a2 b2).
    let vs_hm = (p.r1.clone() * (a.clone() + b.clone()))
        .compare(&(two.clone() * p.a1.clone() * p.b1.clone() * p.r2.clone()));
    let vs_am =
        (two * p.a2.clone() * p.b2.clone() * p.r1.clone()).compare(&(p.r2.clone() * (a + b)));

    use Ordering::*;
    if vs_low == Equal || vs_high == Equal {
        return report(Regime::None, CaseTag::Boundary);
    }
    let regime = match (vs_low, vs_high) {
        (Greater, Less) => Regime::Weak,
        (Less, Greater) => Regime::Strong,
        _ => return report(Regime::None, CaseTag::NotApplicable),
    };
    let case = if vs_hm == Equal || vs_am == Equal {
        CaseTag::Boundary
    } else {
        match (regime, vs_hm, vs_am) {
            (Regime::Weak, Less, _) => CaseTag::W1,
            (Regime::Weak, Greater, Less) => CaseTag::W2,
            (Regime::Weak, _, Greater) => CaseTag::W3,
            (Regime::Strong, Less, _) => CaseTag::S1,
            (Regime::Strong, Greater, Less) => CaseTag::S2,
            (Regime::Strong, _, Greater) => CaseTag::S3,
            _ => CaseTag::Boundary,
        }
    };
    report(regime, case)
}
