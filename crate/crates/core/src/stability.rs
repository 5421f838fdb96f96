//! Spectral stability of discrete steady states.

use std::io::Write;
use std::path::Path;

use nalgebra::{Complex, DMatrix, Schur};

use crate::discretization::{jacobian, StateVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Real parts within this distance of zero count as marginal.
pub const ZERO_THRESHOLD: f64 = 1e-9;
/// Imaginary parts above this mark an eigenvalue as part of a complex pair.
pub const COMPLEX_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSummary {
    /// Eigenvalues with real part above [`ZERO_THRESHOLD`].
    pub unstable: usize,
    /// Of those, how many have `|Im| > COMPLEX_THRESHOLD`.
    pub unstable_complex: usize,
    pub marginal: usize,
    pub rightmost: Complex<f64>,
    /// `|Im|` of the rightmost eigenvalue.
    pub rightmost_imag: f64,
    pub eigenvalues: Option<Vec<Complex<f64>>>,
}

impl SpectrumSummary {
    pub fn from_eigenvalues(mut eigenvalues: Vec<Complex<f64>>, keep: bool) -> Self {
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let unstable = eigenvalues.iter().filter(|z| z.re > ZERO_THRESHOLD).count();
        let unstable_complex = eigenvalues
            .iter()
            .filter(|z| z.re > ZERO_THRESHOLD && z.im.abs() > COMPLEX_THRESHOLD)
            .count();
        let marginal = eigenvalues.iter().filter(|z| z.re.abs() <= ZERO_THRESHOLD).count();
        let rightmost = eigenvalues.first().copied().unwrap_or_default();
        SpectrumSummary {
            unstable,
            unstable_complex,
            marginal,
            rightmost,
            rightmost_imag: rightmost.im.abs(),
            eigenvalues: keep.then_some(eigenvalues),
        }
    }

    pub fn is_stable(&self) -> bool {
        self.unstable == 0
    }
}

/// Eigenvalues of a dense real matrix through its real Schur form.
///
/// The iteration count is bounded: nalgebra's unbounded variant can cycle
/// forever on some inputs.
pub fn dense_eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    let schur = Schur::try_new(m, 1e-14, 200 * n.max(10))
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Dense eigenvalues of the linearization at `s`.
pub fn spectrum(p: &ModelParams, s: &StateVector, keep: bool) -> Result<SpectrumSummary> {
    let eig = dense_eigenvalues(jacobian(p, s).to_dense()).map_err(|e| {
        Error::Eigen(format!("{e} at {} = {}", s.param, s.value))
    })?;
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen(format!(
            "non-finite eigenvalue at {} = {}",
            s.param, s.value
        )));
    }
    Ok(SpectrumSummary::from_eigenvalues(eig, keep))
}

/// Writes columns `Re,Im`.
pub fn write_spectrum_csv(eigenvalues: &[Complex<f64>], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "Re,Im")?;
    for z in eigenvalues {
        writeln!(out, "{},{}", z.re, z.im)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{ActiveParam, Grid};
    use crate::linear_analysis::{mode_polynomial, EigenFamily};
    use crate::model::preset;

    fn homogeneous_count(d: f64, nodes: usize) -> (usize, usize) {
        let p = preset(1).unwrap().to_f64();
        let g = Grid::new(nodes).unwrap();
        let s = StateVector::constant(g, 13.0 / 8.0, 1.0 / 8.0, ActiveParam::D, d);
        let sp = spectrum(&p, &s, false).unwrap();
        let q = p.clone().with_d(d);
        let predicted = (1..nodes)
            .filter(|&k| mode_polynomial(&q, k, EigenFamily::Discrete { nodes }).unwrap().eval(d) < 0.0)
            .count();
        (sp.unstable, predicted)
    }

    #[test]
    fn homogeneous_counts_match_modes() {
        for d in [0.04, 0.03, 0.025, 0.015, 0.008] {
            let (got, want) = homogeneous_count(d, 61);
            assert_eq!(got, want, "d = {d}");
        }
        assert_eq!(homogeneous_count(0.04, 61).0, 0);
        assert_eq!(homogeneous_count(0.025, 61).0, 1);
    }

    #[test]
    fn exclusion_state_is_stable_in_strong_regime() {
        let p = preset(4).unwrap().to_f64();
        let g = Grid::new(41).unwrap();
        let s = StateVector::constant(g, p.r1 / p.a1, 0.0, ActiveParam::D, 0.05);
        let sp = spectrum(&p, &s, true).unwrap();
        assert_eq!(sp.unstable, 0);
        assert!(sp.rightmost.re < 0.0);
    }

    #[test]
    fn spectrum_is_conjugation_closed_and_reflection_invariant() {
        let p = preset(1).unwrap().to_f64();
        let g = Grid::new(31).unwrap();
        let s = StateVector::from_fn(g, ActiveParam::D, 0.02, |x| (1.6 + 0.3 * x * x, 0.1 + 0.05 * x));
        let a = spectrum(&p, &s, true).unwrap();
        let b = spectrum(&p, &s.reflected(), true).unwrap();
        assert_eq!(a.unstable, b.unstable);
        let eig = a.eigenvalues.unwrap();
        for z in &eig {
            assert!(eig.iter().any(|w| (w - z.conj()).norm() < 1e-8 * z.norm().max(1.0)));
        }
    }
}
