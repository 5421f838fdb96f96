//! Finite differences for the stationary system on (0, 1) with zero-flux ends.
//!
//! Unknowns are interleaved as `(u0, v0, u1, v1, ...)`, so the Jacobian has three
//! sub- and three super-diagonals. Boundary nodes use mirrored ghosts
//! (`u[-1] = u[1]`, `u[N] = u[N-2]`), which keeps the discrete cosines exact
//! eigenvectors of the Laplacian.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Bandwidth of the interleaved Jacobian.
pub const BANDWIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nodes: usize,
    h: f64,
}

impl Grid {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes, got {nodes}")));
        }
        Ok(Grid {
            nodes,
            h: 1.0 / (nodes - 1) as f64,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node coordinate `i h`; the last node is exactly 1.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            1.0
        } else {
            i as f64 * self.h
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    pub fn unknowns(&self) -> usize {
        2 * self.nodes
    }
}

/// Parameter a state is parametrized by during continuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActiveParam {
    /// `d1 = d2 = d`.
    D,
    R1,
    D12,
    D21,
    D11,
    D22,
}

impl ActiveParam {
    pub const ALL: [ActiveParam; 6] = [
        ActiveParam::D,
        ActiveParam::R1,
        ActiveParam::D12,
        ActiveParam::D21,
        ActiveParam::D11,
        ActiveParam::D22,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActiveParam::D => "d",
            ActiveParam::R1 => "r1",
            ActiveParam::D12 => "d12",
            ActiveParam::D21 => "d21",
            ActiveParam::D11 => "d11",
            ActiveParam::D22 => "d22",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ActiveParam::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn apply(self, p: &ModelParams, value: f64) -> ModelParams {
        let mut q = p.clone();
        match self {
            ActiveParam::D => {
                q.d1 = value;
                q.d2 = value;
            }
            ActiveParam::R1 => q.r1 = value,
            ActiveParam::D12 => q.d12 = value,
            ActiveParam::D21 => q.d21 = value,
            ActiveParam::D11 => q.d11 = value,
            ActiveParam::D22 => q.d22 = value,
        }
        q
    }

    pub fn value_of(self, p: &ModelParams) -> f64 {
        match self {
            ActiveParam::D => p.d1,
            ActiveParam::R1 => p.r1,
            ActiveParam::D12 => p.d12,
            ActiveParam::D21 => p.d21,
            ActiveParam::D11 => p.d11,
            ActiveParam::D22 => p.d22,
        }
    }
}

impl fmt::Display for ActiveParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Discrete `(u, v)` together with the value of the active parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub grid: Grid,
    /// Interleaved `(u0, v0, u1, v1, ...)`.
    pub values: Vec<f64>,
    pub param: ActiveParam,
    pub value: f64,
}

impl StateVector {
    pub fn constant(grid: Grid, u: f64, v: f64, param: ActiveParam, value: f64) -> Self {
        let values = (0..grid.nodes()).flat_map(|_| [u, v]).collect();
        StateVector {
            grid,
            values,
            param,
            value,
        }
    }

    pub fn from_fn(
        grid: Grid,
        param: ActiveParam,
        value: f64,
        mut f: impl FnMut(f64) -> (f64, f64),
    ) -> Self {
        let values = (0..grid.nodes())
            .flat_map(|i| {
                let (u, v) = f(grid.x(i));
                [u, v]
            })
            .collect();
        StateVector {
            grid,
            values,
            param,
            value,
        }
    }

    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    pub fn u(&self, i: usize) -> f64 {
        self.values[2 * i]
    }

    pub fn v(&self, i: usize) -> f64 {
        self.values[2 * i + 1]
    }

    pub fn u_values(&self) -> Vec<f64> {
        self.values.iter().step_by(2).copied().collect()
    }

    pub fn v_values(&self) -> Vec<f64> {
        self.values.iter().skip(1).step_by(2).copied().collect()
    }

    /// Parameters with the active parameter set to this state's value.
    pub fn params(&self, base: &ModelParams) -> ModelParams {
        self.param.apply(base, self.value)
    }

    /// Mirror image `i ↦ N−1−i`.
    pub fn reflected(&self) -> Self {
        let n = self.nodes();
        let mut values = vec![0.0; 2 * n];
        for i in 0..n {
            values[2 * i] = self.u(n - 1 - i);
            values[2 * i + 1] = self.v(n - 1 - i);
        }
        StateVector {
            values,
            ..self.clone()
        }
    }

    pub fn min_u(&self) -> f64 {
        self.u_values().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn min_v(&self) -> f64 {
        self.v_values().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// `(‖u‖, ‖v‖)` in the trapezoidal L² norm.
    pub fn l2_norms(&self) -> (f64, f64) {
        l2_norm(self)
    }

    /// Writes columns `x,u,v`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,u,v")?;
        for i in 0..self.nodes() {
            writeln!(out, "{},{},{}", self.grid.x(i), self.u(i), self.v(i))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a profile written by [`StateVector::write_csv`] onto its own grid.
    pub fn read_csv(path: &Path, param: ActiveParam, value: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bad = |line: usize, message: String| Error::Csv {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "x,u,v" => {}
            _ => return Err(bad(1, "expected header x,u,v".into())),
        }
        let mut values = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(idx + 1, format!("expected 3 fields, got {}", fields.len())));
            }
            for f in &fields[1..] {
                let x: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| bad(idx + 1, format!("not a number: {f}")))?;
                values.push(x);
            }
        }
        let grid = Grid::new(values.len() / 2).map_err(|e| bad(0, e.to_string()))?;
        Ok(StateVector {
            grid,
            values,
            param,
            value,
        })
    }
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Trapezoidal L² norm of nodal values with spacing `h`.
pub fn trapezoid_norm(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let interior: f64 = values[1..n - 1].iter().map(|x| x * x).sum();
    let ends = 0.5 * (values[0] * values[0] + values[n - 1] * values[n - 1]);
    (h * (interior + ends)).sqrt()
}

pub fn l2_norm(s: &StateVector) -> (f64, f64) {
    let h = s.grid.h();
    (trapezoid_norm(&s.u_values(), h), trapezoid_norm(&s.v_values(), h))
}

fn neighbours(i: usize, n: usize) -> (usize, usize) {
    let left = if i == 0 { 1 } else { i - 1 };
    let right = if i + 1 == n { n - 2 } else { i + 1 };
    (left, right)
}

/// Neumann second difference of nodal values `f`.
fn laplacian_at(f: &[f64], i: usize, inv_h2: f64) -> f64 {
    let (l, r) = neighbours(i, f.len());
    ((f[l] + f[r]) - 2.0 * f[i]) * inv_h2
}

fn fluxes(p: &ModelParams, s: &StateVector) -> (Vec<f64>, Vec<f64>) {
    let n = s.nodes();
    let mut phi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        let (u, v) = (s.u(i), s.v(i));
        phi.push((p.d1 + p.d11 * u + p.d12 * v) * u);
        psi.push((p.d2 + p.d22 * v + p.d21 * u) * v);
    }
    (phi, psi)
}

/// Stationary residual `F(s)` with the active parameter taken from `s`.
pub fn residual(base: &ModelParams, s: &StateVector) -> Vec<f64> {
    let p = s.params(base);
    let n = s.nodes();
    let inv_h2 = 1.0 / (s.grid.h() * s.grid.h());
    let (phi, psi) = fluxes(&p, s);
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        let (u, v) = (s.u(i), s.v(i));
        out[2 * i] = laplacian_at(&phi, i, inv_h2) + (p.r1 - p.a1 * u - p.b1 * v) * u;
        out[2 * i + 1] = laplacian_at(&psi, i, inv_h2) + (p.r2 - p.b2 * u - p.a2 * v) * v;
    }
    out
}

/// Diffusion matrix `∂(Φ, Ψ)/∂(u, v)` at one node, row-major.
pub fn diffusion_matrix(p: &ModelParams, u: f64, v: f64) -> [[f64; 2]; 2] {
    [
        [p.d1 + 2.0 * p.d11 * u + p.d12 * v, p.d12 * u],
        [p.d21 * v, p.d2 + 2.0 * p.d22 * v + p.d21 * u],
    ]
}

/// Analytic banded Jacobian `∂F/∂s`.
pub fn jacobian(base: &ModelParams, s: &StateVector) -> BandMatrix {
    let p = s.params(base);
    let n = s.nodes();
    let inv_h2 = 1.0 / (s.grid.h() * s.grid.h());
    let mut jac = BandMatrix::zeros(2 * n, BANDWIDTH, BANDWIDTH);
    let dm: Vec<[[f64; 2]; 2]> = (0..n).map(|i| diffusion_matrix(&p, s.u(i), s.v(i))).collect();
    for i in 0..n {
        let (l, r) = neighbours(i, n);
        // The two neighbours coincide only for N = 2, which `Grid` rules out.
        for (j, weight) in [(l, inv_h2), (i, -2.0 * inv_h2), (r, inv_h2)] {
            for row in 0..2 {
                for col in 0..2 {
                    jac.add(2 * i + row, 2 * j + col, weight * dm[j][row][col]);
                }
            }
        }
        let (u, v) = (s.u(i), s.v(i));
        jac.add(2 * i, 2 * i, p.r1 - 2.0 * p.a1 * u - p.b1 * v);
        jac.add(2 * i, 2 * i + 1, -p.b1 * u);
        jac.add(2 * i + 1, 2 * i, -p.b2 * v);
        jac.add(2 * i + 1, 2 * i + 1, p.r2 - p.b2 * u - 2.0 * p.a2 * v);
    }
    jac
}

/// `∂F/∂p` for the state's active parameter.
pub fn parameter_derivative(_base: &ModelParams, s: &StateVector) -> Vec<f64> {
    let n = s.nodes();
    let inv_h2 = 1.0 / (s.grid.h() * s.grid.h());
    let u = s.u_values();
    let v = s.v_values();
    let mut out = vec![0.0; 2 * n];
    let mut fill = |row: usize, f: &[f64]| {
        for i in 0..n {
            out[2 * i + row] = laplacian_at(f, i, inv_h2);
        }
    };
    match s.param {
        ActiveParam::D => {
            fill(0, &u);
            fill(1, &v);
        }
        ActiveParam::D12 | ActiveParam::D21 => {
            let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
            fill(if s.param == ActiveParam::D12 { 0 } else { 1 }, &uv);
        }
        ActiveParam::D11 => fill(0, &u.iter().map(|x| x * x).collect::<Vec<_>>()),
        ActiveParam::D22 => fill(1, &v.iter().map(|x| x * x).collect::<Vec<_>>()),
        ActiveParam::R1 => {
            for i in 0..n {
                out[2 * i] = u[i];
            }
        }
    }
    out
}

/// Whether every node's diffusion matrix has eigenvalues with positive real
/// part (positive trace and determinant), so the operator stays elliptic.
pub fn is_elliptic(base: &ModelParams, s: &StateVector) -> bool {
    let p = s.params(base);
    (0..s.nodes()).all(|i| {
        let m = diffusion_matrix(&p, s.u(i), s.v(i));
        m[0][0] + m[1][1] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0
    })
}

/// The stricter test: the symmetric part of every node's diffusion matrix is
/// positive definite.
pub fn has_positive_symmetric_part(base: &ModelParams, s: &StateVector) -> bool {
    let p = s.params(base);
    (0..s.nodes()).all(|i| {
        let m = diffusion_matrix(&p, s.u(i), s.v(i));
        let off = 0.5 * (m[0][1] + m[1][0]);
        m[0][0] > 0.0 && m[1][1] > 0.0 && m[0][0] * m[1][1] - off * off > 0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_analysis::discrete_eigenvalue;
    use crate::model::{coexistence_data, preset};
    use nalgebra::{Complex, Matrix2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn row(i: u8) -> ModelParams {
        preset(i).unwrap().to_f64()
    }

    fn random_state(grid: Grid, rng: &mut ChaCha8Rng) -> StateVector {
        let values = (0..grid.unknowns()).map(|_| rng.gen_range(0.05..2.0)).collect();
        StateVector {
            grid,
            values,
            param: ActiveParam::D,
            value: 0.04,
        }
    }

    #[test]
    fn grid_basics() {
        assert!(Grid::new(2).is_err());
        let g = Grid::new(201).unwrap();
        assert_eq!(g.x(200), 1.0);
        assert_eq!(g.x(0), 0.0);
        assert!((g.h() * 200.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_states_reduce_to_reaction() {
        let mut p = row(1).with_self(0.3, 0.2);
        p.d21 = 0.7;
        let g = Grid::new(11).unwrap();
        for (u, v) in [(13.0 / 8.0, 1.0 / 8.0), (5.0 / 3.0, 0.0), (0.3, 0.9)] {
            let s = StateVector::constant(g, u, v, ActiveParam::D, 0.05);
            let r = residual(&p, &s);
            let fu = (p.r1 - p.a1 * u - p.b1 * v) * u;
            let fv = (p.r2 - p.b2 * u - p.a2 * v) * v;
            for i in 0..11 {
                assert!((r[2 * i] - fu).abs() < 1e-12);
                assert!((r[2 * i + 1] - fv).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_node_perturbation() {
        let mut p = row(1).with_cross(0.0, 0.0);
        p.d11 = 0.0;
        let g = Grid::new(21).unwrap();
        let (u0, v0) = (0.8, 0.4);
        let base = StateVector::constant(g, u0, v0, ActiveParam::D, 0.05);
        let eps = 1e-7;
        let mut bumped = base.clone();
        bumped.values[2 * 7] += eps;
        let r0 = residual(&p, &base);
        let r1 = residual(&p, &bumped);
        let h = g.h();
        let expected = -2.0 * eps * 0.05 / (h * h) + eps * (p.r1 - 2.0 * p.a1 * u0 - p.b1 * v0);
        assert!(((r1[14] - r0[14]) - expected).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = row(1).with_self(0.1, 0.2);
        p.d21 = 0.5;
        let g = Grid::new(12).unwrap();
        for _ in 0..5 {
            let s = random_state(g, &mut rng);
            let jac = jacobian(&p, &s).to_dense();
            for j in 0..g.unknowns() {
                let step = 1e-6 * (1.0 + s.values[j].abs());
                let mut plus = s.clone();
                let mut minus = s.clone();
                plus.values[j] += step;
                minus.values[j] -= step;
                let rp = residual(&p, &plus);
                let rm = residual(&p, &minus);
                for i in 0..g.unknowns() {
                    let fd = (rp[i] - rm[i]) / (2.0 * step);
                    let scale = jac[(i, j)].abs().max(1.0);
                    assert!((fd - jac[(i, j)]).abs() / scale < 1e-6, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn parameter_derivative_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = row(1).with_self(0.1, 0.2);
        let g = Grid::new(9).unwrap();
        for param in ActiveParam::ALL {
            let mut s = random_state(g, &mut rng);
            s.param = param;
            s.value = 0.3;
            let fp = parameter_derivative(&p, &s);
            let step = 1e-6;
            let mut plus = s.clone();
            let mut minus = s.clone();
            plus.value += step;
            minus.value -= step;
            let rp = residual(&p, &plus);
            let rm = residual(&p, &minus);
            for i in 0..g.unknowns() {
                let fd = (rp[i] - rm[i]) / (2.0 * step);
                assert!((fd - fp[i]).abs() / fp[i].abs().max(1.0) < 1e-6, "{param} {i}");
            }
        }
    }

    #[test]
    fn pure_diffusion_rows_sum_to_zero() {
        let mut p = row(1).with_cross(0.0, 0.0);
        p.r1 = 0.0;
        p.r2 = 0.0;
        p.a1 = 0.0;
        p.a2 = 0.0;
        p.b1 = 0.0;
        p.b2 = 0.0;
        let g = Grid::new(8).unwrap();
        let s = StateVector::constant(g, 1.0, 2.0, ActiveParam::D, 0.05);
        let jac = jacobian(&p, &s).to_dense();
        for i in 0..g.unknowns() {
            let sum: f64 = jac.row(i).iter().sum();
            assert!(sum.abs() < 1e-9, "row {i}: {sum}");
        }
    }

    #[test]
    fn homogeneous_spectrum_is_block_reduction() {
        let mut p = row(1).with_self(0.02, 0.05);
        p.d21 = 0.03;
        let data = coexistence_data(&p).unwrap();
        let g = Grid::new(21).unwrap();
        let s = StateVector::constant(g, data.u, data.v, ActiveParam::D, 0.04);
        let q = s.params(&p);
        let mut full = crate::stability::dense_eigenvalues(jacobian(&p, &s).to_dense()).unwrap();
        let jr = crate::model::reaction_jacobian(&q, data.u, data.v);
        let jd = diffusion_matrix(&q, data.u, data.v);
        let mut blocks = Vec::new();
        for k in 0..g.nodes() {
            let l = discrete_eigenvalue(k, g.h());
            let m = Matrix2::new(
                jr[0][0] - l * jd[0][0],
                jr[0][1] - l * jd[0][1],
                jr[1][0] - l * jd[1][0],
                jr[1][1] - l * jd[1][1],
            );
            let tr = m.trace();
            let disc = Complex::new(tr * tr - 4.0 * m.determinant(), 0.0).sqrt();
            blocks.push((Complex::new(tr, 0.0) + disc) / 2.0);
            blocks.push((Complex::new(tr, 0.0) - disc) / 2.0);
        }
        let key = |a: &Complex<f64>, b: &Complex<f64>| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        full.sort_by(key);
        blocks.sort_by(key);
        for (a, b) in full.iter().zip(&blocks) {
            assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn residual_commutes_with_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = row(3);
        let g = Grid::new(15).unwrap();
        let s = random_state(g, &mut rng);
        let r = residual(&p, &s);
        let rr = residual(&p, &s.reflected());
        let n = g.nodes();
        for i in 0..n {
            assert_eq!(r[2 * i], rr[2 * (n - 1 - i)]);
            assert_eq!(r[2 * i + 1], rr[2 * (n - 1 - i) + 1]);
        }
    }

    #[test]
    fn norm_of_constants_and_cosine() {
        let g = Grid::new(11).unwrap();
        let s = StateVector::constant(g, 13.0 / 8.0, -0.5, ActiveParam::D, 0.1);
        let (nu, nv) = l2_norm(&s);
        assert!((nu - 13.0 / 8.0).abs() < 1e-15);
        assert!((nv - 0.5).abs() < 1e-15);

        // The trapezoidal rule is exact for cos² over a full period, so the
        // error sits at roundoff, far inside an O(h²) envelope.
        let target = 0.5f64.sqrt();
        for nodes in [11, 21, 41, 81, 161] {
            let g = Grid::new(nodes).unwrap();
            let s = StateVector::from_fn(g, ActiveParam::D, 0.0, |x| ((PI * x).cos(), 0.0));
            let err = (l2_norm(&s).0 - target).abs();
            assert!(err <= g.h() * g.h() * 1e-3, "N = {nodes}: {err}");
        }
        // A non-periodic integrand shows the second-order rate.
        let err = |nodes: usize| {
            let g = Grid::new(nodes).unwrap();
            let s = StateVector::from_fn(g, ActiveParam::D, 0.0, |x| (x, 0.0));
            (l2_norm(&s).0 - (1.0f64 / 3.0).sqrt()).abs()
        };
        let order = (err(21) / err(41)).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn ellipticity() {
        let p = row(1);
        let g = Grid::new(5).unwrap();
        let s = StateVector::constant(g, 1.0, 1.0, ActiveParam::D, 0.05);
        assert!(is_elliptic(&p, &s));
        assert!(!has_positive_symmetric_part(&p, &s));
        assert!(has_positive_symmetric_part(&p.clone().with_cross(0.0, 0.0), &s));
        let s = StateVector::constant(g, 1.0, 1.0, ActiveParam::D, -0.5);
        assert!(!is_elliptic(&p, &s));
        // Slightly negative d is compensated by cross-diffusion in the first row but
        // not in the second, which has no cross term.
        let s = StateVector::constant(g, 1.0, 1.0, ActiveParam::D, -0.01);
        assert!(!is_elliptic(&p, &s));
        let q = p.clone().with_self(0.1, 0.1);
        assert!(is_elliptic(&q, &s));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(7).unwrap();
        let s = StateVector::from_fn(g, ActiveParam::D, 0.03, |x| (1.0 + x, 2.0 - x * x));
        let path = dir.path().join("s.csv");
        s.write_csv(&path).unwrap();
        let back = StateVector::read_csv(&path, ActiveParam::D, 0.03).unwrap();
        assert_eq!(back, s);
    }
}
