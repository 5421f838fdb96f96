//! Banded matrices and their LU factorization with row pivoting.

use nalgebra::DMatrix;

/// Square matrix with `kl` sub- and `ku` super-diagonals.
///
/// Rows are stored with `kl` extra super-diagonals of room for the fill-in that
/// partial pivoting produces, so a factorization can run in place.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_storage(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.kl + self.ku
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.in_storage(i, j), "({i}, {j}) outside the band");
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_storage(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds to entry `(i, j)`, which must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] = value;
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.data[s] += shift;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if self.in_band(i, j) { self.get(i, j) } else { 0.0 })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// LU factorization with partial pivoting inside the band.
    ///
    /// Returns `None` when a pivot is zero relative to the largest entry.
    pub fn lu(mut self) -> Option<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let tiny = 1e-14 * self.max_abs().max(f64::MIN_POSITIVE);
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = vec![0.0; n * kl];
        let mut negative = false;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return None;
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                negative = !negative;
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            pivots.push(p);
            let pivot = self.data[self.slot(k, k)];
            if pivot < 0.0 {
                negative = !negative;
            }
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let m = self.data[s] / pivot;
                self.data[s] = 0.0;
                multipliers[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        let (src, dst) = (self.slot(k, j), self.slot(i, j));
                        self.data[dst] -= m * self.data[src];
                    }
                }
            }
        }
        Some(BandLu {
            u: self,
            pivots,
            multipliers,
            det_negative: negative,
        })
    }
}

/// Factorization `P A = L U` of a [`BandMatrix`].
#[derive(Clone, Debug)]
pub struct BandLu {
    u: BandMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
    det_negative: bool,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.u.n
    }

    /// Sign of the determinant of the factored matrix.
    pub fn det_sign(&self) -> f64 {
        if self.det_negative {
            -1.0
        } else {
            1.0
        }
    }

    /// `ln |det A|`.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.u.n).map(|i| self.u.get(i, i).abs().ln()).sum()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.u.n;
        let kl = self.u.kl;
        let reach = kl + self.u.ku;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= self.u.get(i, j) * b[j];
            }
            b[i] = acc / self.u.get(i, i);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
