//! Symmetric band storage and a band Cholesky factorization.
//!
//! One-dimensional DPG systems couple only neighbouring elements, so the
//! global normal-equation matrix has a half bandwidth of a few dozen at most.

use crate::error::{DpgError, Result};

/// Symmetric matrix storing the lower band `j in [i - bw, i]` row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)` / `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(
            i - j <= self.bw,
            "entry ({i}, {j}) outside bandwidth {}",
            self.bw
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(i - j <= self.bw);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Clears row and column `i` and puts `diag` on the diagonal.
    pub fn isolate(&mut self, i: usize, diag: f64) {
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, 0.0);
        }
        self.set(i, i, diag);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw - (i - lo);
            let mut acc = 0.0;
            for (k, j) in (lo..=i).enumerate() {
                let a = row[off + k];
                acc += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    /// `sum_j A_ij x_j` for one row.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let stride = self.bw + 1;
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        let mut acc = 0.0;
        for j in lo..=i {
            acc += self.data[i * stride + self.bw - (i - j)] * x[j];
        }
        for j in i + 1..=hi {
            acc += self.data[j * stride + self.bw - (j - i)] * x[j];
        }
        acc
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.bw + 1) + self.bw]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Band Cholesky `A = L L^T`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.data.clone();
        let stride = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = l[i * stride + bw - (i - j)];
                for k in jlo..j {
                    s -= l[i * stride + bw - (i - k)] * l[j * stride + bw - (j - k)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(DpgError::NotPositiveDefinite(format!(
                            "pivot {s:e} at row {i}"
                        )));
                    }
                    l[i * stride + bw] = s.sqrt();
                } else {
                    l[i * stride + bw - (i - j)] = s / l[j * stride + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

/// Lower band Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let stride = self.bw + 1;
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l[i * stride + bw - (i - k)] * b[k];
            }
            b[i] = s / self.l[i * stride + bw];
        }
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.l[k * stride + bw - (k - i)] * b[k];
            }
            b[i] = s / self.l[i * stride + bw];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn tridiag(n: usize) -> SymBand {
        let mut a = SymBand::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn matches_dense_solve() {
        let n = 12;
        let mut a = SymBand::zeros(n, 3);
        for i in 0..n {
            a.add(i, i, 10.0 + i as f64);
            for d in 1..=3 {
                if i >= d {
                    a.add(i, i - d, 1.0 / (d as f64 + i as f64));
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = a.cholesky().unwrap().solve(&b);
        let dense = a.to_dense();
        let xd = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-13);
        }
        let y = a.mul_vec(&x);
        let yd = &dense * DVector::from_vec(x.clone());
        for i in 0..n {
            assert!((y[i] - yd[i]).abs() < 1e-12);
            assert!((a.row_dot(i, &x) - yd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = tridiag(4);
        a.set(2, 2, -1.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn isolate_row() {
        let mut a = tridiag(5);
        a.isolate(2, 1.0);
        let d: DMatrix<f64> = a.to_dense();
        assert_eq!(d[(2, 1)], 0.0);
        assert_eq!(d[(3, 2)], 0.0);
        assert_eq!(d[(2, 2)], 1.0);
    }
}
