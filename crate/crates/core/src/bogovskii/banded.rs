//! Banded Cholesky factorisation for symmetric positive definite matrices.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix; row `i` stores columns `i - bw ..= i`.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle is stored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[self.pos(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.pos(i, i)] * x[i];
        }
        y
    }

    /// In-place `L L^T` factorisation.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let len = j - lo;
                let ri = i * w + (lo + bw - i);
                let rj = j * w + (lo + bw - j);
                let dot: f64 = self.data[ri..ri + len]
                    .iter()
                    .zip(&self.data[rj..rj + len])
                    .map(|(a, b)| a * b)
                    .sum();
                let p = i * w + (j + bw - i);
                let s = self.data[p] - dot;
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NonFinite(format!(
                            "banded Cholesky: non-positive pivot {s:e} at row {i}"
                        )));
                    }
                    self.data[p] = s.sqrt();
                } else {
                    self.data[p] = s / self.data[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { m: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedCholesky {
    m: BandedMatrix,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.m.n, self.m.bw);
        let w = bw + 1;
        let d = &self.m.data;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = i * w + (lo + bw - i);
            let s: f64 = d[row..row + (i - lo)]
                .iter()
                .zip(&x[lo..i])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - s) / d[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= d[i * w + bw];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            let row = i * w + (lo + bw - i);
            for (k, a) in d[row..row + (i - lo)].iter().enumerate() {
                x[lo + k] -= a * xi;
            }
        }
    }
}
