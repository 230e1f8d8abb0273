//! Envelope (skyline) Cholesky factorization for sparse SPD matrices.
//!
//! Row `i` of the lower factor is stored from its first structural nonzero
//! column to the diagonal. Natural orderings of structured meshes keep the
//! envelope at the mesh bandwidth.

use super::sparse::SparseMatrix;
use super::{NumericsError, Result};
use crate::tolerances;

#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(NumericsError::DimensionMismatch(format!(
                "Cholesky of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        // Envelope from the lower triangle, symmetrized.
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, v) in a.row(i) {
                if v == 0.0 {
                    continue;
                }
                let (r, c) = if j < i { (i, j) } else { (j, i) };
                first[r] = first[r].min(c);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i && v != 0.0 {
                    data[start[i] + (j - first[i])] += v;
                }
            }
        }
        let scale = a.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let tolerance = tolerances::PIVOT * scale;

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + (j - fi)];
                for k in k0..j {
                    s -= data[start[i] + (k - fi)] * data[start[j] + (k - fj)];
                }
                if j == i {
                    if !(s > tolerance) {
                        return Err(NumericsError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    data[start[i] + (i - fi)] = s.sqrt();
                } else {
                    data[start[i] + (j - fi)] = s / data[start[j] + (j - fj)];
                }
            }
        }
        Ok(Self { n, first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[self.start[i] + (j - self.first[i])]
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "skyline solve dimension");
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        for i in (0..self.n).rev() {
            let yi = y[i] / self.l(i, i);
            y[i] = yi;
            for k in self.first[i]..i {
                y[k] -= self.l(i, k) * yi;
            }
        }
        y
    }
}
